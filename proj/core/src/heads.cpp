#include "msmo/heads.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>

#include "msmo/encoder.hpp"

namespace msmo {

namespace {
std::atomic<std::uint64_t> g_span_calls{0};
}

AffineHead::AffineHead(std::string name, std::size_t in, std::size_t out, double keep_prob, Rng& rng)
    : name_(std::move(name)), keep_prob_(keep_prob) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw std::invalid_argument(name_ + ": keep_prob must be in (0, 1]");
  weight_ = ad::parameter(uniform_tensor(in, out, 0.1, rng));
  bias_ = ad::parameter(uniform_tensor(1, out, 0.1, rng));
}

ad::Var AffineHead::logits(const ad::Var& x, Rng* dropout_rng) const {
  ad::Var z = ad::add(ad::matmul(x, weight_), bias_);
  if (dropout_rng && keep_prob_ < 1.0) z = ad::dropout(z, keep_prob_, *dropout_rng);
  return z;
}

ParamList AffineHead::parameters() const {
  return {{name_ + ".weight", weight_}, {name_ + ".bias", bias_}};
}

void Discriminator::clip(double c) {
  for (ad::Var* v : {&head_.weight(), &head_.bias()})
    for (double& x : v->mutable_value().data()) x = std::clamp(x, -c, c);
}

double Discriminator::max_abs_param() const {
  double m = 0.0;
  for (const auto& p : head_.parameters()) m = std::max(m, p.var.value().max_abs());
  return m;
}

ad::Var sentence_ce(const ad::Var& probs, std::span<const Tag> gold) {
  if (probs.value().rows() != gold.size())
    throw ad::ShapeError("ce_loss: " + std::to_string(probs.value().rows()) + " prediction rows for " +
                         std::to_string(gold.size()) + " gold tags");
  std::vector<std::size_t> ids;
  ids.reserve(gold.size());
  for (Tag t : gold) ids.push_back(t.id());
  return ad::scale(ad::mean(ad::log(ad::clamp_min(ad::pick(probs, ids), kProbFloor))), -1.0);
}

ad::Var ce_loss(std::span<const ad::Var> probs, std::span<const std::vector<Tag>> gold) {
  if (probs.size() != gold.size() || probs.empty())
    throw std::invalid_argument("ce_loss: need one gold sequence per prediction and at least one sentence");
  std::vector<ad::Var> per;
  per.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) per.push_back(sentence_ce(probs[i], gold[i]));
  return ad::mean(ad::concat_rows(per));
}

ad::Var wasserstein_objective(std::span<const ad::Var> source_scores, std::span<const ad::Var> target_scores) {
  if (source_scores.empty() || target_scores.empty())
    throw std::invalid_argument("wasserstein_objective: empty batch");
  return ad::sub(ad::mean(ad::concat_rows(source_scores)), ad::mean(ad::concat_rows(target_scores)));
}

ad::Var span_masses(const ad::Var& probs, const AspectSpan& span) {
  if (span.start > span.end || span.end >= probs.value().rows())
    throw std::out_of_range("span_distribution: span outside sentence");
  ad::Var acc;
  for (std::size_t j = span.start; j <= span.end; ++j) {
    Position pos = Position::I;
    if (span.start == span.end) pos = Position::S;
    else if (j == span.start) pos = Position::B;
    else if (j == span.end) pos = Position::E;
    const std::array<std::size_t, 4> cols{Tag::of(pos, Polarity::Pos).id(), Tag::of(pos, Polarity::Neu).id(),
                                          Tag::of(pos, Polarity::Neg).id(), Tag::outside().id()};
    ad::Var m = ad::select_cols(ad::row(probs, j), cols);
    acc = acc ? ad::mul(acc, m) : m;
  }
  return acc;
}

ad::Var span_distribution(const ad::Var& probs, const AspectSpan& span) {
  g_span_calls.fetch_add(1, std::memory_order_relaxed);
  ad::Var floored = ad::clamp_min(span_masses(probs, span), kProbFloor);
  return ad::div(floored, ad::sum(floored));
}

std::uint64_t span_distribution_calls() { return g_span_calls.load(std::memory_order_relaxed); }
void reset_span_distribution_calls() { g_span_calls.store(0, std::memory_order_relaxed); }

ad::Var kl_divergence(const ad::Var& p, const ad::Var& q) {
  return ad::sum(ad::mul(p, ad::sub(ad::log(p), ad::log(q))));
}

ad::Var consistency_loss(std::span<const std::pair<ad::Var, ad::Var>> pairs) {
  if (pairs.empty()) return ad::constant(ad::Tensor::scalar(0.0));
  std::vector<ad::Var> terms;
  terms.reserve(pairs.size());
  for (const auto& [a, b] : pairs)
    terms.push_back(ad::scale(ad::add(kl_divergence(b, a), kl_divergence(a, b)), 0.5));
  return ad::mean(ad::concat_rows(terms));
}

}  // namespace msmo
