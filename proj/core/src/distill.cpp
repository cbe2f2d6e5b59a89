#include "msmo/distill.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "json.hpp"
#include "msmo/heads.hpp"
#include "msmo/optim.hpp"

namespace msmo {

using ordered_json = nlohmann::ordered_json;

TeacherEnsemble TeacherEnsemble::equal(std::vector<const Model*> teachers) {
  TeacherEnsemble e;
  e.weights.assign(teachers.size(), teachers.empty() ? 0.0 : 1.0 / static_cast<double>(teachers.size()));
  e.teachers = std::move(teachers);
  return e;
}

void TeacherEnsemble::validate() const {
  if (teachers.empty()) throw std::invalid_argument("teacher ensemble is empty");
  if (weights.size() != teachers.size()) throw std::invalid_argument("teacher ensemble: one weight per teacher");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("teacher ensemble: weights must be >= 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("teacher ensemble: weights must sum to 1");
  for (const auto* t : teachers) {
    if (!t) throw std::invalid_argument("teacher ensemble: null teacher");
    if (!(t->vocab() == teachers.front()->vocab()))
      throw std::invalid_argument("teacher ensemble: teachers use different vocabularies");
  }
}

static bool same_bits(const ad::Tensor& a, const ad::Tensor& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

ad::Tensor combine_distributions(std::span<const ad::Tensor> outputs, std::span<const double> weights) {
  if (outputs.empty() || outputs.size() != weights.size())
    throw std::invalid_argument("combine_soft_labels: one weight per teacher output");
  for (const auto& o : outputs)
    if (o.rows() != outputs.front().rows() || o.cols() != outputs.front().cols())
      throw ad::ShapeError("combine_soft_labels: shape mismatch " + outputs.front().shape().str() + " vs " +
                           o.shape().str());
  // Bit-identical outputs are merged first, so equal teachers reproduce the
  // single-teacher labels exactly.
  std::vector<const ad::Tensor*> groups;
  std::vector<double> group_weight;
  double total = 0.0;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    total += weights[k];
    std::size_t g = 0;
    while (g < groups.size() && !same_bits(*groups[g], outputs[k])) ++g;
    if (g == groups.size()) {
      groups.push_back(&outputs[k]);
      group_weight.push_back(0.0);
    }
    group_weight[g] += weights[k];
  }
  ad::Tensor out(outputs.front().rows(), outputs.front().cols());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double w = group_weight[g] / total;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * (*groups[g])[i];
  }
  return out;
}

ad::Tensor combine_soft_labels(const TeacherEnsemble& ensemble, const UnlabeledSentence& sentence) {
  ensemble.validate();
  std::vector<ad::Tensor> outputs;
  for (const auto* t : ensemble.teachers) outputs.push_back(t->tag_probs(sentence.tokens, nullptr).value());
  for (const auto& o : outputs)
    if (o.rows() != sentence.tokens.size())
      throw std::invalid_argument("combine_soft_labels: teacher output length differs from sentence length");
  return combine_distributions(outputs, ensemble.weights);
}

SoftLabeledSet soft_label(const TeacherEnsemble& ensemble, std::span<const UnlabeledSentence> sentences) {
  SoftLabeledSet out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back({s.id, s.lang, s.tokens, combine_soft_labels(ensemble, s)});
  return out;
}

std::string soft_labels_jsonl(const SoftLabeledSet& set) {
  std::string out;
  for (const auto& s : set) {
    ordered_json j;
    j["id"] = s.id;
    j["lang"] = s.lang;
    j["tokens"] = s.tokens;
    ordered_json probs = ordered_json::array();
    for (std::size_t r = 0; r < s.probs.rows(); ++r) {
      ordered_json row = ordered_json::array();
      for (std::size_t c = 0; c < s.probs.cols(); ++c) row.push_back(s.probs(r, c));
      probs.push_back(std::move(row));
    }
    j["probs"] = std::move(probs);
    out += j.dump();
    out += '\n';
  }
  return out;
}

SoftLabeledSet soft_labels_from_jsonl(std::string_view text) {
  SoftLabeledSet out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      auto j = ordered_json::parse(line);
      SoftLabeled s;
      s.id = j.at("id").get<std::string>();
      s.lang = j.value("lang", std::string());
      s.tokens = j.at("tokens").get<std::vector<std::string>>();
      const auto rows = j.at("probs").get<std::vector<std::vector<double>>>();
      if (rows.size() != s.tokens.size()) throw std::invalid_argument("probs length differs from tokens");
      s.probs = ad::Tensor(s.tokens.size(), kNumTags);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != kNumTags) throw std::invalid_argument("each probs row needs 13 values");
        for (std::size_t c = 0; c < kNumTags; ++c) s.probs(r, c) = rows[r][c];
      }
      out.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

ad::Var sentence_kd(const ad::Var& student, const ad::Var& soft) {
  return ad::mean(ad::square(ad::sub(student, soft)));
}

ad::Var kd_loss(std::span<const ad::Var> student, std::span<const ad::Var> soft) {
  if (student.size() != soft.size() || student.empty())
    throw std::invalid_argument("kd_loss: need one soft label per student output and at least one sentence");
  std::vector<ad::Var> per;
  per.reserve(student.size());
  for (std::size_t i = 0; i < student.size(); ++i) per.push_back(sentence_kd(student[i], soft[i]));
  return ad::mean(ad::concat_rows(per));
}

std::string_view to_string(DistillMode m) {
  switch (m) {
    case DistillMode::Single: return "single";
    case DistillMode::Multi: return "multi";
    case DistillMode::Multilingual: return "multilingual";
  }
  return "?";
}

DistillMode parse_distill_mode(std::string_view s) {
  if (s == "single" || s == "distill-s") return DistillMode::Single;
  if (s == "multi" || s == "distill-m") return DistillMode::Multi;
  if (s == "multilingual" || s == "distill-mtl") return DistillMode::Multilingual;
  throw std::invalid_argument("unknown distillation mode '" + std::string(s) + "'");
}

namespace {

// Epoch-wise shuffled batches over [0, n).
class BatchCursor {
 public:
  BatchCursor(std::size_t n, Rng& rng) : n_(n), rng_(rng) {}
  std::vector<std::size_t> next(std::size_t count) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < count; ++i) {
      if (cursor_ == order_.size()) {
        order_.resize(n_);
        for (std::size_t k = 0; k < n_; ++k) order_[k] = k;
        shuffle(order_, rng_);
        cursor_ = 0;
      }
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  std::size_t n_;
  Rng& rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace

Model warm_start_student(const CorpusBundle& bundle, const Vocabulary& vocab, const ModelConfig& model_cfg,
                         const std::vector<std::string>& targets, const DistillConfig& cfg, std::uint64_t seed) {
  std::vector<const TaggedSentence*> data;
  for (const auto& t : targets) {
    auto part = bundle.sentences(SplitName::Train, Variant::T, t);
    data.insert(data.end(), part.begin(), part.end());
  }
  if (data.empty()) throw std::invalid_argument("warm start: no translated target training sentences");
  Model student(vocab, model_cfg, mix_seed(seed, 0x5d));
  Rng sample_rng = make_rng(seed, 21);
  Rng dropout_rng = make_rng(seed, 22);
  Adam opt(concat(student.encoder_params(), student.classifier_params()), AdamConfig{cfg.learning_rate});
  BatchCursor cursor(data.size(), sample_rng);
  for (std::size_t step = 0; step < cfg.warm_steps; ++step) {
    std::vector<ad::Var> probs;
    std::vector<std::vector<Tag>> gold;
    for (std::size_t i : cursor.next(cfg.batch_size)) {
      probs.push_back(student.tag_probs(data[i]->tokens, &dropout_rng));
      gold.push_back(data[i]->tags);
    }
    ad::Var loss = ce_loss(probs, gold);
    opt.zero_grad();
    ad::backward(loss);
    opt.step();
  }
  return student;
}

std::vector<double> kd_train(Model& student, const SoftLabeledSet& soft, const DistillConfig& cfg,
                             std::uint64_t seed) {
  if (soft.empty()) throw std::invalid_argument("kd_train: no soft-labeled sentences");
  Rng sample_rng = make_rng(seed, 23);
  Rng dropout_rng = make_rng(seed, 24);
  Adam opt(concat(student.encoder_params(), student.classifier_params()), AdamConfig{cfg.learning_rate});
  std::vector<ad::Var> targets;
  targets.reserve(soft.size());
  for (const auto& s : soft) targets.push_back(ad::constant(s.probs));
  BatchCursor cursor(soft.size(), sample_rng);
  std::vector<double> losses;
  losses.reserve(cfg.kd_steps);
  for (std::size_t step = 0; step < cfg.kd_steps; ++step) {
    std::vector<ad::Var> outs, refs;
    for (std::size_t i : cursor.next(cfg.batch_size)) {
      outs.push_back(student.tag_probs(soft[i].tokens, &dropout_rng));
      refs.push_back(targets[i]);
    }
    ad::Var loss = kd_loss(outs, refs);
    opt.zero_grad();
    ad::backward(loss);
    opt.step();
    losses.push_back(loss.value().item());
  }
  return losses;
}

DistillResult distill(DistillMode mode, const TeacherEnsemble& ensemble, const CorpusBundle& bundle,
                      const std::vector<std::string>& targets, const DistillConfig& cfg, std::uint64_t seed,
                      const Model* warm) {
  ensemble.validate();
  if (targets.empty()) throw std::invalid_argument("distill: no target languages");
  switch (mode) {
    case DistillMode::Single:
    case DistillMode::Multilingual:
      if (ensemble.teachers.size() != 1)
        throw std::invalid_argument(std::string("distill: ") + std::string(to_string(mode)) +
                                    " mode takes exactly one teacher");
      break;
    case DistillMode::Multi:
      if (ensemble.teachers.size() < 2) throw std::invalid_argument("distill: multi mode takes two or more teachers");
      break;
  }
  const Vocabulary vocab = Vocabulary::from_bundle(bundle);
  if (!(ensemble.teachers.front()->vocab() == vocab))
    throw std::invalid_argument("distill: teacher vocabulary differs from the student vocabulary");
  if (warm && !(warm->vocab() == vocab))
    throw std::invalid_argument("distill: warm-start student vocabulary differs from the bundle vocabulary");

  const ModelConfig model_cfg = ensemble.teachers.front()->config();
  Model student = warm ? warm->clone() : warm_start_student(bundle, vocab, model_cfg, targets, cfg, seed);
  EvalReport warm_report = evaluate_model(student, bundle, SplitName::Test, targets, seed);

  std::vector<UnlabeledSentence> unlabeled;
  for (const auto& t : targets) {
    auto part = unlabeled_targets(bundle, SplitName::Test, t);
    unlabeled.insert(unlabeled.end(), part.begin(), part.end());
  }
  SoftLabeledSet soft = soft_label(ensemble, unlabeled);
  auto losses = kd_train(student, soft, cfg, seed);
  EvalReport report = evaluate_model(student, bundle, SplitName::Test, targets, seed);
  return {std::move(student), std::move(soft), std::move(warm_report), std::move(report), std::move(losses)};
}

}  // namespace msmo
