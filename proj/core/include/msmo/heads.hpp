#pragma once

// Task heads on top of the encoder: the tag classifier, the language
// discriminator, and the span-level consistency computation. All
// probabilities are floored at kProbFloor before any logarithm.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "msmo/autodiff.hpp"
#include "msmo/labelspace.hpp"
#include "msmo/params.hpp"
#include "msmo/random.hpp"

namespace msmo {

inline constexpr double kProbFloor = 1e-8;
inline constexpr double kDefaultKeepProb = 0.9;

// Affine map with dropout on its output, as used by every head.
class AffineHead {
 public:
  AffineHead(std::string name, std::size_t in, std::size_t out, double keep_prob, Rng& init_rng);

  // dropout_rng == nullptr means evaluation mode.
  ad::Var logits(const ad::Var& x, Rng* dropout_rng) const;
  ParamList parameters() const;
  double keep_prob() const { return keep_prob_; }

  ad::Var& weight() { return weight_; }
  ad::Var& bias() { return bias_; }

 private:
  std::string name_;
  ad::Var weight_;  // in x out
  ad::Var bias_;    // 1 x out
  double keep_prob_;
};

// P: per-token distribution over the 13 tags.
class Classifier {
 public:
  Classifier(std::size_t width, double keep_prob, Rng& init_rng)
      : head_("classifier", width, kNumTags, keep_prob, init_rng) {}
  ad::Var probs(const ad::Var& hidden, Rng* dropout_rng) const {
    return ad::softmax_rows(head_.logits(hidden, dropout_rng));
  }
  ParamList parameters() const { return head_.parameters(); }
  AffineHead& head() { return head_; }

 private:
  AffineHead head_;
};

// Q: sentence-level language score in (0, 1) from mean-pooled hidden states.
class Discriminator {
 public:
  Discriminator(std::size_t width, double keep_prob, Rng& init_rng)
      : head_("discriminator", width, 1, keep_prob, init_rng) {}
  ad::Var score(const ad::Var& hidden, Rng* dropout_rng) const {
    return ad::sigmoid(head_.logits(ad::mean_rows(hidden), dropout_rng));
  }
  ParamList parameters() const { return head_.parameters(); }
  // Clamps every weight and bias into [-c, c].
  void clip(double c);
  double max_abs_param() const;
  AffineHead& head() { return head_; }

 private:
  AffineHead head_;
};

// Mean over sentences of the per-sentence mean token cross-entropy.
ad::Var ce_loss(std::span<const ad::Var> probs, std::span<const std::vector<Tag>> gold);
ad::Var sentence_ce(const ad::Var& probs, std::span<const Tag> gold);

// J_q = mean(source scores) - mean(target scores).
ad::Var wasserstein_objective(std::span<const ad::Var> source_scores, std::span<const ad::Var> target_scores);

// 1x4 distribution over {POS, NEU, NEG, NONE} for a span, from per-token
// tag probabilities.
ad::Var span_distribution(const ad::Var& probs, const AspectSpan& span);
// The unnormalized, unfloored per-class products behind span_distribution.
ad::Var span_masses(const ad::Var& probs, const AspectSpan& span);
std::uint64_t span_distribution_calls();
void reset_span_distribution_calls();

ad::Var kl_divergence(const ad::Var& p, const ad::Var& q);
// Mean over pairs of 0.5 * [KL(b||a) + KL(a||b)]; a constant 0 when empty.
ad::Var consistency_loss(std::span<const std::pair<ad::Var, ad::Var>> pairs);

}  // namespace msmo
