#include <gtest/gtest.h>

#include <cmath>

#include "msmo/distill.hpp"
#include "msmo/encoder.hpp"
#include "msmo/heads.hpp"
#include "msmo/model.hpp"
#include "oracles/oracles.hpp"

using namespace msmo;
using namespace msmo::ad;

namespace {

Vocabulary toy_vocab() { return Vocabulary({"the", "soup", "was", "cold", "staff", "rude", "great", "menu"}); }

std::vector<std::string> toks(std::initializer_list<const char*> w) { return {w.begin(), w.end()}; }

Tensor row_of(std::initializer_list<double> v) { return Tensor::row(std::vector<double>(v)); }

// One token's 13-way distribution with the listed tag masses.
Tensor token_probs(std::initializer_list<std::pair<const char*, double>> masses) {
  Tensor t(1, kNumTags);
  for (auto [name, m] : masses) t[parse_tag(name).id()] = m;
  return t;
}

void zero_head(AffineHead& h) {
  h.weight().mutable_value().fill(0.0);
  h.bias().mutable_value().fill(0.0);
}

std::vector<std::vector<double>> encoder_grads(const ParamList& params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) {
    const Tensor& g = p.var.grad();
    out.emplace_back(g.data().begin(), g.data().end());
    if (g.empty()) out.back().assign(p.var.value().size(), 0.0);
  }
  return out;
}

}  // namespace

TEST(Encoder, OneHiddenVectorPerToken) {
  Rng rng = make_rng(1);
  BiRnnEncoder enc({20, 8, 6}, rng);
  EXPECT_EQ(enc.width(), 12u);
  for (std::size_t n : {1u, 2u, 7u}) {
    std::vector<std::size_t> ids(n, 3);
    Var h = enc.encode(ids);
    EXPECT_EQ(h.value().rows(), n);
    EXPECT_EQ(h.value().cols(), 12u);
    EXPECT_TRUE(h.value().all_finite());
  }
}

TEST(Encoder, SwappingTwoContextTokensChangesEveryPosition) {
  Rng rng = make_rng(2);
  BiRnnEncoder enc({30, 16, 16}, rng);
  Rng pick = make_rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + uniform_index(pick, 6);
    std::vector<std::size_t> ids(n);
    for (auto& id : ids) id = 2 + uniform_index(pick, 28);
    const std::size_t a = uniform_index(pick, n);
    const std::size_t b = (a + 1 + uniform_index(pick, n - 1)) % n;
    if (ids[a] == ids[b]) ids[b] = ids[a] == 29 ? 2 : ids[a] + 1;
    std::vector<std::size_t> swapped = ids;
    std::swap(swapped[a], swapped[b]);
    const Tensor h1 = enc.encode(ids).value(), h2 = enc.encode(swapped).value();
    for (std::size_t i = 0; i < n; ++i) {
      double diff = 0.0;
      for (std::size_t c = 0; c < h1.cols(); ++c) diff = std::max(diff, std::abs(h1(i, c) - h2(i, c)));
      EXPECT_GT(diff, 0.0) << "position " << i << " ignored the swap";
    }
  }
}

TEST(Encoder, RejectsOutOfVocabularyIdsAndEmptyInput) {
  Rng rng = make_rng(4);
  BiRnnEncoder enc({10, 4, 4}, rng);
  std::vector<std::size_t> bad{1, 10};
  EXPECT_THROW(enc.encode(bad), std::out_of_range);
  EXPECT_THROW(enc.encode(std::vector<std::size_t>{}), std::invalid_argument);
}

TEST(Encoder, InitialisationIsSeeded) {
  Model a(toy_vocab(), ModelConfig{}, 9), b(toy_vocab(), ModelConfig{}, 9), c(toy_vocab(), ModelConfig{}, 10);
  EXPECT_EQ(param_hash(a.all_params()), param_hash(b.all_params()));
  EXPECT_NE(param_hash(a.all_params()), param_hash(c.all_params()));
  for (const auto& p : a.all_params()) EXPECT_LE(p.var.value().max_abs(), 0.1) << p.name;
}

TEST(Classifier, RowsSumToOne) {
  Model m(toy_vocab(), ModelConfig{}, 5);
  const Tensor p = m.tag_probs(toks({"the", "soup", "was", "cold"})).value();
  ASSERT_EQ(p.cols(), kNumTags);
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < p.cols(); ++c) s += p(r, c);
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Classifier, ZeroWeightsGiveUniformAndNoSpans) {
  Rng rng = make_rng(6);
  Classifier clf(12, 0.9, rng);
  zero_head(clf.head());
  Tensor hidden(3, 12);
  for (std::size_t i = 0; i < hidden.size(); ++i) hidden[i] = uniform(rng, -1, 1);
  const Tensor p = clf.probs(constant(hidden), nullptr).value();
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], 1.0 / 13.0, 1e-15);
  const auto tags = argmax_tags(p);
  for (Tag t : tags) EXPECT_TRUE(t.is_outside());
}

TEST(Classifier, ArgmaxFeedsLenientDecoder) {
  Rng rng = make_rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 8);
    Tensor logits(n, kNumTags);
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = uniform(rng, -3, 3);
    const auto tags = argmax_tags(softmax_rows(constant(logits)).value());
    ASSERT_EQ(tags.size(), n);
    ASSERT_NO_THROW(decode_lenient(tags));
  }
}

TEST(CrossEntropy, HandValues) {
  Tensor half(1, kNumTags, 0.5 / 12.0);
  half[parse_tag("S-POS").id()] = 0.5;
  std::vector<Tag> gold{parse_tag("S-POS")};
  EXPECT_NEAR(sentence_ce(constant(half), gold).value().item(), std::log(2.0), 1e-12);

  Tensor perfect(1, kNumTags, 0.0);
  perfect[0] = 1.0;
  EXPECT_EQ(sentence_ce(constant(perfect), std::vector<Tag>{Tag::outside()}).value().item(), 0.0);

  std::vector<Var> probs{constant(Tensor(1, kNumTags, 1.0 / 13)), constant(Tensor(4, kNumTags, 1.0 / 13))};
  std::vector<std::vector<Tag>> golds{{Tag::outside()},
                                      {parse_tag("B-NEG"), parse_tag("E-NEG"), Tag::outside(), parse_tag("S-NEU")}};
  EXPECT_NEAR(ce_loss(probs, golds).value().item(), std::log(13.0), 1e-12);
}

TEST(Discriminator, ZeroWeightsScoreHalfAndScoresAreProbabilities) {
  Rng rng = make_rng(8);
  Discriminator q(10, 0.9, rng);
  Tensor h(4, 10);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = uniform(rng, -2, 2);
  const double s1 = q.score(constant(h), nullptr).value().item();
  EXPECT_GT(s1, 0.0);
  EXPECT_LT(s1, 1.0);
  EXPECT_EQ(q.score(constant(h), nullptr).value().item(), s1);
  zero_head(q.head());
  EXPECT_EQ(q.score(constant(h), nullptr).value().item(), 0.5);
}

TEST(Discriminator, ClipBoundsEveryParameter) {
  Rng rng = make_rng(9);
  Discriminator q(6, 1.0, rng);
  q.head().weight().mutable_value()[0] = 0.05;
  q.head().bias().mutable_value()[0] = -0.3;
  q.clip(0.01);
  EXPECT_LE(q.max_abs_param(), 0.01);
  EXPECT_EQ(q.head().weight().value()[0], 0.01);
  EXPECT_EQ(q.head().bias().value()[0], -0.01);
}

TEST(WassersteinObjective, PlugInValues) {
  std::vector<Var> src{constant(Tensor::scalar(0.9)), constant(Tensor::scalar(0.7))};
  std::vector<Var> tgt{constant(Tensor::scalar(0.2)), constant(Tensor::scalar(0.4))};
  EXPECT_NEAR(wasserstein_objective(src, tgt).value().item(), 0.5, 1e-15);
  EXPECT_EQ(wasserstein_objective(src, src).value().item(), 0.0);
}

TEST(SpanDistribution, SingleTokenRenormalises) {
  Var p = constant(token_probs({{"S-POS", 0.6}, {"S-NEU", 0.2}, {"S-NEG", 0.1}, {"O", 0.05}, {"B-POS", 0.05}}));
  const Tensor d = span_distribution(p, {0, 0, Polarity::Pos}).value();
  const double expect[] = {0.6 / 0.95, 0.2 / 0.95, 0.1 / 0.95, 0.05 / 0.95};
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(d[k], expect[k], 1e-15);
  EXPECT_NEAR(d[0], 0.6316, 5e-5);
  EXPECT_NEAR(d[3], 0.0526, 5e-5);
}

TEST(SpanDistribution, TwoTokenProduct) {
  Tensor probs(2, kNumTags);
  probs(0, parse_tag("B-POS").id()) = 0.9;
  probs(0, 0) = 0.1;
  probs(1, parse_tag("E-POS").id()) = 0.8;
  probs(1, 0) = 0.2;
  const Tensor m = span_masses(constant(probs), {0, 1, Polarity::Pos}).value();
  EXPECT_NEAR(m[0], 0.72, 1e-15);
  EXPECT_EQ(m[1], 0.0);
  EXPECT_EQ(m[2], 0.0);
  EXPECT_NEAR(m[3], 0.02, 1e-15);
  const Tensor d = span_distribution(constant(probs), {0, 1, Polarity::Pos}).value();
  EXPECT_NEAR(d[0], (0.72) / (0.72 + 0.02 + 2e-8), 1e-15);
}

// Uniform token distributions: every class mass is (1/13)^L, so the span
// distribution is uniform over the four classes wherever the span sits.
TEST(SpanDistribution, UniformTokensGiveUniformSpanAtAnyPosition) {
  Var p = constant(Tensor(6, kNumTags, 1.0 / 13.0));
  for (std::size_t start = 0; start < 6; ++start)
    for (std::size_t end = start; end < 6; ++end) {
      const Tensor d = span_distribution(p, {start, end, Polarity::Neu}).value();
      const double mass = std::pow(1.0 / 13.0, static_cast<double>(end - start + 1));
      const double floored = std::max(mass, kProbFloor);
      for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(d[k], floored / (4 * floored), 1e-15);
    }
}

TEST(Consistency, HandValuesAndSymmetry) {
  Var p = constant(row_of({0.75, 0.25})), q = constant(row_of({0.25, 0.75}));
  std::vector<std::pair<Var, Var>> one{{p, q}};
  EXPECT_NEAR(consistency_loss(one).value().item(), 0.5 * std::log(3.0), 1e-9);
  EXPECT_NEAR(consistency_loss(one).value().item(), oracle::symmetric_kl({0.75, 0.25}, {0.25, 0.75}), 1e-15);
  std::vector<std::pair<Var, Var>> same{{p, p}};
  EXPECT_EQ(consistency_loss(same).value().item(), 0.0);
  Rng rng = make_rng(10);
  std::vector<std::pair<Var, Var>> pairs, swapped;
  for (int i = 0; i < 5; ++i) {
    Tensor a(1, 4), b(1, 4);
    for (std::size_t k = 0; k < 4; ++k) {
      a[k] = uniform(rng, -1, 1);
      b[k] = uniform(rng, -1, 1);
    }
    Var pa = softmax_rows(constant(a)), pb = softmax_rows(constant(b));
    pairs.push_back({pa, pb});
    swapped.push_back({pb, pa});
  }
  EXPECT_NEAR(consistency_loss(pairs).value().item(), consistency_loss(swapped).value().item(), 1e-15);
  EXPECT_EQ(consistency_loss(std::vector<std::pair<Var, Var>>{}).value().item(), 0.0);
}

// Whole losses, differentiated end to end through a small model, against
// central differences.
TEST(LossGradients, FullLossesMatchFiniteDifferences) {
  ModelConfig cfg;
  cfg.embedding_dim = 4;
  cfg.hidden_dim = 3;
  cfg.keep_prob = 1.0;
  std::size_t instances = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    Model m(toy_vocab(), cfg, seed);
    std::vector<Var> leaves;
    for (const auto& p : m.all_params()) leaves.push_back(p.var);
    const auto s1 = toks({"the", "soup", "was", "cold"});
    const auto s2 = toks({"staff", "rude"});
    const std::vector<Tag> g1{Tag::outside(), parse_tag("S-NEG"), Tag::outside(), Tag::outside()};
    const std::vector<Tag> g2{parse_tag("S-NEG"), Tag::outside()};
    Rng soft_rng = make_rng(seed, 77);
    Tensor soft(4, kNumTags);
    for (std::size_t i = 0; i < soft.size(); ++i) soft[i] = uniform(soft_rng, -2, 2);
    const Tensor soft_probs = softmax_rows(constant(soft)).value();

    auto check = [&](const std::function<Var()>& f, double factor = 1.0) {
      auto r = oracle::check_gradients(leaves, f, 1e-5, factor);
      worst = std::max(worst, r.worst_rel);
      EXPECT_LT(r.worst_rel, 1e-4) << "seed " << seed << " instance " << instances;
      ++instances;
    };
    check([&] {
      std::vector<Var> probs{m.tag_probs(s1), m.tag_probs(s2)};
      std::vector<std::vector<Tag>> gold{g1, g2};
      return ce_loss(probs, gold);
    });
    check([&] {
      std::vector<std::pair<Var, Var>> pairs{
          {span_distribution(m.tag_probs(s1), {1, 1, Polarity::Neg}),
           span_distribution(m.tag_probs(s2), {0, 0, Polarity::Neg})},
          {span_distribution(m.tag_probs(s1), {1, 2, Polarity::Neg}),
           span_distribution(m.tag_probs(s1), {0, 1, Polarity::Neg})}};
      return consistency_loss(pairs);
    });
    check([&] {
      std::vector<Var> student{m.tag_probs(s1)}, target{constant(soft_probs)};
      return kd_loss(student, target);
    });
    // J_q with the discriminator on the plain path: an ordinary derivative.
    check([&] {
      std::vector<Var> src{m.discriminator().score(m.hidden(s1), nullptr)};
      std::vector<Var> tgt{m.discriminator().score(m.hidden(s2), nullptr)};
      return wasserstein_objective(src, tgt);
    });
    // J_q through the reversal layer: only the encoder side is negated, so
    // check encoder and discriminator leaves separately.
    auto reversed = [&] {
      std::vector<Var> src{m.discriminator().score(grad_reverse(m.hidden(s1), {1.0}), nullptr)};
      std::vector<Var> tgt{m.discriminator().score(grad_reverse(m.hidden(s2), {1.0}), nullptr)};
      return wasserstein_objective(src, tgt);
    };
    std::vector<Var> enc_leaves, disc_leaves;
    for (const auto& p : m.encoder_params()) enc_leaves.push_back(p.var);
    for (const auto& p : m.discriminator_params()) disc_leaves.push_back(p.var);
    for (auto* group : {&enc_leaves, &disc_leaves}) {
      auto r = oracle::check_gradients(*group, reversed, 1e-5, group == &enc_leaves ? -1.0 : 1.0);
      worst = std::max(worst, r.worst_rel);
      EXPECT_LT(r.worst_rel, 1e-4);
      ++instances;
    }
  }
  EXPECT_GE(instances, 20u);
  EXPECT_LT(worst, 1e-4);
}

TEST(GradientReversal, EncoderGradientIsExactlyNegatedOrZero) {
  Model m(toy_vocab(), ModelConfig{}, 3);
  const auto s1 = toks({"the", "menu", "was", "great"});
  const auto s2 = toks({"staff", "rude"});
  auto objective = [&](std::optional<double> lambda) {
    auto wrap = [&](const Var& h) { return lambda ? grad_reverse(h, {*lambda}) : h; };
    std::vector<Var> src{m.discriminator().score(wrap(m.hidden(s1)), nullptr)};
    std::vector<Var> tgt{m.discriminator().score(wrap(m.hidden(s2)), nullptr)};
    return wasserstein_objective(src, tgt);
  };
  auto grads_for = [&](std::optional<double> lambda) {
    zero_grad(m.all_params());
    backward(objective(lambda));
    return std::make_pair(encoder_grads(m.encoder_params()), encoder_grads(m.discriminator_params()));
  };
  const auto plain = grads_for(std::nullopt);
  const auto rev = grads_for(1.0);
  const auto zero = grads_for(0.0);
  bool any_nonzero = false;
  for (std::size_t k = 0; k < plain.first.size(); ++k)
    for (std::size_t i = 0; i < plain.first[k].size(); ++i) {
      EXPECT_EQ(rev.first[k][i], -plain.first[k][i]);
      EXPECT_EQ(zero.first[k][i], 0.0);
      any_nonzero |= plain.first[k][i] != 0.0;
    }
  EXPECT_TRUE(any_nonzero);
  EXPECT_EQ(rev.second, plain.second);
  EXPECT_EQ(zero.second, plain.second);
}

TEST(Checkpoint, JsonRoundTripIsExact) {
  Model m(toy_vocab(), ModelConfig{}, 12);
  CheckpointMeta meta{150, 0.625, "abc"};
  const std::string text = checkpoint_json(m, meta);
  CheckpointMeta back_meta;
  Model back = model_from_checkpoint_json(text, &back_meta);
  EXPECT_EQ(param_hash(back.all_params()), param_hash(m.all_params()));
  EXPECT_EQ(back.vocab(), m.vocab());
  EXPECT_EQ(back_meta.step, 150u);
  EXPECT_EQ(back_meta.dev_f1, 0.625);
  EXPECT_EQ(checkpoint_json(back, back_meta), text);
  EXPECT_THROW(model_from_checkpoint_json("{\"format\":\"other\"}"), FormatError);
}
