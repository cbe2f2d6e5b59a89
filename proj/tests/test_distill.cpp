#include <gtest/gtest.h>

#include <algorithm>

#include "msmo/distill.hpp"
#include "msmo/optim.hpp"
#include "msmo/synth.hpp"
#include "oracles/oracles.hpp"

using namespace msmo;
using ad::Tensor;

namespace {

Tensor rows(std::vector<std::vector<double>> r) {
  Tensor t(r.size(), r.front().size());
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < r[i].size(); ++j) t(i, j) = r[i][j];
  return t;
}

struct Toy {
  Toy() {
    for (const char* line : {"the {1:POS soup} was great", "the {1:NEG staff} was rude", "{1:NEU the menu} was okay",
                             "we liked the {1:POS wine list}", "the {1:NEG bill} was awful"}) {
      RawParse r = parse_raw(line);
      TaggedSentence s;
      s.id = "toy" + std::to_string(sentences.size());
      s.lang = "xx";
      s.tokens = r.tokens;
      std::vector<AspectSpan> spans;
      for (const auto& m : r.spans) spans.push_back(m.span);
      s.tags = encode_spans(spans, r.tokens.size());
      sentences.push_back(s);
      unlabeled.push_back({s.id, s.lang, s.tokens});
    }
    std::vector<std::string> words;
    for (const auto& s : sentences) words.insert(words.end(), s.tokens.begin(), s.tokens.end());
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    vocab = Vocabulary(words);
    cfg.embedding_dim = 8;
    cfg.hidden_dim = 8;
    cfg.keep_prob = 1.0;
  }
  // Fits a model to the gold tags of the toy sentences.
  Model teacher(std::uint64_t seed) const {
    Model m(vocab, cfg, seed);
    Adam opt(concat(m.encoder_params(), m.classifier_params()), AdamConfig{1e-2});
    for (int step = 0; step < 300; ++step) {
      std::vector<ad::Var> probs;
      std::vector<std::vector<Tag>> gold;
      for (const auto& s : sentences) {
        probs.push_back(m.tag_probs(s.tokens));
        gold.push_back(s.tags);
      }
      opt.zero_grad();
      ad::backward(ce_loss(probs, gold));
      opt.step();
    }
    return m;
  }
  std::vector<TaggedSentence> sentences;
  std::vector<UnlabeledSentence> unlabeled;
  Vocabulary vocab;
  ModelConfig cfg;
};

}  // namespace

TEST(Combine, ThreeTeachersEqualWeights) {
  std::vector<Tensor> outs{Tensor::row({0.6, 0.4}), Tensor::row({0.5, 0.5}), Tensor::row({0.4, 0.6})};
  std::vector<double> w(3, 1.0 / 3.0);
  const Tensor c = combine_distributions(outs, w);
  EXPECT_NEAR(c[0], 0.5, 1e-15);
  EXPECT_NEAR(c[1], 0.5, 1e-15);
}

TEST(Combine, SingleTeacherIsIdentity) {
  const Tensor t = rows({{0.1, 0.7, 0.2}, {0.3, 0.3, 0.4}});
  std::vector<Tensor> outs{t};
  EXPECT_EQ(combine_distributions(outs, std::vector<double>{1.0}), t);
}

TEST(Combine, IdenticalTeachersReproduceSingleExactly) {
  Rng rng = make_rng(1);
  Tensor logits(4, kNumTags);
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = uniform(rng, -3, 3);
  const Tensor p = ad::softmax_rows(ad::constant(logits)).value();
  std::vector<Tensor> one{p}, three{p, p, p};
  std::vector<double> w3(3, 1.0 / 3.0);
  EXPECT_EQ(combine_distributions(three, w3), combine_distributions(one, std::vector<double>{1.0}));
}

TEST(Combine, ConvexCombinationStaysOnSimplex) {
  Rng rng = make_rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + uniform_index(rng, 3);
    std::vector<Tensor> outs;
    std::vector<double> w(k);
    double total = 0.0;
    for (auto& x : w) total += (x = uniform(rng, 0.01, 1.0));
    for (auto& x : w) x /= total;
    for (std::size_t t = 0; t < k; ++t) {
      Tensor l(3, kNumTags);
      for (std::size_t i = 0; i < l.size(); ++i) l[i] = uniform(rng, -4, 4);
      outs.push_back(ad::softmax_rows(ad::constant(l)).value());
    }
    const Tensor c = combine_distributions(outs, w);
    for (std::size_t r = 0; r < c.rows(); ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < c.cols(); ++j) {
        EXPECT_GE(c(r, j), 0.0);
        s += c(r, j);
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Combine, RejectsMismatchedShapes) {
  std::vector<Tensor> outs{Tensor(2, 3), Tensor(3, 3)};
  EXPECT_THROW(combine_distributions(outs, std::vector<double>{0.5, 0.5}), ad::ShapeError);
  EXPECT_THROW(combine_distributions(outs, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Ensemble, ValidatesWeightsAndVocabulary) {
  Toy toy;
  Model a(toy.vocab, toy.cfg, 1), b(toy.vocab, toy.cfg, 2);
  Model other(Vocabulary({"x", "y"}), toy.cfg, 3);
  EXPECT_NO_THROW(TeacherEnsemble::equal({&a, &b}).validate());
  EXPECT_THROW((TeacherEnsemble{{&a, &b}, {0.5, 0.6}}.validate()), std::invalid_argument);
  EXPECT_THROW((TeacherEnsemble{{&a}, {0.5, 0.5}}.validate()), std::invalid_argument);
  EXPECT_THROW(TeacherEnsemble::equal({&a, &other}).validate(), std::invalid_argument);
  EXPECT_THROW(TeacherEnsemble::equal({}).validate(), std::invalid_argument);
}

TEST(KdLoss, HandValuesAndSymmetry) {
  ad::Var t = ad::constant(Tensor::row({1.0, 0.0})), s = ad::constant(Tensor::row({0.5, 0.5}));
  EXPECT_EQ(sentence_kd(s, t).value().item(), 0.25);
  std::vector<ad::Var> st{s}, tt{t};
  EXPECT_EQ(kd_loss(st, tt).value().item(), 0.25);
  EXPECT_EQ(kd_loss(tt, st).value().item(), 0.25);
  EXPECT_EQ(kd_loss(tt, tt).value().item(), 0.0);
  Rng rng = make_rng(3);
  std::vector<ad::Var> a, b;
  for (int i = 0; i < 4; ++i) {
    Tensor x(2 + i, kNumTags), y(2 + i, kNumTags);
    for (std::size_t k = 0; k < x.size(); ++k) {
      x[k] = uniform01(rng);
      y[k] = uniform01(rng);
    }
    a.push_back(ad::constant(x));
    b.push_back(ad::constant(y));
  }
  EXPECT_EQ(kd_loss(a, b).value().item(), kd_loss(b, a).value().item());
}

TEST(SoftLabels, ComeFromTeachersAndRoundTripThroughJsonl) {
  Toy toy;
  Model a(toy.vocab, toy.cfg, 1), b(toy.vocab, toy.cfg, 2);
  SoftLabeledSet single = soft_label(TeacherEnsemble::equal({&a}), toy.unlabeled);
  SoftLabeledSet triple = soft_label(TeacherEnsemble::equal({&a, &a, &a}), toy.unlabeled);
  EXPECT_EQ(soft_labels_jsonl(single), soft_labels_jsonl(triple));
  SoftLabeledSet mixed = soft_label(TeacherEnsemble::equal({&a, &b}), toy.unlabeled);
  ASSERT_EQ(mixed.size(), toy.unlabeled.size());
  const Tensor pa = a.tag_probs(toy.unlabeled[0].tokens).value();
  const Tensor pb = b.tag_probs(toy.unlabeled[0].tokens).value();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_NEAR(mixed[0].probs[i], 0.5 * pa[i] + 0.5 * pb[i], 1e-15);
  const std::string text = soft_labels_jsonl(mixed);
  SoftLabeledSet back = soft_labels_from_jsonl(text);
  ASSERT_EQ(back.size(), mixed.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].id, mixed[i].id);
    EXPECT_EQ(back[i].tokens, mixed[i].tokens);
    EXPECT_EQ(back[i].probs, mixed[i].probs);
  }
  EXPECT_EQ(soft_labels_jsonl(back), text);
  try {
    soft_labels_from_jsonl(text + "{\"id\":\"x\"}\n");
    FAIL() << "expected an error";
  } catch (const std::exception& e) {
    EXPECT_EQ(std::string(e.what()).rfind("line " + std::to_string(back.size() + 1) + ":", 0), 0u) << e.what();
  }
}

TEST(Distill, StudentReachesPerfectTeacherLabelling) {
  Toy toy;
  Model teacher = toy.teacher(7);
  for (const auto& s : toy.sentences) ASSERT_EQ(teacher.predict(s.tokens), s.tags) << "teacher is not perfect";
  SoftLabeledSet soft = soft_label(TeacherEnsemble::equal({&teacher}), toy.unlabeled);
  Model student(toy.vocab, toy.cfg, 99);
  DistillConfig cfg;
  cfg.batch_size = 5;
  cfg.kd_steps = 600;
  cfg.learning_rate = 1e-2;
  const auto losses = kd_train(student, soft, cfg, 4);
  EXPECT_LT(losses.back(), losses.front());
  for (std::size_t i = 0; i < toy.sentences.size(); ++i)
    EXPECT_EQ(student.predict(toy.sentences[i].tokens), teacher.predict(toy.sentences[i].tokens)) << i;
}

TEST(Distill, ModesCheckTeacherCountsAndVocabulary) {
  SynthConfig sc;
  sc.train_sentences = 20;
  sc.dev_sentences = 6;
  sc.test_sentences = 6;
  CorpusBundle bundle = synth_bilingual(sc);
  const Vocabulary vocab = Vocabulary::from_bundle(bundle);
  ModelConfig mc;
  mc.embedding_dim = 4;
  mc.hidden_dim = 4;
  Model a(vocab, mc, 1), b(vocab, mc, 2);
  Toy toy;
  Model alien(toy.vocab, mc, 3);
  DistillConfig cfg;
  cfg.warm_steps = 3;
  cfg.kd_steps = 3;
  cfg.batch_size = 4;
  const auto& targets = bundle.target_langs;
  EXPECT_THROW(distill(DistillMode::Single, TeacherEnsemble::equal({&a, &b}), bundle, targets, cfg, 1),
               std::invalid_argument);
  EXPECT_THROW(distill(DistillMode::Multi, TeacherEnsemble::equal({&a}), bundle, targets, cfg, 1),
               std::invalid_argument);
  EXPECT_THROW(distill(DistillMode::Single, TeacherEnsemble::equal({&alien}), bundle, targets, cfg, 1),
               std::invalid_argument);
  DistillResult r = distill(DistillMode::Multi, TeacherEnsemble::equal({&a, &b}), bundle, targets, cfg, 1);
  EXPECT_EQ(r.kd_losses.size(), 3u);
  EXPECT_EQ(r.soft_labels.size(), bundle.sentences(SplitName::Test, Variant::T, targets[0]).size());
  ASSERT_NE(r.report.find(targets[0]), nullptr);
  DistillResult again = distill(DistillMode::Multi, TeacherEnsemble::equal({&a, &b}), bundle, targets, cfg, 1);
  EXPECT_EQ(param_hash(again.student.all_params()), param_hash(r.student.all_params()));
  EXPECT_EQ(parse_distill_mode("distill-mtl"), DistillMode::Multilingual);
}

// Soft labels never see gold tags: corrupting every gold tag of the target
// test split leaves them unchanged.
TEST(Distill, SoftLabelsIgnoreGoldTags) {
  SynthConfig sc;
  sc.train_sentences = 20;
  sc.dev_sentences = 6;
  sc.test_sentences = 6;
  CorpusBundle bundle = synth_bilingual(sc);
  Model t(Vocabulary::from_bundle(bundle), ModelConfig{}, 5);
  const auto lang = bundle.target_langs[0];
  const auto before = soft_labels_jsonl(soft_label(TeacherEnsemble::equal({&t}), unlabeled_targets(bundle, SplitName::Test, lang)));
  for (auto& ex : bundle.split(SplitName::Test))
    for (auto& tag : ex.view(Variant::T).tags) tag = Tag::outside();
  const auto after = soft_labels_jsonl(soft_label(TeacherEnsemble::equal({&t}), unlabeled_targets(bundle, SplitName::Test, lang)));
  EXPECT_EQ(before, after);
}
