#include <gtest/gtest.h>

#include <algorithm>

#include "msmo/evaluate.hpp"
#include "msmo/experiment.hpp"
#include "msmo/synth.hpp"
#include "oracles/oracles.hpp"

using namespace msmo;

namespace {

std::vector<oracle::Tuple> tuples(const SpanTable& t) {
  std::vector<oracle::Tuple> out;
  for (const auto& [key, spans] : t)
    for (const auto& s : spans) out.emplace_back(key, s.start, s.end, static_cast<int>(s.polarity));
  return out;
}

void expect_matches_oracle(const SpanTable& gold, const SpanTable& pred) {
  const Score s = micro_f1(gold, pred);
  const oracle::Prf o = oracle::brute_force_f1(tuples(gold), tuples(pred));
  ASSERT_DOUBLE_EQ(s.precision, o.p);
  ASSERT_DOUBLE_EQ(s.recall, o.r);
  ASSERT_DOUBLE_EQ(s.f1, o.f);
}

std::vector<Tag> random_tags(std::size_t n, Rng& rng) {
  std::vector<Tag> t(n);
  for (auto& x : t) x = uniform01(rng) < 0.5 ? Tag::outside() : Tag::from_id(uniform_index(rng, kNumTags));
  return t;
}

}  // namespace

TEST(MicroF1, WorkedExample) {
  SpanTable gold{{"s", {{1, 2, Polarity::Pos}}}};
  SpanTable pred{{"s", {{1, 2, Polarity::Pos}, {3, 3, Polarity::Neg}}}};
  const Score s = micro_f1(gold, pred);
  EXPECT_EQ(s.precision, 0.5);
  EXPECT_EQ(s.recall, 1.0);
  EXPECT_EQ(s.f1, 2.0 / 3.0);
  EXPECT_EQ(micro_f1(gold, gold).f1, 1.0);
  EXPECT_EQ(micro_f1(gold, gold).precision, 1.0);
}

TEST(MicroF1, PolarityOrBoundaryMismatchGetsNoCredit) {
  SpanTable gold{{"s", {{1, 2, Polarity::Pos}}}};
  EXPECT_EQ(micro_f1(gold, SpanTable{{"s", {{1, 2, Polarity::Neg}}}}).f1, 0.0);
  EXPECT_EQ(micro_f1(gold, SpanTable{{"s", {{1, 3, Polarity::Pos}}}}).f1, 0.0);
  EXPECT_EQ(micro_f1(gold, SpanTable{{"s", {}}}).f1, 0.0);
  EXPECT_THROW(micro_f1(gold, SpanTable{{"t", {}}}), std::invalid_argument);
}

// Every pair of one-sentence tag sequences up to length 2, decoded leniently.
TEST(MicroF1, ExhaustiveSingleSentenceAgreesWithOracle) {
  std::size_t pairs = 0;
  for (std::size_t n = 1; n <= 2; ++n) {
    const std::size_t total = n == 1 ? kNumTags : kNumTags * kNumTags;
    auto seq = [&](std::size_t code) {
      std::vector<Tag> t(n);
      for (std::size_t k = 0; k < n; ++k, code /= kNumTags) t[k] = Tag::from_id(code % kNumTags);
      return t;
    };
    for (std::size_t g = 0; g < total; ++g)
      for (std::size_t p = 0; p < total; ++p) {
        SpanTable gold{{"s", decode_lenient(seq(g))}}, pred{{"s", decode_lenient(seq(p))}};
        expect_matches_oracle(gold, pred);
        ++pairs;
      }
  }
  EXPECT_EQ(pairs, 13u * 13u + 169u * 169u);
}

TEST(MicroF1, RandomCorporaAgreeWithOracle) {
  Rng rng = make_rng(5);
  for (int trial = 0; trial < 5000; ++trial) {
    const std::size_t sentences = 1 + uniform_index(rng, 10);
    SpanTable gold, pred;
    for (std::size_t i = 0; i < sentences; ++i) {
      const std::size_t n = 1 + uniform_index(rng, 5);
      const std::string key = "s" + std::to_string(i);
      gold[key] = decode_lenient(random_tags(n, rng));
      // Half the time start from the gold spans so matches are common.
      pred[key] = uniform01(rng) < 0.5 ? gold[key] : decode_lenient(random_tags(n, rng));
      if (!pred[key].empty() && uniform01(rng) < 0.3) pred[key].pop_back();
    }
    expect_matches_oracle(gold, pred);
  }
}

TEST(MicroF1, Monotonicity) {
  Rng rng = make_rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    SpanTable gold, pred;
    for (int i = 0; i < 4; ++i) {
      const std::string key = "s" + std::to_string(i);
      gold[key] = decode_lenient(random_tags(8, rng));
      pred[key] = decode_lenient(random_tags(8, rng));
    }
    const double base = micro_f1(gold, pred).f1;
    // A correct prediction that was missing.
    for (auto& [key, spans] : gold)
      for (const auto& s : spans)
        if (std::find(pred[key].begin(), pred[key].end(), s) == pred[key].end()) {
          SpanTable more = pred;
          more[key].push_back(s);
          EXPECT_GE(micro_f1(gold, more).f1, base);
        }
    // An incorrect one.
    SpanTable worse = pred;
    worse["s0"].push_back({100, 100, Polarity::Neu});
    EXPECT_LE(micro_f1(gold, worse).f1, base);
  }
}

TEST(Evaluate, ZeroWeightModelPredictsNothing) {
  SynthConfig sc;
  sc.train_sentences = 20;
  sc.dev_sentences = 10;
  sc.test_sentences = 10;
  CorpusBundle b = synth_bilingual(sc);
  Model m(Vocabulary::from_bundle(b), ModelConfig{}, 1);
  for (const auto& p : m.all_params()) {
    ad::Var v = p.var;
    v.mutable_value().fill(0.0);
  }
  EvalReport r = evaluate_model(m, b, SplitName::Test, {b.source_lang, b.target_langs[0]});
  ASSERT_EQ(r.languages.size(), 2u);
  for (const auto& l : r.languages) {
    EXPECT_EQ(l.seeds[0].score.predicted, 0u);
    EXPECT_EQ(l.mean_f1, 0.0);
  }
  EXPECT_EQ(report_json(evaluate_model(m, b, SplitName::Test, {b.source_lang})),
            report_json(evaluate_model(m, b, SplitName::Test, {b.source_lang})));
}

TEST(Aggregate, MeansAndPermutationInvariance) {
  auto one = [](std::uint64_t seed, double f1) {
    EvalReport r;
    Score s;
    s.f1 = f1;
    r.languages.push_back({"t1", {{seed, s}}, f1});
    return r;
  };
  std::vector<EvalReport> two{one(1, 0.4), one(2, 0.6)};
  EvalReport agg = aggregate(two);
  EXPECT_DOUBLE_EQ(agg.find("t1")->mean_f1, 0.5);
  EXPECT_EQ(agg.find("t1")->seeds.size(), 2u);
  std::vector<EvalReport> single{one(3, 0.37)};
  EXPECT_EQ(aggregate(single).find("t1")->mean_f1, 0.37);
  std::vector<EvalReport> many{one(1, 0.1), one(2, 0.7), one(3, 0.33), one(4, 0.9)};
  const double m1 = aggregate(many).find("t1")->mean_f1;
  std::reverse(many.begin(), many.end());
  EXPECT_EQ(aggregate(many).find("t1")->mean_f1, m1);
  std::swap(many[0], many[2]);
  EXPECT_EQ(aggregate(many).find("t1")->mean_f1, m1);
}

TEST(Report, JsonRoundTripAndCsvRows) {
  EvalReport r;
  r.languages.push_back({"t1", {{1, score_from_counts(4, 3, 2)}, {2, score_from_counts(4, 4, 4)}}, 0.0});
  r = aggregate(std::vector<EvalReport>{r});
  const std::string j = report_json(r);
  EvalReport back = report_from_json(j);
  EXPECT_EQ(report_json(back), j);
  EXPECT_EQ(back.find("t1")->seeds[0].score, r.find("t1")->seeds[0].score);
  const std::string csv = report_csv(r);
  EXPECT_EQ(csv.rfind("language,seed,precision,recall,f1\n", 0), 0u) << csv;
  EXPECT_NE(csv.find("t1,1,"), std::string::npos);
  EXPECT_NE(csv.find("t1,2,"), std::string::npos);
  EXPECT_THROW(report_from_json("{"), FormatError);
}

TEST(RunConfig, JsonRoundTripAndLayering) {
  RunConfig c;
  c.mode = "ablation:no_consistency";
  c.languages = {"t1", "t2"};
  c.train.beta = 2.5e-3;
  c.train.seeds = {1, 2, 3};
  c.train.schedule = Schedule::Interleaved;
  c.model.hidden_dim = 16;
  c.distill.kd_steps = 77;
  c.synth.aspect_lexicon_size = 90;
  c.out = "runs/x";
  const std::string j = run_config_json(c);
  RunConfig back = run_config_from_json(j);
  EXPECT_EQ(run_config_json(back), j);
  RunConfig layered = run_config_from_json("{\"beta\": 0.5}", back);
  EXPECT_EQ(layered.train.beta, 0.5);
  EXPECT_EQ(layered.model.hidden_dim, 16u);
  EXPECT_THROW(run_config_from_json("{\"betta\": 0.5}"), std::invalid_argument);
  EXPECT_NE(config_fingerprint(c.train, c.model, c.mode, c.languages),
            config_fingerprint(layered.train, layered.model, layered.mode, layered.languages));
  EXPECT_EQ(config_fingerprint(c.train, c.model, c.mode, c.languages).size(), 16u);
  EXPECT_EQ(teacher_seed(5, 0), 5u);
  EXPECT_NE(teacher_seed(5, 1), 5u);
  EXPECT_NE(teacher_seed(5, 1), teacher_seed(5, 2));
}
