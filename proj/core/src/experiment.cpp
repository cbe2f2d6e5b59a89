#include "msmo/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace msmo {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json train_json(const TrainConfig& t) {
  ordered_json j;
  j["lr"] = t.learning_rate;
  j["batch-size"] = t.batch_size;
  j["step1-steps"] = t.step1_steps;
  j["step2-steps"] = t.step2_steps;
  j["beta"] = t.beta;
  j["lambda"] = t.lambda;
  j["clip"] = t.clip;
  j["critic-iters"] = t.critic_iters;
  j["schedule"] = std::string(to_string(t.schedule));
  j["window"] = t.selection_window;
  j["eval-interval"] = t.eval_interval;
  j["cons-source-target"] = t.pairs.source_target;
  j["cons-source-switched"] = t.pairs.source_switched;
  j["cons-target-switched"] = t.pairs.target_switched;
  return j;
}

ordered_json model_json(const ModelConfig& m) {
  ordered_json j;
  j["embedding-dim"] = m.embedding_dim;
  j["hidden-dim"] = m.hidden_dim;
  j["keep-prob"] = m.keep_prob;
  return j;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string run_config_json(const RunConfig& cfg) {
  ordered_json j;
  j["mode"] = cfg.mode;
  j["languages"] = cfg.languages;
  j["seeds"] = cfg.train.seeds;
  j.update(train_json(cfg.train));
  j.update(model_json(cfg.model));
  j["warm-steps"] = cfg.distill.warm_steps;
  j["kd-steps"] = cfg.distill.kd_steps;
  j["teachers"] = cfg.teachers;
  j["synth-seed"] = cfg.synth.seed;
  j["train-sentences"] = cfg.synth.train_sentences;
  j["dev-sentences"] = cfg.synth.dev_sentences;
  j["test-sentences"] = cfg.synth.test_sentences;
  j["aspect-lexicon"] = cfg.synth.aspect_lexicon_size;
  j["sentiment-words"] = cfg.synth.sentiment_words;
  j["target-languages"] = cfg.synth.target_languages;
  j["data"] = cfg.data;
  j["checkpoint"] = cfg.checkpoint;
  j["out"] = cfg.out;
  return j.dump(2);
}

RunConfig run_config_from_json(std::string_view text, RunConfig base) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  RunConfig c = std::move(base);
  for (auto& [key, v] : j.items()) {
    try {
      if (key == "mode") c.mode = v.get<std::string>();
      else if (key == "languages") c.languages = v.get<std::vector<std::string>>();
      else if (key == "seed") {
        c.train.seeds = {v.get<std::uint64_t>()};
        c.synth.seed = v.get<std::uint64_t>();
      } else if (key == "seeds") c.train.seeds = v.get<std::vector<std::uint64_t>>();
      else if (key == "lr") c.train.learning_rate = v.get<double>();
      else if (key == "batch-size") c.train.batch_size = c.distill.batch_size = v.get<std::size_t>();
      else if (key == "step1-steps") c.train.step1_steps = v.get<std::size_t>();
      else if (key == "step2-steps") c.train.step2_steps = v.get<std::size_t>();
      else if (key == "beta") c.train.beta = v.get<double>();
      else if (key == "lambda") c.train.lambda = v.get<double>();
      else if (key == "clip") c.train.clip = v.get<double>();
      else if (key == "critic-iters") c.train.critic_iters = v.get<std::size_t>();
      else if (key == "schedule") c.train.schedule = parse_schedule(v.get<std::string>());
      else if (key == "window") c.train.selection_window = v.get<std::size_t>();
      else if (key == "eval-interval") c.train.eval_interval = v.get<std::size_t>();
      else if (key == "cons-source-target") c.train.pairs.source_target = v.get<bool>();
      else if (key == "cons-source-switched") c.train.pairs.source_switched = v.get<bool>();
      else if (key == "cons-target-switched") c.train.pairs.target_switched = v.get<bool>();
      else if (key == "embedding-dim") c.model.embedding_dim = v.get<std::size_t>();
      else if (key == "hidden-dim") c.model.hidden_dim = v.get<std::size_t>();
      else if (key == "keep-prob") c.model.keep_prob = v.get<double>();
      else if (key == "warm-steps") c.distill.warm_steps = v.get<std::size_t>();
      else if (key == "kd-steps") c.distill.kd_steps = v.get<std::size_t>();
      else if (key == "teachers") c.teachers = v.get<std::size_t>();
      else if (key == "synth-seed") c.synth.seed = v.get<std::uint64_t>();
      else if (key == "train-sentences") c.synth.train_sentences = v.get<std::size_t>();
      else if (key == "dev-sentences") c.synth.dev_sentences = v.get<std::size_t>();
      else if (key == "test-sentences") c.synth.test_sentences = v.get<std::size_t>();
      else if (key == "aspect-lexicon") c.synth.aspect_lexicon_size = v.get<std::size_t>();
      else if (key == "sentiment-words") c.synth.sentiment_words = v.get<std::size_t>();
      else if (key == "target-languages") c.synth.target_languages = v.get<std::size_t>();
      else if (key == "data") c.data = v.get<std::string>();
      else if (key == "checkpoint") c.checkpoint = v.get<std::string>();
      else if (key == "out") c.out = v.get<std::string>();
      else throw std::invalid_argument("unknown key");
    } catch (const std::exception& e) {
      throw std::invalid_argument("config key \"" + key + "\": " + e.what());
    }
  }
  c.distill.learning_rate = c.train.learning_rate;
  return c;
}

std::string config_fingerprint(const TrainConfig& train, const ModelConfig& model, std::string_view mode,
                               const std::vector<std::string>& languages) {
  ordered_json j;
  j["mode"] = std::string(mode);
  j["languages"] = languages;
  j["train"] = train_json(train);
  j["model"] = model_json(model);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

TrainedRun train_run(const CorpusBundle& bundle, const Vocabulary& vocab, TrainMode mode,
                     const std::vector<std::string>& targets, const TrainConfig& train, const ModelConfig& model_cfg,
                     std::uint64_t seed, const TrainObserver* observer) {
  Model model(vocab, model_cfg, seed);
  Trainer trainer(model, make_training_data(bundle, targets, mode == TrainMode::ZeroShot), train, mode, seed);
  TrainResult result = trainer.run(observer);
  return {std::move(model), std::move(result)};
}

std::uint64_t teacher_seed(std::uint64_t seed, std::size_t k) { return k == 0 ? seed : seed + 1000 * k; }

const TableRow* TableResult::find(std::string_view method) const {
  for (const auto& r : rows)
    if (r.method == method) return &r;
  return nullptr;
}

double TableResult::mean_f1(std::string_view method) const {
  const TableRow* r = find(method);
  if (!r) throw std::out_of_range("table has no row '" + std::string(method) + "'");
  return r->report.average_f1(languages);
}

TableResult run_table(const CorpusBundle& bundle, const TableConfig& cfg, const Progress& progress) {
  cfg.train.validate();
  if (cfg.seeds.empty()) throw std::invalid_argument("table: empty seed list");
  const std::vector<std::string> langs = cfg.languages.empty() ? bundle.target_langs : cfg.languages;
  for (const auto& l : langs)
    if (std::find(bundle.target_langs.begin(), bundle.target_langs.end(), l) == bundle.target_langs.end())
      throw std::invalid_argument("table: bundle has no target language '" + l + "'");
  if (cfg.distillation && cfg.teachers < 2) throw std::invalid_argument("table: multi-teacher needs >= 2 teachers");
  const Vocabulary vocab = Vocabulary::from_bundle(bundle);
  DistillConfig dcfg = cfg.distill;

  std::vector<std::string> methods{std::string(kMethodZeroShot), std::string(kMethodMsmo)};
  if (cfg.ablations) {
    methods.emplace_back(kMethodNoDisc);
    methods.emplace_back(kMethodNoCons);
  }
  if (cfg.distillation) {
    methods.emplace_back(kMethodStudent);
    methods.emplace_back(kMethodDistillS);
    methods.emplace_back(kMethodDistillM);
  }
  if (cfg.multilingual) methods.emplace_back(kMethodDistillMtl);
  std::map<std::string, std::vector<EvalReport>> per_method;

  auto say = [&](const std::string& s) {
    if (progress) progress(s);
  };
  auto test = [&](const Model& m, const std::vector<std::string>& l, std::uint64_t seed) {
    return evaluate_model(m, bundle, SplitName::Test, l, seed);
  };

  for (std::uint64_t seed : cfg.seeds) {
    const std::string tag = "seed " + std::to_string(seed);
    say(tag + ": zero-shot");
    auto zs = train_run(bundle, vocab, TrainMode::ZeroShot, langs, cfg.train, cfg.model, seed);
    per_method[std::string(kMethodZeroShot)].push_back(test(zs.model, langs, seed));

    for (const auto& lang : langs) {
      const std::vector<std::string> one{lang};
      say(tag + " " + lang + ": msmo");
      auto msmo = train_run(bundle, vocab, TrainMode::Msmo, one, cfg.train, cfg.model, seed);
      per_method[std::string(kMethodMsmo)].push_back(test(msmo.model, one, seed));
      if (cfg.ablations) {
        say(tag + " " + lang + ": without discriminator");
        auto nd = train_run(bundle, vocab, TrainMode::NoDiscriminator, one, cfg.train, cfg.model, seed);
        per_method[std::string(kMethodNoDisc)].push_back(test(nd.model, one, seed));
        say(tag + " " + lang + ": without consistency");
        auto nc = train_run(bundle, vocab, TrainMode::NoConsistency, one, cfg.train, cfg.model, seed);
        per_method[std::string(kMethodNoCons)].push_back(test(nc.model, one, seed));
      }
      if (cfg.distillation) {
        say(tag + " " + lang + ": student warm start");
        Model warm = warm_start_student(bundle, vocab, cfg.model, one, dcfg, seed);
        per_method[std::string(kMethodStudent)].push_back(test(warm, one, seed));
        say(tag + " " + lang + ": single-teacher distillation");
        auto ds = distill(DistillMode::Single, TeacherEnsemble::equal({&msmo.model}), bundle, one, dcfg, seed, &warm);
        per_method[std::string(kMethodDistillS)].push_back(ds.report);
        std::vector<TrainedRun> extra;
        std::vector<const Model*> teachers{&msmo.model};
        for (std::size_t k = 1; k < cfg.teachers; ++k) {
          say(tag + " " + lang + ": teacher " + std::to_string(k + 1));
          extra.push_back(
              train_run(bundle, vocab, TrainMode::Msmo, one, cfg.train, cfg.model, teacher_seed(seed, k)));
        }
        for (const auto& e : extra) teachers.push_back(&e.model);
        say(tag + " " + lang + ": multi-teacher distillation");
        auto dm = distill(DistillMode::Multi, TeacherEnsemble::equal(teachers), bundle, one, dcfg, seed, &warm);
        per_method[std::string(kMethodDistillM)].push_back(dm.report);
      }
    }
    if (cfg.multilingual) {
      say(tag + ": multilingual teacher");
      auto mt = train_run(bundle, vocab, TrainMode::Msmo, langs, cfg.train, cfg.model, seed);
      say(tag + ": multilingual distillation");
      auto dl = distill(DistillMode::Multilingual, TeacherEnsemble::equal({&mt.model}), bundle, langs, dcfg, seed);
      per_method[std::string(kMethodDistillMtl)].push_back(dl.report);
    }
  }

  TableResult table;
  table.languages = langs;
  for (const auto& m : methods) table.rows.push_back({m, aggregate(per_method[m])});
  return table;
}

std::string table_text(const TableResult& table) {
  std::size_t width = 6;
  for (const auto& r : table.rows) width = std::max(width, r.method.size());
  std::string out;
  char buf[64];
  out += std::string("Method") + std::string(width - 6, ' ');
  for (const auto& l : table.languages) {
    std::snprintf(buf, sizeof buf, " %8s", l.c_str());
    out += buf;
  }
  out += "      Avg\n";
  for (const auto& r : table.rows) {
    out += r.method + std::string(width - r.method.size(), ' ');
    for (const auto& l : table.languages) {
      const auto* lr = r.report.find(l);
      std::snprintf(buf, sizeof buf, " %8.2f", lr ? 100.0 * lr->mean_f1 : 0.0);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, " %8.2f\n", 100.0 * r.report.average_f1(table.languages));
    out += buf;
  }
  return out;
}

std::string table_csv(const TableResult& table) {
  std::string out = "method,language,seed,precision,recall,f1\n";
  char buf[96];
  for (const auto& r : table.rows) {
    for (const auto& l : table.languages) {
      const auto* lr = r.report.find(l);
      if (!lr) continue;
      for (const auto& s : lr->seeds) {
        std::snprintf(buf, sizeof buf, ",%s,%llu,%.6f,%.6f,%.6f\n", l.c_str(), static_cast<unsigned long long>(s.seed),
                      s.score.precision, s.score.recall, s.score.f1);
        out += r.method + buf;
      }
      std::snprintf(buf, sizeof buf, ",%s,mean,,,%.6f\n", l.c_str(), lr->mean_f1);
      out += r.method + buf;
    }
  }
  return out;
}

}  // namespace msmo
