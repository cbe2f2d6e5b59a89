#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "msmo/corpus.hpp"
#include "msmo/distill.hpp"
#include "msmo/evaluate.hpp"
#include "msmo/experiment.hpp"
#include "msmo/synth.hpp"
#include "msmo/trainer.hpp"

namespace msmo::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + p.string());
}

// Flags are layered over the config file: only options given on the command
// line override it.
class Flags {
 public:
  explicit Flags(CLI::App* app) : app_(app) {}

  template <class T, class Set>
  CLI::Option* add(const std::string& name, const std::string& desc, Set set) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app_->add_option(name, *value, desc);
    apply_.push_back([opt, value, set](RunConfig& c) {
      if (opt->count() > 0) set(c, *value);
    });
    return opt;
  }

  void common() {
    app_->add_option("--config", config_path_, "JSON config; keys mirror the flag names");
    add<std::string>("--out", "Output directory", [](RunConfig& c, const std::string& v) { c.out = v; });
    add<std::uint64_t>("--seed", "Random seed", [](RunConfig& c, std::uint64_t v) {
      c.train.seeds = {v};
      c.synth.seed = v;
    });
  }

  void data() {
    add<std::string>("--data", "Bundle directory (default: synthesize in memory)",
                     [](RunConfig& c, const std::string& v) { c.data = v; });
    add<std::vector<std::string>>("--languages", "Target languages (default: all)",
                                  [](RunConfig& c, const std::vector<std::string>& v) { c.languages = v; })
        ->delimiter(',');
    synth();
  }

  void synth() {
    add<std::size_t>("--train-sentences", "Synthetic train sentences per language",
                     [](RunConfig& c, std::size_t v) { c.synth.train_sentences = v; });
    add<std::size_t>("--dev-sentences", "Synthetic dev sentences",
                     [](RunConfig& c, std::size_t v) { c.synth.dev_sentences = v; });
    add<std::size_t>("--test-sentences", "Synthetic test sentences",
                     [](RunConfig& c, std::size_t v) { c.synth.test_sentences = v; });
    add<std::size_t>("--target-languages", "Number of synthetic target languages",
                     [](RunConfig& c, std::size_t v) { c.synth.target_languages = v; });
    add<std::uint64_t>("--synth-seed", "Seed of the synthetic corpus",
                       [](RunConfig& c, std::uint64_t v) { c.synth.seed = v; });
  }

  void seeds() {
    add<std::vector<std::uint64_t>>("--seeds", "Comma-separated seed list",
                                    [](RunConfig& c, const std::vector<std::uint64_t>& v) { c.train.seeds = v; })
        ->delimiter(',');
  }

  void mode(const std::string& desc) {
    add<std::string>("--mode", desc, [](RunConfig& c, const std::string& v) { c.mode = v; });
  }

  void training() {
    add<double>("--lr", "Learning rate", [](RunConfig& c, double v) { c.train.learning_rate = v; });
    add<std::size_t>("--batch-size", "Sentences per batch", [](RunConfig& c, std::size_t v) {
      c.train.batch_size = v;
      c.distill.batch_size = v;
    });
    add<std::size_t>("--step1-steps", "Adversarial outer steps",
                     [](RunConfig& c, std::size_t v) { c.train.step1_steps = v; });
    add<std::size_t>("--step2-steps", "Multi-objective steps",
                     [](RunConfig& c, std::size_t v) { c.train.step2_steps = v; });
    add<double>("--beta", "Consistency weight", [](RunConfig& c, double v) { c.train.beta = v; });
    add<double>("--lambda", "Gradient reversal factor", [](RunConfig& c, double v) { c.train.lambda = v; });
    add<double>("--clip", "Discriminator clip bound", [](RunConfig& c, double v) { c.train.clip = v; });
    add<std::size_t>("--critic-iters", "Discriminator updates per outer step",
                     [](RunConfig& c, std::size_t v) { c.train.critic_iters = v; });
    add<std::string>("--schedule", "sequential or interleaved",
                     [](RunConfig& c, const std::string& v) { c.train.schedule = parse_schedule(v); });
    add<std::size_t>("--window", "Checkpoint selection window (steps)",
                     [](RunConfig& c, std::size_t v) { c.train.selection_window = v; });
    add<std::size_t>("--eval-interval", "Steps between dev evaluations",
                     [](RunConfig& c, std::size_t v) { c.train.eval_interval = v; });
    add<std::size_t>("--warm-steps", "Student warm-start steps",
                     [](RunConfig& c, std::size_t v) { c.distill.warm_steps = v; });
    add<std::size_t>("--kd-steps", "Student distillation steps",
                     [](RunConfig& c, std::size_t v) { c.distill.kd_steps = v; });
    add<std::size_t>("--teachers", "Teachers in multi-teacher mode",
                     [](RunConfig& c, std::size_t v) { c.teachers = v; });
  }

  RunConfig resolve() const {
    RunConfig c;
    if (!config_path_.empty()) c = run_config_from_json(read_file(config_path_), c);
    for (const auto& a : apply_) a(c);
    c.distill.learning_rate = c.train.learning_rate;
    if (c.out.empty()) throw UsageError("--out is required");
    return c;
  }

 private:
  CLI::App* app_;
  std::string config_path_;
  std::vector<std::function<void(RunConfig&)>> apply_;
};

CorpusBundle load_data(const RunConfig& c) {
  return c.data.empty() ? synth_bilingual(c.synth) : load_bundle(c.data);
}

std::vector<std::string> resolve_targets(const RunConfig& c, const CorpusBundle& b) {
  if (c.languages.empty()) return b.target_langs;
  for (const auto& l : c.languages)
    if (std::find(b.target_langs.begin(), b.target_langs.end(), l) == b.target_langs.end())
      throw std::runtime_error("bundle has no target language '" + l + "'");
  return c.languages;
}

std::string seed_dir(std::uint64_t seed) { return "seed-" + std::to_string(seed); }

void write_config(const RunConfig& c) { write_file(fs::path(c.out) / "config.json", run_config_json(c) + "\n"); }

int cmd_gen_data(const RunConfig& c, const std::string& raw_dir, const std::string& src_lang,
                 const std::string& tgt_lang, std::ostream& out) {
  CorpusBundle b;
  if (!raw_dir.empty()) {
    b.source_lang = src_lang;
    b.target_langs = {tgt_lang};
    bool any = false;
    for (SplitName s : {SplitName::Train, SplitName::Dev, SplitName::Test}) {
      const fs::path p = fs::path(raw_dir) / (std::string(to_string(s)) + ".txt");
      if (!fs::exists(p)) continue;
      CorpusBundle part = import_raw(p, src_lang, tgt_lang, s);
      b.split(s) = std::move(part.split(s));
      any = true;
    }
    if (!any) throw std::runtime_error("no train.txt, dev.txt or test.txt under " + raw_dir);
  } else {
    b = synth_bilingual(c.synth);
  }
  save_bundle(b, c.out);
  write_config(c);
  out << format_stats(corpus_stats(b));
  return 0;
}

int cmd_train(const RunConfig& c, std::ostream& out) {
  TrainMode mode;
  try {
    mode = parse_train_mode(c.mode);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  c.train.validate();
  const CorpusBundle bundle = load_data(c);
  const std::vector<std::string> targets = resolve_targets(c, bundle);
  const Vocabulary vocab = Vocabulary::from_bundle(bundle);
  const std::string fingerprint = config_fingerprint(c.train, c.model, c.mode, targets);
  std::vector<std::string> eval_langs{bundle.source_lang};
  eval_langs.insert(eval_langs.end(), targets.begin(), targets.end());

  write_config(c);
  std::vector<EvalReport> reports;
  for (std::uint64_t seed : c.train.seeds) {
    const fs::path dir = fs::path(c.out) / seed_dir(seed);
    fs::create_directories(dir / "checkpoints");
    std::ofstream log(dir / "log.jsonl", std::ios::binary);
    TrainObserver obs;
    obs.on_log = [&](const LogRecord& r) { log << log_line(r) << '\n'; };
    Model model(vocab, c.model, seed);
    Trainer trainer(model, make_training_data(bundle, targets, mode == TrainMode::ZeroShot), c.train, mode, seed);
    TrainResult result = trainer.run(&obs);
    log.close();
    if (!log) throw std::runtime_error("failed writing " + (dir / "log.jsonl").string());

    Model scratch = model.clone();
    char name[64];
    for (const auto& ck : result.checkpoints) {
      restore(scratch.all_params(), ck.params);
      std::snprintf(name, sizeof name, "step-%06zu.json", ck.step);
      save_checkpoint(scratch, {ck.step, ck.dev_f1, fingerprint}, dir / "checkpoints" / name);
    }
    save_checkpoint(model, {result.selected_step, result.selected_dev_f1, fingerprint}, dir / "model.json");
    EvalReport report = evaluate_model(model, bundle, SplitName::Test, eval_langs, seed);
    write_report(report, dir);
    reports.push_back(report);
    char line[160];
    std::snprintf(line, sizeof line, "seed %llu: selected step %zu (source dev F1 %.4f)", static_cast<unsigned long long>(seed),
                  result.selected_step, result.selected_dev_f1);
    out << line;
    for (const auto& l : report.languages) {
      std::snprintf(line, sizeof line, "  %s %.4f", l.lang.c_str(), l.mean_f1);
      out << line;
    }
    out << '\n';
  }
  write_report(aggregate(reports), c.out);
  return 0;
}

int cmd_distill(const RunConfig& c, const std::vector<std::string>& teacher_paths, std::ostream& out) {
  DistillMode mode;
  try {
    mode = parse_distill_mode(c.mode);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  c.train.validate();
  if (mode == DistillMode::Multi && teacher_paths.empty() && c.teachers < 2)
    throw UsageError("multi-teacher distillation needs --teachers >= 2");
  const CorpusBundle bundle = load_data(c);
  const std::vector<std::string> targets = resolve_targets(c, bundle);
  const Vocabulary vocab = Vocabulary::from_bundle(bundle);
  std::vector<Model> loaded;
  for (const auto& p : teacher_paths) loaded.push_back(load_checkpoint(p));

  write_config(c);
  std::vector<EvalReport> reports;
  for (std::uint64_t seed : c.train.seeds) {
    const fs::path dir = fs::path(c.out) / seed_dir(seed);
    // Each job distills one student for a set of target languages.
    std::vector<std::vector<std::string>> jobs;
    if (mode == DistillMode::Multilingual) jobs.push_back(targets);
    else
      for (const auto& t : targets) jobs.push_back({t});
    EvalReport seed_report;
    for (const auto& langs : jobs) {
      std::vector<Model> trained;
      std::vector<const Model*> teachers;
      if (!loaded.empty()) {
        for (const auto& m : loaded) teachers.push_back(&m);
      } else {
        const std::size_t k = mode == DistillMode::Multi ? c.teachers : 1;
        for (std::size_t i = 0; i < k; ++i)
          trained.push_back(
              train_run(bundle, vocab, TrainMode::Msmo, langs, c.train, c.model, teacher_seed(seed, i)).model);
        for (const auto& m : trained) teachers.push_back(&m);
      }
      DistillResult r = distill(mode, TeacherEnsemble::equal(teachers), bundle, langs, c.distill, seed);
      const fs::path job_dir = mode == DistillMode::Multilingual ? dir : dir / langs.front();
      save_checkpoint(r.student, {c.distill.warm_steps + c.distill.kd_steps, 0.0,
                                  config_fingerprint(c.train, c.model, c.mode, langs)},
                      job_dir / "student.json");
      write_file(job_dir / "soft_labels.jsonl", soft_labels_jsonl(r.soft_labels));
      write_report(r.warm_report, job_dir, "warm_report");
      write_report(r.report, job_dir);
      for (const auto& l : r.report.languages) seed_report.languages.push_back(l);
    }
    write_report(seed_report, dir);
    reports.push_back(seed_report);
    char line[96];
    std::snprintf(line, sizeof line, "seed %llu:", static_cast<unsigned long long>(seed));
    out << line;
    for (const auto& l : seed_report.languages) {
      std::snprintf(line, sizeof line, "  %s %.4f", l.lang.c_str(), l.mean_f1);
      out << line;
    }
    out << '\n';
  }
  write_report(aggregate(reports), c.out);
  return 0;
}

int cmd_eval(const RunConfig& c, const std::string& split_name, std::ostream& out) {
  if (c.checkpoint.empty()) throw UsageError("--checkpoint is required");
  SplitName split;
  if (split_name == "train") split = SplitName::Train;
  else if (split_name == "dev") split = SplitName::Dev;
  else if (split_name == "test") split = SplitName::Test;
  else throw UsageError("--split must be train, dev or test");
  const CorpusBundle bundle = load_data(c);
  const Model model = load_checkpoint(c.checkpoint);
  std::vector<std::string> langs{bundle.source_lang};
  for (const auto& t : resolve_targets(c, bundle)) langs.push_back(t);
  const std::uint64_t seed = c.train.seeds.empty() ? 0 : c.train.seeds.front();
  EvalReport report = evaluate_model(model, bundle, split, langs, seed);
  write_config(c);
  write_report(report, c.out);
  char line[96];
  for (const auto& l : report.languages) {
    const Score& s = l.seeds.front().score;
    std::snprintf(line, sizeof line, "%-6s P %.4f  R %.4f  F1 %.4f\n", l.lang.c_str(), s.precision, s.recall, s.f1);
    out << line;
  }
  return 0;
}

int cmd_table(const RunConfig& c, bool multilingual, bool quiet, std::ostream& out) {
  c.train.validate();
  const CorpusBundle bundle = load_data(c);
  TableConfig tc;
  tc.seeds = c.train.seeds;
  tc.languages = resolve_targets(c, bundle);
  tc.train = c.train;
  tc.model = c.model;
  tc.distill = c.distill;
  tc.teachers = c.teachers;
  tc.multilingual = multilingual;
  write_config(c);
  Progress progress;
  if (!quiet) progress = [&](std::string_view s) { out << "  " << s << '\n' << std::flush; };
  TableResult table = run_table(bundle, tc, progress);
  write_file(fs::path(c.out) / "table.txt", table_text(table));
  write_file(fs::path(c.out) / "table.csv", table_csv(table));
  out << table_text(table);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-lingual aspect sentiment training with adversarial and consistency alignment", "msmo"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic (or imported) bilingual bundle");
  Flags gen_flags(gen);
  gen_flags.common();
  gen_flags.synth();
  std::string raw_dir, src_lang = "src", tgt_lang = "tgt";
  gen->add_option("--from-raw", raw_dir, "Directory with marker-annotated train.txt/dev.txt/test.txt");
  gen->add_option("--source-lang", src_lang, "Source language code for --from-raw");
  gen->add_option("--target-lang", tgt_lang, "Target language code for --from-raw");

  auto* train = app.add_subcommand("train", "Train models, one per seed");
  Flags train_flags(train);
  train_flags.common();
  train_flags.seeds();
  train_flags.data();
  train_flags.mode("zero_shot | msmo | ablation:no_discriminator | ablation:no_consistency");
  train_flags.training();

  auto* dist = app.add_subcommand("distill", "Distill MSMO teachers into a student");
  Flags dist_flags(dist);
  dist_flags.common();
  dist_flags.seeds();
  dist_flags.data();
  dist_flags.mode("distill-s | distill-m | distill-mtl");
  dist_flags.training();
  std::vector<std::string> teacher_paths;
  dist->add_option("--teacher", teacher_paths, "Teacher checkpoint (repeatable); trained when absent");

  auto* eval = app.add_subcommand("eval", "Score a checkpoint");
  Flags eval_flags(eval);
  eval_flags.common();
  eval_flags.data();
  eval_flags.add<std::string>("--checkpoint", "Model checkpoint",
                              [](RunConfig& c, const std::string& v) { c.checkpoint = v; });
  std::string split = "test";
  eval->add_option("--split", split, "train, dev or test");

  auto* table = app.add_subcommand("table", "Compare all methods over seeds and languages");
  Flags table_flags(table);
  table_flags.common();
  table_flags.seeds();
  table_flags.data();
  table_flags.mode("ignored; the table runs every method");
  table_flags.training();
  bool multilingual = false, quiet = false;
  table->add_flag("--multilingual", multilingual, "Add the multilingual distillation row");
  table->add_flag("--quiet", quiet, "No progress lines");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) {
      RunConfig c = gen_flags.resolve();
      return cmd_gen_data(c, raw_dir, src_lang, tgt_lang, out);
    }
    if (train->parsed()) return cmd_train(train_flags.resolve(), out);
    if (dist->parsed()) return cmd_distill(dist_flags.resolve(), teacher_paths, out);
    if (eval->parsed()) return cmd_eval(eval_flags.resolve(), split, out);
    if (table->parsed()) return cmd_table(table_flags.resolve(), multilingual, quiet, out);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help("", CLI::AppFormatMode::All);
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace msmo::cli
