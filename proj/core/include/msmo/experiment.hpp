#pragma once

// Run configuration, single training runs, and the method x language table.

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "msmo/corpus.hpp"
#include "msmo/distill.hpp"
#include "msmo/evaluate.hpp"
#include "msmo/model.hpp"
#include "msmo/synth.hpp"
#include "msmo/trainer.hpp"

namespace msmo {

struct RunConfig {
  TrainConfig train;
  ModelConfig model;
  DistillConfig distill;
  SynthConfig synth;
  // zero_shot | msmo | ablation:no_discriminator | ablation:no_consistency |
  // distill-s | distill-m | distill-mtl
  std::string mode = "msmo";
  std::vector<std::string> languages;  // target languages; empty means all in the bundle
  std::size_t teachers = 3;
  std::string data;        // bundle directory
  std::string checkpoint;  // model to evaluate
  std::string out;
};

// Flat JSON object whose keys mirror the command-line flag names.
std::string run_config_json(const RunConfig& cfg);
// Overlays the keys present in `text` onto `base`; unknown keys are rejected.
RunConfig run_config_from_json(std::string_view text, RunConfig base = {});

// Stable hex digest of everything that shapes a trained model.
std::string config_fingerprint(const TrainConfig& train, const ModelConfig& model, std::string_view mode,
                               const std::vector<std::string>& languages);

struct TrainedRun {
  Model model;
  TrainResult result;
};

// Builds a fresh model from the bundle vocabulary and trains it for the
// given targets.
TrainedRun train_run(const CorpusBundle& bundle, const Vocabulary& vocab, TrainMode mode,
                     const std::vector<std::string>& targets, const TrainConfig& train, const ModelConfig& model,
                     std::uint64_t seed, const TrainObserver* observer = nullptr);

// Seed of the k-th extra teacher for a run seed (k >= 1).
std::uint64_t teacher_seed(std::uint64_t seed, std::size_t k);

inline constexpr std::string_view kMethodZeroShot = "ZERO-SHOT";
inline constexpr std::string_view kMethodMsmo = "MSMO";
inline constexpr std::string_view kMethodNoDisc = "MSMO w/o discriminator";
inline constexpr std::string_view kMethodNoCons = "MSMO w/o consistency";
inline constexpr std::string_view kMethodStudent = "STUDENT (no distill)";
inline constexpr std::string_view kMethodDistillS = "MSMO-DISTILL-S";
inline constexpr std::string_view kMethodDistillM = "MSMO-DISTILL-M";
inline constexpr std::string_view kMethodDistillMtl = "MTL-MSMO-DISTILL";

struct TableConfig {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<std::string> languages;  // empty means all targets
  TrainConfig train;
  ModelConfig model;
  DistillConfig distill;
  std::size_t teachers = 3;
  bool ablations = true;
  bool distillation = true;
  bool multilingual = false;
};

struct TableRow {
  std::string method;
  EvalReport report;  // aggregated over seeds
};

struct TableResult {
  std::vector<std::string> languages;
  std::vector<TableRow> rows;

  const TableRow* find(std::string_view method) const;
  double mean_f1(std::string_view method) const;  // average over languages
};

using Progress = std::function<void(std::string_view)>;
TableResult run_table(const CorpusBundle& bundle, const TableConfig& cfg, const Progress& progress = {});

std::string table_text(const TableResult& table);
std::string table_csv(const TableResult& table);

}  // namespace msmo
