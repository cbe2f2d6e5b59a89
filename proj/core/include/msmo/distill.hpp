#pragma once

// Distillation into a plain encoder + classifier student. Soft labels are
// built from unlabeled target sentences only; nothing here reads gold tags
// outside the student's warm-start data.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msmo/corpus.hpp"
#include "msmo/evaluate.hpp"
#include "msmo/model.hpp"

namespace msmo {

struct TeacherEnsemble {
  std::vector<const Model*> teachers;
  std::vector<double> weights;

  static TeacherEnsemble equal(std::vector<const Model*> teachers);
  // Non-empty, one weight per teacher, weights >= 0 summing to 1 within
  // 1e-9, and one shared vocabulary.
  void validate() const;
};

// Weighted sum of the teachers' evaluation-mode tag distributions.
ad::Tensor combine_soft_labels(const TeacherEnsemble& ensemble, const UnlabeledSentence& sentence);
// Same combination over precomputed per-teacher outputs (L x K each).
ad::Tensor combine_distributions(std::span<const ad::Tensor> outputs, std::span<const double> weights);

struct SoftLabeled {
  std::string id;
  std::string lang;
  std::vector<std::string> tokens;
  ad::Tensor probs;  // tokens.size() x 13
};
using SoftLabeledSet = std::vector<SoftLabeled>;

SoftLabeledSet soft_label(const TeacherEnsemble& ensemble, std::span<const UnlabeledSentence> sentences);
std::string soft_labels_jsonl(const SoftLabeledSet& set);
SoftLabeledSet soft_labels_from_jsonl(std::string_view text);

// Mean over sentences of the mean over tokens of the class-averaged squared
// error.
ad::Var kd_loss(std::span<const ad::Var> student, std::span<const ad::Var> soft);
ad::Var sentence_kd(const ad::Var& student, const ad::Var& soft);

enum class DistillMode { Single, Multi, Multilingual };
std::string_view to_string(DistillMode m);
DistillMode parse_distill_mode(std::string_view s);

struct DistillConfig {
  double learning_rate = 5e-3;
  std::size_t batch_size = 16;
  std::size_t warm_steps = 1500;
  std::size_t kd_steps = 500;
};

// Student trained with CE on the translated target sentences of the train
// split (final parameters, no selection).
Model warm_start_student(const CorpusBundle& bundle, const Vocabulary& vocab, const ModelConfig& model_cfg,
                         const std::vector<std::string>& targets, const DistillConfig& cfg, std::uint64_t seed);

// Continues training with kd_loss against the soft labels using a fresh
// optimizer; returns the per-step losses.
std::vector<double> kd_train(Model& student, const SoftLabeledSet& soft, const DistillConfig& cfg,
                             std::uint64_t seed);

struct DistillResult {
  Model student;
  SoftLabeledSet soft_labels;
  EvalReport warm_report;  // student before the KD phase
  EvalReport report;
  std::vector<double> kd_losses;
};

// Single: exactly one teacher. Multi: two or more. Multilingual: one teacher,
// student warm-started on every listed target. `warm` may carry an already
// warm-started student to reuse.
DistillResult distill(DistillMode mode, const TeacherEnsemble& ensemble, const CorpusBundle& bundle,
                      const std::vector<std::string>& targets, const DistillConfig& cfg, std::uint64_t seed,
                      const Model* warm = nullptr);

}  // namespace msmo
