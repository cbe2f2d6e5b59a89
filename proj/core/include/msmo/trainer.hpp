#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msmo/corpus.hpp"
#include "msmo/model.hpp"
#include "msmo/optim.hpp"

namespace msmo {

enum class Schedule { Sequential, Interleaved };
std::string_view to_string(Schedule s);
Schedule parse_schedule(std::string_view s);

enum class TrainMode { ZeroShot, Msmo, NoDiscriminator, NoConsistency };
std::string_view to_string(TrainMode m);
TrainMode parse_train_mode(std::string_view s);

// Which aligned variant pairs feed the consistency loss.
struct ConsistencyPairs {
  bool source_target = true;    // (S, T)
  bool source_switched = true;  // (S, S_T)
  bool target_switched = true;  // (T, T_S)
};

struct TrainConfig {
  double learning_rate = 5e-3;
  std::size_t batch_size = 16;
  std::size_t step1_steps = 300;
  std::size_t step2_steps = 1500;
  double beta = 1e-3;
  double lambda = 1.0;
  double clip = 0.01;
  std::size_t critic_iters = 5;
  Schedule schedule = Schedule::Sequential;
  std::size_t selection_window = 300;
  std::size_t eval_interval = 50;
  ConsistencyPairs pairs;
  std::vector<std::uint64_t> seeds{1};

  void validate() const;  // throws std::invalid_argument
};

// Per-target consistency weights tuned for full-size pretrained encoders,
// targets ordered FR, ES, NL, RU.
inline constexpr std::array<double, 4> kBetaPresetMbert{4.5e-4, 2.5e-4, 2.5e-4, 3.5e-4};
inline constexpr std::array<double, 4> kBetaPresetXlmr{2.5e-3, 1.5e-3, 1.5e-3, 3.5e-3};

// The sentences a run trains on. Training draws only from the train split;
// `dev` is the source-language dev split used for checkpoint selection.
struct TrainingData {
  std::vector<const ParallelExample*> examples;
  std::vector<Variant> variants;  // variants entering the supervised loss
  std::vector<const TaggedSentence*> source_side;  // S and S_T
  std::vector<const TaggedSentence*> target_side;  // T and T_S
  std::vector<const TaggedSentence*> dev;
};

TrainingData make_training_data(const CorpusBundle& bundle, const std::vector<std::string>& targets,
                                bool source_only);

struct LogRecord {
  std::size_t step = 0;
  std::string stage;  // "step1" or "step2"
  double loss_ce = 0.0;
  double loss_cons = 0.0;
  double loss_total = 0.0;
  std::optional<double> j_q;
  std::optional<double> dev_f1;
};
std::string log_line(const LogRecord& r);
LogRecord parse_log_line(std::string_view line);

struct Checkpoint {
  std::size_t step = 0;
  double dev_f1 = 0.0;
  ParamSnapshot params;
};

// Best dev F1 among checkpoints with step >= last_step - window; ties go to
// the later step.
const Checkpoint& select_checkpoint(std::span<const Checkpoint> checkpoints, std::size_t window);

struct TrainObserver {
  std::function<void(std::size_t outer_step, std::size_t critic_iter, const Model&)> after_critic_update;
  std::function<void(const LogRecord&)> on_log;
};

struct TrainResult {
  std::vector<LogRecord> log;
  std::vector<Checkpoint> checkpoints;
  std::size_t selected_step = 0;
  double selected_dev_f1 = 0.0;
  std::uint64_t init_hash = 0;         // all parameters before training
  std::uint64_t after_step1_hash = 0;  // all parameters once Step 1 finished
  double final_j_q = 0.0;
};

class Trainer {
 public:
  Trainer(Model& model, TrainingData data, TrainConfig cfg, TrainMode mode, std::uint64_t seed);

  TrainResult run(const TrainObserver* observer = nullptr);

  // Single updates, exposed for tests.
  // Maximizes J_q over the discriminator, then clips it; returns J_q before the update.
  double critic_update();
  // Encoder step through the gradient reversal; returns J_q on the batch.
  double encoder_adversarial_update();
  LogRecord multiobjective_update(std::size_t step);
  double dev_f1() const;

  const TrainConfig& config() const { return cfg_; }
  bool uses_step1() const { return mode_ == TrainMode::Msmo || mode_ == TrainMode::NoConsistency; }
  double effective_beta() const;

 private:
  std::vector<const TaggedSentence*> sample(const std::vector<const TaggedSentence*>& pool, std::size_t n, Rng& rng);
  std::vector<const ParallelExample*> next_groups(std::size_t n);
  void run_step1(std::size_t steps, TrainResult& result, const TrainObserver* observer);
  void run_step2(std::size_t steps, TrainResult& result, const TrainObserver* observer);

  Model& model_;
  TrainingData data_;
  TrainConfig cfg_;
  TrainMode mode_;
  Rng step1_rng_, step2_rng_, dropout1_rng_, dropout2_rng_;
  Adam critic_opt_, adversarial_opt_, task_opt_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t step1_done_ = 0, step2_done_ = 0;
};

}  // namespace msmo
