#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "msmo/corpus.hpp"
#include "msmo/encoder.hpp"
#include "msmo/heads.hpp"

namespace msmo {

struct ModelConfig {
  std::size_t embedding_dim = 32;
  std::size_t hidden_dim = 32;
  double keep_prob = kDefaultKeepProb;
};

// Encoder M plus the classifier P and discriminator Q. Parameters are graph
// leaves shared by handle, so a Model is move-only; use clone() for an
// independent copy.
class Model {
 public:
  Model(Vocabulary vocab, ModelConfig cfg, std::uint64_t seed);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  Model clone() const;

  const Vocabulary& vocab() const { return vocab_; }
  const ModelConfig& config() const { return cfg_; }
  const Encoder& encoder() const { return *encoder_; }
  const Classifier& classifier() const { return *classifier_; }
  Discriminator& discriminator() { return *discriminator_; }
  const Discriminator& discriminator() const { return *discriminator_; }

  ParamList encoder_params() const { return encoder_->parameters(); }
  ParamList classifier_params() const { return classifier_->parameters(); }
  ParamList discriminator_params() const { return discriminator_->parameters(); }
  ParamList all_params() const;

  ad::Var hidden(const std::vector<std::string>& tokens) const;
  ad::Var tag_probs(const ad::Var& hidden, Rng* dropout_rng) const {
    return classifier_->probs(hidden, dropout_rng);
  }
  ad::Var tag_probs(const std::vector<std::string>& tokens, Rng* dropout_rng = nullptr) const {
    return tag_probs(hidden(tokens), dropout_rng);
  }
  // Evaluation-mode argmax tags; ties go to the lowest tag id.
  std::vector<Tag> predict(const std::vector<std::string>& tokens) const;

 private:
  Vocabulary vocab_;
  ModelConfig cfg_;
  std::unique_ptr<BiRnnEncoder> encoder_;
  std::unique_ptr<Classifier> classifier_;
  std::unique_ptr<Discriminator> discriminator_;
};

std::vector<Tag> argmax_tags(const ad::Tensor& probs);

struct CheckpointMeta {
  std::size_t step = 0;
  double dev_f1 = 0.0;
  std::string config_fingerprint;
};

inline constexpr const char* kCheckpointFormat = "msmo-checkpoint/1";

std::string checkpoint_json(const Model& model, const CheckpointMeta& meta);
Model model_from_checkpoint_json(const std::string& text, CheckpointMeta* meta = nullptr);
void save_checkpoint(const Model& model, const CheckpointMeta& meta, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

}  // namespace msmo
