#pragma once

#include <cstddef>
#include <span>

#include "msmo/autodiff.hpp"
#include "msmo/params.hpp"
#include "msmo/random.hpp"

namespace msmo {

// Feature extractor: token ids -> one hidden vector per token (n x width()).
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual ad::Var encode(std::span<const std::size_t> ids) const = 0;
  virtual std::size_t width() const = 0;
  virtual std::size_t vocab_size() const = 0;
  virtual ParamList parameters() const = 0;
};

struct BiRnnConfig {
  std::size_t vocab_size = 0;
  std::size_t embedding_dim = 32;
  std::size_t hidden_dim = 32;
};

// Embedding + one bidirectional tanh RNN layer + a tanh output projection
// over the concatenated directions. Width is 2 * hidden_dim.
class BiRnnEncoder final : public Encoder {
 public:
  BiRnnEncoder(BiRnnConfig cfg, Rng& init_rng);

  ad::Var encode(std::span<const std::size_t> ids) const override;
  std::size_t width() const override { return 2 * cfg_.hidden_dim; }
  std::size_t vocab_size() const override { return cfg_.vocab_size; }
  ParamList parameters() const override;
  const BiRnnConfig& config() const { return cfg_; }

 private:
  struct Direction {
    ad::Var input;      // d x h
    ad::Var recurrent;  // h x h
    ad::Var bias;       // 1 x h
  };
  ad::Var run(const Direction& dir, const ad::Var& projected, bool reverse) const;

  BiRnnConfig cfg_;
  ad::Var embedding_;
  Direction fwd_, bwd_;
  ad::Var out_weight_;  // 2h x 2h
  ad::Var out_bias_;    // 1 x 2h
};

ad::Tensor uniform_tensor(std::size_t rows, std::size_t cols, double bound, Rng& rng);

}  // namespace msmo
