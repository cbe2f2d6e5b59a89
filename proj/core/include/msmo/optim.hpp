#pragma once

#include <vector>

#include "msmo/params.hpp"

namespace msmo {

struct AdamConfig {
  double learning_rate = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Dense Adam over a fixed parameter group. Moments start at zero.
class Adam {
 public:
  Adam(ParamList params, AdamConfig cfg);

  void zero_grad() { msmo::zero_grad(params_); }
  // Applies one update from the gradients currently stored on the group.
  void step();
  std::size_t steps_taken() const { return t_; }
  const ParamList& params() const { return params_; }

 private:
  ParamList params_;
  AdamConfig cfg_;
  std::vector<ad::Tensor> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace msmo
