#include "msmo/optim.hpp"

#include <cmath>

namespace msmo {

Adam::Adam(ParamList params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(p.var.value().rows(), p.var.value().cols());
    v_.emplace_back(p.var.value().rows(), p.var.value().cols());
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    ad::Var var = params_[k].var;
    const ad::Tensor& g = var.node()->grad;
    if (g.empty()) continue;  // never reached by a backward pass
    ad::Tensor& w = var.mutable_value();
    ad::Tensor& m = m_[k];
    ad::Tensor& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      w[i] -= cfg_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.epsilon);
    }
  }
}

}  // namespace msmo
