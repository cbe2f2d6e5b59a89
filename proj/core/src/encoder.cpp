#include "msmo/encoder.hpp"

#include <cstring>
#include <stdexcept>

namespace msmo {

ad::Tensor uniform_tensor(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  ad::Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = uniform(rng, -bound, bound);
  return t;
}

void restore(const ParamList& params, const ParamSnapshot& snap) {
  if (snap.size() != params.size()) throw std::invalid_argument("restore: snapshot has wrong parameter count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Var v = params[i].var;
    if (v.value().shape() != snap[i].shape())
      throw ad::ShapeError("restore: shape mismatch for " + params[i].name);
    v.mutable_value() = snap[i];
  }
}

void zero_grad(const ParamList& params) {
  for (const auto& p : params) {
    ad::Var v = p.var;
    v.zero_grad();
  }
}

std::uint64_t param_hash(const ParamList& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& p : params) {
    feed(p.name.data(), p.name.size());
    auto d = p.var.value().data();
    feed(d.data(), d.size_bytes());
  }
  return h;
}

BiRnnEncoder::BiRnnEncoder(BiRnnConfig cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.vocab_size == 0 || cfg.embedding_dim == 0 || cfg.hidden_dim == 0)
    throw std::invalid_argument("BiRnnEncoder: dimensions must be positive");
  constexpr double kInit = 0.1;
  const std::size_t d = cfg.embedding_dim, h = cfg.hidden_dim;
  embedding_ = ad::parameter(uniform_tensor(cfg.vocab_size, d, kInit, rng));
  for (Direction* dir : {&fwd_, &bwd_}) {
    dir->input = ad::parameter(uniform_tensor(d, h, kInit, rng));
    dir->recurrent = ad::parameter(uniform_tensor(h, h, kInit, rng));
    dir->bias = ad::parameter(uniform_tensor(1, h, kInit, rng));
  }
  out_weight_ = ad::parameter(uniform_tensor(2 * h, 2 * h, kInit, rng));
  out_bias_ = ad::parameter(uniform_tensor(1, 2 * h, kInit, rng));
}

ParamList BiRnnEncoder::parameters() const {
  return {
      {"encoder.embedding", embedding_},
      {"encoder.fwd.input", fwd_.input},
      {"encoder.fwd.recurrent", fwd_.recurrent},
      {"encoder.fwd.bias", fwd_.bias},
      {"encoder.bwd.input", bwd_.input},
      {"encoder.bwd.recurrent", bwd_.recurrent},
      {"encoder.bwd.bias", bwd_.bias},
      {"encoder.out.weight", out_weight_},
      {"encoder.out.bias", out_bias_},
  };
}

ad::Var BiRnnEncoder::run(const Direction& dir, const ad::Var& projected, bool reverse) const {
  const std::size_t n = projected.value().rows();
  std::vector<ad::Var> states(n);
  ad::Var prev;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = reverse ? n - 1 - k : k;
    ad::Var pre = ad::add(ad::row(projected, t), dir.bias);
    if (prev) pre = ad::add(pre, ad::matmul(prev, dir.recurrent));
    prev = ad::tanh(pre);
    states[t] = prev;
  }
  return ad::concat_rows(states);
}

ad::Var BiRnnEncoder::encode(std::span<const std::size_t> ids) const {
  if (ids.empty()) throw std::invalid_argument("encode: empty token sequence");
  for (std::size_t id : ids)
    if (id >= cfg_.vocab_size)
      throw std::out_of_range("encode: token id " + std::to_string(id) + " outside vocabulary of size " +
                              std::to_string(cfg_.vocab_size));
  ad::Var emb = ad::embedding(embedding_, ids);
  ad::Var f = run(fwd_, ad::matmul(emb, fwd_.input), false);
  ad::Var b = run(bwd_, ad::matmul(emb, bwd_.input), true);
  return ad::tanh(ad::add(ad::matmul(ad::concat_cols(f, b), out_weight_), out_bias_));
}

}  // namespace msmo
