#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msmo/autodiff.hpp"

namespace msmo {

struct NamedParam {
  std::string name;
  ad::Var var;
};

using ParamList = std::vector<NamedParam>;
using ParamSnapshot = std::vector<ad::Tensor>;

inline ParamSnapshot snapshot(const ParamList& params) {
  ParamSnapshot out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.var.value());
  return out;
}

void restore(const ParamList& params, const ParamSnapshot& snap);
void zero_grad(const ParamList& params);

// FNV-1a over the raw bytes of every value; equal hashes mean bit-equal
// parameters for all practical purposes.
std::uint64_t param_hash(const ParamList& params);

inline ParamList concat(ParamList a, const ParamList& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace msmo
