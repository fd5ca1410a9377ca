#include "rtic/layers.h"

namespace rtic::nk {

Var ParamBinder::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Var v = tape_.param(params_.get(name));
  bound_.emplace(name, v);
  return v;
}

void init_linear(ParamStore& ps, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
  ps.add(prefix + ".w", uniform_fan_in({in, out}, in, rng));
  ps.add(prefix + ".b", Tensor::zeros({out}));
}

Var linear(ParamBinder& bind, const std::string& prefix, Var x) {
  return add_bias(matmul(x, bind(prefix + ".w")), bind(prefix + ".b"));
}

}  // namespace rtic::nk
