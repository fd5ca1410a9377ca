#pragma once

#include <string>
#include <unordered_map>

#include "rtic/params.h"
#include "rtic/tensor.h"

namespace rtic::nk {

// Binds each named parameter to a Tape at most once per forward pass.
class ParamBinder {
 public:
  ParamBinder(Tape& tape, ParamStore& params) : tape_(tape), params_(params) {}
  Var operator()(const std::string& name);
  Tape& tape() const { return tape_; }
  ParamStore& params() const { return params_; }

 private:
  Tape& tape_;
  ParamStore& params_;
  std::unordered_map<std::string, Var> bound_;
};

// prefix.w: (in, out) and prefix.b: (out), weights uniform(+-1/sqrt(in)), zero bias.
void init_linear(ParamStore& ps, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng);
// x: (n, in) -> (n, out)
Var linear(ParamBinder& bind, const std::string& prefix, Var x);

}  // namespace rtic::nk
