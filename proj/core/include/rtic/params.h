#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rtic/rng.h"
#include "rtic/tensor.h"

namespace rtic::nk {

// Named learnable tensors, iterated in name order so that initialization,
// checkpoints and optimizer updates are deterministic.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor t);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  std::size_t size() const { return tensors_.size(); }

  std::map<std::string, Tensor>& tensors() { return tensors_; }
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }

  void zero_grad();
  std::size_t parameter_count() const;
  bool operator==(const ParamStore& o) const { return tensors_ == o.tensors_; }

 private:
  std::map<std::string, Tensor> tensors_;
};

// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
Tensor uniform_fan_in(Shape shape, std::size_t fan_in, Rng& rng);
Tensor uniform(Shape shape, double lo, double hi, Rng& rng);

// Checkpoint text format: a header line carrying the config hash, then one
// `name<TAB>shape<TAB>v1,v2,...` line per tensor (shape as e.g. 3x4).
void save_checkpoint(const std::string& path, const ParamStore& params, const std::string& config_hash);
std::string serialize_checkpoint(const ParamStore& params, const std::string& config_hash);

struct Checkpoint {
  std::string config_hash;
  ParamStore params;
};
Checkpoint load_checkpoint(const std::string& path);

struct GradCheckOptions {
  double eps = 1e-6;
  // Coordinates sampled per tensor; 0 checks every coordinate.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central-difference check of a scalar function of the given tensors. The
// function builds its graph on the Tape it is handed and binds parameters via
// Tape::param. Relative error per coordinate is
// |g_ad - g_fd| / max(1e-12, |g_ad| + |g_fd|).
GradCheckResult finite_diff_check(const std::function<Var(Tape&)>& f, const std::vector<std::pair<std::string, Tensor*>>& params,
                                  const GradCheckOptions& opts = {});
GradCheckResult finite_diff_check(const std::function<Var(Tape&)>& f, ParamStore& params,
                                  const GradCheckOptions& opts = {});

}  // namespace rtic::nk
