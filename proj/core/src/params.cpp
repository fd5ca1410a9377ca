#include "rtic/params.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rtic/errors.h"
#include "rtic/textio.h"

namespace rtic::nk {

Tensor& ParamStore::add(const std::string& name, Tensor t) {
  auto [it, inserted] = tensors_.emplace(name, std::move(t));
  if (!inserted) throw DuplicateError("parameter '" + name + "' already exists");
  return it->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw MissingIdError("no parameter named '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw MissingIdError("no parameter named '" + name + "'");
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : tensors_) t.zero_grad();
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors_) n += t.size();
  return n;
}

Tensor uniform(Shape shape, double lo, double hi, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.values) v = dist(rng);
  return t;
}

Tensor uniform_fan_in(Shape shape, std::size_t fan_in, Rng& rng) {
  const double b = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  return uniform(std::move(shape), -b, b, rng);
}

std::string serialize_checkpoint(const ParamStore& params, const std::string& config_hash) {
  std::string out = "# rtic-checkpoint config_hash=" + config_hash + "\n";
  for (const auto& [name, t] : params.tensors()) {
    out += name;
    out += '\t';
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
      if (i) out += 'x';
      out += std::to_string(t.shape[i]);
    }
    out += '\t';
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      if (i) out += ',';
      out += io::format_real(t.values[i]);
    }
    out += '\n';
  }
  return out;
}

void save_checkpoint(const std::string& path, const ParamStore& params, const std::string& config_hash) {
  io::write_file(path, serialize_checkpoint(params, config_hash));
}

Checkpoint load_checkpoint(const std::string& path) {
  auto lines = io::read_lines(path);
  const std::string prefix = "# rtic-checkpoint config_hash=";
  if (lines.empty() || lines[0].rfind(prefix, 0) != 0) throw ParseError(path, 1, "missing checkpoint header");
  Checkpoint ck;
  ck.config_hash = lines[0].substr(prefix.size());
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    auto fields = io::split(lines[ln], '\t');
    if (fields.size() != 3) throw ParseError(path, ln + 1, "expected name<TAB>shape<TAB>values");
    Shape shape;
    for (auto d : io::split(fields[1], 'x')) {
      double v;
      if (!io::parse_real(d, v) || v < 1 || v != std::floor(v)) throw ParseError(path, ln + 1, "bad shape");
      shape.push_back(static_cast<std::size_t>(v));
    }
    std::vector<double> values;
    for (auto f : io::split(fields[2], ',')) {
      double v;
      if (!io::parse_real(f, v)) throw ParseError(path, ln + 1, "bad value '" + std::string(f) + "'");
      values.push_back(v);
    }
    try {
      ck.params.add(std::string(fields[0]), Tensor(std::move(shape), std::move(values)));
    } catch (const ShapeError& e) {
      throw ParseError(path, ln + 1, e.what());
    }
  }
  return ck;
}

namespace {

double eval_forward(const std::function<Var(Tape&)>& f) {
  Tape tape(false);
  const double v = f(tape).item();
  if (!std::isfinite(v)) throw NumericError("finite_diff_check: non-finite objective");
  return v;
}

}  // namespace

GradCheckResult finite_diff_check(const std::function<Var(Tape&)>& f,
                                  const std::vector<std::pair<std::string, Tensor*>>& params,
                                  const GradCheckOptions& opts) {
  if (!(opts.eps > 0)) throw ValidationError("finite_diff_check: eps must be positive");
  for (auto& [_, t] : params) t->zero_grad();
  {
    Tape tape;
    Var loss = f(tape);
    if (!std::isfinite(loss.item())) throw NumericError("finite_diff_check: non-finite objective");
    tape.backward(loss);
  }
  GradCheckResult res;
  Rng rng(opts.seed);
  for (auto& [name, t] : params) {
    std::vector<std::size_t> coords(t->size());
    std::iota(coords.begin(), coords.end(), 0);
    if (opts.max_coords_per_tensor && coords.size() > opts.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opts.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (auto i : coords) {
      const double saved = t->values[i];
      t->values[i] = saved + opts.eps;
      const double fp = eval_forward(f);
      t->values[i] = saved - opts.eps;
      const double fm = eval_forward(f);
      t->values[i] = saved;
      const double fd = (fp - fm) / (2.0 * opts.eps);
      const double ad = t->grad[i];
      const double rel = std::abs(ad - fd) / std::max(1e-12, std::abs(ad) + std::abs(fd));
      ++res.coords_checked;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = name;
        res.worst_index = i;
        res.worst_analytic = ad;
        res.worst_numeric = fd;
      }
    }
  }
  return res;
}

GradCheckResult finite_diff_check(const std::function<Var(Tape&)>& f, ParamStore& params,
                                  const GradCheckOptions& opts) {
  std::vector<std::pair<std::string, Tensor*>> list;
  for (auto& [name, t] : params.tensors()) list.emplace_back(name, &t);
  return finite_diff_check(f, list, opts);
}

}  // namespace rtic::nk
