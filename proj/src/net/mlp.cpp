#include <cmath>

#include "wsnip/errors.hpp"
#include "wsnip/kernels.hpp"
#include "wsnip/net.hpp"

namespace wsnip {

Parameter& ParameterSet::add(const std::string& name, std::vector<std::size_t> shape, bool trainable) {
  if (find(name)) throw ArgumentError("duplicate parameter '" + name + "'");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  p->shape = std::move(shape);
  p->value.assign(n, 0.0);
  p->grad.assign(n, 0.0);
  p->adam_m.assign(n, 0.0);
  p->adam_v.assign(n, 0.0);
  p->trainable = trainable;
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

Parameter& ParameterSet::at(const std::string& name) {
  if (auto* p = find(name)) return *p;
  throw ArgumentError("unknown parameter '" + name + "'");
}

const Parameter& ParameterSet::at(const std::string& name) const {
  if (const auto* p = find(name)) return *p;
  throw ArgumentError("unknown parameter '" + name + "'");
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

std::size_t ParameterSet::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p->trainable) n += p->size();
  return n;
}

std::vector<std::vector<double>> ParameterSet::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParameterSet::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != params_.size()) throw ShapeError("snapshot does not match the parameter set");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].size() != params_[i]->size()) throw ShapeError("snapshot size mismatch for " + params_[i]->name);
    params_[i]->value = values[i];
  }
}

void glorot_uniform(Parameter& weight, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& w : weight.value) w = dist(rng);
}

Mlp::Mlp(ParameterSet& params, const std::string& prefix, std::vector<std::size_t> widths, bool activate_output)
    : widths_(std::move(widths)), activate_output_(activate_output) {
  if (widths_.size() < 2) throw ArgumentError("an MLP needs at least an input and an output width");
  for (auto w : widths_)
    if (w == 0) throw ArgumentError("MLP widths must be positive");
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const std::string base = prefix + std::to_string(l);
    weights_.push_back(&params.add(base + ".weight", {widths_[l], widths_[l + 1]}));
    biases_.push_back(&params.add(base + ".bias", {widths_[l + 1]}));
  }
}

void Mlp::init(std::mt19937_64& rng) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    glorot_uniform(*weights_[l], widths_[l], widths_[l + 1], rng);
    std::fill(biases_[l]->value.begin(), biases_[l]->value.end(), 0.0);
  }
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) n += widths_[l] * widths_[l + 1] + widths_[l + 1];
  return n;
}

Matrix Mlp::forward(const Matrix& x, MlpTape* tape) const {
  if (x.cols != input_dim())
    throw ShapeError("MLP input has " + std::to_string(x.cols) + " columns, expected " + std::to_string(input_dim()));
  const auto& k = kernels::active();
  if (tape) {
    tape->inputs.clear();
    tape->pre.clear();
    tape->recorded = false;
  }
  Matrix h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const std::size_t in = widths_[l];
    const std::size_t out = widths_[l + 1];
    Matrix z(h.rows, out);
    if (h.rows > 0) {
      k.matmul(h.rows, out, in, h.data.data(), in, weights_[l]->value.data(), out, z.data.data(), out, false);
      k.add_row_vector(h.rows, out, biases_[l]->value.data(), z.data.data());
    }
    const bool act = l + 1 < weights_.size() || activate_output_;
    if (tape) {
      tape->inputs.push_back(std::move(h));
      if (act) tape->pre.push_back(z);
      else tape->pre.emplace_back();
    }
    if (act)
      for (auto& v : z.data) v = ssp(v);
    h = std::move(z);
  }
  if (tape) tape->recorded = true;
  return h;
}

Matrix Mlp::backward(const MlpTape& tape, const Matrix& dy) const {
  if (!tape.recorded || tape.inputs.size() != weights_.size()) throw StateError("MLP backward called before forward");
  if (dy.cols != output_dim() || dy.rows != tape.inputs.front().rows)
    throw ShapeError("MLP output gradient has the wrong shape");
  const auto& k = kernels::active();
  Matrix g = dy;
  for (std::size_t l = weights_.size(); l-- > 0;) {
    const std::size_t in = widths_[l];
    const std::size_t out = widths_[l + 1];
    const bool act = l + 1 < weights_.size() || activate_output_;
    if (act) {
      const Matrix& z = tape.pre[l];
      for (std::size_t i = 0; i < g.size(); ++i) g.data[i] *= ssp_derivative(z.data[i]);
    }
    const Matrix& x = tape.inputs[l];
    if (g.rows > 0) {
      const Matrix xt = transpose(x);
      k.matmul(in, out, g.rows, xt.data.data(), xt.cols, g.data.data(), out, weights_[l]->grad.data(), out, true);
      k.column_sums(g.rows, out, g.data.data(), biases_[l]->grad.data());
    }
    Matrix dx(g.rows, in);
    if (g.rows > 0) {
      Matrix wt(out, in);
      const auto& w = weights_[l]->value;
      for (std::size_t r = 0; r < in; ++r)
        for (std::size_t c = 0; c < out; ++c) wt.data[c * in + r] = w[r * out + c];
      k.matmul(g.rows, in, out, g.data.data(), out, wt.data.data(), in, dx.data.data(), in, false);
    }
    g = std::move(dx);
  }
  return g;
}

}  // namespace wsnip
