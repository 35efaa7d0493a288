#include <cmath>
#include <random>

#include "wsnip/errors.hpp"
#include "wsnip/kernels.hpp"
#include "wsnip/model.hpp"

namespace wsnip {

Network::Network(const RepresentationSpec& spec, OutputKind kind, std::size_t outputs)
    : spec_(spec), kind_(kind), outputs_(outputs) {
  spec_.validate();
  if (outputs_ == 0) throw ArgumentError("a network needs at least one output");
  if (spec_.backend == Backend::descriptor) {
    const std::size_t d = spec_.descriptor.dimension();
    input_mean_ = &params_.add("rep.input_mean", {d}, false);
    input_std_ = &params_.add("rep.input_std", {d}, false);
    std::fill(input_std_->value.begin(), input_std_->value.end(), 1.0);
    std::vector<std::size_t> widths{d};
    for (std::size_t l = 0; l < spec_.depth; ++l) widths.push_back(spec_.hidden);
    rep_mlp_ = Mlp(params_, "rep.mlp.", widths, true);
  } else {
    rep_mp_ = MessagePassing(params_, "rep.", spec_.message_passing);
  }
  const std::size_t f = feature_width();
  if (kind_ == OutputKind::logits) {
    heads_.emplace_back(params_, "cls_head.", std::vector<std::size_t>{f, spec_.hidden, outputs_}, false);
  } else {
    for (std::size_t p = 0; p < outputs_; ++p) {
      const std::string pre = head_prefix(p);
      heads_.emplace_back(params_, pre, std::vector<std::size_t>{f, spec_.hidden, 1}, false);
      out_shift_.push_back(&params_.add(pre + "out_shift", {1}, false));
      out_scale_.push_back(&params_.add(pre + "out_scale", {1}, false));
      out_scale_.back()->value[0] = 1.0;
    }
  }
}

Network Network::potential(const RepresentationSpec& spec, std::size_t heads) {
  return Network(spec, OutputKind::energy, heads);
}

Network Network::classifier(const RepresentationSpec& spec, std::size_t classes) {
  return Network(spec, OutputKind::logits, classes);
}

std::string Network::head_prefix(std::size_t head) const {
  if (kind_ == OutputKind::logits) return "cls_head.";
  return outputs_ == 1 ? "head." : "head" + std::to_string(head) + ".";
}

std::size_t Network::feature_width() const {
  return spec_.backend == Backend::descriptor ? spec_.hidden : spec_.message_passing.hidden;
}

void Network::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  if (spec_.backend == Backend::descriptor) rep_mlp_.init(rng);
  else rep_mp_.init(rng);
  for (auto& h : heads_) h.init(rng);
}

void Network::set_input_normalization(std::span<const double> mean, std::span<const double> std) {
  if (!input_mean_) return;
  if (mean.size() != input_mean_->size() || std.size() != input_std_->size())
    throw ShapeError("input normalization has the wrong length");
  input_mean_->value.assign(mean.begin(), mean.end());
  input_std_->value.assign(std.begin(), std.end());
}

void Network::set_output_scaling(std::size_t head, double shift, double scale) {
  if (kind_ != OutputKind::energy) throw StateError("output scaling applies to energy heads only");
  if (!std::isfinite(shift) || !std::isfinite(scale) || !(scale > 0.0))
    throw ArgumentError("output scaling must be finite with a positive scale");
  out_shift_.at(head)->value[0] = shift;
  out_scale_.at(head)->value[0] = scale;
}

std::pair<double, double> Network::output_scaling(std::size_t head) const {
  if (kind_ != OutputKind::energy) return {0.0, 1.0};
  return {out_shift_.at(head)->value[0], out_scale_.at(head)->value[0]};
}

Matrix Network::represent(const FeatureBatch& batch, Tape* tape) const {
  if (spec_.backend == Backend::descriptor) {
    if (batch.x.rows != batch.atoms() || (batch.atoms() > 0 && batch.x.cols != input_mean_->size()))
      throw ShapeError("descriptor batch does not match the network input");
    Matrix x = batch.x;
    x.cols = input_mean_->size();
    const auto& mu = input_mean_->value;
    const auto& sd = input_std_->value;
    for (std::size_t a = 0; a < x.rows; ++a)
      for (std::size_t c = 0; c < x.cols; ++c) x(a, c) = (x(a, c) - mu[c]) / sd[c];
    return rep_mlp_.forward(x, tape ? &tape->rep_mlp : nullptr);
  }
  if (batch.graph.species_index.size() != batch.atoms()) throw ShapeError("graph batch does not match the atom count");
  return rep_mp_.forward(batch.graph, tape ? &tape->rep_mp : nullptr);
}

Matrix Network::forward(const FeatureBatch& batch, Tape* tape) const {
  if (tape) {
    tape->recorded = false;
    tape->heads.assign(heads_.size(), MlpTape{});
  }
  Matrix f = represent(batch, tape);
  const std::size_t C = batch.configs();
  Matrix out(C, outputs_);
  if (kind_ == OutputKind::logits) {
    Matrix pooled(C, f.cols);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t a = batch.offsets[c]; a < batch.offsets[c + 1]; ++a)
        kernels::active().axpy(f.cols, 1.0, &f(a, 0), &pooled(c, 0));
    out = heads_[0].forward(pooled, tape ? &tape->heads[0] : nullptr);
    if (tape) tape->pooled = std::move(pooled);
  } else {
    for (std::size_t p = 0; p < heads_.size(); ++p) {
      const Matrix y = heads_[p].forward(f, tape ? &tape->heads[p] : nullptr);
      const double shift = out_shift_[p]->value[0];
      const double scale = out_scale_[p]->value[0];
      for (std::size_t c = 0; c < C; ++c) {
        double e = 0.0;
        for (std::size_t a = batch.offsets[c]; a < batch.offsets[c + 1]; ++a) e += scale * y.data[a] + shift;
        out(c, p) = e;
      }
    }
  }
  if (tape) {
    tape->features = std::move(f);
    tape->recorded = true;
  }
  return out;
}

void Network::backward(const FeatureBatch& batch, const Tape& tape, const Matrix& dout) {
  if (!tape.recorded) throw StateError("network backward called before forward");
  const std::size_t C = batch.configs();
  if (dout.rows != C || dout.cols != outputs_) throw ShapeError("output gradient has the wrong shape");
  const std::size_t A = batch.atoms();
  Matrix df(A, feature_width());
  const auto& k = kernels::active();
  if (kind_ == OutputKind::logits) {
    const Matrix dp = heads_[0].backward(tape.heads[0], dout);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t a = batch.offsets[c]; a < batch.offsets[c + 1]; ++a) k.axpy(df.cols, 1.0, &dp(c, 0), &df(a, 0));
  } else {
    for (std::size_t p = 0; p < heads_.size(); ++p) {
      const double scale = out_scale_[p]->value[0];
      Matrix dy(A, 1);
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t a = batch.offsets[c]; a < batch.offsets[c + 1]; ++a) dy.data[a] = scale * dout(c, p);
      const Matrix d = heads_[p].backward(tape.heads[p], dy);
      k.axpy(df.size(), 1.0, d.data.data(), df.data.data());
    }
  }
  if (spec_.backend == Backend::descriptor) rep_mlp_.backward(tape.rep_mlp, df);
  else rep_mp_.backward(batch.graph, tape.rep_mp, df);
}

Matrix Network::atom_features(const FeatureBatch& batch) const { return represent(batch, nullptr); }

Matrix Network::pooled_features(const FeatureBatch& batch) const {
  const Matrix f = represent(batch, nullptr);
  Matrix pooled(batch.configs(), f.cols);
  for (std::size_t c = 0; c < batch.configs(); ++c)
    for (std::size_t a = batch.offsets[c]; a < batch.offsets[c + 1]; ++a)
      for (std::size_t j = 0; j < f.cols; ++j) pooled(c, j) += f(a, j);
  return pooled;
}

Matrix predict(const Network& net, const FeatureStore& store, std::span<const std::size_t> indices, std::size_t batch) {
  Matrix out(indices.size(), net.outputs());
  if (batch == 0) batch = 64;
  for (std::size_t s = 0; s < indices.size(); s += batch) {
    const std::size_t e = std::min(indices.size(), s + batch);
    const FeatureBatch b = gather(store, indices.subspan(s, e - s));
    const Matrix y = net.forward(b);
    std::copy(y.data.begin(), y.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(s * net.outputs()));
  }
  return out;
}

}  // namespace wsnip
