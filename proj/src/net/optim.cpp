#include <algorithm>
#include <cmath>

#include "wsnip/errors.hpp"
#include "wsnip/kernels.hpp"
#include "wsnip/net.hpp"

namespace wsnip {

std::string to_string(SchedulerKind kind) {
  switch (kind) {
    case SchedulerKind::constant: return "constant";
    case SchedulerKind::slanted_triangular: return "slanted_triangular";
    case SchedulerKind::linear_decay: return "linear_decay";
  }
  return "constant";
}

SchedulerKind parse_scheduler_kind(const std::string& s) {
  if (s == "constant") return SchedulerKind::constant;
  if (s == "slanted_triangular") return SchedulerKind::slanted_triangular;
  if (s == "linear_decay") return SchedulerKind::linear_decay;
  throw ArgumentError("unknown scheduler '" + s + "'");
}

double lr_at(const TrainState& state, std::uint64_t step) {
  const double lr = state.base_lr;
  if (state.scheduler == SchedulerKind::constant || state.total_steps == 0) return lr;
  const double total = static_cast<double>(state.total_steps);
  const double t = static_cast<double>(std::min<std::uint64_t>(step, state.total_steps));
  if (state.scheduler == SchedulerKind::linear_decay) return (1.0 - t / total) * lr + (t / total) * state.final_lr;

  const double low = lr / kSlantedRatio;
  const double cut = kSlantedWarmupFraction * total;
  if (t <= cut) return cut > 0.0 ? low + (lr - low) * (t / cut) : lr;
  return low + (lr - low) * ((total - t) / (total - cut));
}

void adam_step(TrainState& state, ParameterSet& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = params[i];
    if (!p.trainable) continue;
    for (double g : p.grad)
      if (!std::isfinite(g)) throw TrainingError("non-finite gradient in '" + p.name + "' at step " + std::to_string(state.step));
  }
  const double t = static_cast<double>(state.step + 1);
  kernels::AdamCoeffs c{};
  c.lr = lr_at(state, state.step);
  c.beta1 = state.beta1;
  c.beta2 = state.beta2;
  c.eps = state.eps;
  c.bias1 = 1.0 - std::pow(state.beta1, t);
  c.bias2 = 1.0 - std::pow(state.beta2, t);
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (!p.trainable || p.size() == 0) continue;
    k.adam_update(p.size(), p.value.data(), p.grad.data(), p.adam_m.data(), p.adam_v.data(), c);
  }
  ++state.step;
}

void clip_gradients(ParameterSet& params, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].trainable)
      for (double g : params[i].grad) sq += g * g;
  const double n = std::sqrt(sq);
  if (!(n > max_norm)) return;
  const double s = max_norm / n;
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].trainable)
      for (double& g : params[i].grad) g *= s;
}

}  // namespace wsnip
