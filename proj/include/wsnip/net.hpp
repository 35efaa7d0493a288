#pragma once
// Minimal neural-network core: dense matrices, named parameters, MLPs with
// hand-written reverse mode, Adam, learning-rate schedules and checkpoints.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace wsnip {

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const double& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::size_t size() const noexcept { return data.size(); }
};

// a * b, a^T * b and a * b^T through the active kernel table.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

// Shifted softplus ln(e^x / 2 + 1/2) and its derivative (the logistic function).
double ssp(double x);
double ssp_derivative(double x);

struct Parameter {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  // Buffers (normalization constants) are saved but never updated by Adam.
  bool trainable = true;

  std::size_t size() const noexcept { return value.size(); }
};

// Named arrays in insertion order. Addresses stay stable for the lifetime of the set.
class ParameterSet {
 public:
  Parameter& add(const std::string& name, std::vector<std::size_t> shape, bool trainable = true);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  // Throws ArgumentError for an unknown name.
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  std::size_t size() const noexcept { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad();
  // Number of trainable scalars.
  std::size_t trainable_count() const;

  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

// Activations recorded by a forward pass.
struct MlpTape {
  std::vector<Matrix> inputs;  // input of each layer
  std::vector<Matrix> pre;     // pre-activation of each layer
  bool recorded = false;
};

// Dense layers y = x W + b; weights are [in x out]. Hidden layers use ssp; the
// output layer is linear unless activate_output is set.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParameterSet& params, const std::string& prefix, std::vector<std::size_t> widths, bool activate_output);

  // Glorot-uniform weights, zero biases.
  void init(std::mt19937_64& rng);

  Matrix forward(const Matrix& x, MlpTape* tape = nullptr) const;
  // Accumulates parameter gradients and returns d loss / d x.
  // Throws StateError when the tape holds no forward pass.
  Matrix backward(const MlpTape& tape, const Matrix& dy) const;

  const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  std::size_t input_dim() const { return widths_.front(); }
  std::size_t output_dim() const { return widths_.back(); }
  std::size_t layers() const noexcept { return weights_.size(); }
  std::size_t parameter_count() const;
  Parameter& weight(std::size_t layer) { return *weights_.at(layer); }
  Parameter& bias(std::size_t layer) { return *biases_.at(layer); }

 private:
  std::vector<std::size_t> widths_;
  bool activate_output_ = false;
  std::vector<Parameter*> weights_;
  std::vector<Parameter*> biases_;
};

void glorot_uniform(Parameter& weight, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

enum class SchedulerKind { constant, slanted_triangular, linear_decay };

std::string to_string(SchedulerKind kind);
SchedulerKind parse_scheduler_kind(const std::string& s);

inline constexpr double kSlantedWarmupFraction = 0.1;
inline constexpr double kSlantedRatio = 25.0;

struct TrainState {
  std::uint64_t step = 0;
  SchedulerKind scheduler = SchedulerKind::slanted_triangular;
  double base_lr = 1e-3;
  double final_lr = 1e-5;  // linear_decay end point
  std::uint64_t total_steps = 0;
  std::size_t batch_size = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Piecewise linear; steps beyond total_steps clamp to the final value.
double lr_at(const TrainState& state, std::uint64_t step);

// One Adam update of every trainable parameter with the rate lr_at(state, state.step),
// then increments state.step. A non-finite gradient throws TrainingError naming the array.
void adam_step(TrainState& state, ParameterSet& params);

// Rescales trainable gradients so their global L2 norm is at most max_norm.
void clip_gradients(ParameterSet& params, double max_norm);

inline constexpr const char* kCheckpointFormat = "wsnip-checkpoint/1";

struct CheckpointArray {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> adam_m;  // empty when not saved
  std::vector<double> adam_v;
  bool trainable = true;
};

struct Checkpoint {
  std::map<std::string, CheckpointArray> arrays;
  TrainState state;
  // Free-form metadata (model spec, provenance) as a JSON text.
  std::string meta = "{}";
};

Checkpoint make_checkpoint(const ParameterSet& params, const TrainState& state, const std::string& meta = "{}");
std::string checkpoint_to_json(const Checkpoint& ckpt);
// Throws ParseError on malformed input.
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Copies every checkpoint array whose name starts with `prefix` into params.
// All arrays are checked before anything is written; a missing or differently
// shaped array throws IncompatibleCheckpointError. Returns the number copied.
std::size_t apply_checkpoint(ParameterSet& params, const Checkpoint& ckpt, const std::string& prefix = "",
                             bool with_moments = false);

}  // namespace wsnip
