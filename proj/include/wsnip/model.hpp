#pragma once
// Potentials and classifiers built from a representation backend plus MLP
// heads, the cached per-configuration inputs they consume, and training loops.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wsnip/atoms.hpp"
#include "wsnip/loss.hpp"
#include "wsnip/net.hpp"
#include "wsnip/repr.hpp"

namespace wsnip {

enum class Backend { descriptor, message_passing };

std::string to_string(Backend backend);
Backend parse_backend(const std::string& s);

struct RepresentationSpec {
  Backend backend = Backend::descriptor;
  DescriptorSpec descriptor = DescriptorSpec::standard();
  MessagePassingSpec message_passing;
  std::size_t hidden = 128;  // width of the descriptor MLP and of every head
  std::size_t depth = 5;     // stacked layers of the descriptor MLP

  void validate() const;
  double cutoff() const;
};

struct ConfigFeatures {
  std::size_t atoms = 0;
  Matrix descriptors;  // descriptor backend
  Graph graph;         // message-passing backend
};

// Inputs computed once per configuration.
class FeatureStore {
 public:
  FeatureStore() = default;
  static FeatureStore build(const RepresentationSpec& spec, std::span<const Configuration> configs);

  std::size_t size() const noexcept { return items_.size(); }
  const ConfigFeatures& operator[](std::size_t i) const { return items_.at(i); }
  Backend backend() const noexcept { return backend_; }

  // Per-column mean and standard deviation of the descriptors over all atoms
  // (std floored at 1e-8). Empty for the message-passing backend.
  std::pair<std::vector<double>, std::vector<double>> descriptor_moments() const;

 private:
  Backend backend_ = Backend::descriptor;
  std::vector<ConfigFeatures> items_;
};

// Several configurations stacked atom-wise.
struct FeatureBatch {
  std::vector<std::size_t> offsets{0};  // atom range of config c is [offsets[c], offsets[c+1])
  Matrix x;                             // descriptor rows
  Graph graph;                          // merged graph with shifted atom indices

  std::size_t configs() const noexcept { return offsets.size() - 1; }
  std::size_t atoms() const noexcept { return offsets.back(); }
};

FeatureBatch gather(const FeatureStore& store, std::span<const std::size_t> indices);

enum class OutputKind { energy, logits };

// Representation under "rep.", then either energy heads ("head." for a single
// head, "head<p>." otherwise) with per-atom output summed over atoms, or a
// classifier head "cls_head." on sum-pooled features.
//
// Energy heads carry two buffers, out_shift and out_scale: the configuration
// energy is sum_atoms (out_scale * y_atom + out_shift), so outputs are in eV.
class Network {
 public:
  static Network potential(const RepresentationSpec& spec, std::size_t heads = 1);
  static Network classifier(const RepresentationSpec& spec, std::size_t classes);

  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  // Glorot-uniform weights from a seeded generator, zero biases. Buffers keep their values.
  void init(std::uint64_t seed);
  void set_input_normalization(std::span<const double> mean, std::span<const double> std);
  void set_output_scaling(std::size_t head, double shift, double scale);
  std::pair<double, double> output_scaling(std::size_t head) const;

  struct Tape {
    MlpTape rep_mlp;
    MessagePassing::Tape rep_mp;
    Matrix features;  // atoms x feature width
    Matrix pooled;    // classifier only
    std::vector<MlpTape> heads;
    bool recorded = false;
  };

  // configs x outputs: energies (eV) per head, or class logits.
  Matrix forward(const FeatureBatch& batch, Tape* tape = nullptr) const;
  // Accumulates parameter gradients. Throws StateError without a recorded tape.
  void backward(const FeatureBatch& batch, const Tape& tape, const Matrix& dout);

  // Per-atom representation output.
  Matrix atom_features(const FeatureBatch& batch) const;
  // Sum over each configuration's atoms.
  Matrix pooled_features(const FeatureBatch& batch) const;

  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }
  const RepresentationSpec& spec() const noexcept { return spec_; }
  OutputKind kind() const noexcept { return kind_; }
  std::size_t outputs() const noexcept { return outputs_; }
  std::size_t feature_width() const;
  std::string head_prefix(std::size_t head) const;

 private:
  Network(const RepresentationSpec& spec, OutputKind kind, std::size_t outputs);

  Matrix represent(const FeatureBatch& batch, Tape* tape) const;

  RepresentationSpec spec_;
  OutputKind kind_;
  std::size_t outputs_;
  ParameterSet params_;
  Mlp rep_mlp_;
  MessagePassing rep_mp_;
  Parameter* input_mean_ = nullptr;
  Parameter* input_std_ = nullptr;
  std::vector<Mlp> heads_;
  std::vector<Parameter*> out_shift_;
  std::vector<Parameter*> out_scale_;
};

// Batched inference over store entries.
Matrix predict(const Network& net, const FeatureStore& store, std::span<const std::size_t> indices,
               std::size_t batch = 64);

struct TrainOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  SchedulerKind scheduler = SchedulerKind::slanted_triangular;
  double lr = 1e-3;
  double final_lr = 1e-5;
  std::uint64_t seed = 0;  // batch order
  double weight_decay = 0.0;
  double grad_clip = 0.0;
  // Keep the parameters of the epoch with the best validation score.
  bool select_best = true;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;  // at the last step of the epoch
  double train_loss = 0.0;
  double validation = 0.0;           // MAE (eV) or cross-entropy
  double validation_accuracy = 0.0;  // classifier only
  // Label augmentation accounting.
  std::size_t eip_seen = 0;
  std::size_t eip_rejected = 0;
  double sigma_hat = 0.0;  // mean over batches
  double k = 0.0;
  std::array<std::size_t, 3> category_total{};
  std::array<std::size_t, 3> category_used{};

  double rejection_fraction() const {
    return eip_seen ? static_cast<double>(eip_rejected) / static_cast<double>(eip_seen) : 0.0;
  }
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 when nothing was selected
  double best_validation = 0.0;
  TrainState state;
};

struct EnergyExample {
  std::size_t index = 0;  // store entry
  double target = 0.0;    // eV
  int level = 0;          // outlier level for accounting (EIP instances only)
};

struct EnergyTask {
  std::vector<EnergyExample> dft;
  std::vector<EnergyExample> eip;
  std::vector<EnergyExample> validation;
  double alpha = 0.0;
  LaLossOptions loss;
};

// Stratified minibatches: each batch holds ceil(B m / (m + s)) DFT instances and
// the rest EIP instances; when a stratum runs out the other one fills the batch.
// An epoch ends when both strata are exhausted. With alpha == 0 the EIP stratum
// is dropped, which makes the run identical to plain MSE training.
struct BatchPlan {
  std::vector<std::vector<std::size_t>> dft;  // positions into EnergyTask::dft
  std::vector<std::vector<std::size_t>> eip;
};
BatchPlan plan_epoch(std::size_t m, std::size_t s, std::size_t batch_size, std::mt19937_64& rng);
std::size_t batches_per_epoch(std::size_t m, std::size_t s, std::size_t batch_size);

TrainHistory train_energy(Network& net, const FeatureStore& store, const EnergyTask& task, const TrainOptions& options);

struct ClassExample {
  std::size_t index = 0;
  std::size_t label = 0;
};

// Cross-entropy; best validation cross-entropy is kept.
TrainHistory train_logits(Network& net, const FeatureStore& store, std::span<const ClassExample> train,
                          std::span<const ClassExample> validation, const TrainOptions& options);

// Multi-task regression on an n x P target matrix. `head_scale` divides each
// head's residuals (per-head normalization); empty means the literal loss.
TrainHistory train_multitask(Network& net, const FeatureStore& store, std::span<const std::size_t> indices,
                             const Matrix& targets, std::span<const double> head_scale, const TrainOptions& options);

// Mean |E - E_hat| and mean |E - E_hat| / N.
struct EnergyErrors {
  double config_mae = 0.0;
  double atom_mae = 0.0;
};
EnergyErrors energy_errors(const Network& net, const FeatureStore& store, std::span<const EnergyExample> examples);

}  // namespace wsnip
