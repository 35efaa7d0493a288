#pragma once
// Multi-task pretraining of a shared representation on EIP energies, transfer
// into fine-tuning, and export of pooled representations.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wsnip/eip.hpp"
#include "wsnip/model.hpp"
#include "wsnip/weaklabel.hpp"

namespace wsnip {

struct PretrainOptions {
  RepresentationSpec repr;
  TrainOptions train;  // slanted-triangular by default
  std::uint64_t init_seed = 0;
  // Divide each head's residuals by the standard deviation of its targets.
  // false gives the literal unweighted multi-task loss.
  bool normalize_targets = true;
};

struct PretrainResult {
  Network net;  // one head per EIP, outputs in eV
  TrainHistory history;
  std::vector<double> head_mae;     // training MAE per head (eV)
  std::vector<double> target_std;   // std of each head's targets (eV)
};

// Trains the multi-head potential on the table rows of `indices`. Throws
// ArgumentError for an empty EIP set.
PretrainResult pretrain(const EnergyTable& table, const FeatureStore& store, std::span<const std::size_t> indices,
                        const PretrainOptions& options);

// Arrays under "rep." only.
Checkpoint representation_checkpoint(const Network& net, const std::string& meta = "{}");

enum class FinetuneMode { mse, la };

// Fresh single-head potential whose representation is copied from `rep`; the head
// is newly initialised and every parameter is trained. `mse` ignores set.eip.
// Throws IncompatibleCheckpointError when representation shapes differ.
PotentialModel finetune(const Checkpoint& rep, const PotentialOptions& options, const FeatureStore& store,
                        const AugmentedSet& set, std::span<const EnergyExample> validation, FinetuneMode mode,
                        double alpha);

struct Pca2 {
  Matrix scores;                // n x 2
  Matrix components;            // 2 x d, orthonormal rows
  std::vector<double> mean;     // d
  std::vector<double> variance; // explained variance of each component
};

// Principal components of the rows of x (largest two).
Pca2 pca_2d(const Matrix& x);

struct RepresentationExport {
  std::vector<std::size_t> ids;
  Matrix pooled;  // n x feature width
  Pca2 pca;       // empty scores when fewer than two configurations
  std::vector<double> energy_per_atom;
};

RepresentationExport export_representations(const Network& net, const FeatureStore& store,
                                            std::span<const std::size_t> ids,
                                            std::span<const double> energy_per_atom);

// Header: id, f0..f{d-1}, pc1, pc2, energy_per_atom.
std::string representation_csv(const RepresentationExport& ex);

// Mean distance between rows of different groups divided by the mean distance
// between distinct rows of the same group (groups given as 0/1 labels).
double group_separation(const Matrix& x, std::span<const int> group);

}  // namespace wsnip
