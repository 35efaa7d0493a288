#pragma once
// Label augmentation: best-EIP labels, the auxiliary classifier, selection of
// EIP-labeled configurations, confidence grouping, and robust LA training.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wsnip/atoms.hpp"
#include "wsnip/eip.hpp"
#include "wsnip/model.hpp"

namespace wsnip {

struct BestEipLabel {
  std::size_t cls = 0;                 // in [0, |P|]; |P| is the dummy class
  std::vector<double> per_atom_errors;  // |E^p - E^DFT| / N per EIP
};

inline constexpr double kDefaultLabelThreshold = 0.1;  // eV/atom

// argmin of per-atom errors (lowest index on ties) when the minimum is <= c, else dummy.
BestEipLabel best_eip_label(std::span<const double> eip_energies, double reference_energy, std::size_t atoms,
                            double threshold = kDefaultLabelThreshold);

// One label per entry of `configs` using table rows and the aligned reference
// energies. A row without one energy per EIP throws DataIntegrityError.
std::vector<BestEipLabel> best_eip_labels(const EnergyTable& table, std::span<const Configuration> all_configs,
                                          std::span<const std::size_t> configs, std::span<const double> reference,
                                          double threshold = kDefaultLabelThreshold);

// Outlier level of an EIP label: the number of thresholds 0.1, 0.2, 0.3 eV/atom its
// per-atom error exceeds (0 = inlier).
int outlier_level(double eip_energy, double reference_energy, std::size_t atoms);

struct PotentialOptions {
  RepresentationSpec repr;
  TrainOptions train;
  std::uint64_t init_seed = 0;
  LaLossOptions loss;
};

// A trained classifier, or a constant map when training saw a single class.
struct ClassifierModel {
  std::size_t classes = 0;  // |P| + 1
  std::optional<Network> net;
  std::optional<std::size_t> constant_class;
  TrainHistory history;
};

// Representation -> per-atom features -> sum pooling -> MLP -> |P|+1 logits,
// trained with cross-entropy; the epoch with the lowest validation loss is kept.
ClassifierModel train_classifier(const FeatureStore& store, std::span<const ClassExample> train,
                                 std::span<const ClassExample> validation, std::size_t classes,
                                 const PotentialOptions& options);

// Rows are class probabilities.
Matrix classifier_probabilities(const ClassifierModel& model, const FeatureStore& store,
                                std::span<const std::size_t> indices);

struct SelectedInstance {
  std::size_t index = 0;  // configuration index
  std::size_t eip = 0;    // predicted best EIP
  double energy = 0.0;    // that EIP's energy
  double confidence = 0.0;
  int level = 0;  // outlier level, filled only by tooling that holds reference energies
};

struct Selection {
  std::vector<SelectedInstance> selected;
  std::vector<SelectedInstance> dropped;  // predicted dummy; eip == |P|, energy unset
};

// argmax class per configuration (lowest index on ties); dummy predictions are dropped.
Selection predict_and_select(const ClassifierModel& model, const FeatureStore& store, const EnergyTable& table,
                             std::span<const std::size_t> pool);

struct AugmentedSet {
  std::vector<EnergyExample> dft;
  std::vector<SelectedInstance> eip;

  // No index carries both kinds, no dummy label, energies match the table exactly.
  void validate(const EnergyTable& table) const;
};

// Thresholds at the 0.33 and 0.66 empirical quantiles (linear interpolation):
// low is c <= q33, medium q33 < c <= q66, high c > q66. Returns positions.
// Throws ArgumentError for fewer than three values.
std::array<std::vector<std::size_t>, 3> confidence_groups(std::span<const double> confidences);

// Linear-interpolation quantile of unsorted data.
double quantile(std::vector<double> values, double q);

struct PotentialModel {
  Network net;
  TrainHistory history;
};

// la_loss training on the augmented set with stratified batches. The potential's
// output scaling is fitted to the DFT instances. Throws ArgumentError without DFT instances.
PotentialModel train_la(const PotentialOptions& options, const FeatureStore& store, const AugmentedSet& set,
                        std::span<const EnergyExample> validation, double alpha);

// Per-atom mean and standard deviation of the targets (std floored at 1e-3 eV).
std::pair<double, double> per_atom_moments(const FeatureStore& store, std::span<const EnergyExample> examples);

// A freshly initialised single-head potential with input normalization from the
// store and output scaling from `fit`.
Network make_potential(const PotentialOptions& options, const FeatureStore& store,
                       std::span<const EnergyExample> fit);

// Extended-XYZ with label_kind=dft|eip, label_source and confidence keys.
std::string augmented_set_xyz(const AugmentedSet& set, std::span<const Configuration> configs,
                              const std::vector<std::string>& eip_names);

}  // namespace wsnip
