#pragma once
// Synthetic datasets: configuration samplers, oracle/EIP labeling, splits.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "wsnip/atoms.hpp"
#include "wsnip/eip.hpp"

namespace wsnip {

enum class LatticeKind { diamond, fcc };

struct SamplerSpec {
  LatticeKind lattice = LatticeKind::diamond;
  double lattice_constant = 5.431;
  std::array<int, 3> repeats{1, 1, 1};
  // Perturbed cells cycle through these Gaussian displacement widths (A).
  std::vector<double> displacement_tiers{0.05, 0.15, 0.3};
  std::size_t lattice_count = 1400;

  int cluster_min_size = 2;
  int cluster_max_size = 10;
  std::size_t cluster_count = 500;
  // New cluster atoms are placed at this distance range from an existing atom.
  double cluster_bond_min = 2.1;
  double cluster_bond_max = 2.8;

  std::size_t dimer_count = 100;
  double dimer_min = 2.0;
  double dimer_max = 4.0;

  // Clusters with any distance below half of this are rejected.
  double dimer_equilibrium = 2.35;
  int species = 14;
  std::uint64_t seed = 0;

  void validate() const;
};

// "perturbed_lattice", "random_cluster" or "dimer_scan"; stored in the `kind` property.
std::vector<Configuration> sample_configs(const SamplerSpec& spec);

Configuration ideal_lattice(LatticeKind lattice, double lattice_constant, std::array<int, 3> repeats, int species);

struct SplitSpec {
  double test_fraction = 0.2;
  double validation_fraction = 0.2;
  int num_splits = 3;
  std::uint64_t seed = 0;
};

// Indices into Dataset::dft (positions within the DFT-labeled list).
struct Split {
  std::uint64_t seed = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

std::vector<Split> make_splits(std::size_t m, const SplitSpec& spec);

struct Dataset {
  std::vector<Configuration> configs;
  EnergyTable eip;                      // every config
  std::vector<std::size_t> dft;         // indices carrying oracle energies (C_DFT)
  std::vector<double> dft_energy;       // aligned with `dft`
  std::vector<std::size_t> eip_only;    // indices without oracle energies (C_EIP)

  std::size_t m() const noexcept { return dft.size(); }
  std::size_t n() const noexcept { return eip_only.size(); }
  std::size_t atoms(std::size_t config) const { return configs.at(config).size(); }
};

// Oracle energies of the C_EIP pool; read only by ablation and reporting code.
struct SealedOracle {
  std::vector<std::size_t> indices;
  std::vector<double> energies;

  double energy_of(std::size_t config) const;
};

struct BuiltDataset {
  Dataset dataset;
  SealedOracle sealed;
};

// A uniformly random subset of size m receives oracle energies.
BuiltDataset build_dataset(const std::vector<Configuration>& configs, const EipSet& eips, std::size_t m,
                           std::uint64_t seed);

// Fraction of configs whose ground-truth best EIP is each class (dummy last).
std::vector<double> best_eip_distribution(const std::vector<Configuration>& configs, const EnergyTable& table,
                                          const std::vector<double>& oracle, double threshold);

struct GenerateOptions {
  SamplerSpec sampler;
  std::size_t m = 100;
  SplitSpec splits;
  double label_threshold = 0.1;
  // Regenerate (seed + 1) until two EIPs are each best for this fraction of configs.
  double min_class_fraction = 0.10;
  int max_attempts = 10;
};

struct GeneratedDataset {
  BuiltDataset built;
  std::vector<Split> splits;
  std::uint64_t sampler_seed = 0;
};

GeneratedDataset generate_dataset(const GenerateOptions& options, const EipSet& eips);

// On-disk layout of a dataset directory.
inline constexpr const char* kDatasetXyz = "dataset.xyz";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kSealedOracle = "sealed_oracle.json";
inline constexpr const char* kEipSetFile = "eipset.json";

// Writes dataset.xyz, eipset.json, manifest.json and the sealed oracle side file.
// Returns the manifest hash.
std::string save_dataset(const std::string& dir, const GeneratedDataset& data, const EipSet& eips,
                         const GenerateOptions& options);

struct LoadedDataset {
  Dataset dataset;
  EipSet eips;
  std::vector<Split> splits;
  std::string manifest_hash;
  std::string eipset_hash;
};

// Never touches the sealed oracle file.
LoadedDataset load_dataset(const std::string& dir);

SealedOracle load_sealed_oracle(const std::string& dir);

// Number of load_sealed_oracle calls in this process (audited by tests).
std::size_t sealed_oracle_reads();

}  // namespace wsnip
