#pragma once
// Experiment harness: run configuration, strategies over splits, ablations and
// metrics reports.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wsnip/datagen.hpp"
#include "wsnip/model.hpp"
#include "wsnip/pretrain.hpp"
#include "wsnip/weaklabel.hpp"

namespace wsnip {

enum class Strategy { baseline, la, mp, mp_la };
std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& s);

enum class LabelSource { predicted, true_best, dft };
std::string to_string(LabelSource s);

struct RunConfig {
  std::string dataset;                   // dataset directory
  std::vector<std::string> eip_subset;   // empty: every EIP of the dataset
  Strategy strategy = Strategy::la;
  Backend backend = Backend::descriptor;
  double alpha = 0.5;
  std::uint64_t seed = 0;  // init = seed, batch order = seed + 1, classifier = seed + 2
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::size_t classifier_epochs = 100;
  std::size_t pretrain_epochs = 100;
  double lr = 1e-3;
  double label_threshold = 0.1;
  bool use_tukey = true;
  bool normalize_pretrain = true;
  // Fraction of selected EIP labels shifted by corrupt_shift eV/atom (robustness studies).
  double corrupt_fraction = 0.0;
  double corrupt_shift = 1.0;
  std::vector<std::size_t> splits;  // empty: all
  std::string out = "runs";

  // Throws ConfigError for unknown keys, bad values or missing strategy inputs.
  static RunConfig from_json(const std::string& text);
  std::string to_json() const;
  void validate() const;
};

// Dataset plus cached representation inputs.
struct ExperimentData {
  LoadedDataset data;
  FeatureStore store;
  std::optional<SealedOracle> sealed;
};

ExperimentData load_experiment(const std::string& dataset_dir, Backend backend, bool with_sealed);
// In-memory variant; `sealed` may be empty.
ExperimentData make_experiment(LoadedDataset data, Backend backend, std::optional<SealedOracle> sealed);

// Options only the ablation tooling sets.
struct ArmOptions {
  LabelSource label_source = LabelSource::predicted;
  int confidence_group = -1;  // 0 low, 1 medium, 2 high, -1 all
  bool baseline = true;       // also train the baseline for the improvement
  const Checkpoint* pretrained = nullptr;  // reuse instead of pretraining (mp strategies)
};

struct SplitMetrics {
  std::size_t split = 0;
  double config_mae = 0.0;
  double atom_mae = 0.0;
  double baseline_config_mae = 0.0;
  double baseline_atom_mae = 0.0;
  double validation_mae = 0.0;
  std::size_t best_epoch = 0;
  // Single EIP with the lowest training MAE, evaluated on the test split.
  std::string best_eip;
  double best_eip_config_mae = 0.0;
  double best_eip_atom_mae = 0.0;
  // Classifier on the test split, against the majority training class.
  double classifier_accuracy = 0.0;
  double majority_rate = 0.0;
  // Classifier on the EIP pool; filled only when the sealed oracle is loaded.
  std::optional<double> pool_accuracy;
  std::optional<double> pool_majority_rate;
  std::size_t selected = 0;
  std::size_t dropped = 0;
  std::vector<EpochRecord> epochs;  // robust-loss accounting; empty without EIP labels
  std::vector<double> pretrain_head_mae;
};

struct MetricsReport {
  std::string arm;
  RunConfig config;
  std::string manifest_hash;
  std::string eipset_hash;
  std::vector<SplitMetrics> splits;

  double mean_config_mae() const;
  double mean_atom_mae() const;
  double mean_baseline_config_mae() const;
  double improvement_percent() const;  // (baseline - method) / baseline * 100
};

// One strategy over the configured splits. Reads no sealed data unless
// arm.label_source != predicted or outlier accounting is requested via ex.sealed.
MetricsReport run_strategy(const ExperimentData& ex, const RunConfig& config, const ArmOptions& arm = {},
                           const std::string& arm_name = "");

// Pretrains on the EIP pool and returns the representation-only checkpoint.
Checkpoint pretrain_representation(const ExperimentData& ex, const RunConfig& config);

// Pooled features and PCA of every configuration under `rep`, or under a freshly
// initialised representation when `rep` is null. Per-atom energies come from the
// DFT labels and, when loaded, the sealed oracle; others are NaN.
RepresentationExport export_dataset_representations(const ExperimentData& ex, const RunConfig& config,
                                                    const Checkpoint* rep);

enum class Ablation { label_source, confidence, eip_subset, tukey };
Ablation parse_ablation(const std::string& s);
std::string to_string(Ablation a);

// Arms of one ablation. Throws StateError when the experiment lacks the sealed oracle.
std::vector<MetricsReport> run_ablation(const ExperimentData& ex, const RunConfig& config, Ablation which);

std::string report_json(const MetricsReport& report);
MetricsReport parse_report(const std::string& text);

// One row per split plus a mean row.
std::string report_csv(const MetricsReport& report);
// epoch, rejection fraction, sigma_hat, k and per-category totals/used, averaged over splits.
std::string rejection_csv(const MetricsReport& report);
// Arm comparison (mean MAEs and improvement).
std::string comparison_csv(const std::vector<MetricsReport>& reports);

// Groups reports by arm and averages across runs (mean and std over runs).
// Throws DataIntegrityError when manifest or EipSet hashes differ.
std::string merge_reports_csv(const std::vector<MetricsReport>& reports);

}  // namespace wsnip
