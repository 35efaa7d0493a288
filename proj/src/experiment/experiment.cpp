#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "wsnip/errors.hpp"
#include "wsnip/experiment.hpp"
#include "wsnip/parallel.hpp"
#include "wsnip/pretrain.hpp"

namespace wsnip {

using nlohmann::json;

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::baseline: return "baseline";
    case Strategy::la: return "la";
    case Strategy::mp: return "mp";
    case Strategy::mp_la: return "mp_la";
  }
  return "?";
}

Strategy parse_strategy(const std::string& s) {
  if (s == "baseline") return Strategy::baseline;
  if (s == "la") return Strategy::la;
  if (s == "mp") return Strategy::mp;
  if (s == "mp_la") return Strategy::mp_la;
  throw ConfigError("unknown strategy '" + s + "'");
}

std::string to_string(LabelSource s) {
  switch (s) {
    case LabelSource::predicted: return "predicted";
    case LabelSource::true_best: return "true_best";
    case LabelSource::dft: return "dft";
  }
  return "?";
}

namespace {

const std::set<std::string> kConfigKeys{
    "dataset", "eip_subset", "strategy", "backend", "alpha", "seed", "epochs", "batch_size", "classifier_epochs",
    "pretrain_epochs", "lr", "label_threshold", "use_tukey", "normalize_pretrain", "corrupt_fraction",
    "corrupt_shift", "splits", "out"};

json config_to_json(const RunConfig& c) {
  return json{{"dataset", c.dataset},
              {"eip_subset", c.eip_subset},
              {"strategy", to_string(c.strategy)},
              {"backend", to_string(c.backend)},
              {"alpha", c.alpha},
              {"seed", c.seed},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"classifier_epochs", c.classifier_epochs},
              {"pretrain_epochs", c.pretrain_epochs},
              {"lr", c.lr},
              {"label_threshold", c.label_threshold},
              {"use_tukey", c.use_tukey},
              {"normalize_pretrain", c.normalize_pretrain},
              {"corrupt_fraction", c.corrupt_fraction},
              {"corrupt_shift", c.corrupt_shift},
              {"splits", c.splits},
              {"out", c.out}};
}

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!kConfigKeys.count(k)) throw ConfigError("unknown run config key '" + k + "'");
  RunConfig c;
  try {
    c.dataset = j.value("dataset", c.dataset);
    c.eip_subset = j.value("eip_subset", c.eip_subset);
    c.strategy = parse_strategy(j.value("strategy", to_string(c.strategy)));
    try {
      c.backend = parse_backend(j.value("backend", to_string(c.backend)));
    } catch (const ArgumentError& e) {
      throw ConfigError(e.what());
    }
    c.alpha = j.value("alpha", c.alpha);
    c.seed = j.value("seed", c.seed);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.classifier_epochs = j.value("classifier_epochs", c.classifier_epochs);
    c.pretrain_epochs = j.value("pretrain_epochs", c.pretrain_epochs);
    c.lr = j.value("lr", c.lr);
    c.label_threshold = j.value("label_threshold", c.label_threshold);
    c.use_tukey = j.value("use_tukey", c.use_tukey);
    c.normalize_pretrain = j.value("normalize_pretrain", c.normalize_pretrain);
    c.corrupt_fraction = j.value("corrupt_fraction", c.corrupt_fraction);
    c.corrupt_shift = j.value("corrupt_shift", c.corrupt_shift);
    c.splits = j.value("splits", c.splits);
    c.out = j.value("out", c.out);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  return c;
}

}  // namespace

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config is not valid JSON: ") + e.what());
  }
  RunConfig c = config_from_json(j);
  c.validate();
  return c;
}

std::string RunConfig::to_json() const { return config_to_json(*this).dump(2) + "\n"; }

void RunConfig::validate() const {
  if (dataset.empty()) throw ConfigError("run config needs a dataset directory");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be finite and >= 0");
  if (epochs == 0 || batch_size == 0) throw ConfigError("epochs and batch_size must be positive");
  if ((strategy == Strategy::la || strategy == Strategy::mp_la) && classifier_epochs == 0)
    throw ConfigError("label augmentation needs classifier_epochs > 0");
  if ((strategy == Strategy::mp || strategy == Strategy::mp_la) && pretrain_epochs == 0)
    throw ConfigError("pretraining needs pretrain_epochs > 0");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(label_threshold > 0.0)) throw ConfigError("label_threshold must be positive");
  if (corrupt_fraction < 0.0 || corrupt_fraction > 1.0) throw ConfigError("corrupt_fraction must lie in [0, 1]");
  std::set<std::string> seen;
  for (const auto& n : eip_subset)
    if (!seen.insert(n).second) throw ConfigError("duplicate EIP '" + n + "' in eip_subset");
}

namespace {

EnergyTable subset_table(const EnergyTable& table, const std::vector<std::string>& names) {
  if (names.empty()) return table;
  std::vector<std::size_t> cols;
  for (const auto& n : names) {
    const auto it = std::find(table.names.begin(), table.names.end(), n);
    if (it == table.names.end()) throw ConfigError("EIP '" + n + "' is not part of the dataset");
    cols.push_back(static_cast<std::size_t>(it - table.names.begin()));
  }
  EnergyTable out;
  out.names = names;
  out.rows.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    std::vector<double> r;
    for (auto c : cols) r.push_back(row.at(c));
    out.rows.push_back(std::move(r));
  }
  return out;
}

struct SplitData {
  std::vector<EnergyExample> train, validation, test;
};

SplitData split_examples(const Dataset& ds, const Split& split) {
  SplitData d;
  auto ex = [&](std::size_t p) { return EnergyExample{ds.dft.at(p), ds.dft_energy.at(p), 0}; };
  for (auto p : split.train) d.train.push_back(ex(p));
  for (auto p : split.validation) d.validation.push_back(ex(p));
  for (auto p : split.test) d.test.push_back(ex(p));
  return d;
}

std::vector<ClassExample> class_examples(const EnergyTable& table, const Dataset& ds,
                                         std::span<const EnergyExample> examples, double threshold) {
  std::vector<std::size_t> idx;
  std::vector<double> ref;
  for (const auto& e : examples) {
    idx.push_back(e.index);
    ref.push_back(e.target);
  }
  const auto labels = best_eip_labels(table, ds.configs, idx, ref, threshold);
  std::vector<ClassExample> out;
  for (std::size_t i = 0; i < idx.size(); ++i) out.push_back({idx[i], labels[i].cls});
  return out;
}

std::size_t argmax_row(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

// Accuracy of the classifier and of the held-out set's most frequent class.
std::pair<double, double> accuracy(const ClassifierModel& model, const FeatureStore& store,
                                   std::span<const ClassExample> examples) {
  if (examples.empty()) return {0.0, 0.0};
  std::vector<std::size_t> idx;
  for (const auto& e : examples) idx.push_back(e.index);
  const Matrix p = classifier_probabilities(model, store, idx);
  std::size_t hit = 0;
  std::vector<std::size_t> counts(model.classes, 0);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (argmax_row(p.row(i)) == examples[i].label) ++hit;
    ++counts.at(examples[i].label);
  }
  const double n = static_cast<double>(examples.size());
  return {static_cast<double>(hit) / n, static_cast<double>(*std::max_element(counts.begin(), counts.end())) / n};
}

PotentialOptions potential_options(const RunConfig& c) {
  PotentialOptions o;
  o.repr.backend = c.backend;
  o.train.epochs = c.epochs;
  o.train.batch_size = c.batch_size;
  o.train.lr = c.lr;
  o.train.seed = c.seed + 1;
  o.init_seed = c.seed;
  o.loss.use_tukey = c.use_tukey;
  return o;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + p.string());
  f << text;
}

struct Pretrained {
  Checkpoint rep;
  std::vector<double> head_mae;
};

Pretrained pretrain_on_pool(const ExperimentData& ex, const EnergyTable& table, const RunConfig& c) {
  PretrainOptions po;
  po.repr.backend = c.backend;
  po.train.epochs = c.pretrain_epochs;
  po.train.batch_size = c.batch_size;
  po.train.lr = c.lr;
  po.train.seed = c.seed + 4;
  po.train.select_best = false;
  po.init_seed = c.seed;
  po.normalize_targets = c.normalize_pretrain;
  const auto& pool = ex.data.dataset.eip_only;
  auto res = pretrain(table, ex.store, pool, po);
  return {representation_checkpoint(res.net), res.head_mae};
}

}  // namespace

ExperimentData make_experiment(LoadedDataset data, Backend backend, std::optional<SealedOracle> sealed) {
  ExperimentData ex;
  RepresentationSpec spec;
  spec.backend = backend;
  ex.store = FeatureStore::build(spec, data.dataset.configs);
  ex.data = std::move(data);
  ex.sealed = std::move(sealed);
  return ex;
}

ExperimentData load_experiment(const std::string& dataset_dir, Backend backend, bool with_sealed) {
  LoadedDataset data = load_dataset(dataset_dir);
  std::optional<SealedOracle> sealed;
  if (with_sealed) sealed = load_sealed_oracle(dataset_dir);
  return make_experiment(std::move(data), backend, std::move(sealed));
}

MetricsReport run_strategy(const ExperimentData& ex, const RunConfig& config, const ArmOptions& arm,
                           const std::string& arm_name) {
  config.validate();
  const Dataset& ds = ex.data.dataset;
  if (ex.store.size() != ds.configs.size() || ex.store.backend() != config.backend)
    throw StateError("feature store does not match the run configuration");
  if (arm.label_source != LabelSource::predicted && !ex.sealed)
    throw StateError("label-source arms need the sealed oracle file");
  const EnergyTable table = subset_table(ds.eip, config.eip_subset);
  const std::size_t P = table.names.size();
  const bool la = config.strategy == Strategy::la || config.strategy == Strategy::mp_la;
  const bool mp = config.strategy == Strategy::mp || config.strategy == Strategy::mp_la;
  if ((la || mp) && P == 0) throw ConfigError("strategy " + to_string(config.strategy) + " needs at least one EIP");

  std::vector<std::size_t> which = config.splits;
  if (which.empty()) {
    which.resize(ex.data.splits.size());
    std::iota(which.begin(), which.end(), 0);
  }
  for (auto s : which)
    if (s >= ex.data.splits.size()) throw ConfigError("split " + std::to_string(s) + " does not exist");

  MetricsReport report;
  report.arm = arm_name.empty() ? to_string(config.strategy) : arm_name;
  report.config = config;
  report.manifest_hash = ex.data.manifest_hash;
  report.eipset_hash = ex.data.eipset_hash;

  // Pretraining uses only the EIP pool, so every split shares it.
  std::optional<Pretrained> pre;
  if (mp) pre = arm.pretrained ? Pretrained{*arm.pretrained, {}} : pretrain_on_pool(ex, table, config);

  const PotentialOptions popt = potential_options(config);
  std::vector<SplitMetrics> results(which.size());
  parallel_for(which.size(), [&](std::size_t w) {
    SplitMetrics& r = results[w];
    r.split = which[w];
    const SplitData sd = split_examples(ds, ex.data.splits[which[w]]);
    const std::filesystem::path dir =
        config.out.empty() ? std::filesystem::path() : std::filesystem::path(config.out) / ("split" + std::to_string(r.split));

    // Best single EIP: lowest training MAE.
    if (P > 0) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t p = 0; p < P; ++p) {
        double mae = 0.0;
        for (const auto& e : sd.train) mae += std::abs(table.at(e.index, p) - e.target);
        if (mae < best) {
          best = mae;
          arg = p;
        }
      }
      r.best_eip = table.names[arg];
      for (const auto& e : sd.test) {
        const double err = std::abs(table.at(e.index, arg) - e.target);
        r.best_eip_config_mae += err;
        r.best_eip_atom_mae += err / static_cast<double>(ds.atoms(e.index));
      }
      r.best_eip_config_mae /= static_cast<double>(sd.test.size());
      r.best_eip_atom_mae /= static_cast<double>(sd.test.size());
    }

    AugmentedSet set;
    set.dft = sd.train;
    if (la) {
      PotentialOptions copt = popt;
      copt.train.epochs = config.classifier_epochs;
      copt.train.seed = config.seed + 2;
      const auto ctrain = class_examples(table, ds, sd.train, config.label_threshold);
      const auto cval = class_examples(table, ds, sd.validation, config.label_threshold);
      const auto ctest = class_examples(table, ds, sd.test, config.label_threshold);
      const ClassifierModel cls = train_classifier(ex.store, ctrain, cval, P + 1, copt);
      std::tie(r.classifier_accuracy, r.majority_rate) = accuracy(cls, ex.store, ctest);

      Selection sel = predict_and_select(cls, ex.store, table, ds.eip_only);
      r.dropped = sel.dropped.size();
      if (ex.sealed) {
        std::vector<double> ref;
        for (auto i : ds.eip_only) ref.push_back(ex.sealed->energy_of(i));
        std::vector<EnergyExample> pool_ex;
        for (std::size_t q = 0; q < ds.eip_only.size(); ++q) pool_ex.push_back({ds.eip_only[q], ref[q], 0});
        const auto cpool = class_examples(table, ds, pool_ex, config.label_threshold);
        const auto [acc, maj] = accuracy(cls, ex.store, cpool);
        r.pool_accuracy = acc;
        r.pool_majority_rate = maj;
      }
      for (auto& s : sel.selected) {
        if (arm.label_source == LabelSource::true_best) {
          const double ref = ex.sealed->energy_of(s.index);
          const auto lab = best_eip_label(table.rows.at(s.index), ref, ds.atoms(s.index),
                                          std::numeric_limits<double>::infinity());
          s.eip = lab.cls;
          s.energy = table.at(s.index, s.eip);
        } else if (arm.label_source == LabelSource::dft) {
          s.energy = ex.sealed->energy_of(s.index);
        }
      }
      if (arm.confidence_group >= 0) {
        std::vector<double> conf;
        for (const auto& s : sel.selected) conf.push_back(s.confidence);
        const auto groups = confidence_groups(conf);
        std::vector<SelectedInstance> keep;
        for (auto i : groups.at(static_cast<std::size_t>(arm.confidence_group))) keep.push_back(sel.selected[i]);
        sel.selected = std::move(keep);
      }
      if (arm.label_source != LabelSource::dft) {
        set.eip = sel.selected;
        set.validate(table);
      }
      if (config.corrupt_fraction > 0.0 && !sel.selected.empty()) {
        std::vector<std::size_t> order(sel.selected.size());
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(config.seed + 3);
        std::shuffle(order.begin(), order.end(), rng);
        const auto count = static_cast<std::size_t>(std::llround(config.corrupt_fraction * static_cast<double>(order.size())));
        for (std::size_t k = 0; k < count; ++k) {
          auto& s = sel.selected[order[k]];
          s.energy += config.corrupt_shift * static_cast<double>(ds.atoms(s.index));
        }
      }
      if (ex.sealed)
        for (auto& s : sel.selected) s.level = outlier_level(s.energy, ex.sealed->energy_of(s.index), ds.atoms(s.index));
      set.eip = std::move(sel.selected);
      r.selected = set.eip.size();
      if (!dir.empty()) {
        std::filesystem::create_directories(dir);
        if (cls.net) save_checkpoint((dir / "classifier.json").string(), make_checkpoint(cls.net->params(), cls.history.state));
        write_file(dir / "augmented.xyz", augmented_set_xyz(set, ds.configs, table.names));
      }
    }

    const double alpha = la ? config.alpha : 0.0;
    std::optional<PotentialModel> model;
    if (mp) {
      PotentialOptions fopt = popt;
      fopt.train.scheduler = SchedulerKind::linear_decay;
      fopt.train.final_lr = 1e-5;
      model = finetune(pre->rep, fopt, ex.store, set, sd.validation, la ? FinetuneMode::la : FinetuneMode::mse, alpha);
      r.pretrain_head_mae = pre->head_mae;
    } else {
      model = train_la(popt, ex.store, set, sd.validation, alpha);
    }
    const EnergyErrors err = energy_errors(model->net, ex.store, sd.test);
    r.config_mae = err.config_mae;
    r.atom_mae = err.atom_mae;
    r.best_epoch = model->history.best_epoch;
    r.validation_mae = model->history.best_validation;
    if (la && alpha > 0.0 && !set.eip.empty()) r.epochs = model->history.epochs;

    if (config.strategy == Strategy::baseline) {
      r.baseline_config_mae = r.config_mae;
      r.baseline_atom_mae = r.atom_mae;
    } else if (arm.baseline) {
      AugmentedSet plain;
      plain.dft = sd.train;
      const PotentialModel base = train_la(popt, ex.store, plain, sd.validation, 0.0);
      const EnergyErrors b = energy_errors(base.net, ex.store, sd.test);
      r.baseline_config_mae = b.config_mae;
      r.baseline_atom_mae = b.atom_mae;
    }
    if (!dir.empty()) {
      std::filesystem::create_directories(dir);
      save_checkpoint((dir / "potential.json").string(), make_checkpoint(model->net.params(), model->history.state));
    }
  });
  if (pre && !config.out.empty()) {
    std::filesystem::create_directories(config.out);
    save_checkpoint((std::filesystem::path(config.out) / "representation.json").string(), pre->rep);
  }
  report.splits = std::move(results);
  return report;
}

Checkpoint pretrain_representation(const ExperimentData& ex, const RunConfig& config) {
  config.validate();
  return pretrain_on_pool(ex, subset_table(ex.data.dataset.eip, config.eip_subset), config).rep;
}

RepresentationExport export_dataset_representations(const ExperimentData& ex, const RunConfig& config,
                                                    const Checkpoint* rep) {
  const Dataset& ds = ex.data.dataset;
  RepresentationSpec spec;
  spec.backend = config.backend;
  Network net = Network::potential(spec);
  net.init(config.seed);
  const auto [mu, sd] = ex.store.descriptor_moments();
  if (!mu.empty()) net.set_input_normalization(mu, sd);
  if (rep) apply_checkpoint(net.params(), *rep, "rep.");
  std::vector<std::size_t> ids(ds.configs.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<double> e(ids.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < ds.dft.size(); ++k) e[ds.dft[k]] = ds.dft_energy[k];
  if (ex.sealed)
    for (std::size_t k = 0; k < ex.sealed->indices.size(); ++k) e[ex.sealed->indices[k]] = ex.sealed->energies[k];
  for (std::size_t i = 0; i < ids.size(); ++i) e[i] /= static_cast<double>(ds.atoms(i));
  return export_representations(net, ex.store, ids, e);
}

Ablation parse_ablation(const std::string& s) {
  if (s == "label_source") return Ablation::label_source;
  if (s == "confidence") return Ablation::confidence;
  if (s == "eip_subset") return Ablation::eip_subset;
  if (s == "tukey") return Ablation::tukey;
  throw ConfigError("unknown ablation '" + s + "'");
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::label_source: return "label_source";
    case Ablation::confidence: return "confidence";
    case Ablation::eip_subset: return "eip_subset";
    case Ablation::tukey: return "tukey";
  }
  return "?";
}

std::vector<MetricsReport> run_ablation(const ExperimentData& ex, const RunConfig& config, Ablation which) {
  if (!ex.sealed) throw StateError("ablations need the sealed oracle file");
  RunConfig base = config;
  base.strategy = Strategy::baseline;
  base.out.clear();
  std::vector<MetricsReport> out;
  out.push_back(run_strategy(ex, base, {}, "baseline"));

  RunConfig la = config;
  la.strategy = Strategy::la;
  la.out.clear();
  ArmOptions arm;
  arm.baseline = false;
  auto add = [&](const RunConfig& c, const ArmOptions& a, const std::string& name) {
    MetricsReport r = run_strategy(ex, c, a, name);
    for (std::size_t s = 0; s < r.splits.size(); ++s) {
      r.splits[s].baseline_config_mae = out.front().splits.at(s).config_mae;
      r.splits[s].baseline_atom_mae = out.front().splits.at(s).atom_mae;
    }
    out.push_back(std::move(r));
  };
  switch (which) {
    case Ablation::label_source:
      for (auto src : {LabelSource::predicted, LabelSource::true_best, LabelSource::dft}) {
        arm.label_source = src;
        add(la, arm, to_string(src));
      }
      break;
    case Ablation::confidence: {
      add(la, arm, "all");
      const char* names[] = {"low", "medium", "high"};
      for (int g = 0; g < 3; ++g) {
        arm.confidence_group = g;
        add(la, arm, names[g]);
      }
      break;
    }
    case Ablation::eip_subset: {
      const auto names = config.eip_subset.empty() ? ex.data.dataset.eip.names : config.eip_subset;
      add(la, arm, "full");
      for (const auto& n : names) {
        RunConfig one = la;
        one.eip_subset = {n};
        add(one, arm, "only_" + n);
      }
      break;
    }
    case Ablation::tukey: {
      RunConfig t = la;
      t.use_tukey = true;
      add(t, arm, "tukey");
      t.use_tukey = false;
      add(t, arm, "mse");
      break;
    }
  }
  return out;
}

}  // namespace wsnip
