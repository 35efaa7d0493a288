#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <set>

#include "wsnip/errors.hpp"
#include "wsnip/weaklabel.hpp"

namespace wsnip {

BestEipLabel best_eip_label(std::span<const double> eip_energies, double reference_energy, std::size_t atoms,
                            double threshold) {
  if (atoms == 0) throw ArgumentError("configuration without atoms");
  BestEipLabel label;
  label.cls = eip_energies.size();
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = eip_energies.size();
  for (std::size_t p = 0; p < eip_energies.size(); ++p) {
    if (!std::isfinite(eip_energies[p])) throw DataIntegrityError("missing EIP energy for class " + std::to_string(p));
    const double err = std::abs(eip_energies[p] - reference_energy) / static_cast<double>(atoms);
    label.per_atom_errors.push_back(err);
    if (err < best) {
      best = err;
      arg = p;
    }
  }
  if (arg < eip_energies.size() && best <= threshold) label.cls = arg;
  return label;
}

std::vector<BestEipLabel> best_eip_labels(const EnergyTable& table, std::span<const Configuration> all_configs,
                                          std::span<const std::size_t> configs, std::span<const double> reference,
                                          double threshold) {
  if (configs.size() != reference.size()) throw ShapeError("one reference energy per configuration expected");
  std::vector<BestEipLabel> out;
  out.reserve(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const std::size_t c = configs[i];
    if (c >= table.rows.size() || c >= all_configs.size())
      throw DataIntegrityError("no EIP energies for configuration " + std::to_string(c));
    const auto& row = table.rows[c];
    if (row.size() != table.names.size())
      throw DataIntegrityError("configuration " + std::to_string(c) + " has " + std::to_string(row.size()) +
                               " EIP energies, expected " + std::to_string(table.names.size()));
    out.push_back(best_eip_label(row, reference[i], all_configs[c].size(), threshold));
  }
  return out;
}

int outlier_level(double eip_energy, double reference_energy, std::size_t atoms) {
  const double err = std::abs(eip_energy - reference_energy) / static_cast<double>(atoms);
  int level = 0;
  for (double t : kOutlierThresholds)
    if (err > t) ++level;
  return level;
}

std::pair<double, double> per_atom_moments(const FeatureStore& store, std::span<const EnergyExample> examples) {
  if (examples.empty()) return {0.0, 1.0};
  double mean = 0.0;
  for (const auto& e : examples) mean += e.target / static_cast<double>(store[e.index].atoms);
  mean /= static_cast<double>(examples.size());
  double var = 0.0;
  for (const auto& e : examples) {
    const double d = e.target / static_cast<double>(store[e.index].atoms) - mean;
    var += d * d;
  }
  var /= static_cast<double>(examples.size());
  return {mean, std::max(std::sqrt(var), 1e-3)};
}

namespace {

void normalize_inputs(Network& net, const FeatureStore& store) {
  const auto [mu, sd] = store.descriptor_moments();
  if (!mu.empty()) net.set_input_normalization(mu, sd);
}

}  // namespace

Network make_potential(const PotentialOptions& options, const FeatureStore& store, std::span<const EnergyExample> fit) {
  Network net = Network::potential(options.repr);
  net.init(options.init_seed);
  normalize_inputs(net, store);
  const auto [shift, scale] = per_atom_moments(store, fit);
  net.set_output_scaling(0, shift, scale);
  return net;
}

ClassifierModel train_classifier(const FeatureStore& store, std::span<const ClassExample> train,
                                 std::span<const ClassExample> validation, std::size_t classes,
                                 const PotentialOptions& options) {
  if (classes < 2) throw ArgumentError("a classifier needs at least two classes");
  if (train.empty()) throw ArgumentError("classifier training set is empty");
  for (const auto& e : train)
    if (e.label >= classes) throw ArgumentError("class label " + std::to_string(e.label) + " out of range");
  ClassifierModel model;
  model.classes = classes;
  std::set<std::size_t> seen;
  for (const auto& e : train) seen.insert(e.label);
  if (seen.size() == 1) {
    std::cerr << "warning: classifier training set has a single class (" << *seen.begin()
              << "); using a constant classifier\n";
    model.constant_class = *seen.begin();
    return model;
  }
  Network net = Network::classifier(options.repr, classes);
  net.init(options.init_seed);
  normalize_inputs(net, store);
  model.history = train_logits(net, store, train, validation, options.train);
  model.net = std::move(net);
  return model;
}

Matrix classifier_probabilities(const ClassifierModel& model, const FeatureStore& store,
                                std::span<const std::size_t> indices) {
  if (model.constant_class) {
    Matrix p(indices.size(), model.classes);
    for (std::size_t i = 0; i < indices.size(); ++i) p(i, *model.constant_class) = 1.0;
    return p;
  }
  if (!model.net) throw StateError("classifier has not been trained");
  return softmax(predict(*model.net, store, indices));
}

Selection predict_and_select(const ClassifierModel& model, const FeatureStore& store, const EnergyTable& table,
                             std::span<const std::size_t> pool) {
  const std::size_t P = table.names.size();
  if (model.classes != P + 1) throw ShapeError("classifier classes do not match the EIP set");
  const Matrix prob = classifier_probabilities(model, store, pool);
  Selection out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto row = prob.row(i);
    const auto arg = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    SelectedInstance s;
    s.index = pool[i];
    s.eip = arg;
    s.confidence = row[arg];
    if (arg == P) {
      out.dropped.push_back(s);
      continue;
    }
    s.energy = table.at(pool[i], arg);
    out.selected.push_back(s);
  }
  return out;
}

void AugmentedSet::validate(const EnergyTable& table) const {
  std::set<std::size_t> dft_idx;
  for (const auto& e : dft) dft_idx.insert(e.index);
  for (const auto& s : eip) {
    if (dft_idx.count(s.index))
      throw DataIntegrityError("configuration " + std::to_string(s.index) + " carries both label kinds");
    if (s.eip >= table.names.size()) throw DataIntegrityError("dummy-labelled configuration in the augmented set");
    if (table.at(s.index, s.eip) != s.energy)
      throw DataIntegrityError("label of configuration " + std::to_string(s.index) + " differs from the energy table");
  }
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ArgumentError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::array<std::vector<std::size_t>, 3> confidence_groups(std::span<const double> confidences) {
  if (confidences.size() < 3) throw ArgumentError("confidence grouping needs at least three instances");
  const std::vector<double> v(confidences.begin(), confidences.end());
  const double q1 = quantile(v, 0.33);
  const double q2 = quantile(v, 0.66);
  std::array<std::vector<std::size_t>, 3> g;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] <= q1) g[0].push_back(i);
    else if (v[i] <= q2) g[1].push_back(i);
    else g[2].push_back(i);
  }
  return g;
}

PotentialModel train_la(const PotentialOptions& options, const FeatureStore& store, const AugmentedSet& set,
                        std::span<const EnergyExample> validation, double alpha) {
  if (set.dft.empty()) throw ArgumentError("label augmentation needs DFT-labelled instances");
  EnergyTask task;
  task.dft = set.dft;
  for (const auto& s : set.eip) task.eip.push_back({s.index, s.energy, s.level});
  task.validation.assign(validation.begin(), validation.end());
  task.alpha = alpha;
  task.loss = options.loss;
  PotentialModel out{make_potential(options, store, set.dft), {}};
  out.history = train_energy(out.net, store, task, options.train);
  return out;
}

std::string augmented_set_xyz(const AugmentedSet& set, std::span<const Configuration> configs,
                              const std::vector<std::string>& eip_names) {
  std::vector<Configuration> out;
  out.reserve(set.dft.size() + set.eip.size());
  for (const auto& e : set.dft) {
    Configuration c = configs[e.index];
    c.properties["label_kind"] = "dft";
    c.properties["label_source"] = "dft";
    c.set_property("energy", e.target);
    c.set_property("index", static_cast<double>(e.index));
    out.push_back(std::move(c));
  }
  for (const auto& s : set.eip) {
    Configuration c = configs[s.index];
    c.properties["label_kind"] = "eip";
    c.properties["label_source"] = eip_names.at(s.eip);
    c.set_property("energy", s.energy);
    c.set_property("confidence", s.confidence);
    c.set_property("index", static_cast<double>(s.index));
    out.push_back(std::move(c));
  }
  return write_xyz(out);
}

}  // namespace wsnip
