#include <cmath>
#include <iostream>
#include <sstream>

#include <Eigen/Dense>

#include "wsnip/errors.hpp"
#include "wsnip/pretrain.hpp"

namespace wsnip {

PretrainResult pretrain(const EnergyTable& table, const FeatureStore& store, std::span<const std::size_t> indices,
                        const PretrainOptions& options) {
  const std::size_t P = table.names.size();
  if (P == 0) throw ArgumentError("pretraining needs at least one EIP");
  if (indices.empty()) throw ArgumentError("pretraining set is empty");

  Matrix targets(indices.size(), P);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& row = table.rows.at(indices[i]);
    if (row.size() != P) throw DataIntegrityError("incomplete EIP energy row for configuration " + std::to_string(indices[i]));
    for (std::size_t p = 0; p < P; ++p) targets(i, p) = row[p];
  }

  Network net = Network::potential(options.repr, P);
  net.init(options.init_seed);
  const auto [mu, sd] = store.descriptor_moments();
  if (!mu.empty()) net.set_input_normalization(mu, sd);

  std::vector<double> target_std(P), scale;
  for (std::size_t p = 0; p < P; ++p) {
    std::vector<EnergyExample> ex;
    double mean = 0.0;
    for (std::size_t i = 0; i < indices.size(); ++i) {
      ex.push_back({indices[i], targets(i, p), 0});
      mean += targets(i, p);
    }
    mean /= static_cast<double>(indices.size());
    double var = 0.0;
    for (std::size_t i = 0; i < indices.size(); ++i) var += (targets(i, p) - mean) * (targets(i, p) - mean);
    target_std[p] = std::max(std::sqrt(var / static_cast<double>(indices.size())), 1e-6);
    const auto [shift, s] = per_atom_moments(store, ex);
    net.set_output_scaling(p, shift, s);
  }
  if (options.normalize_targets) scale = target_std;

  PretrainResult out{std::move(net), {}, {}, target_std};
  out.history = train_multitask(out.net, store, indices, targets, scale, options.train);

  const Matrix pred = predict(out.net, store, indices);
  out.head_mae.assign(P, 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i)
    for (std::size_t p = 0; p < P; ++p) out.head_mae[p] += std::abs(pred(i, p) - targets(i, p));
  for (auto& m : out.head_mae) m /= static_cast<double>(indices.size());
  return out;
}

Checkpoint representation_checkpoint(const Network& net, const std::string& meta) {
  Checkpoint full = make_checkpoint(net.params(), TrainState{}, meta);
  Checkpoint rep;
  rep.meta = full.meta;
  for (auto& [name, a] : full.arrays)
    if (name.rfind("rep.", 0) == 0) rep.arrays.emplace(name, std::move(a));
  return rep;
}

PotentialModel finetune(const Checkpoint& rep, const PotentialOptions& options, const FeatureStore& store,
                        const AugmentedSet& set, std::span<const EnergyExample> validation, FinetuneMode mode,
                        double alpha) {
  if (set.dft.empty()) throw ArgumentError("fine-tuning needs DFT-labelled instances");
  Network net = make_potential(options, store, set.dft);
  apply_checkpoint(net.params(), rep, "rep.");
  EnergyTask task;
  task.dft = set.dft;
  if (mode == FinetuneMode::la)
    for (const auto& s : set.eip) task.eip.push_back({s.index, s.energy, s.level});
  task.validation.assign(validation.begin(), validation.end());
  task.alpha = mode == FinetuneMode::la ? alpha : 0.0;
  task.loss = options.loss;
  PotentialModel out{std::move(net), {}};
  out.history = train_energy(out.net, store, task, options.train);
  return out;
}

Pca2 pca_2d(const Matrix& x) {
  Pca2 out;
  const std::size_t n = x.rows, d = x.cols;
  if (n < 2 || d == 0) throw ArgumentError("PCA needs at least two rows");
  Eigen::MatrixXd m(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = x(i, j);
  const Eigen::RowVectorXd mean = m.colwise().mean();
  m.rowwise() -= mean;
  const Eigen::MatrixXd cov = (m.transpose() * m) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw Error("PCA eigen-decomposition failed");
  const std::size_t k = std::min<std::size_t>(2, d);
  out.components = Matrix(2, d);
  out.scores = Matrix(n, 2);
  out.mean.assign(mean.data(), mean.data() + d);
  for (std::size_t c = 0; c < k; ++c) {
    // Eigenvalues come in increasing order.
    Eigen::VectorXd v = es.eigenvectors().col(static_cast<Eigen::Index>(d - 1 - c));
    // Deterministic sign: largest-magnitude entry positive.
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    for (std::size_t j = 0; j < d; ++j) out.components(c, j) = v(static_cast<Eigen::Index>(j));
    out.variance.push_back(es.eigenvalues()(static_cast<Eigen::Index>(d - 1 - c)));
    const Eigen::VectorXd s = m * v;
    for (std::size_t i = 0; i < n; ++i) out.scores(i, c) = s(static_cast<Eigen::Index>(i));
  }
  return out;
}

RepresentationExport export_representations(const Network& net, const FeatureStore& store,
                                            std::span<const std::size_t> ids,
                                            std::span<const double> energy_per_atom) {
  if (energy_per_atom.size() != ids.size()) throw ShapeError("one energy per exported configuration expected");
  RepresentationExport ex;
  ex.ids.assign(ids.begin(), ids.end());
  ex.energy_per_atom.assign(energy_per_atom.begin(), energy_per_atom.end());
  ex.pooled = Matrix(ids.size(), net.feature_width());
  for (std::size_t s = 0; s < ids.size(); s += 64) {
    const std::size_t e = std::min(ids.size(), s + 64);
    const Matrix p = net.pooled_features(gather(store, ids.subspan(s, e - s)));
    std::copy(p.data.begin(), p.data.end(), ex.pooled.data.begin() + static_cast<std::ptrdiff_t>(s * p.cols));
  }
  if (ids.size() < 2) {
    std::cerr << "warning: fewer than two configurations, PCA skipped\n";
    return ex;
  }
  ex.pca = pca_2d(ex.pooled);
  return ex;
}

std::string representation_csv(const RepresentationExport& ex) {
  std::ostringstream out;
  out.precision(17);
  out << "id";
  for (std::size_t j = 0; j < ex.pooled.cols; ++j) out << ",f" << j;
  out << ",pc1,pc2,energy_per_atom\n";
  const bool has_pca = ex.pca.scores.rows == ex.ids.size();
  for (std::size_t i = 0; i < ex.ids.size(); ++i) {
    out << ex.ids[i];
    for (std::size_t j = 0; j < ex.pooled.cols; ++j) out << ',' << ex.pooled(i, j);
    if (has_pca) out << ',' << ex.pca.scores(i, 0) << ',' << ex.pca.scores(i, 1);
    else out << ",,";
    out << ',' << ex.energy_per_atom[i] << '\n';
  }
  return out.str();
}

double group_separation(const Matrix& x, std::span<const int> group) {
  if (group.size() != x.rows) throw ShapeError("one group label per row expected");
  double inter = 0.0, intra = 0.0;
  std::size_t ni = 0, na = 0;
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = i + 1; j < x.rows; ++j) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < x.cols; ++c) {
        const double t = x(i, c) - x(j, c);
        d2 += t * t;
      }
      const double d = std::sqrt(d2);
      if (group[i] == group[j]) {
        intra += d;
        ++na;
      } else {
        inter += d;
        ++ni;
      }
    }
  if (ni == 0 || na == 0 || intra == 0.0) throw ArgumentError("group separation needs two non-degenerate groups");
  return (inter / static_cast<double>(ni)) / (intra / static_cast<double>(na));
}

}  // namespace wsnip
