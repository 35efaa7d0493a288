#include <cmath>

#include "wsnip/errors.hpp"
#include "wsnip/model.hpp"
#include "wsnip/parallel.hpp"

namespace wsnip {

std::string to_string(Backend backend) {
  return backend == Backend::descriptor ? "descriptor" : "message_passing";
}

Backend parse_backend(const std::string& s) {
  if (s == "descriptor") return Backend::descriptor;
  if (s == "message_passing") return Backend::message_passing;
  throw ArgumentError("unknown representation backend '" + s + "'");
}

void RepresentationSpec::validate() const {
  if (hidden == 0) throw ArgumentError("hidden width must be positive");
  if (backend == Backend::descriptor) {
    descriptor.validate();
    if (depth == 0) throw ArgumentError("descriptor MLP depth must be positive");
  } else {
    message_passing.validate();
  }
}

double RepresentationSpec::cutoff() const {
  return backend == Backend::descriptor ? descriptor.cutoff : message_passing.cutoff;
}

FeatureStore FeatureStore::build(const RepresentationSpec& spec, std::span<const Configuration> configs) {
  spec.validate();
  FeatureStore store;
  store.backend_ = spec.backend;
  store.items_.resize(configs.size());
  parallel_for(configs.size(), [&](std::size_t i) {
    const auto& c = configs[i];
    const NeighborList nl = build_neighbor_list(c, spec.cutoff());
    ConfigFeatures f;
    f.atoms = c.size();
    if (spec.backend == Backend::descriptor) f.descriptors = compute_descriptors(spec.descriptor, c, nl);
    else f.graph = build_graph(spec.message_passing, c, nl);
    store.items_[i] = std::move(f);
  });
  return store;
}

std::pair<std::vector<double>, std::vector<double>> FeatureStore::descriptor_moments() const {
  if (backend_ != Backend::descriptor || items_.empty()) return {};
  const std::size_t d = items_.front().descriptors.cols;
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  double count = 0.0;
  for (const auto& it : items_)
    for (std::size_t a = 0; a < it.descriptors.rows; ++a) {
      count += 1.0;
      for (std::size_t c = 0; c < d; ++c) mean[c] += it.descriptors(a, c);
    }
  for (auto& m : mean) m /= count;
  for (const auto& it : items_)
    for (std::size_t a = 0; a < it.descriptors.rows; ++a)
      for (std::size_t c = 0; c < d; ++c) {
        const double x = it.descriptors(a, c) - mean[c];
        var[c] += x * x;
      }
  std::vector<double> sd(d);
  for (std::size_t c = 0; c < d; ++c) sd[c] = std::max(std::sqrt(var[c] / count), 1e-8);
  return {mean, sd};
}

FeatureBatch gather(const FeatureStore& store, std::span<const std::size_t> indices) {
  FeatureBatch b;
  std::size_t atoms = 0, edges = 0;
  for (auto i : indices) {
    atoms += store[i].atoms;
    edges += store[i].graph.edge_i.size();
    b.offsets.push_back(atoms);
  }
  if (store.backend() == Backend::descriptor) {
    const std::size_t d = indices.empty() ? 0 : store[indices[0]].descriptors.cols;
    b.x = Matrix(atoms, d);
    std::size_t row = 0;
    for (auto i : indices) {
      const auto& m = store[i].descriptors;
      std::copy(m.data.begin(), m.data.end(), b.x.data.begin() + static_cast<std::ptrdiff_t>(row * d));
      row += m.rows;
    }
  } else {
    const std::size_t k = indices.empty() ? 0 : store[indices[0]].graph.edge_basis.cols;
    b.graph.species_index.reserve(atoms);
    b.graph.edge_i.reserve(edges);
    b.graph.edge_j.reserve(edges);
    b.graph.edge_basis = Matrix(edges, k);
    std::size_t base = 0, e0 = 0;
    for (auto i : indices) {
      const Graph& g = store[i].graph;
      b.graph.species_index.insert(b.graph.species_index.end(), g.species_index.begin(), g.species_index.end());
      for (std::size_t e = 0; e < g.edge_i.size(); ++e) {
        b.graph.edge_i.push_back(static_cast<std::uint32_t>(g.edge_i[e] + base));
        b.graph.edge_j.push_back(static_cast<std::uint32_t>(g.edge_j[e] + base));
      }
      std::copy(g.edge_basis.data.begin(), g.edge_basis.data.end(),
                b.graph.edge_basis.data.begin() + static_cast<std::ptrdiff_t>(e0 * k));
      base += store[i].atoms;
      e0 += g.edge_i.size();
    }
  }
  return b;
}

}  // namespace wsnip
