#include <algorithm>
#include <cmath>

#include "wsnip/eip.hpp"
#include "wsnip/errors.hpp"
#include "wsnip/kernels.hpp"
#include "wsnip/repr.hpp"

namespace wsnip {

void MessagePassingSpec::validate() const {
  if (layers < 1) throw ArgumentError("message passing needs at least one layer");
  if (hidden < 1) throw ArgumentError("message passing hidden size must be positive");
  if (radial_count < 2) throw ArgumentError("message passing needs at least two radial basis functions");
  if (!(cutoff > 0.0)) throw ArgumentError("message passing cutoff must be positive");
  if (species.empty()) throw ArgumentError("message passing needs at least one species");
}

double MessagePassingSpec::radial_spacing() const { return cutoff / static_cast<double>(radial_count - 1); }

std::vector<double> radial_basis(const MessagePassingSpec& spec, double r) {
  const double step = spec.radial_spacing();
  const double fc = cosine_taper(r, spec.cutoff);
  std::vector<double> e(spec.radial_count);
  for (std::size_t k = 0; k < spec.radial_count; ++k) {
    const double d = (r - static_cast<double>(k) * step) / step;
    e[k] = std::exp(-d * d) * fc;
  }
  return e;
}

Graph build_graph(const MessagePassingSpec& spec, const Configuration& config, const NeighborList& nl) {
  spec.validate();
  if (nl.size() != config.size()) throw ShapeError("neighbor list does not match the configuration");
  Graph g;
  g.species_index.resize(config.size());
  for (std::size_t a = 0; a < config.size(); ++a) {
    auto it = std::find(spec.species.begin(), spec.species.end(), config.species[a]);
    if (it == spec.species.end())
      throw ArgumentError("species " + std::to_string(config.species[a]) + " has no embedding channel");
    g.species_index[a] = static_cast<std::size_t>(it - spec.species.begin());
  }
  std::size_t edges = 0;
  for (const auto& list : nl.entries)
    for (const auto& nb : list)
      if (nb.dist <= spec.cutoff) ++edges;
  g.edge_basis = Matrix(edges, spec.radial_count);
  g.edge_i.reserve(edges);
  g.edge_j.reserve(edges);
  std::size_t e = 0;
  for (std::size_t i = 0; i < nl.size(); ++i)
    for (const auto& nb : nl.entries[i]) {
      if (nb.dist > spec.cutoff) continue;
      g.edge_i.push_back(static_cast<std::uint32_t>(i));
      g.edge_j.push_back(static_cast<std::uint32_t>(nb.j));
      const auto basis = radial_basis(spec, nb.dist);
      std::copy(basis.begin(), basis.end(), g.edge_basis.row(e).begin());
      ++e;
    }
  return g;
}

MessagePassing::MessagePassing(ParameterSet& params, const std::string& prefix, const MessagePassingSpec& spec)
    : spec_(spec) {
  spec_.validate();
  const std::size_t d = spec_.hidden;
  embed_w_ = &params.add(prefix + "embed.weight", {spec_.species.size(), d});
  embed_b_ = &params.add(prefix + "embed.bias", {d});
  for (std::size_t l = 0; l < spec_.layers; ++l) {
    const std::string base = prefix + "mp" + std::to_string(l) + ".";
    filter_w_.push_back(&params.add(base + "filter.weight", {spec_.radial_count, d}));
    filter_b_.push_back(&params.add(base + "filter.bias", {d}));
    update_.emplace_back(params, base + "update.", std::vector<std::size_t>{2 * d, d, d}, false);
  }
}

void MessagePassing::init(std::mt19937_64& rng) {
  glorot_uniform(*embed_w_, spec_.species.size(), spec_.hidden, rng);
  std::fill(embed_b_->value.begin(), embed_b_->value.end(), 0.0);
  for (std::size_t l = 0; l < spec_.layers; ++l) {
    glorot_uniform(*filter_w_[l], spec_.radial_count, spec_.hidden, rng);
    std::fill(filter_b_[l]->value.begin(), filter_b_[l]->value.end(), 0.0);
    update_[l].init(rng);
  }
}

Matrix MessagePassing::forward(const Graph& graph, Tape* tape) const {
  const std::size_t d = spec_.hidden;
  const std::size_t n = graph.species_index.size();
  const std::size_t E = graph.edge_i.size();
  if (graph.edge_j.size() != E || graph.edge_basis.rows != E || (E > 0 && graph.edge_basis.cols != spec_.radial_count))
    throw ShapeError("graph edge arrays disagree with the message-passing spec");
  const auto& k = kernels::active();
  if (tape) {
    tape->h.clear();
    tape->filters.clear();
    tape->updates.assign(spec_.layers, MlpTape{});
    tape->recorded = false;
  }

  Matrix h(n, d);
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t s = graph.species_index[a];
    if (s >= spec_.species.size()) throw ShapeError("species index out of range");
    for (std::size_t c = 0; c < d; ++c) h(a, c) = embed_w_->value[s * d + c] + embed_b_->value[c];
  }

  for (std::size_t l = 0; l < spec_.layers; ++l) {
    Matrix w(E, d);
    if (E > 0) {
      k.matmul(E, d, spec_.radial_count, graph.edge_basis.data.data(), spec_.radial_count,
               filter_w_[l]->value.data(), d, w.data.data(), d, false);
      k.add_row_vector(E, d, filter_b_[l]->value.data(), w.data.data());
    }
    Matrix z(n, 2 * d);
    for (std::size_t a = 0; a < n; ++a) std::copy_n(&h(a, 0), d, &z(a, 0));
    std::vector<double> msg(d);
    for (std::size_t e = 0; e < E; ++e) {
      k.hadamard(d, &h(graph.edge_j[e], 0), &w(e, 0), msg.data());
      k.axpy(d, 1.0, msg.data(), &z(graph.edge_i[e], d));
    }
    Matrix u = update_[l].forward(z, tape ? &tape->updates[l] : nullptr);
    if (tape) {
      tape->h.push_back(h);
      tape->filters.push_back(std::move(w));
    }
    k.axpy(h.size(), 1.0, u.data.data(), h.data.data());
  }
  if (tape) {
    tape->h.push_back(h);
    tape->recorded = true;
  }
  return h;
}

void MessagePassing::backward(const Graph& graph, const Tape& tape, const Matrix& dout) const {
  if (!tape.recorded || tape.h.size() != spec_.layers + 1) throw StateError("message passing backward called before forward");
  const std::size_t d = spec_.hidden;
  const std::size_t n = graph.species_index.size();
  const std::size_t E = graph.edge_i.size();
  if (dout.rows != n || dout.cols != d) throw ShapeError("message passing output gradient has the wrong shape");
  const auto& k = kernels::active();

  Matrix g = dout;
  std::vector<double> tmp(d);
  for (std::size_t l = spec_.layers; l-- > 0;) {
    const Matrix dz = update_[l].backward(tape.updates[l], g);
    const Matrix& h = tape.h[l];
    const Matrix& w = tape.filters[l];
    Matrix dh = g;
    for (std::size_t a = 0; a < n; ++a) k.axpy(d, 1.0, &dz(a, 0), &dh(a, 0));
    Matrix dw(E, d);
    for (std::size_t e = 0; e < E; ++e) {
      const double* dm = &dz(graph.edge_i[e], d);
      k.hadamard(d, dm, &h(graph.edge_j[e], 0), &dw(e, 0));
      k.hadamard(d, dm, &w(e, 0), tmp.data());
      k.axpy(d, 1.0, tmp.data(), &dh(graph.edge_j[e], 0));
    }
    if (E > 0) {
      const Matrix bt = transpose(graph.edge_basis);
      k.matmul(spec_.radial_count, d, E, bt.data.data(), E, dw.data.data(), d, filter_w_[l]->grad.data(), d, true);
      k.column_sums(E, d, dw.data.data(), filter_b_[l]->grad.data());
    }
    g = std::move(dh);
  }
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t s = graph.species_index[a];
    k.axpy(d, 1.0, &g(a, 0), &embed_w_->grad[s * d]);
  }
  k.column_sums(n, d, g.data.data(), embed_b_->grad.data());
}

Matrix message_passing_forward(const MessagePassing& net, const Configuration& config, const NeighborList& nl) {
  return net.forward(build_graph(net.spec(), config, nl));
}

}  // namespace wsnip
