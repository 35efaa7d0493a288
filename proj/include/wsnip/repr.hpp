#pragma once
// Invariant per-atom representations: atom-centred symmetry functions and a
// small message-passing network.

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "wsnip/atoms.hpp"
#include "wsnip/net.hpp"

namespace wsnip {

// Stillinger-Weber Si cutoff a * sigma, scaled by 1.25.
inline constexpr double kDefaultReprCutoff = 1.25 * 1.80 * 2.0951;

struct RadialTerm {
  double eta;  // 1/A^2
  double rs;   // A
};

struct AngularTerm {
  double zeta;
  int lambda;  // +1 or -1
  double eta;  // 1/A^2
};

struct DescriptorSpec {
  std::vector<RadialTerm> radial;
  std::vector<AngularTerm> angular;
  double cutoff = kDefaultReprCutoff;
  // Species channels in column order. Atoms of other species are ignored as neighbours.
  std::vector<int> species{14};

  // |radial| * S + |angular| * S (S + 1) / 2
  std::size_t dimension() const;
  void validate() const;
  // 8 radial terms with r_s evenly in [0.5, cutoff] and eta = 4 / spacing^2;
  // angular zeta in {1, 4} x lambda in {-1, +1} with eta = 0.5.
  static DescriptorSpec standard(double cutoff = kDefaultReprCutoff, std::vector<int> species = {14});
};

// N x d. Radial columns come first (term-major, then species), followed by the
// angular columns (term-major, then species pair).
Matrix compute_descriptors(const DescriptorSpec& spec, const Configuration& config, const NeighborList& nl);

// Derivatives of one atom's descriptor row: blocks[k][f] = d G_i[f] / d r_k.
struct DescriptorJacobian {
  std::map<std::size_t, std::vector<Vec3>> blocks;
};

std::vector<DescriptorJacobian> descriptor_gradients(const DescriptorSpec& spec, const Configuration& config,
                                                     const NeighborList& nl);

struct MessagePassingSpec {
  std::size_t layers = 3;
  std::size_t hidden = 64;
  std::size_t radial_count = 16;
  double cutoff = kDefaultReprCutoff;
  std::vector<int> species{14};

  void validate() const;
  // Gaussian centres evenly spaced on [0, cutoff]; width = spacing.
  double radial_spacing() const;
};

// e_ij: Gaussian expansion of the distance times the cosine taper.
std::vector<double> radial_basis(const MessagePassingSpec& spec, double r);

// Atoms and directed edges of one or more configurations.
struct Graph {
  std::vector<std::size_t> species_index;  // per atom, index into spec.species
  std::vector<std::uint32_t> edge_i;       // receiving atom
  std::vector<std::uint32_t> edge_j;       // sending atom
  Matrix edge_basis;                       // E x radial_count
};

Graph build_graph(const MessagePassingSpec& spec, const Configuration& config, const NeighborList& nl);

// Weights of the message-passing stack, registered under `prefix`:
//   embed.weight [S x d], embed.bias [d]
//   mp<l>.filter.weight [K x d], mp<l>.filter.bias [d]
//   mp<l>.update.0/1 : two-layer MLP [2d -> d -> d]
// Layer l: w_ij = filter(e_ij), m_i = sum_j h_j * w_ij, h_i += update([h_i, m_i]).
class MessagePassing {
 public:
  MessagePassing() = default;
  MessagePassing(ParameterSet& params, const std::string& prefix, const MessagePassingSpec& spec);

  void init(std::mt19937_64& rng);

  struct Tape {
    std::vector<Matrix> h;        // input of each layer, plus the output
    std::vector<Matrix> filters;  // E x d per layer
    std::vector<MlpTape> updates;
    bool recorded = false;
  };

  // Returns atoms x d features.
  Matrix forward(const Graph& graph, Tape* tape = nullptr) const;
  // Accumulates parameter gradients from d loss / d output.
  void backward(const Graph& graph, const Tape& tape, const Matrix& dout) const;

  const MessagePassingSpec& spec() const noexcept { return spec_; }
  std::size_t output_dim() const noexcept { return spec_.hidden; }

 private:
  MessagePassingSpec spec_;
  Parameter* embed_w_ = nullptr;
  Parameter* embed_b_ = nullptr;
  std::vector<Parameter*> filter_w_;
  std::vector<Parameter*> filter_b_;
  std::vector<Mlp> update_;
};

Matrix message_passing_forward(const MessagePassing& net, const Configuration& config, const NeighborList& nl);

}  // namespace wsnip
