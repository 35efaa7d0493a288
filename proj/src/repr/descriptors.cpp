#include <algorithm>
#include <cmath>

#include "wsnip/eip.hpp"
#include "wsnip/errors.hpp"
#include "wsnip/repr.hpp"

namespace wsnip {

std::size_t DescriptorSpec::dimension() const {
  const std::size_t s = species.size();
  return radial.size() * s + angular.size() * s * (s + 1) / 2;
}

void DescriptorSpec::validate() const {
  if (radial.empty()) throw ArgumentError("descriptor needs at least one radial term");
  if (!(cutoff > 0.0)) throw ArgumentError("descriptor cutoff must be positive");
  if (species.empty()) throw ArgumentError("descriptor needs at least one species channel");
  for (const auto& t : radial)
    if (!std::isfinite(t.eta) || !std::isfinite(t.rs) || t.eta < 0.0) throw ArgumentError("bad radial term");
  for (const auto& t : angular)
    if (!std::isfinite(t.eta) || t.eta < 0.0 || !(t.zeta >= 1.0) || (t.lambda != 1 && t.lambda != -1))
      throw ArgumentError("bad angular term");
}

DescriptorSpec DescriptorSpec::standard(double cutoff, std::vector<int> species) {
  DescriptorSpec spec;
  spec.cutoff = cutoff;
  spec.species = std::move(species);
  const int n = 8;
  const double lo = 0.5;
  const double step = (cutoff - lo) / (n - 1);
  for (int k = 0; k < n; ++k) spec.radial.push_back({4.0 / (step * step), lo + k * step});
  for (double zeta : {1.0, 4.0})
    for (int lambda : {-1, 1}) spec.angular.push_back({zeta, lambda, 0.5});
  return spec;
}

namespace {

struct Channels {
  std::vector<int> index;  // per atom, -1 when the species has no channel

  Channels(const DescriptorSpec& spec, const Configuration& config) : index(config.size(), -1) {
    for (std::size_t a = 0; a < config.size(); ++a) {
      auto it = std::find(spec.species.begin(), spec.species.end(), config.species[a]);
      if (it != spec.species.end()) index[a] = static_cast<int>(it - spec.species.begin());
    }
  }
};

std::size_t pair_channel(std::size_t s, int a, int b) {
  if (a > b) std::swap(a, b);
  const auto ua = static_cast<std::size_t>(a);
  return ua * s - ua * (ua - 1) / 2 + static_cast<std::size_t>(b - a);
}

void check_list(const DescriptorSpec& spec, const Configuration& config, const NeighborList& nl) {
  spec.validate();
  if (nl.size() != config.size()) throw ShapeError("neighbor list does not match the configuration");
  if (nl.cutoff + 1e-12 < spec.cutoff) throw ArgumentError("neighbor list cutoff is shorter than the descriptor cutoff");
}

}  // namespace

Matrix compute_descriptors(const DescriptorSpec& spec, const Configuration& config, const NeighborList& nl) {
  check_list(spec, config, nl);
  const std::size_t S = spec.species.size();
  const std::size_t R = spec.radial.size();
  const double rc = spec.cutoff;
  const Channels ch(spec, config);
  Matrix g(config.size(), spec.dimension());

  for (std::size_t i = 0; i < config.size(); ++i) {
    auto row = g.row(i);
    const auto& nbrs = nl.entries[i];
    for (const auto& nb : nbrs) {
      const int cj = ch.index[nb.j];
      if (cj < 0 || nb.dist > rc) continue;
      const double fc = cosine_taper(nb.dist, rc);
      for (std::size_t t = 0; t < R; ++t) {
        const double d = nb.dist - spec.radial[t].rs;
        row[t * S + cj] += std::exp(-spec.radial[t].eta * d * d) * fc;
      }
    }
    if (spec.angular.empty()) continue;
    const std::size_t P = S * (S + 1) / 2;
    for (std::size_t a = 0; a < nbrs.size(); ++a) {
      const auto& na = nbrs[a];
      const int ca = ch.index[na.j];
      if (ca < 0 || na.dist > rc) continue;
      const double fa = cosine_taper(na.dist, rc);
      for (std::size_t b = a + 1; b < nbrs.size(); ++b) {
        const auto& nb = nbrs[b];
        const int cb = ch.index[nb.j];
        if (cb < 0 || nb.dist > rc) continue;
        const double fb = cosine_taper(nb.dist, rc);
        const double cos = dot(na.disp, nb.disp) / (na.dist * nb.dist);
        const double r2 = na.dist * na.dist + nb.dist * nb.dist;
        const std::size_t pc = pair_channel(S, ca, cb);
        for (std::size_t t = 0; t < spec.angular.size(); ++t) {
          const auto& term = spec.angular[t];
          const double base = std::max(0.0, 1.0 + term.lambda * cos);
          row[R * S + t * P + pc] +=
              std::pow(2.0, 1.0 - term.zeta) * std::pow(base, term.zeta) * std::exp(-term.eta * r2) * fa * fb;
        }
      }
    }
  }
  return g;
}

std::vector<DescriptorJacobian> descriptor_gradients(const DescriptorSpec& spec, const Configuration& config,
                                                     const NeighborList& nl) {
  check_list(spec, config, nl);
  const std::size_t S = spec.species.size();
  const std::size_t R = spec.radial.size();
  const std::size_t D = spec.dimension();
  const double rc = spec.cutoff;
  const Channels ch(spec, config);
  std::vector<DescriptorJacobian> out(config.size());

  for (std::size_t i = 0; i < config.size(); ++i) {
    auto& blocks = out[i].blocks;
    auto block = [&](std::size_t k) -> std::vector<Vec3>& {
      auto [it, inserted] = blocks.try_emplace(k);
      if (inserted) it->second.assign(D, Vec3{0.0, 0.0, 0.0});
      return it->second;
    };
    // d/d disp of a term adds to the neighbour and subtracts from the centre.
    auto add = [&](std::size_t j, std::size_t f, const Vec3& d_disp) {
      block(j)[f] += d_disp;
      block(i)[f] -= d_disp;
    };
    const auto& nbrs = nl.entries[i];
    for (const auto& nb : nbrs) {
      const int cj = ch.index[nb.j];
      if (cj < 0 || nb.dist > rc) continue;
      const double fc = cosine_taper(nb.dist, rc);
      const double dfc = cosine_taper_derivative(nb.dist, rc);
      const Vec3 u = (1.0 / nb.dist) * nb.disp;
      for (std::size_t t = 0; t < R; ++t) {
        const double d = nb.dist - spec.radial[t].rs;
        const double e = std::exp(-spec.radial[t].eta * d * d);
        const double dg = e * (dfc - 2.0 * spec.radial[t].eta * d * fc);
        add(nb.j, t * S + cj, dg * u);
      }
    }
    if (spec.angular.empty()) continue;
    const std::size_t P = S * (S + 1) / 2;
    for (std::size_t a = 0; a < nbrs.size(); ++a) {
      const auto& na = nbrs[a];
      const int ca = ch.index[na.j];
      if (ca < 0 || na.dist > rc) continue;
      for (std::size_t b = a + 1; b < nbrs.size(); ++b) {
        const auto& nb = nbrs[b];
        const int cb = ch.index[nb.j];
        if (cb < 0 || nb.dist > rc) continue;
        const double ra = na.dist, rb = nb.dist;
        const double cos = dot(na.disp, nb.disp) / (ra * rb);
        // d cos / d disp_a and d cos / d disp_b
        const Vec3 dca = (1.0 / (ra * rb)) * nb.disp - (cos / (ra * ra)) * na.disp;
        const Vec3 dcb = (1.0 / (ra * rb)) * na.disp - (cos / (rb * rb)) * nb.disp;
        const std::size_t pc = pair_channel(S, ca, cb);
        for (std::size_t t = 0; t < spec.angular.size(); ++t) {
          const auto& term = spec.angular[t];
          const double pre = std::pow(2.0, 1.0 - term.zeta);
          const double base = 1.0 + term.lambda * cos;
          if (base <= 0.0 && term.zeta < 1.0) continue;
          const double A = pre * std::pow(std::max(base, 0.0), term.zeta);
          const double dA = pre * term.zeta * term.lambda * std::pow(std::max(base, 0.0), term.zeta - 1.0);
          const double Ra = std::exp(-term.eta * ra * ra) * cosine_taper(ra, rc);
          const double Rb = std::exp(-term.eta * rb * rb) * cosine_taper(rb, rc);
          const double dRa = std::exp(-term.eta * ra * ra) *
                             (cosine_taper_derivative(ra, rc) - 2.0 * term.eta * ra * cosine_taper(ra, rc));
          const double dRb = std::exp(-term.eta * rb * rb) *
                             (cosine_taper_derivative(rb, rc) - 2.0 * term.eta * rb * cosine_taper(rb, rc));
          const std::size_t f = R * S + t * P + pc;
          const Vec3 ga = (dA * Ra * Rb) * dca + (A * dRa * Rb / ra) * na.disp;
          const Vec3 gb = (dA * Ra * Rb) * dcb + (A * Ra * dRb / rb) * nb.disp;
          add(na.j, f, ga);
          add(nb.j, f, gb);
        }
      }
    }
  }
  return out;
}

}  // namespace wsnip
