#include <cmath>
#include <numbers>

#include "wsnip/eip.hpp"
#include "wsnip/errors.hpp"

namespace wsnip {

std::string to_string(EipKind kind) {
  switch (kind) {
    case EipKind::lennard_jones: return "lennard_jones";
    case EipKind::morse: return "morse";
    case EipKind::stillinger_weber: return "stillinger_weber";
  }
  return "unknown";
}

EipKind parse_eip_kind(const std::string& s) {
  if (s == "lennard_jones") return EipKind::lennard_jones;
  if (s == "morse") return EipKind::morse;
  if (s == "stillinger_weber") return EipKind::stillinger_weber;
  throw ArgumentError("unknown EIP kind '" + s + "'");
}

double EipModel::param(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) throw ArgumentError("EIP '" + name + "' lacks parameter '" + key + "'");
  return it->second;
}

void EipModel::validate() const {
  if (name.empty()) throw ArgumentError("EIP without a name");
  for (const auto& [k, v] : params)
    if (!std::isfinite(v)) throw ArgumentError("EIP '" + name + "' parameter '" + k + "' is not finite");
  if (!(cutoff > 0.0) || !std::isfinite(cutoff)) throw ArgumentError("EIP '" + name + "' needs a positive cutoff");
  switch (kind) {
    case EipKind::lennard_jones:
      param("epsilon");
      if (param("sigma") <= 0.0) throw ArgumentError("EIP '" + name + "': sigma must be positive");
      break;
    case EipKind::morse:
      param("D");
      param("alpha");
      param("r0");
      break;
    case EipKind::stillinger_weber:
      for (const char* k : {"epsilon", "sigma", "a", "lambda", "gamma", "A", "B", "p", "q", "costheta0"}) param(k);
      if (param("sigma") <= 0.0 || param("a") <= 0.0) throw ArgumentError("EIP '" + name + "': sigma and a must be positive");
      break;
  }
}

double EipModel::effective_cutoff() const {
  if (kind == EipKind::stillinger_weber) return std::min(cutoff, param("a") * param("sigma"));
  return cutoff;
}

double cosine_taper(double r, double cutoff) {
  if (r >= cutoff) return 0.0;
  return 0.5 * (std::cos(std::numbers::pi * r / cutoff) + 1.0);
}

double cosine_taper_derivative(double r, double cutoff) {
  if (r >= cutoff) return 0.0;
  return -0.5 * std::numbers::pi / cutoff * std::sin(std::numbers::pi * r / cutoff);
}

namespace {

void check_coincident(const NeighborList& nl) {
  for (std::size_t i = 0; i < nl.size(); ++i)
    for (const Neighbor& nb : nl.entries[i])
      if (nb.dist < 1e-8)
        throw CoincidentAtomsError("atoms " + std::to_string(i) + " and " + std::to_string(nb.j) +
                                   " coincide (distance < 1e-8 A)");
}

struct PairValue {
  double phi;
  double dphi;
};

PairValue lennard_jones(double r, double eps, double sigma) {
  const double sr = sigma / r;
  const double sr6 = sr * sr * sr * sr * sr * sr;
  const double sr12 = sr6 * sr6;
  return {4.0 * eps * (sr12 - sr6), 4.0 * eps * (-12.0 * sr12 + 6.0 * sr6) / r};
}

PairValue morse(double r, double depth, double alpha, double r0) {
  const double e1 = std::exp(-alpha * (r - r0));
  const double e2 = e1 * e1;
  return {depth * (e2 - 2.0 * e1), depth * (-2.0 * alpha * e2 + 2.0 * alpha * e1)};
}

// Each directed neighbor entry carries half of the pair energy.
EnergyForces pair_energy_forces(const EipModel& m, const Configuration& config, bool want_forces) {
  const double rc = m.cutoff;
  const NeighborList nl = build_neighbor_list(config, rc);
  check_coincident(nl);
  EnergyForces out;
  if (want_forces) out.forces.assign(config.size(), Vec3{0.0, 0.0, 0.0});
  double p0 = 0.0, p1 = 0.0, p2 = 0.0;
  if (m.kind == EipKind::lennard_jones) {
    p0 = m.param("epsilon");
    p1 = m.param("sigma");
  } else {
    p0 = m.param("D");
    p1 = m.param("alpha");
    p2 = m.param("r0");
  }
  for (std::size_t i = 0; i < nl.size(); ++i) {
    for (const Neighbor& nb : nl.entries[i]) {
      const double r = nb.dist;
      const PairValue pv = m.kind == EipKind::lennard_jones ? lennard_jones(r, p0, p1) : morse(r, p0, p1, p2);
      double t = 1.0, dt = 0.0;
      if (m.taper) {
        t = cosine_taper(r, rc);
        dt = cosine_taper_derivative(r, rc);
      }
      out.energy += 0.5 * pv.phi * t;
      if (want_forces) {
        const double g = 0.5 * (pv.dphi * t + pv.phi * dt);
        const Vec3 f = (g / r) * nb.disp;
        out.forces[i] += f;
        out.forces[static_cast<std::size_t>(nb.j)] -= f;
      }
    }
  }
  return out;
}

EnergyForces sw_energy_forces(const EipModel& m, const Configuration& config, bool want_forces) {
  const double eps = m.param("epsilon"), sigma = m.param("sigma"), a = m.param("a");
  const double lambda = m.param("lambda"), gamma = m.param("gamma");
  const double big_a = m.param("A"), big_b = m.param("B"), p = m.param("p"), q = m.param("q");
  const double cos0 = m.param("costheta0");
  const double rc = a * sigma;
  const NeighborList nl = build_neighbor_list(config, std::min(m.cutoff, rc));
  check_coincident(nl);

  EnergyForces out;
  if (want_forces) out.forces.assign(config.size(), Vec3{0.0, 0.0, 0.0});

  struct Radial {
    double g;   // exp(gamma sigma / (r - rc))
    double dg;  // dg/dr
  };
  for (std::size_t i = 0; i < nl.size(); ++i) {
    const auto& nbs = nl.entries[i];
    std::vector<Radial> rad;
    rad.reserve(nbs.size());
    for (const Neighbor& nb : nbs) {
      const double r = nb.dist;
      if (r >= rc) {
        rad.push_back({0.0, 0.0});
        continue;
      }
      const double inv = 1.0 / (r - rc);
      // Two-body term, half per directed entry.
      const double sr = sigma / r;
      const double srp = std::pow(sr, p), srq = std::pow(sr, q);
      const double e = std::exp(sigma * inv);
      const double poly = big_b * srp - srq;
      const double phi = big_a * eps * poly * e;
      out.energy += 0.5 * phi;
      if (want_forces) {
        const double dpoly = (-p * big_b * srp + q * srq) / r;
        const double dphi = big_a * eps * (dpoly * e + poly * e * (-sigma * inv * inv));
        const Vec3 f = (0.5 * dphi / r) * nb.disp;
        out.forces[i] += f;
        out.forces[static_cast<std::size_t>(nb.j)] -= f;
      }
      const double g = std::exp(gamma * sigma * inv);
      rad.push_back({g, g * (-gamma * sigma * inv * inv)});
    }
    // Three-body terms centred on i.
    for (std::size_t jj = 0; jj < nbs.size(); ++jj) {
      if (rad[jj].g == 0.0) continue;
      const Neighbor& nj = nbs[jj];
      for (std::size_t kk = jj + 1; kk < nbs.size(); ++kk) {
        if (rad[kk].g == 0.0) continue;
        const Neighbor& nk = nbs[kk];
        const double r1 = nj.dist, r2 = nk.dist;
        const double c = dot(nj.disp, nk.disp) / (r1 * r2);
        const double dc = c - cos0;
        const double gg = rad[jj].g * rad[kk].g;
        out.energy += lambda * eps * dc * dc * gg;
        if (!want_forces) continue;
        const double de_dc = 2.0 * lambda * eps * dc * gg;
        const double de_dr1 = lambda * eps * dc * dc * rad[jj].dg * rad[kk].g;
        const double de_dr2 = lambda * eps * dc * dc * rad[jj].g * rad[kk].dg;
        // Gradients with respect to the displacement vectors d1 = r_j - r_i, d2 = r_k - r_i.
        Vec3 g1{}, g2{};
        for (int x = 0; x < 3; ++x) {
          const double dcd1 = nk.disp[x] / (r1 * r2) - c * nj.disp[x] / (r1 * r1);
          const double dcd2 = nj.disp[x] / (r1 * r2) - c * nk.disp[x] / (r2 * r2);
          g1[x] = de_dc * dcd1 + de_dr1 * nj.disp[x] / r1;
          g2[x] = de_dc * dcd2 + de_dr2 * nk.disp[x] / r2;
        }
        out.forces[static_cast<std::size_t>(nj.j)] -= g1;
        out.forces[static_cast<std::size_t>(nk.j)] -= g2;
        out.forces[i] += g1;
        out.forces[i] += g2;
      }
    }
  }
  return out;
}

EnergyForces evaluate(const EipModel& model, const Configuration& config, bool want_forces) {
  config.validate();
  switch (model.kind) {
    case EipKind::lennard_jones:
    case EipKind::morse: return pair_energy_forces(model, config, want_forces);
    case EipKind::stillinger_weber: return sw_energy_forces(model, config, want_forces);
  }
  throw ArgumentError("unknown EIP kind");
}

}  // namespace

double eip_energy(const EipModel& model, const Configuration& config) {
  return evaluate(model, config, false).energy;
}

std::vector<Vec3> eip_forces(const EipModel& model, const Configuration& config) {
  return evaluate(model, config, true).forces;
}

EnergyForces eip_energy_forces(const EipModel& model, const Configuration& config) {
  return evaluate(model, config, true);
}

double oracle_energy(const Oracle& oracle, const Configuration& config) {
  return eip_energy(oracle.base, config) + oracle.tail_weight * eip_energy(oracle.tail, config);
}

EnergyForces oracle_energy_forces(const Oracle& oracle, const Configuration& config) {
  EnergyForces base = eip_energy_forces(oracle.base, config);
  const EnergyForces tail = eip_energy_forces(oracle.tail, config);
  base.energy += oracle.tail_weight * tail.energy;
  for (std::size_t i = 0; i < base.forces.size(); ++i) base.forces[i] += oracle.tail_weight * tail.forces[i];
  return base;
}

}  // namespace wsnip
