#pragma once
// Shared helpers for the unit tests.

#include <cmath>
#include <random>

#include "wsnip/atoms.hpp"

namespace wsnip::fixtures {

// Random triclinic cell with positive determinant and n atoms inside it.
inline Configuration random_periodic(std::mt19937_64& rng, int n, double scale = 4.0, bool skew = true) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Configuration c;
  Mat3 cell{};
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) cell[a][b] = a == b ? scale * (0.8 + 0.6 * u(rng)) : (skew ? scale * 0.3 * (u(rng) - 0.5) : 0.0);
  c.cell = cell;
  c.pbc = {true, true, true};
  for (int i = 0; i < n; ++i) {
    const double f0 = u(rng), f1 = u(rng), f2 = u(rng);
    Vec3 r{};
    for (int k = 0; k < 3; ++k) r[k] = f0 * cell[0][k] + f1 * cell[1][k] + f2 * cell[2][k];
    c.positions.push_back(r);
    c.species.push_back(14);
  }
  return c;
}

// Cluster with every pair at least min_dist apart.
inline Configuration random_cluster(std::mt19937_64& rng, int n, double box = 5.0, double min_dist = 1.9) {
  std::uniform_real_distribution<double> u(0.0, box);
  Configuration c;
  while (static_cast<int>(c.size()) < n) {
    Vec3 r{u(rng), u(rng), u(rng)};
    bool ok = true;
    for (const auto& p : c.positions) ok = ok && norm(r - p) >= min_dist;
    if (!ok) continue;
    c.positions.push_back(r);
    c.species.push_back(14);
  }
  return c;
}

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace wsnip::fixtures
