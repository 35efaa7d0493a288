#include <charconv>
#include <cmath>
#include <sstream>

#include "wsnip/atoms.hpp"
#include "wsnip/errors.hpp"

namespace wsnip {

double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

double determinant(const Mat3& m) { return dot(m[0], cross(m[1], m[2])); }

Vec3 image_offset(const Mat3& cell, const Shift& shift) {
  Vec3 out{0.0, 0.0, 0.0};
  for (int k = 0; k < 3; ++k)
    if (shift[k] != 0) out += static_cast<double>(shift[k]) * cell[k];
  return out;
}

void Configuration::validate() const {
  if (positions.empty()) throw ArgumentError("configuration has no atoms");
  if (species.size() != positions.size())
    throw ArgumentError("species and positions differ in length (" + std::to_string(species.size()) +
                        " vs " + std::to_string(positions.size()) + ")");
  for (int z : species)
    if (z < 1 || z > 118) throw ArgumentError("invalid atomic number " + std::to_string(z));
  for (const Vec3& r : positions)
    for (double x : r)
      if (!std::isfinite(x)) throw ArgumentError("non-finite coordinate");
  if (cell) {
    for (const Vec3& row : *cell)
      for (double x : row)
        if (!std::isfinite(x)) throw InvalidCellError("non-finite cell entry");
  }
  if (periodic()) {
    if (!cell) throw InvalidCellError("periodic configuration without a cell");
    const double det = determinant(*cell);
    if (std::abs(det) < 1e-12) throw InvalidCellError("degenerate cell (|det| < 1e-12)");
    if (det <= 0.0) throw InvalidCellError("cell determinant must be positive");
  }
}

std::optional<double> Configuration::property_as_double(const std::string& key) const {
  auto it = properties.find(key);
  if (it == properties.end()) return std::nullopt;
  const std::string& s = it->second;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

void Configuration::set_property(const std::string& key, double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  properties[key] = std::string(buf, ptr);
}

namespace {

Mat3 inverse(const Mat3& m) {
  const double det = determinant(m);
  if (std::abs(det) < 1e-12) throw InvalidCellError("degenerate cell (|det| < 1e-12)");
  // Columns of the inverse are the reciprocal vectors.
  const Vec3 c0 = cross(m[1], m[2]);
  const Vec3 c1 = cross(m[2], m[0]);
  const Vec3 c2 = cross(m[0], m[1]);
  Mat3 inv{};
  for (int r = 0; r < 3; ++r) {
    inv[r][0] = c0[r] / det;
    inv[r][1] = c1[r] / det;
    inv[r][2] = c2[r] / det;
  }
  return inv;
}

Vec3 to_fractional(const Mat3& inv, const Vec3& r) {
  Vec3 f{0.0, 0.0, 0.0};
  for (int c = 0; c < 3; ++c) f[c] = r[0] * inv[0][c] + r[1] * inv[1][c] + r[2] * inv[2][c];
  return f;
}

}  // namespace

Configuration wrap_positions(const Configuration& config) {
  Configuration out = config;
  if (!config.periodic()) return out;
  const Mat3& cell = *config.cell;
  const Mat3 inv = inverse(cell);
  for (Vec3& r : out.positions) {
    Vec3 f = to_fractional(inv, r);
    Shift s{0, 0, 0};
    for (int k = 0; k < 3; ++k)
      if (config.pbc[k]) s[k] = -static_cast<int>(std::floor(f[k]));
    r += image_offset(cell, s);
  }
  return out;
}

std::size_t NeighborList::pair_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.size();
  return n;
}

NeighborList build_neighbor_list(const Configuration& config, double cutoff) {
  if (!(cutoff > 0.0) || !std::isfinite(cutoff)) throw ArgumentError("cutoff must be positive");
  const std::size_t n = config.size();
  NeighborList nl;
  nl.cutoff = cutoff;
  nl.entries.resize(n);
  const double cutoff2 = cutoff * cutoff;

  if (!config.periodic()) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const Vec3 d = config.positions[j] - config.positions[i];
        const double r2 = dot(d, d);
        if (r2 <= cutoff2) nl.entries[i].push_back({static_cast<int>(j), {0, 0, 0}, d, std::sqrt(r2)});
      }
    return nl;
  }

  if (!config.cell) throw InvalidCellError("periodic configuration without a cell");
  const Mat3& cell = *config.cell;
  const double det = determinant(cell);
  if (std::abs(det) < 1e-12) throw InvalidCellError("degenerate cell (|det| < 1e-12)");
  const Mat3 inv = inverse(cell);

  // Distance between lattice planes spanned by the two other vectors.
  std::array<double, 3> reach{0.0, 0.0, 0.0};
  for (int k = 0; k < 3; ++k) {
    if (!config.pbc[k]) continue;
    const double height = std::abs(det) / norm(cross(cell[(k + 1) % 3], cell[(k + 2) % 3]));
    reach[k] = cutoff / height;
  }

  std::vector<Vec3> frac(n);
  for (std::size_t i = 0; i < n; ++i) frac[i] = to_fractional(inv, config.positions[i]);

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      // |disp| <= cutoff bounds each fractional component of disp by reach[k].
      std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
      for (int k = 0; k < 3; ++k) {
        if (!config.pbc[k]) continue;
        const double df = frac[j][k] - frac[i][k];
        lo[k] = static_cast<int>(std::ceil(-reach[k] - df - 1e-9));
        hi[k] = static_cast<int>(std::floor(reach[k] - df + 1e-9));
      }
      const Vec3 base = config.positions[j] - config.positions[i];
      for (int s0 = lo[0]; s0 <= hi[0]; ++s0)
        for (int s1 = lo[1]; s1 <= hi[1]; ++s1)
          for (int s2 = lo[2]; s2 <= hi[2]; ++s2) {
            if (i == j && s0 == 0 && s1 == 0 && s2 == 0) continue;
            const Shift s{s0, s1, s2};
            const Vec3 d = base + image_offset(cell, s);
            const double r2 = dot(d, d);
            if (r2 <= cutoff2) nl.entries[i].push_back({static_cast<int>(j), s, d, std::sqrt(r2)});
          }
    }
  }
  return nl;
}

}  // namespace wsnip
