#pragma once
// Atomic configurations, periodic images and neighbor lists.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wsnip {

using Vec3 = std::array<double, 3>;
// Lattice vectors stored as rows.
using Mat3 = std::array<Vec3, 3>;
using Shift = std::array<int, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline Vec3& operator+=(Vec3& a, const Vec3& b) {
  a[0] += b[0];
  a[1] += b[1];
  a[2] += b[2];
  return a;
}
inline Vec3& operator-=(Vec3& a, const Vec3& b) {
  a[0] -= b[0];
  a[1] -= b[1];
  a[2] -= b[2];
  return a;
}
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double norm(const Vec3& a);
double determinant(const Mat3& m);

// Periodic image offset shift . cell.
Vec3 image_offset(const Mat3& cell, const Shift& shift);

// Element symbols for Z = 1..118.
std::string_view element_symbol(int z);
// Returns 0 for unknown symbols.
int atomic_number(std::string_view symbol);

struct Configuration {
  std::vector<int> species;  // atomic numbers
  std::vector<Vec3> positions;
  std::optional<Mat3> cell;
  std::array<bool, 3> pbc{false, false, false};
  // Extra comment-line keys carried through extended-XYZ I/O.
  std::map<std::string, std::string> properties;

  std::size_t size() const noexcept { return positions.size(); }
  bool periodic() const noexcept { return pbc[0] || pbc[1] || pbc[2]; }

  // Throws ArgumentError / InvalidCellError on a broken invariant.
  void validate() const;

  std::optional<double> property_as_double(const std::string& key) const;
  void set_property(const std::string& key, double value);
};

// Positions wrapped into [0,1) fractional coordinates along periodic directions.
Configuration wrap_positions(const Configuration& config);

struct Neighbor {
  int j;
  Shift shift;
  Vec3 disp;  // r_j + shift . cell - r_i
  double dist;
};

struct NeighborList {
  double cutoff = 0.0;
  std::vector<std::vector<Neighbor>> entries;

  std::size_t size() const noexcept { return entries.size(); }
  std::size_t pair_count() const;
};

// Explicit image enumeration: supports cutoffs larger than half the cell.
NeighborList build_neighbor_list(const Configuration& config, double cutoff);

// Extended-XYZ text I/O.
std::vector<Configuration> read_xyz(std::string_view text);
std::string write_xyz(const std::vector<Configuration>& configs);

std::vector<Configuration> read_xyz_file(const std::string& path);
void write_xyz_file(const std::string& path, const std::vector<Configuration>& configs);

}  // namespace wsnip
