#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "testing.hpp"
#include "wsnip/datagen.hpp"
#include "wsnip/eip.hpp"
#include "wsnip/errors.hpp"

using namespace wsnip;

namespace {

EipModel lj(double eps, double sigma, double cutoff, bool taper) {
  EipModel m;
  m.name = "lj";
  m.kind = EipKind::lennard_jones;
  m.params = {{"epsilon", eps}, {"sigma", sigma}};
  m.cutoff = cutoff;
  m.taper = taper;
  return m;
}

EipModel morse(double d, double a, double r0, double cutoff, bool taper) {
  EipModel m;
  m.name = "morse";
  m.kind = EipKind::morse;
  m.params = {{"D", d}, {"alpha", a}, {"r0", r0}};
  m.cutoff = cutoff;
  m.taper = taper;
  return m;
}

Configuration dimer(double r) {
  Configuration c;
  c.species = {14, 14};
  c.positions = {{0, 0, 0}, {r, 0, 0}};
  return c;
}

// Published SW functional form summed over all images with |shift| <= 2, no neighbor list.
double sw_direct(const EipModel& m, const Configuration& c) {
  const double eps = m.param("epsilon"), sig = m.param("sigma"), a = m.param("a"), lam = m.param("lambda"),
               gam = m.param("gamma"), A = m.param("A"), B = m.param("B"), p = m.param("p"), q = m.param("q"),
               c0 = m.param("costheta0");
  const double rc = a * sig;
  const int reach = c.periodic() ? 2 : 0;
  double e2 = 0.0, e3 = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    std::vector<Vec3> nb;
    for (std::size_t j = 0; j < c.size(); ++j)
      for (int x = -reach; x <= reach; ++x)
        for (int y = -reach; y <= reach; ++y)
          for (int z = -reach; z <= reach; ++z) {
            if (i == j && x == 0 && y == 0 && z == 0) continue;
            Vec3 rj = c.positions[j];
            if (c.cell) rj += image_offset(*c.cell, {x, y, z});
            const Vec3 d = rj - c.positions[i];
            const double r = norm(d);
            if (r >= rc) continue;
            nb.push_back(d);
            e2 += 0.5 * A * eps * (B * std::pow(sig / r, p) - std::pow(sig / r, q)) * std::exp(sig / (r - rc));
          }
    for (std::size_t j = 0; j < nb.size(); ++j)
      for (std::size_t k = j + 1; k < nb.size(); ++k) {
        const double rij = norm(nb[j]), rik = norm(nb[k]);
        const double cs = dot(nb[j], nb[k]) / (rij * rik);
        e3 += lam * eps * (cs - c0) * (cs - c0) * std::exp(gam * sig / (rij - rc)) * std::exp(gam * sig / (rik - rc));
      }
  }
  return e2 + e3;
}

// Morse tail plus SW, pair term with cosine taper, direct image sum.
double pair_direct(const EipModel& m, const Configuration& c) {
  const int reach = c.periodic() ? 2 : 0;
  double e = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j)
      for (int x = -reach; x <= reach; ++x)
        for (int y = -reach; y <= reach; ++y)
          for (int z = -reach; z <= reach; ++z) {
            if (i == j && x == 0 && y == 0 && z == 0) continue;
            Vec3 rj = c.positions[j];
            if (c.cell) rj += image_offset(*c.cell, {x, y, z});
            const double r = norm(rj - c.positions[i]);
            if (r > m.cutoff) continue;
            const double D = m.param("D"), al = m.param("alpha"), r0 = m.param("r0");
            const double phi = D * (std::exp(-2 * al * (r - r0)) - 2 * std::exp(-al * (r - r0)));
            e += 0.5 * phi * 0.5 * (std::cos(M_PI * r / m.cutoff) + 1.0);
          }
  return e;
}

Configuration diamond(double a) { return ideal_lattice(LatticeKind::diamond, a, {1, 1, 1}, 14); }

std::vector<Vec3> fd_forces(const EipModel& m, Configuration c, double h) {
  std::vector<Vec3> f(c.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    for (int k = 0; k < 3; ++k) {
      const double x = c.positions[i][k];
      c.positions[i][k] = x + h;
      const double ep = eip_energy(m, c);
      c.positions[i][k] = x - h;
      const double em = eip_energy(m, c);
      c.positions[i][k] = x;
      f[i][k] = -(ep - em) / (2 * h);
    }
  return f;
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  double q[4];
  double n = 0;
  for (double& v : q) {
    v = g(rng);
    n += v * v;
  }
  n = std::sqrt(n);
  for (double& v : q) v /= n;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  return Mat3{Vec3{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
              Vec3{2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
              Vec3{2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}};
}

Vec3 rotate(const Mat3& r, const Vec3& v) { return {dot(r[0], v), dot(r[1], v), dot(r[2], v)}; }

std::vector<EipModel> all_models() {
  auto set = default_eip_set();
  auto models = set.models;
  models.push_back(set.oracle.base);
  models.push_back(set.oracle.tail);
  models.push_back(lj(1.0, 2.0, 4.0, true));
  return models;
}

}  // namespace

TEST(EipEnergy, LennardJonesDimerMinimum) {
  EXPECT_NEAR(eip_energy(lj(1.0, 1.0, 10.0, false), dimer(std::pow(2.0, 1.0 / 6.0))), -1.0, 1e-12);
}

TEST(EipEnergy, MorseDimerMinimum) {
  EXPECT_NEAR(eip_energy(morse(1.0, 1.0, 2.0, 10.0, false), dimer(2.0)), -1.0, 1e-12);
}

TEST(EipEnergy, LennardJonesTrimer) {
  const double r = std::pow(2.0, 1.0 / 6.0);
  Configuration c;
  c.species = {14, 14, 14};
  c.positions = {{0, 0, 0}, {r, 0, 0}, {r / 2, r * std::sqrt(3.0) / 2, 0}};
  EXPECT_NEAR(eip_energy(lj(1.0, 1.0, 10.0, false), c), -3.0, 1e-12);
}

TEST(EipEnergy, TaperedPairMatchesDirectSum) {
  const auto m = morse(0.6, 0.9, 3.2, 6.0, true);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 5; ++t) {
    const auto c = fixtures::random_cluster(rng, 6, 5.0);
    EXPECT_NEAR(eip_energy(m, c), pair_direct(m, c), 1e-10);
  }
}

TEST(EipEnergy, StillingerWeberDiamondMatchesDirectSum) {
  const auto sw = stillinger_weber_si();
  const auto c = diamond(5.431);
  const double e = eip_energy(sw, c);
  EXPECT_NEAR(e, sw_direct(sw, c), 1e-9);
  // Published cohesive energy of the SW diamond lattice: -2 epsilon per atom.
  EXPECT_NEAR(e / 8.0, -4.3366, 2e-3);
}

TEST(EipEnergy, StillingerWeberClustersMatchDirectSum) {
  std::mt19937_64 rng(2);
  const auto perturbed = default_eip_set().models.back();
  for (int t = 0; t < 10; ++t) {
    const auto c = fixtures::random_cluster(rng, 7, 4.5, 1.9);
    EXPECT_NEAR(eip_energy(perturbed, c), sw_direct(perturbed, c), 1e-9);
  }
}

TEST(EipEnergy, CoincidentAtoms) {
  EXPECT_THROW(eip_energy(lj(1, 1, 3, true), dimer(1e-9)), CoincidentAtomsError);
}

TEST(EipForces, FiniteDifferencesOnRandomConfigs) {
  std::mt19937_64 rng(42);
  const auto models = all_models();
  int checked = 0;
  for (int t = 0; t < 50; ++t) {
    Configuration c = t % 2 ? fixtures::random_cluster(rng, 6, 4.5, 2.0) : fixtures::random_periodic(rng, 4, 4.5, true);
    if (c.periodic()) {
      // keep atoms apart
      bool ok = true;
      const auto nl = build_neighbor_list(c, 1.9);
      ok = nl.pair_count() == 0;
      if (!ok) continue;
    }
    for (const auto& m : models) {
      const auto f = eip_forces(m, c);
      const auto fd = fd_forces(m, c, 1e-5);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < c.size(); ++i)
        for (int k = 0; k < 3; ++k) {
          num = std::max(num, std::abs(f[i][k] - fd[i][k]));
          den = std::max(den, std::abs(fd[i][k]));
        }
      EXPECT_LE(num / std::max(den, 1e-3), 1e-6) << m.name << " trial " << t;
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(EipForces, SumToZeroForIsolatedSystems) {
  std::mt19937_64 rng(7);
  for (const auto& m : all_models()) {
    const auto c = fixtures::random_cluster(rng, 8, 5.0, 2.0);
    Vec3 s{};
    for (const auto& f : eip_forces(m, c)) s += f;
    EXPECT_LE(norm(s), 1e-9) << m.name;
  }
}

TEST(EipForces, DimerSigns) {
  const auto m = lj(1.0, 1.0, 10.0, false);
  const auto f0 = eip_forces(m, dimer(std::pow(2.0, 1.0 / 6.0)));
  EXPECT_NEAR(f0[0][0], 0.0, 1e-8);
  EXPECT_NEAR(f0[1][0], 0.0, 1e-8);
  const auto f = eip_forces(m, dimer(1.5));
  EXPECT_GT(f[0][0], 0.0);  // pulled toward the other atom
  EXPECT_LT(f[1][0], 0.0);
  EXPECT_NEAR(f[0][0], -f[1][0], 1e-12);
  const auto ef = eip_energy_forces(m, dimer(1.5));
  EXPECT_EQ(ef.forces[0][0], f[0][0]);
}

TEST(EipProperties, TaperContinuityAcrossCutoff) {
  for (const auto& m : all_models()) {
    const double rc = m.effective_cutoff();
    // Grid of 1e-4 A steps straddling the cutoff.
    const double start = rc - 0.01 + 0.5e-4;
    double prev = eip_energy(m, dimer(start));
    for (int s = 1; s < 200; ++s) {
      const double r = start + s * 1e-4;
      const double e = eip_energy(m, dimer(r));
      if (r - 1e-4 <= rc && r > rc) {
        EXPECT_LE(std::abs(e - prev), 1e-8) << m.name;
        EXPECT_EQ(e, 0.0) << m.name;
      }
      prev = e;
    }
  }
}

TEST(EipProperties, SupercellExtensivity) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.1);
  auto c = diamond(5.431);
  for (auto& p : c.positions)
    for (double& x : p) x += g(rng);
  auto sc = c;
  for (const auto& p : c.positions) {
    sc.positions.push_back(p + (*c.cell)[0]);
    sc.species.push_back(14);
  }
  (*sc.cell)[0] = 2.0 * (*c.cell)[0];
  for (const auto& m : all_models()) EXPECT_NEAR(eip_energy(m, sc), 2.0 * eip_energy(m, c), 1e-8) << m.name;
}

TEST(EipProperties, PermutationAndRotationInvariance) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    const auto c = fixtures::random_cluster(rng, 7, 5.0, 2.0);
    auto perm = c;
    std::vector<std::size_t> order(c.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < c.size(); ++i) perm.positions[i] = c.positions[order[i]];
    auto rot = c;
    const Mat3 R = random_rotation(rng);
    for (auto& p : rot.positions) p = rotate(R, p);
    for (const auto& m : all_models()) {
      const double e = eip_energy(m, c);
      EXPECT_NEAR(eip_energy(m, perm), e, 1e-10) << m.name;
      EXPECT_NEAR(eip_energy(m, rot), e, 1e-9) << m.name;
    }
    const auto o = default_oracle();
    EXPECT_NEAR(oracle_energy(o, rot), oracle_energy(o, c), 1e-9);
  }
}

TEST(Oracle, ClosedFormOnPerturbedDiamond) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 0.1);
  auto c = diamond(5.431);
  for (auto& p : c.positions)
    for (double& x : p) x += g(rng);
  const auto o = default_oracle();
  EXPECT_NEAR(oracle_energy(o, c), sw_direct(o.base, c) + o.tail_weight * pair_direct(o.tail, c), 1e-9);
  const auto ef = oracle_energy_forces(o, c);
  EXPECT_NEAR(ef.energy, oracle_energy(o, c), 1e-12);
}

TEST(Oracle, DimerCurveVersusDefaultEips) {
  const auto set = default_eip_set();
  auto per_atom = [](double e) { return e / 2.0; };
  std::vector<double> rs;
  for (int i = 0; i < 50; ++i) rs.push_back(1.9 + 3.0 * i / 49.0);
  double rmin = rs[0];
  for (double r : rs)
    if (oracle_energy(set.oracle, dimer(r)) < oracle_energy(set.oracle, dimer(rmin))) rmin = r;
  for (const auto& m : set.models) {
    double worst = 0.0;
    for (double r : rs)
      worst = std::max(worst, per_atom(std::abs(eip_energy(m, dimer(r)) - oracle_energy(set.oracle, dimer(r)))));
    EXPECT_GT(worst, 0.01) << m.name;
  }
  // Within 0.3 A of the oracle minimum some EIP is within 0.1 eV/atom at every sample.
  for (double r : rs) {
    if (std::abs(r - rmin) > 0.3) continue;
    double best = 1e9;
    for (const auto& m : set.models)
      best = std::min(best, per_atom(std::abs(eip_energy(m, dimer(r)) - oracle_energy(set.oracle, dimer(r)))));
    EXPECT_LE(best, 0.1) << "r = " << r;
  }
}

TEST(EipSet, LabelTable) {
  const auto set = default_eip_set();
  EXPECT_EQ(set.size(), 4u);
  EXPECT_TRUE(label_with_eips(set, std::vector<Configuration>{}).rows.empty());
  std::vector<Configuration> one{dimer(2.3)};
  EipSet two = set.subset({set.models[0].name, set.models[1].name});
  const auto t1 = label_with_eips(two, one);
  ASSERT_EQ(t1.rows.size(), 1u);
  EXPECT_EQ(t1.rows[0].size(), 2u);

  std::mt19937_64 rng(6);
  std::vector<Configuration> cs;
  for (int i = 0; i < 100; ++i) cs.push_back(fixtures::random_cluster(rng, 2 + i % 6, 5.0, 2.0));
  const auto t = label_with_eips(set, cs);
  for (std::size_t i = 0; i < cs.size(); ++i)
    for (std::size_t p = 0; p < set.size(); ++p) ASSERT_EQ(t.at(i, p), eip_energy(set.models[p], cs[i]));
}

TEST(EipSet, ErrorsAreTagged) {
  auto set = default_eip_set();
  std::vector<Configuration> cs{dimer(2.3), dimer(0.0)};
  try {
    label_with_eips(set, cs);
    FAIL();
  } catch (const Error& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("1"), std::string::npos);
    EXPECT_NE(what.find(set.models[0].name), std::string::npos);
  }
}

TEST(EipSet, Validation) {
  auto set = default_eip_set();
  set.models.push_back(set.models[0]);
  EXPECT_THROW(set.validate(), ArgumentError);
  auto bad = lj(1.0, 1.0, -1.0, true);
  EXPECT_THROW(bad.validate(), ArgumentError);
  bad = lj(std::nan(""), 1.0, 3.0, true);
  EXPECT_THROW(bad.validate(), ArgumentError);
  EXPECT_THROW(default_eip_set().index_of("nope"), ArgumentError);
}

TEST(EipSet, JsonRoundTrip) {
  const auto set = default_eip_set();
  const auto back = parse_eip_set(eip_set_to_json(set));
  EXPECT_EQ(eip_set_to_json(back), eip_set_to_json(set));
  EXPECT_THROW(parse_eip_set("{not json"), ParseError);
}

TEST(EipSet, DefaultsMatchVersionedConstantsFile) {
  std::ifstream f(std::string(WSNIP_DATA_DIR) + "/eipset_default.json");
  ASSERT_TRUE(f.good());
  std::stringstream s;
  s << f.rdbuf();
  const EipSet file = parse_eip_set(s.str());
  const EipSet def = default_eip_set();
  EXPECT_EQ(eip_set_to_json(file), eip_set_to_json(def));
  EXPECT_EQ(file.oracle.tail_weight, 0.15);
  EXPECT_EQ(file.oracle.version, 1);
}
