#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "wsnip/datagen.hpp"
#include "wsnip/errors.hpp"
#include "wsnip/hash.hpp"
#include "wsnip/weaklabel.hpp"

using namespace wsnip;

namespace {

SamplerSpec small_sampler(std::uint64_t seed) {
  SamplerSpec s;
  s.lattice_count = 30;
  s.cluster_count = 20;
  s.dimer_count = 10;
  s.seed = seed;
  return s;
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("wsnip_test_datagen_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

double min_distance(const Configuration& c) {
  double best = 1e300;
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = i + 1; j < c.size(); ++j) best = std::min(best, norm(c.positions[i] - c.positions[j]));
  return best;
}

}  // namespace

TEST(Sampler, IdealDiamondCell) {
  SamplerSpec s;
  s.lattice_count = 1;
  s.cluster_count = 0;
  s.dimer_count = 0;
  s.displacement_tiers = {0.0};
  const auto configs = sample_configs(s);
  ASSERT_EQ(configs.size(), 1u);
  const auto ideal = ideal_lattice(LatticeKind::diamond, 5.431, {1, 1, 1}, 14);
  ASSERT_EQ(configs[0].size(), 8u);
  EXPECT_EQ(configs[0].positions, ideal.positions);
  EXPECT_TRUE(configs[0].periodic());
  // Diamond: every atom has four neighbours at a * sqrt(3) / 4.
  const auto nl = build_neighbor_list(ideal, 2.4);
  for (const auto& row : nl.entries) {
    ASSERT_EQ(row.size(), 4u);
    for (const auto& n : row) EXPECT_NEAR(n.dist, 5.431 * std::sqrt(3.0) / 4.0, 1e-12);
  }
  EXPECT_EQ(ideal_lattice(LatticeKind::fcc, 4.0, {2, 1, 1}, 13).size(), 8u);
}

TEST(Sampler, ClusterSizeRangeAndDistances) {
  SamplerSpec s;
  s.lattice_count = 0;
  s.dimer_count = 0;
  s.cluster_count = 50;
  s.cluster_min_size = 2;
  s.cluster_max_size = 2;
  for (const auto& c : sample_configs(s)) {
    EXPECT_EQ(c.size(), 2u);
    EXPECT_FALSE(c.periodic());
    EXPECT_EQ(c.properties.at("kind"), "random_cluster");
  }
  s.cluster_max_size = 10;
  s.cluster_count = 200;
  std::set<std::size_t> sizes;
  for (const auto& c : sample_configs(s)) {
    sizes.insert(c.size());
    EXPECT_GE(min_distance(c), 0.5 * s.dimer_equilibrium);
  }
  EXPECT_EQ(*sizes.begin(), 2u);
  EXPECT_EQ(*sizes.rbegin(), 10u);
}

TEST(Sampler, Deterministic) {
  SamplerSpec s;
  s.lattice_count = 300;
  s.cluster_count = 150;
  s.dimer_count = 50;
  s.seed = 42;
  const auto a = sample_configs(s), b = sample_configs(s);
  ASSERT_EQ(a.size(), 500u);
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i].positions, b[i].positions);
  s.seed = 43;
  EXPECT_NE(sample_configs(s)[0].positions, a[0].positions);
}

TEST(Sampler, KindsAndTiers) {
  const auto configs = sample_configs(small_sampler(1));
  std::size_t lattice = 0, cluster = 0, dimer = 0;
  for (const auto& c : configs) {
    const auto& k = c.properties.at("kind");
    lattice += k == "perturbed_lattice";
    cluster += k == "random_cluster";
    dimer += k == "dimer_scan";
    if (k == "dimer_scan") {
      ASSERT_EQ(c.size(), 2u);
      const double r = norm(c.positions[1] - c.positions[0]);
      EXPECT_GE(r, 2.0);
      EXPECT_LE(r, 4.0);
    }
  }
  EXPECT_EQ(lattice, 30u);
  EXPECT_EQ(cluster, 20u);
  EXPECT_EQ(dimer, 10u);
}

TEST(Sampler, Validation) {
  SamplerSpec s;
  s.displacement_tiers = {-0.1};
  EXPECT_THROW(s.validate(), ArgumentError);
  s = SamplerSpec{};
  s.cluster_max_size = 11;
  EXPECT_THROW(s.validate(), ArgumentError);
  s = SamplerSpec{};
  s.cluster_min_size = 1;
  EXPECT_THROW(s.validate(), ArgumentError);
  // Bonds shorter than the rejection distance cannot be satisfied.
  s = SamplerSpec{};
  s.lattice_count = 0;
  s.dimer_count = 0;
  s.cluster_count = 1;
  s.cluster_min_size = 10;
  s.cluster_bond_min = 0.5;
  s.cluster_bond_max = 0.6;
  EXPECT_THROW(sample_configs(s), SamplerError);
}

TEST(BuildDataset, CountsAndErrors) {
  const auto configs = sample_configs(small_sampler(2));
  const auto eips = default_eip_set();
  const auto b = build_dataset(configs, eips, 20, 3);
  EXPECT_EQ(b.dataset.m(), 20u);
  EXPECT_EQ(b.dataset.n(), 40u);
  EXPECT_EQ(b.dataset.eip.size(), 60u);
  std::set<std::size_t> all(b.dataset.dft.begin(), b.dataset.dft.end());
  all.insert(b.dataset.eip_only.begin(), b.dataset.eip_only.end());
  EXPECT_EQ(all.size(), 60u);
  for (std::size_t i = 0; i < 20; ++i)
    EXPECT_DOUBLE_EQ(b.dataset.dft_energy[i], oracle_energy(eips.oracle, configs[b.dataset.dft[i]]));
  ASSERT_EQ(b.sealed.indices, b.dataset.eip_only);
  for (std::size_t i : b.dataset.eip_only) EXPECT_DOUBLE_EQ(b.sealed.energy_of(i), oracle_energy(eips.oracle, configs[i]));
  EXPECT_THROW(b.sealed.energy_of(b.dataset.dft[0]), DataIntegrityError);

  const auto full = build_dataset(configs, eips, 60, 3);
  EXPECT_EQ(full.dataset.n(), 0u);
  EXPECT_THROW(build_dataset(configs, eips, 0, 3), ArgumentError);
  EXPECT_THROW(build_dataset(configs, eips, 61, 3), ArgumentError);
}

TEST(Splits, SizesAndDisjointness) {
  const auto splits = make_splits(100, SplitSpec{});
  ASSERT_EQ(splits.size(), 3u);
  std::set<std::vector<std::size_t>> tests;
  for (const auto& s : splits) {
    EXPECT_EQ(s.test.size(), 20u);
    EXPECT_EQ(s.validation.size(), 16u);
    EXPECT_EQ(s.train.size(), 64u);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.validation.begin(), s.validation.end());
    all.insert(s.test.begin(), s.test.end());
    EXPECT_EQ(all.size(), 100u);
    EXPECT_EQ(*all.rbegin(), 99u);
    auto t = s.test;
    std::sort(t.begin(), t.end());
    tests.insert(t);
  }
  EXPECT_EQ(tests.size(), 3u);
  const auto again = make_splits(100, SplitSpec{});
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(again[k].test, splits[k].test);
  SplitSpec other;
  other.seed = 9;
  EXPECT_NE(make_splits(100, other)[0].test, splits[0].test);
  EXPECT_THROW(make_splits(4, SplitSpec{}), ArgumentError);
  EXPECT_NO_THROW(make_splits(5, SplitSpec{}));
}

TEST(Generate, DefaultRegime) {
  GenerateOptions o;
  const auto eips = default_eip_set();
  const auto g = generate_dataset(o, eips);
  const auto& ds = g.built.dataset;
  EXPECT_EQ(ds.configs.size(), 2000u);
  EXPECT_EQ(ds.m(), 100u);
  EXPECT_EQ(ds.n(), 1900u);
  EXPECT_EQ(ds.eip.size(), 2000u);
  for (const auto& row : ds.eip.rows) {
    ASSERT_EQ(row.size(), eips.size());
    for (double e : row) ASSERT_TRUE(std::isfinite(e));
  }
  for (double e : ds.dft_energy) ASSERT_TRUE(std::isfinite(e));
  for (double e : g.built.sealed.energies) ASSERT_TRUE(std::isfinite(e));

  // Recompute the ground-truth best-EIP distribution over every configuration.
  std::vector<double> oracle(ds.configs.size());
  for (std::size_t i = 0; i < ds.configs.size(); ++i) oracle[i] = oracle_energy(eips.oracle, ds.configs[i]);
  std::vector<std::size_t> counts(eips.size() + 1, 0);
  for (std::size_t i = 0; i < ds.configs.size(); ++i) ++counts[best_eip_label(ds.eip.rows[i], oracle[i], ds.atoms(i)).cls];
  std::size_t frequent = 0;
  for (std::size_t p = 0; p < eips.size(); ++p) frequent += counts[p] >= 200;
  EXPECT_GE(frequent, 2u);
  const auto dist = best_eip_distribution(ds.configs, ds.eip, oracle, 0.1);
  for (std::size_t p = 0; p <= eips.size(); ++p) EXPECT_NEAR(dist[p], counts[p] / 2000.0, 1e-12);
}

TEST(Generate, SaveLoadRoundTrip) {
  GenerateOptions o;
  o.sampler = small_sampler(5);
  o.m = 20;
  o.min_class_fraction = 0.0;
  const auto eips = default_eip_set();
  const auto g = generate_dataset(o, eips);
  const auto dir = fresh_dir("roundtrip");
  const auto hash = save_dataset(dir.string(), g, eips, o);
  EXPECT_EQ(hash.size(), 40u);
  const std::size_t reads = sealed_oracle_reads();
  const auto loaded = load_dataset(dir.string());
  EXPECT_EQ(sealed_oracle_reads(), reads);
  EXPECT_EQ(loaded.manifest_hash, hash);
  EXPECT_EQ(loaded.dataset.dft, g.built.dataset.dft);
  EXPECT_EQ(loaded.dataset.dft_energy, g.built.dataset.dft_energy);
  EXPECT_EQ(loaded.dataset.eip.rows, g.built.dataset.eip.rows);
  EXPECT_EQ(loaded.eips.names(), eips.names());
  ASSERT_EQ(loaded.splits.size(), g.splits.size());
  for (std::size_t k = 0; k < g.splits.size(); ++k) EXPECT_EQ(loaded.splits[k].test, g.splits[k].test);
  for (std::size_t i = 0; i < g.built.dataset.configs.size(); ++i) {
    ASSERT_EQ(loaded.dataset.configs[i].size(), g.built.dataset.configs[i].size());
    for (std::size_t a = 0; a < loaded.dataset.configs[i].size(); ++a)
      for (int x = 0; x < 3; ++x)
        ASSERT_NEAR(loaded.dataset.configs[i].positions[a][x], g.built.dataset.configs[i].positions[a][x], 1e-12);
  }
  const auto sealed = load_sealed_oracle(dir.string());
  EXPECT_EQ(sealed_oracle_reads(), reads + 1);
  EXPECT_EQ(sealed.energies, g.built.sealed.energies);

  // Same inputs, same bytes, same hash.
  const auto dir2 = fresh_dir("roundtrip2");
  EXPECT_EQ(save_dataset(dir2.string(), generate_dataset(o, eips), eips, o), hash);

  // A tampered EIP set is caught by the manifest hash.
  {
    std::ofstream f(dir / kEipSetFile, std::ios::app);
    f << " ";
  }
  EXPECT_THROW(load_dataset(dir.string()), DataIntegrityError);
  std::filesystem::remove(dir2 / kSealedOracle);
  EXPECT_THROW(load_sealed_oracle(dir2.string()), Error);
}

TEST(Hash, GitBlob) {
  // `git hash-object` of an empty file and of "hello\n".
  EXPECT_EQ(git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}
