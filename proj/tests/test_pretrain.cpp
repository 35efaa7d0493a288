#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "wsnip/datagen.hpp"
#include "wsnip/errors.hpp"
#include "wsnip/pretrain.hpp"

using namespace wsnip;

namespace {

RepresentationSpec tiny(Backend backend = Backend::descriptor) {
  RepresentationSpec s;
  s.backend = backend;
  s.hidden = 16;
  s.depth = 2;
  s.message_passing.hidden = 8;
  s.message_passing.layers = 2;
  s.message_passing.radial_count = 6;
  return s;
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

class Pretraining : public ::testing::Test {
 protected:
  void SetUp() override {
    SamplerSpec sampler;
    sampler.lattice_count = 24;
    sampler.cluster_count = 24;
    sampler.dimer_count = 0;
    sampler.seed = 1;
    configs = sample_configs(sampler);
    eips = default_eip_set();
    table = label_with_eips(eips, configs);
    for (std::size_t i = 0; i < configs.size(); ++i) pool.push_back(i);
    options.repr = tiny();
    options.train.epochs = 40;
    options.train.batch_size = 8;
    options.train.select_best = false;
    options.init_seed = 2;
    store = FeatureStore::build(options.repr, configs);
  }

  std::vector<Configuration> configs;
  EipSet eips;
  EnergyTable table;
  std::vector<std::size_t> pool;
  PretrainOptions options;
  FeatureStore store;
};

}  // namespace

TEST_F(Pretraining, HeadsAndHistory) {
  const auto r = pretrain(table, store, pool, options);
  EXPECT_EQ(r.net.outputs(), eips.size());
  ASSERT_EQ(r.head_mae.size(), eips.size());
  ASSERT_EQ(r.target_std.size(), eips.size());
  EXPECT_EQ(r.history.epochs.size(), 40u);
  EXPECT_LT(r.history.epochs.back().train_loss, r.history.epochs.front().train_loss);
  // Recompute the reported training MAE per head.
  const auto pred = predict(r.net, store, pool);
  for (std::size_t p = 0; p < eips.size(); ++p) {
    double mae = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i) mae += std::abs(pred(i, p) - table.at(pool[i], p)) / pool.size();
    EXPECT_NEAR(r.head_mae[p], mae, 1e-9 * mae);
    EXPECT_GT(r.target_std[p], 0.0);
  }
}

TEST_F(Pretraining, DeterministicPerSeed) {
  options.train.epochs = 3;
  const auto a = pretrain(table, store, pool, options);
  const auto b = pretrain(table, store, pool, options);
  EXPECT_EQ(a.net.params().snapshot(), b.net.params().snapshot());
  options.init_seed = 3;
  const auto c = pretrain(table, store, pool, options);
  EXPECT_NE(a.net.params().snapshot(), c.net.params().snapshot());
}

TEST_F(Pretraining, SingleHeadIsSingleTaskRegression) {
  const auto one = eips.subset({"lj"});
  const auto t1 = label_with_eips(one, configs);
  options.train.epochs = 5;
  options.normalize_targets = false;
  const auto r = pretrain(t1, store, pool, options);
  EXPECT_EQ(r.net.outputs(), 1u);
  EXPECT_EQ(r.net.head_prefix(0), "head.");
  EnergyTable empty;
  empty.rows.assign(configs.size(), {});
  EXPECT_THROW(pretrain(empty, store, pool, options), ArgumentError);
}

TEST_F(Pretraining, SharedRepresentationCouplesHeads) {
  for (auto backend : {Backend::descriptor, Backend::message_passing}) {
    const auto spec = tiny(backend);
    const auto st = FeatureStore::build(spec, configs);
    auto net = Network::potential(spec, eips.size());
    net.init(5);
    const std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5};
    const auto batch = gather(st, idx);
    for (std::size_t head = 0; head < eips.size(); ++head) {
      Network::Tape tape;
      const auto out = net.forward(batch, &tape);
      Matrix dout(out.rows, out.cols);
      for (std::size_t r = 0; r < out.rows; ++r) dout(r, head) = 1.0;
      net.params().zero_grad();
      net.backward(batch, tape, dout);
      // Every trainable representation array receives gradient from this head alone.
      for (std::size_t i = 0; i < net.params().size(); ++i) {
        const auto& p = net.params()[i];
        if (!p.trainable || p.name.rfind("rep.", 0) != 0) continue;
        double norm = 0.0;
        for (double g : p.grad) norm += g * g;
        EXPECT_GT(norm, 0.0) << p.name << " head " << head;
      }
    }
  }
}

TEST_F(Pretraining, TransferIsBitExact) {
  options.train.epochs = 2;
  const auto r = pretrain(table, store, pool, options);
  const auto rep = representation_checkpoint(r.net);
  for (const auto& [name, arr] : rep.arrays) EXPECT_EQ(name.rfind("rep.", 0), 0u) << name;
  EXPECT_EQ(rep.arrays.size(), 2u + 2u * options.repr.depth);  // input buffers + MLP weights and biases

  const auto back = checkpoint_from_json(checkpoint_to_json(rep));
  auto fresh = Network::potential(options.repr, 1);
  fresh.init(99);
  EXPECT_EQ(apply_checkpoint(fresh.params(), back, "rep."), rep.arrays.size());
  const std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5, 6, 7};
  const auto batch = gather(store, idx);
  EXPECT_EQ(fresh.atom_features(batch).data, r.net.atom_features(batch).data);
  // Loading then saving reproduces the arrays bit for bit.
  const auto again = representation_checkpoint(fresh);
  for (const auto& [name, arr] : rep.arrays) EXPECT_EQ(again.arrays.at(name).values, arr.values) << name;

  auto other = tiny();
  other.hidden = 12;
  auto mismatch = Network::potential(other, 1);
  EXPECT_THROW(apply_checkpoint(mismatch.params(), back, "rep."), IncompatibleCheckpointError);
}

TEST_F(Pretraining, FinetuneZeroEpochsIsPretrainedPlusFreshHead) {
  options.train.epochs = 2;
  const auto r = pretrain(table, store, pool, options);
  const auto rep = representation_checkpoint(r.net);
  PotentialOptions po;
  po.repr = options.repr;
  po.init_seed = 7;
  po.train.epochs = 0;
  po.train.scheduler = SchedulerKind::linear_decay;
  AugmentedSet set;
  std::vector<EnergyExample> val;
  for (std::size_t i = 0; i < 8; ++i) set.dft.push_back({i, table.at(i, 0), 0});
  for (std::size_t i = 8; i < 12; ++i) val.push_back({i, table.at(i, 0), 0});
  const auto ft = finetune(rep, po, store, set, val, FinetuneMode::mse, 0.5);
  auto ref = make_potential(po, store, set.dft);
  apply_checkpoint(ref.params(), rep, "rep.");
  const std::vector<std::size_t> idx{0, 5, 9};
  EXPECT_EQ(ft.net.forward(gather(store, idx)).data, ref.forward(gather(store, idx)).data);

  po.train.epochs = 3;
  const auto trained = finetune(rep, po, store, set, val, FinetuneMode::mse, 0.5);
  EXPECT_EQ(trained.history.epochs.size(), 3u);
  EXPECT_EQ(trained.history.state.scheduler, SchedulerKind::linear_decay);
  EXPECT_NE(trained.net.params().at("rep.mlp.0.weight").value, ref.params().at("rep.mlp.0.weight").value);

  auto other = tiny(Backend::message_passing);
  po.repr = other;
  const auto mp_store = FeatureStore::build(other, configs);
  EXPECT_THROW(finetune(rep, po, mp_store, set, val, FinetuneMode::mse, 0.5), IncompatibleCheckpointError);
}

TEST(Pca, PlaneIsReproducedUpToRigidMotion) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  // 2D points embedded in 6 dimensions through a random orthonormal pair.
  const std::size_t n = 40, d = 6;
  std::vector<double> u(d), v(d);
  for (auto& x : u) x = g(rng);
  double nu = 0.0;
  for (double x : u) nu += x * x;
  for (auto& x : u) x /= std::sqrt(nu);
  for (auto& x : v) x = g(rng);
  double uv = 0.0;
  for (std::size_t i = 0; i < d; ++i) uv += u[i] * v[i];
  for (std::size_t i = 0; i < d; ++i) v[i] -= uv * u[i];
  double nv = 0.0;
  for (double x : v) nv += x * x;
  for (auto& x : v) x /= std::sqrt(nv);
  Matrix x(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    const double a = 3.0 * g(rng), b = g(rng);
    for (std::size_t c = 0; c < d; ++c) x(r, c) = 1.5 + a * u[c] + b * v[c];
  }
  const auto pca = pca_2d(x);
  ASSERT_EQ(pca.scores.rows, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      EXPECT_NEAR(distance(pca.scores.row(i), pca.scores.row(j)), distance(x.row(i), x.row(j)), 1e-8);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += pca.components(a, c) * pca.components(b, c);
      EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-12);
    }
  EXPECT_GE(pca.variance[0], pca.variance[1]);
  EXPECT_THROW(pca_2d(Matrix(1, 3)), ArgumentError);
}

TEST_F(Pretraining, ExportRowsAndCsv) {
  auto net = Network::potential(options.repr, 1);
  net.init(8);
  std::vector<Configuration> dup{configs[0], configs[1], configs[0]};
  const auto st = FeatureStore::build(options.repr, dup);
  const std::vector<std::size_t> ids{0, 1, 2};
  const std::vector<double> e{-1.0, -2.0, -1.0};
  const auto ex = export_representations(net, st, ids, e);
  EXPECT_EQ(ex.pooled.rows, 3u);
  EXPECT_EQ(std::vector<double>(ex.pooled.row(0).begin(), ex.pooled.row(0).end()),
            std::vector<double>(ex.pooled.row(2).begin(), ex.pooled.row(2).end()));
  const auto csv = representation_csv(ex);
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header.rfind("id,f0,", 0), 0u);
  EXPECT_NE(header.find(",pc1,pc2,energy_per_atom"), std::string::npos);
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, 3u);

  const std::vector<std::size_t> one{0};
  const std::vector<double> e1{-1.0};
  const auto single = export_representations(net, st, one, e1);
  EXPECT_EQ(single.pca.scores.rows, 0u);
  EXPECT_THROW(export_representations(net, st, ids, e1), ShapeError);
}

TEST(GroupSeparation, KnownGeometry) {
  // Two tight pairs far apart: intra distance 1, inter distances 10 and sqrt(101).
  Matrix x(4, 2);
  x(1, 0) = 1.0;
  x(2, 1) = 10.0;
  x(3, 0) = 1.0;
  x(3, 1) = 10.0;
  const std::vector<int> group{0, 0, 1, 1};
  const double inter = (10.0 + std::sqrt(101.0) + std::sqrt(101.0) + 10.0) / 4.0;
  EXPECT_NEAR(group_separation(x, group), inter / 1.0, 1e-12);
  EXPECT_THROW(group_separation(x, std::vector<int>{0, 0, 0, 0}), ArgumentError);
  EXPECT_THROW(group_separation(x, std::vector<int>{0, 1}), ShapeError);
}
