#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "testing.hpp"
#include "wsnip/errors.hpp"
#include "wsnip/model.hpp"

using namespace wsnip;

namespace {

RepresentationSpec tiny(Backend backend) {
  RepresentationSpec s;
  s.backend = backend;
  s.hidden = 8;
  s.depth = 2;
  s.message_passing.hidden = 6;
  s.message_passing.layers = 2;
  s.message_passing.radial_count = 5;
  return s;
}

std::vector<Configuration> mixed_configs(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Configuration> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(i % 2 ? fixtures::random_cluster(rng, 2 + static_cast<int>(i % 5), 4.0, 1.9)
                        : fixtures::random_periodic(rng, 4, 5.5));
  return out;
}

// Central-difference check of d(sum w * out) / d params for every trainable array.
void check_network_gradient(Network& net, const FeatureBatch& batch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Network::Tape tape;
  const Matrix out = net.forward(batch, &tape);
  Matrix w(out.rows, out.cols);
  for (double& v : w.data) v = g(rng);
  auto loss = [&] {
    const Matrix y = net.forward(batch);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += w.data[i] * y.data[i];
    return s;
  };
  auto& ps = net.params();
  ps.zero_grad();
  net.backward(batch, tape, w);
  const double h = 1e-5;
  std::size_t checked = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!ps[i].trainable) continue;
    // A strided subset keeps the check fast on the wider arrays.
    const std::size_t stride = std::max<std::size_t>(1, ps[i].size() / 24);
    for (std::size_t e = 0; e < ps[i].size(); e += stride) {
      const double keep = ps[i].value[e];
      ps[i].value[e] = keep + h;
      const double up = loss();
      ps[i].value[e] = keep - h;
      const double down = loss();
      ps[i].value[e] = keep;
      const double fd = (up - down) / (2 * h);
      ASSERT_LE(std::abs(ps[i].grad[e] - fd), 1e-4 * std::max(std::abs(fd), 1e-3)) << ps[i].name << "[" << e << "]";
      ++checked;
    }
  }
  EXPECT_GT(checked, 20u);
}

void perturb_all(Network& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.05);
  auto& ps = net.params();
  for (std::size_t i = 0; i < ps.size(); ++i)
    if (ps[i].trainable)
      for (double& v : ps[i].value) v += g(rng);
}

}  // namespace

TEST(Backend, Names) {
  EXPECT_EQ(parse_backend(to_string(Backend::descriptor)), Backend::descriptor);
  EXPECT_EQ(parse_backend(to_string(Backend::message_passing)), Backend::message_passing);
  EXPECT_THROW(parse_backend("soap"), ArgumentError);
}

TEST(FeatureStore, GatherOffsets) {
  const auto configs = mixed_configs(6, 1);
  for (auto backend : {Backend::descriptor, Backend::message_passing}) {
    const auto store = FeatureStore::build(tiny(backend), configs);
    ASSERT_EQ(store.size(), 6u);
    const std::vector<std::size_t> idx{4, 1, 1};
    const auto batch = gather(store, idx);
    EXPECT_EQ(batch.configs(), 3u);
    EXPECT_EQ(batch.offsets[1], configs[4].size());
    EXPECT_EQ(batch.atoms(), configs[4].size() + 2 * configs[1].size());
    if (backend == Backend::message_passing) {
      for (std::size_t e = 0; e < batch.graph.edge_i.size(); ++e) {
        // Edges never cross configuration boundaries.
        const auto a = batch.graph.edge_i[e], b = batch.graph.edge_j[e];
        auto owner = [&](std::size_t atom) {
          return std::upper_bound(batch.offsets.begin(), batch.offsets.end(), atom) - batch.offsets.begin();
        };
        ASSERT_EQ(owner(a), owner(b));
      }
    }
  }
}

TEST(Network, EnergyGradientDescriptor) {
  const auto configs = mixed_configs(5, 2);
  const auto spec = tiny(Backend::descriptor);
  const auto store = FeatureStore::build(spec, configs);
  auto net = Network::potential(spec, 1);
  net.init(3);
  const auto [mean, sd] = store.descriptor_moments();
  net.set_input_normalization(mean, sd);
  net.set_output_scaling(0, -4.0, 0.7);
  perturb_all(net, 4);
  const std::vector<std::size_t> idx{0, 1, 2, 3, 4};
  check_network_gradient(net, gather(store, idx), 5);
}

TEST(Network, EnergyGradientMessagePassingMultiHead) {
  const auto configs = mixed_configs(4, 6);
  const auto spec = tiny(Backend::message_passing);
  const auto store = FeatureStore::build(spec, configs);
  auto net = Network::potential(spec, 3);
  net.init(7);
  net.set_output_scaling(1, 2.0, 3.0);
  perturb_all(net, 8);
  const std::vector<std::size_t> idx{0, 1, 2, 3};
  check_network_gradient(net, gather(store, idx), 9);
}

TEST(Network, LogitsGradient) {
  const auto configs = mixed_configs(5, 10);
  for (auto backend : {Backend::descriptor, Backend::message_passing}) {
    const auto spec = tiny(backend);
    const auto store = FeatureStore::build(spec, configs);
    auto net = Network::classifier(spec, 4);
    net.init(11);
    perturb_all(net, 12);
    const std::vector<std::size_t> idx{0, 1, 2, 3, 4};
    check_network_gradient(net, gather(store, idx), 13);
  }
}

TEST(Network, EnergyIsSumOfScaledAtomOutputs) {
  const auto configs = mixed_configs(3, 14);
  const auto spec = tiny(Backend::descriptor);
  const auto store = FeatureStore::build(spec, configs);
  auto net = Network::potential(spec, 1);
  net.init(15);
  const std::vector<std::size_t> idx{0, 1, 2};
  const auto batch = gather(store, idx);
  const auto base = net.forward(batch);
  net.set_output_scaling(0, 0.5, 2.0);
  EXPECT_EQ(net.output_scaling(0), (std::pair<double, double>{0.5, 2.0}));
  const auto scaled = net.forward(batch);
  for (std::size_t c = 0; c < 3; ++c)
    EXPECT_NEAR(scaled(c, 0), 2.0 * base(c, 0) + 0.5 * static_cast<double>(configs[c].size()), 1e-12);
  // Concatenating a configuration with itself doubles nothing else.
  const std::vector<std::size_t> one{1}, twice{1, 1};
  const auto a = net.forward(gather(store, one));
  const auto b = net.forward(gather(store, twice));
  EXPECT_EQ(a(0, 0), b(0, 0));
  EXPECT_EQ(b(0, 0), b(1, 0));
}

TEST(Network, NamesAndBackwardState) {
  const auto spec = tiny(Backend::descriptor);
  auto single = Network::potential(spec, 1);
  auto multi = Network::potential(spec, 3);
  auto cls = Network::classifier(spec, 5);
  EXPECT_EQ(single.head_prefix(0), "head.");
  EXPECT_EQ(multi.head_prefix(2), "head2.");
  EXPECT_EQ(cls.head_prefix(0), "cls_head.");
  EXPECT_TRUE(single.params().find("rep.mlp.0.weight"));
  EXPECT_TRUE(multi.params().find("head1.out_scale"));
  EXPECT_FALSE(multi.params().at("head1.out_scale").trainable);
  const auto configs = mixed_configs(2, 16);
  const auto store = FeatureStore::build(spec, configs);
  const std::vector<std::size_t> idx{0, 1};
  Network::Tape tape;
  EXPECT_THROW(single.backward(gather(store, idx), tape, Matrix(2, 1)), StateError);
}

TEST(PlanEpoch, StratifiedCounts) {
  std::mt19937_64 rng(1);
  const auto plan = plan_epoch(64, 1256, 32, rng);
  ASSERT_EQ(plan.dft.size(), batches_per_epoch(64, 1256, 32));
  EXPECT_EQ(plan.dft.size(), 42u);  // ceil(1320 / 32)
  const std::size_t per = (32 * 64 + 1320 - 1) / 1320;  // ceil(32 * 64 / 1320) = 2
  EXPECT_EQ(per, 2u);
  std::multiset<std::size_t> d, e;
  for (std::size_t b = 0; b < plan.dft.size(); ++b) {
    if (b + 1 < plan.dft.size()) EXPECT_EQ(plan.dft[b].size() + plan.eip[b].size(), 32u);
    if (b < 32) EXPECT_EQ(plan.dft[b].size(), per);
    d.insert(plan.dft[b].begin(), plan.dft[b].end());
    e.insert(plan.eip[b].begin(), plan.eip[b].end());
  }
  // Each instance appears exactly once per epoch.
  EXPECT_EQ(d.size(), 64u);
  EXPECT_EQ(std::set<std::size_t>(d.begin(), d.end()).size(), 64u);
  EXPECT_EQ(e.size(), 1256u);
  EXPECT_EQ(std::set<std::size_t>(e.begin(), e.end()).size(), 1256u);
}

TEST(PlanEpoch, ExhaustedStratumFilled) {
  std::mt19937_64 rng(2);
  // ceil(10 * 30 / 35) = 9 DFT per batch: DFT runs out after 4 batches, EIP fills the rest.
  const auto plan = plan_epoch(30, 5, 10, rng);
  ASSERT_EQ(plan.dft.size(), 4u);
  EXPECT_EQ(plan.dft[0].size(), 9u);
  EXPECT_EQ(plan.eip[0].size(), 1u);
  std::size_t total = 0;
  for (std::size_t b = 0; b < plan.dft.size(); ++b) total += plan.dft[b].size() + plan.eip[b].size();
  EXPECT_EQ(total, 35u);
  EXPECT_EQ(plan_epoch(7, 0, 3, rng).dft.size(), 3u);
  EXPECT_THROW(plan_epoch(7, 0, 0, rng), ArgumentError);
}

class TrainEnergy : public ::testing::Test {
 protected:
  void SetUp() override {
    configs = mixed_configs(40, 20);
    spec = tiny(Backend::descriptor);
    store = FeatureStore::build(spec, configs);
    std::mt19937_64 rng(21);
    std::normal_distribution<double> g(0.0, 0.3);
    for (std::size_t i = 0; i < 40; ++i) {
      const double e = -3.0 * static_cast<double>(configs[i].size()) + g(rng);
      if (i < 12) task.dft.push_back({i, e, 0});
      else if (i < 16) task.validation.push_back({i, e, 0});
      else task.eip.push_back({i, e + 0.5 * g(rng), 0});
    }
    opts.epochs = 6;
    opts.batch_size = 8;
    opts.seed = 22;
  }

  std::vector<std::vector<double>> run(const EnergyTask& t) {
    auto net = Network::potential(spec, 1);
    net.init(23);
    const auto [mean, sd] = store.descriptor_moments();
    net.set_input_normalization(mean, sd);
    net.set_output_scaling(0, -3.0, 0.3);
    train_energy(net, store, t, opts);
    return net.params().snapshot();
  }

  std::vector<Configuration> configs;
  RepresentationSpec spec;
  FeatureStore store;
  EnergyTask task;
  TrainOptions opts;
};

TEST_F(TrainEnergy, AlphaZeroEqualsBaseline) {
  EnergyTask base = task;
  base.eip.clear();
  base.alpha = 0.0;
  EnergyTask zero = task;
  zero.alpha = 0.0;
  EXPECT_EQ(run(base), run(zero));
  EnergyTask empty = task;
  empty.eip.clear();
  empty.alpha = 0.5;  // s = 0
  EXPECT_EQ(run(base), run(empty));
  EnergyTask la = task;
  la.alpha = 0.5;
  EXPECT_NE(run(base), run(la));
}

TEST_F(TrainEnergy, BitReproducibleAndFinite) {
  EnergyTask la = task;
  la.alpha = 0.5;
  const auto a = run(la), b = run(la);
  EXPECT_EQ(a, b);
  for (const auto& arr : a)
    for (double v : arr) ASSERT_TRUE(std::isfinite(v));
}

TEST_F(TrainEnergy, HistoryAccounting) {
  EnergyTask la = task;
  la.alpha = 0.5;
  auto net = Network::potential(spec, 1);
  net.init(23);
  const auto h = train_energy(net, store, la, opts);
  ASSERT_EQ(h.epochs.size(), 6u);
  EXPECT_GE(h.best_epoch, 1u);
  EXPECT_LE(h.best_epoch, 6u);
  for (const auto& r : h.epochs) {
    EXPECT_EQ(r.eip_seen, la.eip.size());
    EXPECT_LE(r.eip_rejected, r.eip_seen);
    EXPECT_GT(r.k, 0.0);
    EXPECT_NEAR(r.k, 4.685 * r.sigma_hat, 1e-9 * r.k + 1e-12);
  }
  // The kept parameters reproduce the best validation MAE.
  const auto err = energy_errors(net, store, la.validation);
  EXPECT_NEAR(err.config_mae, h.best_validation, 1e-12);
  EXPECT_EQ(h.state.step, 6u * batches_per_epoch(12, 24, 8));

  EnergyTask none = task;
  none.dft.clear();
  EXPECT_THROW(train_energy(net, store, none, opts), ArgumentError);
}

TEST_F(TrainEnergy, MultitaskAndLogitsTrain) {
  const std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  Matrix targets(10, 2);
  for (std::size_t i = 0; i < 10; ++i) {
    targets(i, 0) = -2.0 * static_cast<double>(configs[i].size());
    targets(i, 1) = 0.1 * static_cast<double>(configs[i].size() * configs[i].size());
  }
  auto mt = Network::potential(spec, 2);
  mt.init(1);
  TrainOptions o = opts;
  o.select_best = false;
  o.epochs = 30;
  const auto h = train_multitask(mt, store, idx, targets, std::vector<double>{1.0, 1.0}, o);
  EXPECT_LT(h.epochs.back().train_loss, h.epochs.front().train_loss);
  auto mt2 = Network::potential(spec, 2);
  EXPECT_THROW(train_multitask(mt2, store, idx, Matrix(10, 3), {}, o), ShapeError);

  std::vector<ClassExample> train, val;
  for (std::size_t i = 0; i < 40; ++i) (i < 30 ? train : val).push_back({i, configs[i].periodic() ? 0u : 1u});
  auto cls = Network::classifier(spec, 3);
  cls.init(2);
  o.epochs = 80;
  o.select_best = true;
  const auto hc = train_logits(cls, store, train, val, o);
  EXPECT_LT(hc.epochs.back().train_loss, hc.epochs.front().train_loss);
  EXPECT_LT(hc.best_validation, std::log(3.0));
  EXPECT_GE(hc.epochs[hc.best_epoch - 1].validation_accuracy, 0.7);
}
