#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "wsnip/errors.hpp"
#include "wsnip/model.hpp"

namespace wsnip {

std::size_t batches_per_epoch(std::size_t m, std::size_t s, std::size_t batch_size) {
  if (batch_size == 0) throw ArgumentError("batch size must be positive");
  return (m + s + batch_size - 1) / batch_size;
}

BatchPlan plan_epoch(std::size_t m, std::size_t s, std::size_t batch_size, std::mt19937_64& rng) {
  if (batch_size == 0) throw ArgumentError("batch size must be positive");
  std::vector<std::size_t> dft(m), eip(s);
  std::iota(dft.begin(), dft.end(), 0);
  std::iota(eip.begin(), eip.end(), 0);
  std::shuffle(dft.begin(), dft.end(), rng);
  std::shuffle(eip.begin(), eip.end(), rng);

  std::size_t per_dft = batch_size;
  if (s > 0) per_dft = (batch_size * m + m + s - 1) / (m + s);
  per_dft = std::min(per_dft, batch_size);
  const std::size_t per_eip = batch_size - per_dft;

  BatchPlan plan;
  std::size_t di = 0, ei = 0;
  while (di < m || ei < s) {
    std::vector<std::size_t> bd, be;
    const std::size_t td = std::min(per_dft, m - di);
    const std::size_t te = std::min(per_eip, s - ei);
    bd.insert(bd.end(), dft.begin() + static_cast<std::ptrdiff_t>(di), dft.begin() + static_cast<std::ptrdiff_t>(di + td));
    be.insert(be.end(), eip.begin() + static_cast<std::ptrdiff_t>(ei), eip.begin() + static_cast<std::ptrdiff_t>(ei + te));
    di += td;
    ei += te;
    // An exhausted stratum leaves room for the other one.
    while (bd.size() + be.size() < batch_size && di < m) bd.push_back(dft[di++]);
    while (bd.size() + be.size() < batch_size && ei < s) be.push_back(eip[ei++]);
    plan.dft.push_back(std::move(bd));
    plan.eip.push_back(std::move(be));
  }
  return plan;
}

namespace {

TrainState make_state(const TrainOptions& o, std::uint64_t total_steps) {
  TrainState st;
  st.scheduler = o.scheduler;
  st.base_lr = o.lr;
  st.final_lr = o.final_lr;
  st.total_steps = total_steps;
  st.batch_size = o.batch_size;
  return st;
}

void apply_step(Network& net, TrainState& state, const TrainOptions& o) {
  ParameterSet& ps = net.params();
  if (o.weight_decay > 0.0)
    for (std::size_t i = 0; i < ps.size(); ++i) {
      Parameter& p = ps[i];
      if (!p.trainable) continue;
      for (std::size_t j = 0; j < p.size(); ++j) p.grad[j] += o.weight_decay * p.value[j];
    }
  clip_gradients(ps, o.grad_clip);
  adam_step(state, ps);
}

}  // namespace

EnergyErrors energy_errors(const Network& net, const FeatureStore& store, std::span<const EnergyExample> examples) {
  EnergyErrors err;
  if (examples.empty()) return err;
  std::vector<std::size_t> idx;
  idx.reserve(examples.size());
  for (const auto& e : examples) idx.push_back(e.index);
  const Matrix pred = predict(net, store, idx);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const double d = std::abs(pred(i, 0) - examples[i].target);
    err.config_mae += d;
    err.atom_mae += d / static_cast<double>(store[examples[i].index].atoms);
  }
  err.config_mae /= static_cast<double>(examples.size());
  err.atom_mae /= static_cast<double>(examples.size());
  return err;
}

TrainHistory train_energy(Network& net, const FeatureStore& store, const EnergyTask& task, const TrainOptions& o) {
  if (net.kind() != OutputKind::energy || net.outputs() != 1) throw ArgumentError("train_energy needs a single-head potential");
  if (task.dft.empty()) throw ArgumentError("label augmentation needs at least one DFT-labelled instance");
  const std::vector<EnergyExample> no_eip;
  const auto& eip = task.alpha == 0.0 ? no_eip : task.eip;
  const std::size_t m = task.dft.size(), s = eip.size();

  TrainHistory hist;
  hist.state = make_state(o, o.epochs * batches_per_epoch(m, s, o.batch_size));
  std::mt19937_64 rng(o.seed);
  std::vector<std::vector<double>> best;
  Network::Tape tape;

  for (std::size_t epoch = 1; epoch <= o.epochs; ++epoch) {
    const BatchPlan plan = plan_epoch(m, s, o.batch_size, rng);
    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0, sigma_sum = 0.0, k_sum = 0.0;
    for (std::size_t b = 0; b < plan.dft.size(); ++b) {
      const auto& bd = plan.dft[b];
      const auto& be = plan.eip[b];
      std::vector<std::size_t> idx;
      std::vector<double> td, te;
      std::vector<int> levels;
      for (auto p : bd) {
        idx.push_back(task.dft[p].index);
        td.push_back(task.dft[p].target);
      }
      for (auto p : be) {
        idx.push_back(eip[p].index);
        te.push_back(eip[p].target);
        levels.push_back(eip[p].level);
      }
      const FeatureBatch batch = gather(store, idx);
      const Matrix pred = net.forward(batch, &tape);
      const std::span<const double> all(pred.data);
      const BatchLossReport r =
          la_loss(all.subspan(0, bd.size()), td, all.subspan(bd.size()), te, task.alpha, task.loss, levels);
      Matrix dout(idx.size(), 1);
      std::copy(r.grad_dft.begin(), r.grad_dft.end(), dout.data.begin());
      std::copy(r.grad_eip.begin(), r.grad_eip.end(), dout.data.begin() + static_cast<std::ptrdiff_t>(bd.size()));
      net.params().zero_grad();
      net.backward(batch, tape, dout);
      rec.lr = lr_at(hist.state, hist.state.step);
      apply_step(net, hist.state, o);

      loss_sum += r.total;
      sigma_sum += r.scale.sigma;
      k_sum += r.scale.k;
      rec.eip_seen += be.size();
      rec.eip_rejected += r.rejected;
      for (int c = 0; c < 3; ++c) {
        rec.category_total[c] += r.category_total[c];
        rec.category_used[c] += r.category_used[c];
      }
    }
    const double nb = static_cast<double>(std::max<std::size_t>(plan.dft.size(), 1));
    rec.train_loss = loss_sum / nb;
    rec.sigma_hat = sigma_sum / nb;
    rec.k = k_sum / nb;
    if (!task.validation.empty()) {
      rec.validation = energy_errors(net, store, task.validation).config_mae;
      if (o.select_best && (hist.best_epoch == 0 || rec.validation < hist.best_validation)) {
        hist.best_epoch = epoch;
        hist.best_validation = rec.validation;
        best = net.params().snapshot();
      }
    }
    hist.epochs.push_back(rec);
  }
  if (!best.empty()) net.params().restore(best);
  return hist;
}

TrainHistory train_logits(Network& net, const FeatureStore& store, std::span<const ClassExample> train,
                          std::span<const ClassExample> validation, const TrainOptions& o) {
  if (net.kind() != OutputKind::logits) throw ArgumentError("train_logits needs a classifier");
  if (train.empty()) throw ArgumentError("classifier training set is empty");
  TrainHistory hist;
  hist.state = make_state(o, o.epochs * batches_per_epoch(train.size(), 0, o.batch_size));
  std::mt19937_64 rng(o.seed);
  std::vector<std::vector<double>> best;
  Network::Tape tape;

  std::vector<std::size_t> vidx;
  std::vector<std::size_t> vlab;
  for (const auto& e : validation) {
    vidx.push_back(e.index);
    vlab.push_back(e.label);
  }

  for (std::size_t epoch = 1; epoch <= o.epochs; ++epoch) {
    const BatchPlan plan = plan_epoch(train.size(), 0, o.batch_size, rng);
    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    for (const auto& bd : plan.dft) {
      std::vector<std::size_t> idx, lab;
      for (auto p : bd) {
        idx.push_back(train[p].index);
        lab.push_back(train[p].label);
      }
      const FeatureBatch batch = gather(store, idx);
      const Matrix logits = net.forward(batch, &tape);
      const CrossEntropy ce = cross_entropy(logits, lab);
      net.params().zero_grad();
      net.backward(batch, tape, ce.grad);
      rec.lr = lr_at(hist.state, hist.state.step);
      apply_step(net, hist.state, o);
      loss_sum += ce.value;
    }
    rec.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(plan.dft.size(), 1));
    if (!vidx.empty()) {
      const Matrix logits = predict(net, store, vidx);
      const CrossEntropy ce = cross_entropy(logits, vlab);
      std::size_t hit = 0;
      for (std::size_t i = 0; i < vidx.size(); ++i) {
        const auto row = ce.probabilities.row(i);
        const auto arg = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        if (arg == vlab[i]) ++hit;
      }
      rec.validation = ce.value;
      rec.validation_accuracy = static_cast<double>(hit) / static_cast<double>(vidx.size());
      if (o.select_best && (hist.best_epoch == 0 || rec.validation < hist.best_validation)) {
        hist.best_epoch = epoch;
        hist.best_validation = rec.validation;
        best = net.params().snapshot();
      }
    }
    hist.epochs.push_back(rec);
  }
  if (!best.empty()) net.params().restore(best);
  return hist;
}

TrainHistory train_multitask(Network& net, const FeatureStore& store, std::span<const std::size_t> indices,
                             const Matrix& targets, std::span<const double> head_scale, const TrainOptions& o) {
  if (net.kind() != OutputKind::energy) throw ArgumentError("train_multitask needs an energy network");
  if (targets.rows != indices.size() || targets.cols != net.outputs())
    throw ShapeError("multi-task targets must be one row per configuration and one column per head");
  if (indices.empty()) throw ArgumentError("multi-task training set is empty");
  TrainHistory hist;
  hist.state = make_state(o, o.epochs * batches_per_epoch(indices.size(), 0, o.batch_size));
  std::mt19937_64 rng(o.seed);
  Network::Tape tape;
  const std::size_t P = net.outputs();

  for (std::size_t epoch = 1; epoch <= o.epochs; ++epoch) {
    const BatchPlan plan = plan_epoch(indices.size(), 0, o.batch_size, rng);
    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    for (const auto& bd : plan.dft) {
      std::vector<std::size_t> idx;
      Matrix t(bd.size(), P);
      for (std::size_t r = 0; r < bd.size(); ++r) {
        idx.push_back(indices[bd[r]]);
        for (std::size_t p = 0; p < P; ++p) t(r, p) = targets(bd[r], p);
      }
      const FeatureBatch batch = gather(store, idx);
      const Matrix pred = net.forward(batch, &tape);
      const LossGrad l = mp_loss(pred, t, head_scale);
      Matrix dout(pred.rows, P);
      dout.data = l.grad;
      net.params().zero_grad();
      net.backward(batch, tape, dout);
      rec.lr = lr_at(hist.state, hist.state.step);
      apply_step(net, hist.state, o);
      loss_sum += l.value;
    }
    rec.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(plan.dft.size(), 1));
    hist.epochs.push_back(rec);
  }
  return hist;
}

}  // namespace wsnip
