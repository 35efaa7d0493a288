#include <algorithm>
#include <cmath>

#include "wsnip/errors.hpp"
#include "wsnip/loss.hpp"

namespace wsnip {

double tukey(double r, double k) {
  if (!(k > 0.0)) throw ArgumentError("tukey: k must be positive");
  const double k2 = k * k / 6.0;
  if (std::abs(r) > k) return k2;
  const double u = 1.0 - (r / k) * (r / k);
  return k2 * (1.0 - u * u * u);
}

double tukey_grad(double r, double k) {
  if (!(k > 0.0)) throw ArgumentError("tukey: k must be positive");
  if (std::abs(r) >= k) return 0.0;
  const double u = 1.0 - (r / k) * (r / k);
  return r * u * u;
}

RobustScale robust_scale(std::span<const double> residuals, double k_floor) {
  if (residuals.empty()) throw ArgumentError("robust_scale: no residuals");
  std::vector<double> a(residuals.size());
  std::transform(residuals.begin(), residuals.end(), a.begin(), [](double r) { return std::abs(r); });
  const std::size_t n = a.size();
  const std::size_t mid = n / 2;
  std::nth_element(a.begin(), a.begin() + mid, a.end());
  double mar = a[mid];
  if (n % 2 == 0) {
    const double lower = *std::max_element(a.begin(), a.begin() + mid);
    mar = 0.5 * (lower + mar);
  }
  RobustScale s;
  s.mar = mar;
  s.sigma = mar / kMarToSigma;
  s.k = std::max(kTukeyC * s.sigma, k_floor);
  return s;
}

LossGrad mse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw ShapeError("mse: prediction and target lengths differ");
  LossGrad out;
  out.grad.resize(pred.size());
  if (pred.empty()) return out;
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - target[i];
    out.value += r * r;
    out.grad[i] = 2.0 * r / n;
  }
  out.value /= n;
  return out;
}

BatchLossReport la_loss(std::span<const double> dft_pred, std::span<const double> dft_target,
                        std::span<const double> eip_pred, std::span<const double> eip_target, double alpha,
                        const LaLossOptions& options, std::span<const int> eip_levels) {
  if (dft_pred.size() != dft_target.size() || eip_pred.size() != eip_target.size())
    throw ShapeError("la_loss: prediction and target lengths differ");
  if (dft_pred.empty() && eip_pred.empty()) throw ArgumentError("la_loss: both batches are empty");
  if (!(alpha >= 0.0)) throw ArgumentError("la_loss: alpha must be non-negative");
  if (!eip_levels.empty() && eip_levels.size() != eip_pred.size())
    throw ShapeError("la_loss: outlier levels do not match the EIP batch");

  BatchLossReport rep;
  rep.alpha = alpha;
  const LossGrad d = mse(dft_pred, dft_target);
  rep.dft_term = d.value;
  rep.grad_dft = d.grad;

  std::vector<double> residuals;
  residuals.reserve(dft_pred.size() + eip_pred.size());
  for (std::size_t i = 0; i < dft_pred.size(); ++i) residuals.push_back(dft_pred[i] - dft_target[i]);
  for (std::size_t i = 0; i < eip_pred.size(); ++i) residuals.push_back(eip_pred[i] - eip_target[i]);
  rep.scale = robust_scale(residuals, options.k_floor);
  const double k = rep.scale.k;

  rep.grad_eip.assign(eip_pred.size(), 0.0);
  if (!eip_pred.empty()) {
    const double s = static_cast<double>(eip_pred.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < eip_pred.size(); ++i) {
      const double r = eip_pred[i] - eip_target[i];
      const bool rejected = options.use_tukey && std::abs(r) > k;
      if (rejected) ++rep.rejected;
      else ++rep.used;
      if (!eip_levels.empty())
        for (int c = 0; c < eip_levels[i] && c < 3; ++c) {
          ++rep.category_total[c];
          if (!rejected) ++rep.category_used[c];
        }
      if (options.use_tukey) {
        sum += tukey(r, k);
        rep.grad_eip[i] = alpha * tukey_grad(r, k) / s;
      } else {
        sum += r * r;
        rep.grad_eip[i] = alpha * 2.0 * r / s;
      }
    }
    rep.eip_term = sum / s;
  }
  rep.total = rep.dft_term + alpha * rep.eip_term;
  return rep;
}

LossGrad mp_loss(const Matrix& pred, const Matrix& target, std::span<const double> head_scale) {
  if (pred.rows != target.rows || pred.cols != target.cols) throw ShapeError("mp_loss: shapes differ");
  if (!head_scale.empty() && head_scale.size() != pred.cols) throw ShapeError("mp_loss: one scale per head expected");
  LossGrad out;
  out.grad.assign(pred.size(), 0.0);
  if (pred.size() == 0) return out;
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.rows; ++i)
    for (std::size_t p = 0; p < pred.cols; ++p) {
      const double s = head_scale.empty() ? 1.0 : head_scale[p];
      const double r = (pred(i, p) - target(i, p)) / s;
      out.value += r * r;
      out.grad[i * pred.cols + p] = 2.0 * r / (s * n);
    }
  out.value /= n;
  return out;
}

Matrix softmax(const Matrix& logits) {
  Matrix p(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const auto row = logits.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c) z += std::exp(row[c] - mx);
    for (std::size_t c = 0; c < logits.cols; ++c) p(i, c) = std::exp(row[c] - mx) / z;
  }
  return p;
}

CrossEntropy cross_entropy(const Matrix& logits, std::span<const std::size_t> labels) {
  if (labels.size() != logits.rows) throw ShapeError("cross_entropy: one label per row expected");
  CrossEntropy out;
  out.grad = Matrix(logits.rows, logits.cols);
  out.probabilities = softmax(logits);
  if (logits.rows == 0) return out;
  const double b = static_cast<double>(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    if (labels[i] >= logits.cols)
      throw ArgumentError("cross_entropy: label " + std::to_string(labels[i]) + " out of range");
    const auto row = logits.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    out.value += std::log(z) - (row[labels[i]] - mx);
    for (std::size_t c = 0; c < logits.cols; ++c)
      out.grad(i, c) = (out.probabilities(i, c) - (c == labels[i] ? 1.0 : 0.0)) / b;
  }
  out.value /= b;
  return out;
}

}  // namespace wsnip
