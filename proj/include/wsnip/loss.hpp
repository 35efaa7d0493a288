#pragma once
// Training objectives. Every loss returns its value together with the gradient
// with respect to the predictions.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "wsnip/net.hpp"

namespace wsnip {

inline constexpr double kTukeyC = 4.685;
inline constexpr double kMarToSigma = 0.6745;
inline constexpr double kDefaultKFloor = 1e-6;  // eV

// Biweight loss and its derivative in r. Throws ArgumentError for k <= 0.
double tukey(double r, double k);
double tukey_grad(double r, double k);

struct RobustScale {
  double mar = 0.0;
  double sigma = 0.0;
  double k = 0.0;
};

// MAR is the median of |r| (mean of the two middle values for even counts).
// Throws ArgumentError on an empty input.
RobustScale robust_scale(std::span<const double> residuals, double k_floor = kDefaultKFloor);

struct LossGrad {
  double value = 0.0;
  std::vector<double> grad;
};

// Mean of (pred - target)^2.
LossGrad mse(std::span<const double> pred, std::span<const double> target);

// Outlier levels at 0.1, 0.2 and 0.3 eV/atom.
inline constexpr std::array<double, 3> kOutlierThresholds{0.1, 0.2, 0.3};

struct BatchLossReport {
  double total = 0.0;
  double dft_term = 0.0;
  double eip_term = 0.0;
  double alpha = 0.0;
  RobustScale scale;
  std::size_t rejected = 0;  // EIP residuals with |r| > k
  std::size_t used = 0;
  // Per outlier level: EIP instances at or above the level, and those not rejected.
  std::array<std::size_t, 3> category_total{};
  std::array<std::size_t, 3> category_used{};
  std::vector<double> grad_dft;
  std::vector<double> grad_eip;
};

struct LaLossOptions {
  double k_floor = kDefaultKFloor;
  // When false the EIP term is a plain mean squared error (Tukey ablation).
  bool use_tukey = true;
};

// MSE over the DFT batch plus alpha times the mean Tukey loss over the EIP batch,
// with k from robust_scale over the residuals of both batches. `eip_levels`, when
// non-empty, gives each EIP instance's outlier level (0 = inlier, 1..3 = mild..severe)
// for usage accounting only.
BatchLossReport la_loss(std::span<const double> dft_pred, std::span<const double> dft_target,
                        std::span<const double> eip_pred, std::span<const double> eip_target, double alpha,
                        const LaLossOptions& options = {}, std::span<const int> eip_levels = {});

// (1 / (n |P|)) sum (pred - target)^2 over an n x |P| matrix. `head_scale`, when
// given, divides each column's residuals first (per-head normalization).
LossGrad mp_loss(const Matrix& pred, const Matrix& target, std::span<const double> head_scale = {});

struct CrossEntropy {
  double value = 0.0;
  Matrix grad;           // d loss / d logits
  Matrix probabilities;  // softmax rows
};

// Mean negative log-softmax of the labelled class.
CrossEntropy cross_entropy(const Matrix& logits, std::span<const std::size_t> labels);

// Row-wise softmax with max subtraction.
Matrix softmax(const Matrix& logits);

}  // namespace wsnip
