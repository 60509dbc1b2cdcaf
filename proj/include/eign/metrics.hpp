#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "eign/matrix.hpp"

namespace eign {

class MetricError : public Error {
 public:
  using Error::Error;
};

/// Rank-based ROC AUC; tied scores share their mean rank.
inline double auc_roc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw MetricError("auc: scores and labels differ in length");
  std::size_t pos = 0;
  for (double l : labels) {
    if (l != 0.0 && l != 1.0) throw MetricError("auc: labels must be 0 or 1");
    pos += l == 1.0;
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw MetricError("auc: labels contain a single class");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sums of midranks are half-integers, exact in double for any realistic n.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1.0) rank_sum += mid;
    i = j;
  }
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

struct MaskedPairs {
  std::vector<double> pred;
  std::vector<double> target;
};

inline MaskedPairs masked(const Matrix& pred, const Matrix& target, std::span<const std::uint8_t> mask) {
  if (!pred.same_shape(target) || pred.cols() != 1 || mask.size() != pred.rows())
    throw MetricError("metric inputs must be aligned m x 1 columns");
  MaskedPairs out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    out.pred.push_back(pred(i, 0));
    out.target.push_back(target(i, 0));
  }
  if (out.pred.empty()) throw MetricError("metric mask selects no edges");
  return out;
}

inline double rmse(std::span<const double> pred, std::span<const double> target) {
  if (pred.empty() || pred.size() != target.size()) throw MetricError("rmse: empty or misaligned input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

inline double mae(std::span<const double> pred, std::span<const double> target) {
  if (pred.empty() || pred.size() != target.size()) throw MetricError("mae: empty or misaligned input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::fabs(pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

/// Coefficient of determination; nullopt when the targets are constant.
inline std::optional<double> r2(std::span<const double> pred, std::span<const double> target) {
  if (pred.empty() || pred.size() != target.size()) throw MetricError("r2: empty or misaligned input");
  double mean = 0.0;
  for (double t : target) mean += t;
  mean /= static_cast<double>(target.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ss_res += (pred[i] - target[i]) * (pred[i] - target[i]);
    ss_tot += (target[i] - mean) * (target[i] - mean);
  }
  if (ss_tot == 0.0) return std::nullopt;
  return 1.0 - ss_res / ss_tot;
}

inline double rmse(const Matrix& pred, const Matrix& target, std::span<const std::uint8_t> mask) {
  auto p = masked(pred, target, mask);
  return rmse(p.pred, p.target);
}

inline double mae(const Matrix& pred, const Matrix& target, std::span<const std::uint8_t> mask) {
  auto p = masked(pred, target, mask);
  return mae(p.pred, p.target);
}

inline std::optional<double> r2(const Matrix& pred, const Matrix& target, std::span<const std::uint8_t> mask) {
  auto p = masked(pred, target, mask);
  return r2(p.pred, p.target);
}

struct MeanCi {
  double mean = 0.0;
  /// Half-width of the 95% normal-approximation interval.
  double ci95 = 0.0;
  std::size_t n = 0;
};

inline MeanCi mean_ci95(std::span<const double> v) {
  MeanCi out;
  out.n = v.size();
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  if (v.size() < 2) return out;
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  out.ci95 = 1.96 * sd / std::sqrt(static_cast<double>(v.size()));
  return out;
}

}  // namespace eign
