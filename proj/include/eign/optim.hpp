#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "eign/nn.hpp"

namespace eign {

class TrainError : public Error {
 public:
  using Error::Error;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam without weight decay. Moments are kept per parameter in store order.
class Adam {
 public:
  explicit Adam(const ParamStore& ps, AdamConfig cfg = {}) : cfg_(cfg) {
    for (const auto& p : ps.params()) {
      m_.emplace_back(p.value.rows(), p.value.cols());
      v_.emplace_back(p.value.rows(), p.value.cols());
    }
  }

  void step(ParamStore& ps, double lr) {
    if (ps.size() != m_.size()) throw TrainError("optimizer state does not match the parameters");
    for (const auto& p : ps.params())
      for (double g : p.grad.data())
        if (!std::isfinite(g)) throw TrainError("non-finite gradient in '" + p.name + "'");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < ps.size(); ++i) {
      auto& p = ps.params()[i];
      auto& m = m_[i].data();
      auto& v = v_[i].data();
      auto& w = p.value.data();
      const auto& g = p.grad.data();
      for (std::size_t k = 0; k < w.size(); ++k) {
        m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
        v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
        w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.eps);
      }
    }
  }

  std::size_t steps() const { return t_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  AdamConfig cfg_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::size_t t_ = 0;
};

inline double grad_norm(const ParamStore& ps) {
  double s = 0.0;
  for (const auto& p : ps.params())
    for (double g : p.grad.data()) s += g * g;
  return std::sqrt(s);
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
inline double clip_grad_norm(ParamStore& ps, double max_norm) {
  if (!(max_norm > 0.0)) throw TrainError("max_norm must be positive");
  const double norm = grad_norm(ps);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& p : ps.params())
      for (double& g : p.grad.data()) g *= s;
  }
  return norm;
}

}  // namespace eign
