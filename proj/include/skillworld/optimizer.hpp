#pragma once

// Adam with bias correction and optional decoupled weight decay. State is
// exposed for exact training resume.

#include <cmath>
#include <span>
#include <vector>

#include "skillworld/errors.hpp"

namespace skillworld {

class Adam {
 public:
  Adam(int n, double lr, double weight_decay = 0.0, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : lr_(lr), decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps),
        m_(static_cast<std::size_t>(n), 0.0), v_(static_cast<std::size_t>(n), 0.0) {
    if (n <= 0) throw ConfigError("adam: parameter count must be positive");
    if (lr <= 0.0) throw ConfigError("adam: learning rate must be positive");
    if (weight_decay < 0.0) throw ConfigError("adam: weight decay must be non-negative");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
      throw ConfigError("adam: betas must be in [0, 1)");
  }

  void step(std::vector<double>& params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size())
      throw ShapeError("adam: size mismatch");
    t_ += 1;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < m_.size(); ++i) {
      double g = grad[i];
      if (!std::isfinite(g)) throw NumericalError("adam: non-finite gradient component");
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
      double mhat = m_[i] / bc1;
      double vhat = v_[i] / bc2;
      params[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + decay_ * params[i]);
    }
  }

  int t() const { return t_; }
  double learning_rate() const { return lr_; }
  double weight_decay() const { return decay_; }
  const std::vector<double>& m() const { return m_; }
  const std::vector<double>& v() const { return v_; }

  void restore(std::vector<double> m, std::vector<double> v, int t) {
    if (m.size() != m_.size() || v.size() != v_.size()) throw ShapeError("adam: restore size mismatch");
    if (t < 0) throw ConfigError("adam: restore step must be non-negative");
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
  }

 private:
  double lr_, decay_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace skillworld
