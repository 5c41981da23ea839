#pragma once

// Tier losses and their gradients, all expressed per token as
// (scalar value, d(value)/d(logits)) so the trainer can mix tokens freely in
// minibatches. Conventions:
//  - losses are minimized; the GRPO surrogate is therefore negated here
//  - distillation teachers are constants (stop-gradient)
//  - group advantages use the population std; a degenerate group (std below
//    1e-12) contributes zero advantage rather than dividing by noise

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "skillworld/errors.hpp"
#include "skillworld/policy.hpp"
#include "skillworld/rollout.hpp"

namespace skillworld {

struct ClipConfig {
  double epsilon = 0.2;
  double kl_coeff = 0.01;
  double entropy_coeff = 0.001;
  double invalid_penalty_coeff = 0.1;
  int jsd_topk = 64;

  void validate() const {
    if (epsilon <= 0.0 || epsilon >= 1.0) throw ConfigError("clip epsilon must be in (0, 1)");
    if (kl_coeff < 0.0 || entropy_coeff < 0.0 || invalid_penalty_coeff < 0.0)
      throw ConfigError("loss coefficients must be non-negative");
    if (jsd_topk < 1) throw ConfigError("jsd_topk must be positive");
  }
};

// --- advantages ---------------------------------------------------------------

inline constexpr double kDegenerateStd = 1e-12;

struct AdvantageGroup {
  std::vector<double> values;
  double reward_mean = 0.0;
  double reward_std = 0.0;          // population std
  double utilization_offset = 0.0;  // composite shift applied on top (easy tier)
};

inline AdvantageGroup group_advantage(std::span<const double> rewards) {
  if (rewards.empty()) throw ConfigError("group_advantage: empty reward group");
  AdvantageGroup g;
  double n = static_cast<double>(rewards.size());
  g.reward_mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - g.reward_mean) * (r - g.reward_mean);
  g.reward_std = std::sqrt(var / n);
  g.values.resize(rewards.size(), 0.0);
  if (g.reward_std > kDegenerateStd)
    for (std::size_t i = 0; i < rewards.size(); ++i)
      g.values[i] = (rewards[i] - g.reward_mean) / g.reward_std;
  return g;
}

// Shaped per-episode returns: binary success minus a small penalty per invalid
// action. Routing pass rates stay strictly binary; only advantages see this.
inline std::vector<double> shaped_rewards(const TaskGroup& g, double invalid_penalty_coeff) {
  std::vector<double> out;
  out.reserve(g.trajs.size());
  for (const Trajectory& t : g.trajs)
    out.push_back(t.reward - invalid_penalty_coeff * static_cast<double>(t.invalid_count));
  return out;
}

inline double utilization_gain(double pass_with_skills, double pass_without) {
  if (pass_with_skills < 0.0 || pass_with_skills > 1.0 || pass_without < 0.0 || pass_without > 1.0)
    throw InvalidDistribution("utilization_gain: pass rates outside [0, 1]");
  return pass_with_skills - pass_without;
}

// Normalized utilization advantages for the easy tier of one batch:
// (u_i - anchor) / std(u). The anchor offset is kept in the numerator (it is
// a historical baseline, not the batch mean); only the spread is normalized.
inline std::vector<double> utilization_advantages(std::span<const double> gains, double anchor) {
  if (gains.empty()) throw ConfigError("utilization_advantages: empty batch");
  std::vector<double> centered(gains.begin(), gains.end());
  for (double& v : centered) v -= anchor;
  double n = static_cast<double>(centered.size());
  double mean_c = std::accumulate(centered.begin(), centered.end(), 0.0) / n;
  double var = 0.0;
  for (double v : centered) var += (v - mean_c) * (v - mean_c);
  double sd = std::sqrt(var / n);
  std::vector<double> out(centered.size(), 0.0);
  if (sd > 1e-8)
    for (std::size_t i = 0; i < centered.size(); ++i) out[i] = centered[i] / sd;
  return out;
}

// Composite advantage: group advantage plus a per-task utilization shift.
inline AdvantageGroup composite_advantage(AdvantageGroup base, double utilization_advantage) {
  base.utilization_offset = utilization_advantage;
  for (double& v : base.values) v += utilization_advantage;
  return base;
}

// --- Jensen-Shannon divergence ------------------------------------------------

namespace detail {

inline double xlogx_ratio(double x, double m) {  // x * log(x / m), safe at x == 0
  if (x <= 0.0) return 0.0;
  return x * std::log(x / m);
}

// Support = indices of the k largest entries of p (ties -> lower index first).
inline std::vector<int> topk_support(std::span<const double> p, int k) {
  std::vector<int> idx(p.size());
  std::iota(idx.begin(), idx.end(), 0);
  int kk = std::min<int>(k, static_cast<int>(p.size()));
  std::partial_sort(idx.begin(), idx.begin() + kk, idx.end(), [&](int a, int b) {
    if (p[static_cast<std::size_t>(a)] != p[static_cast<std::size_t>(b)])
      return p[static_cast<std::size_t>(a)] > p[static_cast<std::size_t>(b)];
    return a < b;
  });
  idx.resize(static_cast<std::size_t>(kk));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

// Full-support JSD with natural logarithms; symmetric, bounded by ln 2.
inline double jsd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("jsd: size mismatch");
  if (p.empty()) throw InvalidDistribution("jsd: empty distributions");
  double v = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) throw InvalidDistribution("jsd: negative probability");
    double m = 0.5 * (p[i] + q[i]);
    if (m <= 0.0) continue;
    v += 0.5 * detail::xlogx_ratio(p[i], m) + 0.5 * detail::xlogx_ratio(q[i], m);
  }
  return v;
}

// JSD after restricting both distributions to the top-k support of p and
// renormalizing. k >= |p| reduces to full-support JSD of the renormalized
// inputs (a no-op when they already sum to one).
inline double jsd_topk(std::span<const double> p, std::span<const double> q, int k) {
  if (p.size() != q.size()) throw ShapeError("jsd: size mismatch");
  if (k < 1) throw ConfigError("jsd_topk: k must be positive");
  std::vector<int> sup = detail::topk_support(p, k);
  double zp = 0.0, zq = 0.0;
  for (int i : sup) {
    zp += p[static_cast<std::size_t>(i)];
    zq += q[static_cast<std::size_t>(i)];
  }
  if (zp <= 0.0 || zq <= 0.0) throw InvalidDistribution("jsd_topk: zero mass on support");
  std::vector<double> pr, qr;
  pr.reserve(sup.size());
  qr.reserve(sup.size());
  for (int i : sup) {
    pr.push_back(p[static_cast<std::size_t>(i)] / zp);
    qr.push_back(q[static_cast<std::size_t>(i)] / zq);
  }
  return jsd(pr, qr);
}

// --- per-token losses -----------------------------------------------------------
//
// Each *_token function returns its weighted scalar contribution and adds the
// weighted gradient w.r.t. the live policy's (temperature-scaled) logits into
// dlogits.

// Distillation token: JSD(teacher || student) on the teacher's top-k support.
inline double distill_token(const ActionDistribution& student, std::span<const double> teacher_probs,
                            int topk, double weight, std::vector<double>& dlogits) {
  const std::vector<double>& s = student.probs;
  if (teacher_probs.size() != s.size() || dlogits.size() != s.size())
    throw ShapeError("distill_token: size mismatch");
  std::vector<int> sup = detail::topk_support(teacher_probs, topk);
  double zp = 0.0, zq = 0.0;
  for (int i : sup) {
    zp += teacher_probs[static_cast<std::size_t>(i)];
    zq += s[static_cast<std::size_t>(i)];
  }
  if (zp <= 0.0 || zq <= 0.0) throw InvalidDistribution("distill_token: zero mass on support");

  double value = 0.0;
  // gradient w.r.t. full student probs; zero outside the support
  std::vector<double> ds(s.size(), 0.0);
  double inner = 0.0;  // sum_i g_i * q_i (renormalized)
  std::vector<double> g(sup.size(), 0.0);
  for (std::size_t t = 0; t < sup.size(); ++t) {
    std::size_t i = static_cast<std::size_t>(sup[t]);
    double pr = teacher_probs[i] / zp;
    double qr = s[i] / zq;
    double m = 0.5 * (pr + qr);
    if (m > 0.0)
      value += 0.5 * detail::xlogx_ratio(pr, m) + 0.5 * detail::xlogx_ratio(qr, m);
    // d jsd / d qr, with qr floored away from zero for the log
    double qsafe = std::max(qr, 1e-300);
    double msafe = std::max(m, 1e-300);
    g[t] = 0.5 * std::log(qsafe / msafe);
    inner += g[t] * qr;
  }
  for (std::size_t t = 0; t < sup.size(); ++t) {
    std::size_t i = static_cast<std::size_t>(sup[t]);
    ds[i] = (g[t] - inner) / zq;
  }
  // chain through softmax: dz_k = s_k * (ds_k - sum_j s_j ds_j)
  double dot = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) dot += s[j] * ds[j];
  for (std::size_t kx = 0; kx < s.size(); ++kx)
    dlogits[kx] += weight * s[kx] * (ds[kx] - dot);
  return weight * value;
}

// Clipped-ratio policy-gradient token (negated surrogate; ties keep the
// unclipped branch so its gradient flows).
inline double grpo_token(const ActionDistribution& live, int action, double logp_old,
                         double advantage, double epsilon, double weight,
                         std::vector<double>& dlogits) {
  if (action < 0 || action >= static_cast<int>(live.probs.size()))
    throw ShapeError("grpo_token: action out of range");
  double lp = live.logps[static_cast<std::size_t>(action)];
  double ratio = std::exp(lp - logp_old);
  if (!std::isfinite(ratio)) throw NumericalError("grpo_token: non-finite ratio");
  double clipped_ratio = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  double unclipped = ratio * advantage;
  double clipped = clipped_ratio * advantage;
  double surrogate = std::min(unclipped, clipped);
  bool unclipped_active = unclipped <= clipped;
  double dsur_dlp = unclipped_active ? ratio * advantage : 0.0;
  if (dsur_dlp != 0.0) {
    double c = -weight * dsur_dlp;  // negation: we minimize
    for (std::size_t kx = 0; kx < live.probs.size(); ++kx) {
      double ind = (static_cast<int>(kx) == action) ? 1.0 : 0.0;
      dlogits[kx] += c * (ind - live.probs[kx]);
    }
  }
  return -weight * surrogate;
}

// KL(live || ref) regularizer token.
inline double kl_token(const ActionDistribution& live, std::span<const double> ref_probs,
                       double weight, std::vector<double>& dlogits) {
  const std::vector<double>& pr = live.probs;
  if (ref_probs.size() != pr.size()) throw ShapeError("kl_token: size mismatch");
  double kl = 0.0;
  std::vector<double> diff(pr.size(), 0.0);
  for (std::size_t i = 0; i < pr.size(); ++i) {
    double q = std::max(ref_probs[i], 1e-300);
    double d = live.logps[i] - std::log(q);
    diff[i] = d;
    kl += pr[i] * d;
  }
  for (std::size_t kx = 0; kx < pr.size(); ++kx)
    dlogits[kx] += weight * pr[kx] * (diff[kx] - kl);
  return weight * kl;
}

// Entropy bonus token: contributes -weight * H (weight already includes the
// entropy coefficient), so minimizing the total loss raises entropy.
inline double entropy_token(const ActionDistribution& live, double weight,
                            std::vector<double>& dlogits) {
  const std::vector<double>& pr = live.probs;
  double h = 0.0;
  for (std::size_t i = 0; i < pr.size(); ++i)
    if (pr[i] > 0.0) h -= pr[i] * live.logps[i];
  for (std::size_t kx = 0; kx < pr.size(); ++kx) {
    if (pr[kx] <= 0.0) continue;
    double dh = -pr[kx] * (live.logps[kx] + h);
    dlogits[kx] += -weight * dh;
  }
  return -weight * h;
}

// --- step-level report ----------------------------------------------------------

struct LossReport {
  double hard = 0.0, medium = 0.0, easy = 0.0;
  double kl = 0.0, entropy = 0.0;  // already scaled by their coefficients
  double total = 0.0;
  double grad_norm = 0.0;
  int hard_tokens = 0, medium_tokens = 0, easy_tokens = 0;

  void finalize() { total = hard + medium + easy + kl + entropy; }
};

}  // namespace skillworld
