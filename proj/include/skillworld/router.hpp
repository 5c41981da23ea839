#pragma once

// Difficulty-aware routing. Tasks are routed per training step by their group
// pass rate p against an adaptive threshold eta (the sliding-window mean of
// recent batch pass rates, current batch included):
//   p == 0        -> Hard   (no reward signal; needs privileged distillation)
//   0 < p <= eta  -> Medium (boundary inclusive)
//   p > eta       -> Easy
// A second window over utilization gains supplies the anchor used by the
// easy-tier composite advantage.

#include <deque>
#include <numeric>

#include "skillworld/errors.hpp"

namespace skillworld {

enum class Tier { Hard, Medium, Easy };

inline const char* tier_name(Tier t) {
  switch (t) {
    case Tier::Hard: return "hard";
    case Tier::Medium: return "medium";
    default: return "easy";
  }
}

inline Tier route(double pass, double eta) {
  if (pass < 0.0 || pass > 1.0) throw InvalidDistribution("route: pass rate outside [0, 1]");
  if (pass == 0.0) return Tier::Hard;
  if (pass <= eta) return Tier::Medium;
  return Tier::Easy;
}

class RouterState {
 public:
  explicit RouterState(int window) : window_(window) {
    if (window < 1) throw ConfigError("router: window must be positive");
  }

  // Pushes the current batch mean pass rate and returns eta (mean over the
  // last min(W, t) batches, the current one included).
  double push_pass_and_threshold(double batch_mean) {
    if (batch_mean < 0.0 || batch_mean > 1.0)
      throw InvalidDistribution("router: batch pass mean outside [0, 1]");
    push(pass_, batch_mean);
    return mean(pass_);
  }

  // Anchor for utilization advantages: mean of recent batch-mean gains, or 0
  // before any easy batch has reported gains.
  double utilization_anchor() const { return gains_.empty() ? 0.0 : mean(gains_); }

  void push_gain(double batch_mean_gain) {
    if (batch_mean_gain < -1.0 || batch_mean_gain > 1.0)
      throw InvalidDistribution("router: batch gain mean outside [-1, 1]");
    push(gains_, batch_mean_gain);
  }

  int window() const { return window_; }
  const std::deque<double>& pass_buffer() const { return pass_; }
  const std::deque<double>& gain_buffer() const { return gains_; }

  void restore(std::deque<double> pass_buf, std::deque<double> gain_buf) {
    if (static_cast<int>(pass_buf.size()) > window_ || static_cast<int>(gain_buf.size()) > window_)
      throw ConfigError("router: restored buffer longer than window");
    pass_ = std::move(pass_buf);
    gains_ = std::move(gain_buf);
  }

 private:
  void push(std::deque<double>& buf, double v) {
    buf.push_back(v);
    if (static_cast<int>(buf.size()) > window_) buf.pop_front();
  }
  static double mean(const std::deque<double>& buf) {
    return std::accumulate(buf.begin(), buf.end(), 0.0) / static_cast<double>(buf.size());
  }

  int window_;
  std::deque<double> pass_;
  std::deque<double> gains_;
};

}  // namespace skillworld
