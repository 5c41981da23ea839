#pragma once

// Differentiable softmax policy: one tanh hidden layer over the flat
// observation, linear head to action logits. Parameters live in a single flat
// vector (W1, b1, W2, b2 in that order) so optimizers and checkpoints treat
// the policy as one array. All gradients are analytic; finite differences are
// only used in tests.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "skillworld/errors.hpp"
#include "skillworld/rng.hpp"

namespace skillworld {

struct PolicyShape {
  int inputs = 0;
  int hidden = 0;
  int actions = 0;

  int param_count() const { return hidden * inputs + hidden + actions * hidden + actions; }
  int w1_off() const { return 0; }
  int b1_off() const { return hidden * inputs; }
  int w2_off() const { return b1_off() + hidden; }
  int b2_off() const { return w2_off() + actions * hidden; }

  bool operator==(const PolicyShape&) const = default;

  void validate() const {
    if (inputs <= 0 || hidden <= 0 || actions <= 1) throw ShapeError("policy: bad shape");
  }
};

struct PolicyParams {
  PolicyShape shape;
  std::vector<double> values;

  double w1(int h, int i) const { return values[static_cast<std::size_t>(shape.w1_off() + h * shape.inputs + i)]; }
  double& w1(int h, int i) { return values[static_cast<std::size_t>(shape.w1_off() + h * shape.inputs + i)]; }
  double b1(int h) const { return values[static_cast<std::size_t>(shape.b1_off() + h)]; }
  double& b1(int h) { return values[static_cast<std::size_t>(shape.b1_off() + h)]; }
  double w2(int a, int h) const { return values[static_cast<std::size_t>(shape.w2_off() + a * shape.hidden + h)]; }
  double& w2(int a, int h) { return values[static_cast<std::size_t>(shape.w2_off() + a * shape.hidden + h)]; }
  double b2(int a) const { return values[static_cast<std::size_t>(shape.b2_off() + a)]; }
  double& b2(int a) { return values[static_cast<std::size_t>(shape.b2_off() + a)]; }
};

inline PolicyParams zero_policy(PolicyShape shape) {
  shape.validate();
  PolicyParams p;
  p.shape = shape;
  p.values.assign(static_cast<std::size_t>(shape.param_count()), 0.0);
  return p;
}

inline PolicyParams random_policy(PolicyShape shape, double scale, std::uint64_t seed) {
  PolicyParams p = zero_policy(shape);
  RngStream rs = RngStream::derive(seed, "policy-init");
  for (double& v : p.values) v = rs.uniform(-scale, scale);
  return p;
}

struct ActionDistribution {
  std::vector<double> logits;  // temperature-scaled
  std::vector<double> probs;
  std::vector<double> logps;
  std::vector<double> hidden;  // tanh activations, kept for backward
};

inline ActionDistribution forward(const PolicyParams& p, std::span<const double> obs,
                                  double temperature = 1.0) {
  const PolicyShape& s = p.shape;
  if (static_cast<int>(obs.size()) != s.inputs) throw ShapeError("forward: observation size mismatch");
  if (!(temperature > 0.0)) throw ConfigError("forward: temperature must be positive");
  ActionDistribution d;
  d.hidden.resize(static_cast<std::size_t>(s.hidden));
  for (int h = 0; h < s.hidden; ++h) {
    double z = p.b1(h);
    const double* wrow = p.values.data() + s.w1_off() + h * s.inputs;
    for (int i = 0; i < s.inputs; ++i) z += wrow[i] * obs[static_cast<std::size_t>(i)];
    d.hidden[static_cast<std::size_t>(h)] = std::tanh(z);
  }
  d.logits.resize(static_cast<std::size_t>(s.actions));
  double maxl = -1e300;
  for (int a = 0; a < s.actions; ++a) {
    double z = p.b2(a);
    const double* wrow = p.values.data() + s.w2_off() + a * s.hidden;
    for (int h = 0; h < s.hidden; ++h) z += wrow[h] * d.hidden[static_cast<std::size_t>(h)];
    z /= temperature;
    if (!std::isfinite(z)) throw NumericalError("forward: non-finite logit");
    d.logits[static_cast<std::size_t>(a)] = z;
    if (z > maxl) maxl = z;
  }
  double sum = 0.0;
  d.probs.resize(static_cast<std::size_t>(s.actions));
  for (int a = 0; a < s.actions; ++a) {
    double e = std::exp(d.logits[static_cast<std::size_t>(a)] - maxl);
    d.probs[static_cast<std::size_t>(a)] = e;
    sum += e;
  }
  double logsum = std::log(sum);
  d.logps.resize(static_cast<std::size_t>(s.actions));
  for (int a = 0; a < s.actions; ++a) {
    d.probs[static_cast<std::size_t>(a)] /= sum;
    d.logps[static_cast<std::size_t>(a)] = d.logits[static_cast<std::size_t>(a)] - maxl - logsum;
  }
  return d;
}

// Inverse-CDF sample from the distribution (deterministic given the stream).
inline int sample_action(const ActionDistribution& d, RngStream& rs) {
  double u = rs.uniform01();
  double acc = 0.0;
  int n = static_cast<int>(d.probs.size());
  for (int a = 0; a < n; ++a) {
    acc += d.probs[static_cast<std::size_t>(a)];
    if (u < acc) return a;
  }
  return n - 1;  // guard for accumulated rounding
}

// Accumulates d(loss)/d(params) += backprop of dlogits through the network.
// dlogits must be the gradient w.r.t. the *temperature-scaled* logits; the
// temperature chain factor is applied here.
inline void backward(const PolicyParams& p, std::span<const double> obs,
                     const ActionDistribution& d, std::span<const double> dlogits,
                     double temperature, std::vector<double>& grad) {
  const PolicyShape& s = p.shape;
  if (static_cast<int>(grad.size()) != s.param_count()) throw ShapeError("backward: grad size mismatch");
  if (static_cast<int>(dlogits.size()) != s.actions) throw ShapeError("backward: dlogits size mismatch");
  std::vector<double> dhidden(static_cast<std::size_t>(s.hidden), 0.0);
  for (int a = 0; a < s.actions; ++a) {
    double g = dlogits[static_cast<std::size_t>(a)] / temperature;
    if (g == 0.0) continue;
    grad[static_cast<std::size_t>(s.b2_off() + a)] += g;
    double* gw2 = grad.data() + s.w2_off() + a * s.hidden;
    const double* w2row = p.values.data() + s.w2_off() + a * s.hidden;
    for (int h = 0; h < s.hidden; ++h) {
      gw2[h] += g * d.hidden[static_cast<std::size_t>(h)];
      dhidden[static_cast<std::size_t>(h)] += g * w2row[h];
    }
  }
  for (int h = 0; h < s.hidden; ++h) {
    double th = d.hidden[static_cast<std::size_t>(h)];
    double dz = dhidden[static_cast<std::size_t>(h)] * (1.0 - th * th);
    if (dz == 0.0) continue;
    grad[static_cast<std::size_t>(s.b1_off() + h)] += dz;
    double* gw1 = grad.data() + s.w1_off() + h * s.inputs;
    for (int i = 0; i < s.inputs; ++i) gw1[i] += dz * obs[static_cast<std::size_t>(i)];
  }
}

// d log pi(action|obs) / d params, computed analytically.
inline std::vector<double> grad_logprob(const PolicyParams& p, std::span<const double> obs,
                                        int action, double temperature = 1.0) {
  ActionDistribution d = forward(p, obs, temperature);
  if (action < 0 || action >= p.shape.actions) throw ShapeError("grad_logprob: action out of range");
  std::vector<double> dlogits(static_cast<std::size_t>(p.shape.actions));
  for (int a = 0; a < p.shape.actions; ++a)
    dlogits[static_cast<std::size_t>(a)] = ((a == action) ? 1.0 : 0.0) - d.probs[static_cast<std::size_t>(a)];
  std::vector<double> grad(static_cast<std::size_t>(p.shape.param_count()), 0.0);
  backward(p, obs, d, dlogits, temperature, grad);
  return grad;
}

// Frozen copy of the policy used for rollouts and as the trust-region anchor.
struct PolicySnapshot {
  PolicyParams params;
};

inline PolicySnapshot snapshot(const PolicyParams& p) { return PolicySnapshot{p}; }

inline ActionDistribution eval_frozen(const PolicySnapshot& snap, std::span<const double> obs,
                                      double temperature = 1.0) {
  return forward(snap.params, obs, temperature);
}

// --- serialization (policy-v1) ----------------------------------------------

inline std::string serialize_policy(const PolicyParams& p) {
  std::ostringstream ss;
  ss << "policy-v1\n";
  ss << "inputs " << p.shape.inputs << "\n";
  ss << "hidden " << p.shape.hidden << "\n";
  ss << "actions " << p.shape.actions << "\n";
  ss << "params " << p.shape.param_count() << "\n";
  char buf[64];
  for (double v : p.values) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", v);
    ss << buf;
  }
  ss << "end\n";
  return ss.str();
}

inline PolicyParams deserialize_policy(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "policy-v1") throw IoError("policy: bad or missing format header");
  PolicyShape shape;
  long declared = -1;
  auto read_kv = [&](const char* key) {
    if (!std::getline(is, line)) throw IoError("policy: truncated header");
    std::istringstream ls(line);
    std::string tag;
    long v;
    ls >> tag >> v;
    if (tag != key || !ls) throw IoError(std::string("policy: expected ") + key + " record");
    return v;
  };
  shape.inputs = static_cast<int>(read_kv("inputs"));
  shape.hidden = static_cast<int>(read_kv("hidden"));
  shape.actions = static_cast<int>(read_kv("actions"));
  declared = read_kv("params");
  shape.validate();
  if (declared != shape.param_count()) throw IoError("policy: declared param count mismatch");
  PolicyParams p = zero_policy(shape);
  for (long i = 0; i < declared; ++i) {
    if (!std::getline(is, line)) throw IoError("policy: truncated parameter block");
    p.values[static_cast<std::size_t>(i)] = std::strtod(line.c_str(), nullptr);
  }
  if (!std::getline(is, line) || line != "end") throw IoError("policy: missing end marker");
  return p;
}

inline void save_policy(const std::string& path, const PolicyParams& p) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("policy: cannot open " + path + " for writing");
  os << serialize_policy(p);
  if (!os) throw IoError("policy: write failed for " + path);
}

inline PolicyParams load_policy(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("policy: cannot open " + path);
  return deserialize_policy(is);
}

}  // namespace skillworld
