#pragma once

// Policy initializers. Besides zero/random, `skill_prior_policy` builds a
// policy that already knows how to *read* context slots, playing the role a
// pretrained instruction-follower plays at larger scale:
//
//  - one AND-gated hidden unit per (prefix position, option): fires only when
//    a general slot advertises that option AND the agent sits at that
//    position, boosting the corresponding prefix action;
//  - one AND-gated hidden unit per code: fires when ANY specific slot
//    advertises that code AND the agent has finished the prefix, boosting the
//    corresponding code action. Reading every slot equally means retrieved
//    near-miss skills genuinely mislead the bare policy -- distinguishing the
//    applicable skill from plausible neighbours is something training has to
//    supply, not the init;
//  - the remaining hidden units read the task feature block (signature,
//    pattern, distractor) with random moderate weights and near-zero output
//    weights, so reward can also grow memorized task->action shortcuts.
//
// Gates use tanh(a*x + a*y - a): +tanh(a) when both inputs are on, exactly 0
// when one is on, -tanh(a) when neither is (which only ever suppresses
// actions that are wrong or invalid at that state). With no skills in
// context the gated units contribute nothing, so the bare policy starts out
// close to uniform -- context makes it competent, which is precisely the gap
// distillation is meant to close.

#include <string>

#include "skillworld/env.hpp"
#include "skillworld/policy.hpp"

namespace skillworld {

enum class InitMode { Zero, Random, SkillPrior };

inline InitMode init_mode_from_name(const std::string& s) {
  if (s == "zero") return InitMode::Zero;
  if (s == "random") return InitMode::Random;
  if (s == "skill_prior") return InitMode::SkillPrior;
  throw ConfigError("unknown init mode: " + s);
}

struct PriorConfig {
  double gate_gain = 3.5;      // a: input weight of each AND gate
  double head_gain = 3.0;      // output weight from a gate to its action
  double feature_scale = 1.0;  // W1 scale of the task-feature reader units
  double noise_scale = 0.02;   // uniform noise added to every parameter
};

inline PolicyParams skill_prior_policy(const World& w, int hidden, const PriorConfig& pc,
                                       std::uint64_t seed) {
  const EnvConfig& c = w.config;
  const ObservationLayout& lay = w.layout;
  const PayloadLayout& pay = w.payload_layout;
  int gate_units = (c.procedure_len - 1) * c.prefix_options + c.code_options;
  if (hidden < gate_units + 1)
    throw ConfigError("skill_prior_policy: hidden size too small for gate units");

  PolicyShape shape{lay.total, hidden, c.n_actions()};
  PolicyParams p = random_policy(shape, pc.noise_scale, seed);

  double a = pc.gate_gain;
  int u = 0;
  for (int j = 0; j < c.procedure_len - 1; ++j) {
    for (int o = 0; o < c.prefix_options; ++o, ++u) {
      p.w1(u, lay.gen_slot_offset(j) + pay.option_off + o) += a;
      p.w1(u, lay.off_progress + j) += a;
      p.b1(u) += -a;
      p.w2(w.prefix_action(j, o), u) += pc.head_gain;
    }
  }
  for (int code = 0; code < c.code_options; ++code, ++u) {
    for (int i = 0; i < lay.spec_slots; ++i)
      p.w1(u, lay.spec_slot_offset(i) + pay.code_off + code) += a;
    p.w1(u, lay.off_progress + (c.procedure_len - 1)) += a;
    p.b1(u) += -a;
    p.w2(w.code_action(code), u) += pc.head_gain;
  }

  RngStream rs = RngStream::derive(seed, "prior-feature-readers");
  for (; u < hidden; ++u) {
    for (int i = lay.off_domain; i < lay.off_progress; ++i)
      p.w1(u, i) += rs.uniform(-pc.feature_scale, pc.feature_scale);
  }
  return p;
}

inline PolicyParams init_policy(const World& w, int hidden, InitMode mode, const PriorConfig& pc,
                                std::uint64_t seed) {
  PolicyShape shape{w.layout.total, hidden, w.config.n_actions()};
  switch (mode) {
    case InitMode::Zero: return zero_policy(shape);
    case InitMode::Random: return random_policy(shape, pc.noise_scale, seed);
    default: return skill_prior_policy(w, hidden, pc, seed);
  }
}

}  // namespace skillworld
