#pragma once

// Trajectory collection. A rollout group is G episodes of one task under one
// context mode, acted by a frozen snapshot. For privileged (teacher) groups
// each step also records the standard-context view of the same observation,
// so a student can later be teacher-forced along the exact trajectory without
// replaying the environment: context features never influence dynamics, they
// only appear in the observation, so stripping the general block is exact.

#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "skillworld/env.hpp"
#include "skillworld/policy.hpp"
#include "skillworld/rng.hpp"

namespace skillworld {

struct TrajStep {
  std::vector<double> obs;          // acting view
  std::vector<double> student_obs;  // standard view (teacher groups only)
  int action = 0;
  double logp_act = 0.0;               // log prob of action under the acting policy
  std::vector<double> acting_probs;    // full distribution, kept only when requested
};

struct Trajectory {
  const Task* task = nullptr;
  ContextMode mode = ContextMode::Standard;
  std::vector<TrajStep> steps;
  bool success = false;
  double reward = 0.0;
  int invalid_count = 0;
  std::vector<std::string> retrieved_ids;
};

struct TaskGroup {
  const Task* task = nullptr;
  ContextMode mode = ContextMode::Standard;
  std::vector<Trajectory> trajs;
};

struct RolloutOptions {
  double temperature = 1.0;
  bool record_dists = false;     // keep full per-step action distributions
  bool record_student_view = false;  // also store the general-stripped observation
};

template <class Agent>
Trajectory rollout_episode(const World& w, Agent&& agent, const Task& task,
                           const ContextFeatures& ctx, const ContextFeatures* student_ctx,
                           RngStream& rng, const RolloutOptions& opt) {
  Trajectory traj;
  traj.task = &w.find_task(task.id);
  traj.mode = ctx.mode;
  traj.retrieved_ids = ctx.retrieved_ids;
  EnvState st = reset(w, task);
  while (!st.done) {
    TrajStep ts;
    Observation obs = observe(w, st, ctx);
    if (student_ctx != nullptr) ts.student_obs = observe(w, st, *student_ctx).features;
    ActionDistribution d = agent(std::span<const double>(obs.features));
    ts.obs = std::move(obs.features);
    ts.action = sample_action(d, rng);
    ts.logp_act = d.logps[static_cast<std::size_t>(ts.action)];
    if (opt.record_dists) ts.acting_probs = d.probs;
    step(w, st, ts.action);
    traj.steps.push_back(std::move(ts));
  }
  traj.success = st.success;
  traj.reward = st.success ? 1.0 : 0.0;
  traj.invalid_count = st.invalid_count;
  return traj;
}

template <class Agent>
TaskGroup rollout_group(const World& w, Agent&& agent, const Task& task, ContextMode mode,
                        Phase phase, int group_size, int k, RngStream rng,
                        const RolloutOptions& opt = {}) {
  if (group_size < 1) throw ConfigError("rollout_group: group size must be positive");
  // deterministic retrieval makes per-episode context rebuilds redundant
  ContextFeatures ctx = build_context(w, task, mode, phase, k);
  ContextFeatures student_ctx;
  if (opt.record_student_view) student_ctx = strip_general(w, ctx);
  TaskGroup g;
  g.task = &w.find_task(task.id);
  g.mode = mode;
  g.trajs.reserve(static_cast<std::size_t>(group_size));
  for (int i = 0; i < group_size; ++i)
    g.trajs.push_back(rollout_episode(w, agent, task, ctx,
                                      opt.record_student_view ? &student_ctx : nullptr, rng, opt));
  return g;
}

// Fraction of successful episodes; strictly binary rewards by construction.
inline double pass_rate(const TaskGroup& g) {
  if (g.trajs.empty()) throw ConfigError("pass_rate: empty group");
  double s = 0.0;
  for (const Trajectory& t : g.trajs) s += t.success ? 1.0 : 0.0;
  return s / static_cast<double>(g.trajs.size());
}

// Successful trajectories only (distillation corpus). May be empty.
inline std::vector<const Trajectory*> golden_filter(const TaskGroup& g) {
  std::vector<const Trajectory*> out;
  for (const Trajectory& t : g.trajs)
    if (t.success) out.push_back(&t);
  return out;
}

// Convenience agent over a frozen snapshot.
struct SnapshotAgent {
  const PolicySnapshot* snap;
  double temperature = 1.0;
  ActionDistribution operator()(std::span<const double> obs) const {
    return eval_frozen(*snap, obs, temperature);
  }
};

// --- trajectory dump (traj-v1) ----------------------------------------------

inline std::string serialize_trajectories(std::span<const TaskGroup> groups) {
  std::ostringstream ss;
  ss << "traj-v1\n";
  for (const TaskGroup& g : groups) {
    for (const Trajectory& t : g.trajs) {
      ss << "episode task=" << t.task->id << " mode=" << context_mode_name(t.mode)
         << " reward=" << (t.success ? 1 : 0) << " invalid=" << t.invalid_count
         << " len=" << t.steps.size() << " actions=";
      for (std::size_t i = 0; i < t.steps.size(); ++i) {
        if (i) ss << ',';
        ss << t.steps[i].action;
      }
      ss << "\n";
    }
  }
  ss << "end\n";
  return ss.str();
}

inline void write_trajectories(const std::string& path, std::span<const TaskGroup> groups) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("traj: cannot open " + path + " for writing");
  os << serialize_trajectories(groups);
  if (!os) throw IoError("traj: write failed for " + path);
}

}  // namespace skillworld
