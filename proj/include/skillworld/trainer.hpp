#pragma once

// Training loop. One step:
//   1. snapshot the live policy
//   2. Phase 1: Standard-context group rollouts from the snapshot -> pass
//      rates; push the batch mean and compute the routing threshold
//   3. route each task Hard / Medium / Easy
//   4. Phase 2: Hard -> privileged teacher rollouts, golden filter,
//      distillation tokens; Medium -> GRPO on the reused Phase-1 group;
//      Easy -> no-skill probe rollouts (never in the gradient), utilization
//      gains and composite-advantage GRPO
//   5. full-batch loss/gradient report at the snapshot (ratios all 1)
//   6. ppo_epochs of token-level minibatch updates with Adam
//
// Method variants swap tier treatments:
//   full             -> everything above
//   internalize_only -> easy tier falls back to plain GRPO (no probes)
//   utilize_only     -> hard tier falls back to plain GRPO on the Phase-1
//                       group (all rewards zero there, hence a no-op)
//   grpo_no_skill    -> vanilla GRPO, no-skill context at train and eval
//   grpo_full_extern -> vanilla GRPO, general+specific context everywhere
//
// The hard-tier GRPO fallback uses raw binary rewards (a pass-rate-zero group
// is then exactly zero-variance, hence a no-op); the invalid-action penalty
// shapes advantages only in the Medium/Easy GRPO tiers.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>
#include <future>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "skillworld/env.hpp"
#include "skillworld/init.hpp"
#include "skillworld/losses.hpp"
#include "skillworld/optimizer.hpp"
#include "skillworld/policy.hpp"
#include "skillworld/rollout.hpp"
#include "skillworld/router.hpp"
#include "skillworld/rng.hpp"

namespace skillworld {

enum class Method { Full, InternalizeOnly, UtilizeOnly, GrpoNoSkill, GrpoFullExtern };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::Full: return "full";
    case Method::InternalizeOnly: return "internalize_only";
    case Method::UtilizeOnly: return "utilize_only";
    case Method::GrpoNoSkill: return "grpo_no_skill";
    default: return "grpo_full_extern";
  }
}

inline Method method_from_name(const std::string& s) {
  if (s == "full") return Method::Full;
  if (s == "internalize_only") return Method::InternalizeOnly;
  if (s == "utilize_only") return Method::UtilizeOnly;
  if (s == "grpo_no_skill") return Method::GrpoNoSkill;
  if (s == "grpo_full_extern") return Method::GrpoFullExtern;
  throw ConfigError("unknown method: " + s);
}

inline bool method_distills(Method m) { return m == Method::Full || m == Method::InternalizeOnly; }
inline bool method_probes(Method m) { return m == Method::Full || m == Method::UtilizeOnly; }

inline ContextMode method_context(Method m) {
  if (m == Method::GrpoNoSkill) return ContextMode::NoSkill;
  if (m == Method::GrpoFullExtern) return ContextMode::FullExtern;
  return ContextMode::Standard;
}

struct TrainConfig {
  std::uint64_t seed = 1;
  int steps = 200;
  int batch_size = 16;
  int group_size = 8;   // G
  int probe_episodes = 8;   // NoSkill probe rollouts per Easy task (measurement only)
  int window = 5;       // W
  int retrieval_k = 3; // K
  int hidden = 48;
  double learning_rate = 3e-3;
  double weight_decay = 1e-2;  // decoupled; damps feature-memorization drift
  ClipConfig clip;
  int ppo_epochs = 2;
  int minibatch_tokens = 128;
  double train_temperature = 1.0;
  double eval_temperature = 0.4;
  int eval_every = 5;
  int eval_episodes = 25;  // per domain
  int horizon_override = 0;  // 0 = keep the world's horizon
  Method method = Method::Full;
  InitMode init = InitMode::SkillPrior;
  PriorConfig prior;

  void validate() const {
    if (steps < 1) throw ConfigError("train: steps must be positive");
    if (batch_size < 1) throw ConfigError("train: batch size must be positive");
    if (group_size < 2) throw ConfigError("train: group size must be at least 2");
    if (probe_episodes < 2) throw ConfigError("train: probe episodes must be at least 2");
    if (window < 1) throw ConfigError("train: window must be positive");
    if (retrieval_k < 1) throw ConfigError("train: retrieval K must be positive");
    if (hidden < 1) throw ConfigError("train: hidden width must be positive");
    if (learning_rate <= 0.0) throw ConfigError("train: learning rate must be positive");
    if (weight_decay < 0.0) throw ConfigError("train: weight decay must be non-negative");
    if (ppo_epochs < 1) throw ConfigError("train: ppo_epochs must be positive");
    if (minibatch_tokens < 1) throw ConfigError("train: minibatch size must be positive");
    if (train_temperature <= 0.0 || eval_temperature <= 0.0)
      throw ConfigError("train: temperatures must be positive");
    if (eval_every < 1) throw ConfigError("train: eval cadence must be positive");
    if (eval_episodes < 0) throw ConfigError("train: eval episodes must be non-negative");
    if (horizon_override < 0) throw ConfigError("train: horizon override must be non-negative");
    clip.validate();
  }
};

struct RouteRecord {
  std::string task_id;
  double pass = 0.0;
  Tier tier = Tier::Hard;
  // which loss the task fed: "distill", "grpo", "grpo_composite", "none"
  std::string loss_kind;
};

struct EvalResult {
  Split split = Split::ValID;
  ContextMode mode = ContextMode::Standard;
  double avg = 0.0;
  std::vector<std::pair<std::string, double>> per_domain;
};

struct StepRecord {
  int step = 0;
  int n_hard = 0, n_medium = 0, n_easy = 0;
  double eta = 0.0, u_anchor = 0.0, train_pass = 0.0;
  LossReport loss;
  bool updated = false;
  int golden_skipped = 0;  // hard tasks whose privileged groups had no successes
  std::string note;
  std::vector<RouteRecord> routes;
  std::vector<EvalResult> evals;
};

// One gradient-carrying token of the step loss.
struct Token {
  Tier tier = Tier::Medium;
  const std::vector<double>* obs = nullptr;            // live/student observation
  const std::vector<double>* teacher_probs = nullptr;  // distillation target
  const Trajectory* source = nullptr;                  // provenance
  int action = 0;
  double logp_old = 0.0;
  double advantage = 0.0;
  double w_main = 0.0;
  bool regularized = false;
};

struct TaskPlan {
  const Task* task = nullptr;
  TaskGroup phase1;
  Tier tier = Tier::Hard;
  std::optional<TaskGroup> teacher;  // hard tier, distillation methods
  std::vector<const Trajectory*> golden;
  std::optional<TaskGroup> probe;    // easy tier, probing methods
  double gain = 0.0;
  double a_u = 0.0;
  AdvantageGroup adv;
  std::string loss_kind = "none";
};

struct StepPlan {
  std::vector<TaskPlan> tasks;
  double batch_pass_mean = 0.0;
  double eta = 0.0;
  double u_anchor = 0.0;
  std::vector<Token> tokens;
  int me_tokens = 0;  // medium+easy token count (regularizer normalization)
  int golden_skipped = 0;
};

inline int env_thread_count() {
  const char* v = std::getenv("SKILLWORLD_THREADS");
  if (v == nullptr) return 1;
  int n = std::atoi(v);
  return n < 1 ? 1 : n;
}

// Deterministic fan-out: results land by index, so scheduling cannot change
// outcomes. Runs inline when the thread budget is 1.
template <class Fn>
void parallel_indexed(int n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::future<void>> futs;
  futs.reserve(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    futs.push_back(std::async(std::launch::async, [&, w]() {
      for (int i = w; i < n; i += threads) fn(i);
    }));
  }
  for (auto& f : futs) f.get();
}

class Trainer {
 public:
  Trainer(const World& world, TrainConfig cfg) : world_(world), cfg_(cfg) {
    cfg_.validate();
    if (cfg_.retrieval_k > world_.layout.spec_slots)
      throw ConfigError("train: retrieval K exceeds the world's specific slots");
    if (cfg_.batch_size > static_cast<int>(world_.train_id.size()))
      throw ConfigError("train: batch size exceeds the training task count");
    if (cfg_.horizon_override > 0) {
      if (cfg_.horizon_override < world_.config.procedure_len)
        throw ConfigError("train: horizon override shorter than the procedure");
      world_.config.horizon = cfg_.horizon_override;
    }
    world_.rebuild_task_index();
    params_ = init_policy(world_, cfg_.hidden, cfg_.init, cfg_.prior, cfg_.seed);
    adam_.emplace(params_.shape.param_count(), cfg_.learning_rate, cfg_.weight_decay);
    router_.emplace(cfg_.window);
  }

  const World& world() const { return world_; }
  const TrainConfig& config() const { return cfg_; }
  const PolicyParams& params() const { return params_; }
  PolicyParams& mutable_params() { return params_; }
  int current_step() const { return step_; }
  const RouterState& router() const { return *router_; }
  const Adam& optimizer() const { return *adam_; }
  const StepPlan* last_plan() const { return capture_plans_ ? &last_plan_ : nullptr; }
  void set_capture_plans(bool v) { capture_plans_ = v; }

  // Uniform batch without replacement, derived from (seed, step).
  std::vector<const Task*> draw_batch(int step) const {
    RngStream rs = RngStream::derive(cfg_.seed, "batch", step);
    std::vector<int> idx(world_.train_id.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < cfg_.batch_size; ++i) {
      int j = i + rs.uniform_index(static_cast<int>(idx.size()) - i);
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    std::vector<const Task*> batch;
    batch.reserve(static_cast<std::size_t>(cfg_.batch_size));
    for (int i = 0; i < cfg_.batch_size; ++i)
      batch.push_back(&world_.train_id[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]);
    return batch;
  }

  StepRecord train_step() { return train_step(draw_batch(step_ + 1)); }

  StepRecord train_step(const std::vector<const Task*>& batch) {
    int step = step_ + 1;
    PolicySnapshot snap = snapshot(params_);
    StepPlan plan = build_plan(step, batch, snap);

    StepRecord rec;
    rec.step = step;
    rec.eta = plan.eta;
    rec.u_anchor = plan.u_anchor;
    rec.train_pass = plan.batch_pass_mean;
    rec.golden_skipped = plan.golden_skipped;
    for (const TaskPlan& tp : plan.tasks) {
      if (tp.tier == Tier::Hard) rec.n_hard++;
      else if (tp.tier == Tier::Medium) rec.n_medium++;
      else rec.n_easy++;
      rec.routes.push_back(RouteRecord{tp.task->id, pass_rate(tp.phase1), tp.tier, tp.loss_kind});
    }

    std::vector<double> grad(static_cast<std::size_t>(params_.shape.param_count()), 0.0);
    rec.loss = evaluate_plan(plan, snap.params, snap, &grad);
    double norm2 = 0.0;
    for (double g : grad) norm2 += g * g;
    rec.loss.grad_norm = std::sqrt(norm2);

    if (plan.tokens.empty()) {
      rec.updated = false;
      rec.note = "no gradient-bearing tokens";
    } else {
      rec.updated = apply_updates(step, plan, snap, rec.note);
    }

    // gains feed the anchor window only after this batch's advantages exist
    if (method_probes(cfg_.method)) {
      double gain_sum = 0.0;
      int gain_n = 0;
      for (const TaskPlan& tp : plan.tasks) {
        if (tp.tier == Tier::Easy && tp.probe.has_value()) {
          gain_sum += tp.gain;
          gain_n += 1;
        }
      }
      if (gain_n > 0) router_->push_gain(gain_sum / static_cast<double>(gain_n));
    }

    step_ = step;
    if (capture_plans_) last_plan_ = std::move(plan);
    return rec;
  }

  // Success rates at inference settings. Episodes cycle deterministically
  // through the split's tasks, per domain.
  EvalResult evaluate(Split split, ContextMode mode, int episodes_per_domain, double temperature,
                      std::vector<std::string>* retrieval_log = nullptr) const {
    if (split == Split::TrainID)
      throw ConfigError("evaluate: use val_id or val_ood");
    EvalResult res;
    res.split = split;
    res.mode = mode;
    if (episodes_per_domain == 0) return res;
    const std::vector<Task>& tasks = world_.tasks(split);
    if (tasks.empty()) throw ConfigError("evaluate: split has no tasks");
    int d_lo = (split == Split::ValOOD) ? world_.config.n_domains_id : 0;
    int d_hi = (split == Split::ValOOD) ? static_cast<int>(world_.domains.size())
                                        : world_.config.n_domains_id;
    PolicySnapshot snap = snapshot(params_);
    double sum = 0.0;
    for (int d = d_lo; d < d_hi; ++d) {
      std::vector<const Task*> dom_tasks;
      for (const Task& t : tasks)
        if (t.domain_index == d) dom_tasks.push_back(&t);
      if (dom_tasks.empty()) throw ConfigError("evaluate: domain without tasks");
      int wins = 0;
      for (int e = 0; e < episodes_per_domain; ++e) {
        const Task& task = *dom_tasks[static_cast<std::size_t>(e) % dom_tasks.size()];
        ContextFeatures ctx = build_context(world_, task, mode, Phase::Inference, cfg_.retrieval_k);
        if (retrieval_log != nullptr)
          for (const std::string& id : ctx.retrieved_ids) retrieval_log->push_back(id);
        RngStream rng = RngStream::derive(cfg_.seed, "eval", step_, split_name(split),
                                          context_mode_name(mode), d, e);
        SnapshotAgent agent{&snap, temperature};
        Trajectory traj = rollout_episode(world_, agent, task, ctx, nullptr, rng, RolloutOptions{temperature});
        wins += traj.success ? 1 : 0;
      }
      double rate = static_cast<double>(wins) / static_cast<double>(episodes_per_domain);
      res.per_domain.emplace_back(world_.domains[static_cast<std::size_t>(d)], rate);
      sum += rate;
    }
    res.avg = sum / static_cast<double>(res.per_domain.size());
    return res;
  }

  // --- step internals (public: unit tests exercise them directly) -----------

  StepPlan build_plan(int step, const std::vector<const Task*>& batch, const PolicySnapshot& snap) {
    if (batch.empty()) throw ConfigError("train_step: empty batch");
    for (const Task* t : batch)
      if (t->split != Split::TrainID) throw ConfigError("train_step: batch outside the training split");

    StepPlan plan;
    plan.tasks.resize(batch.size());
    RolloutOptions phase1_opt{cfg_.train_temperature, false, false};
    ContextMode train_mode = method_context(cfg_.method);
    int threads = env_thread_count();

    parallel_indexed(static_cast<int>(batch.size()), threads, [&](int i) {
      const Task& task = *batch[static_cast<std::size_t>(i)];
      SnapshotAgent agent{&snap, cfg_.train_temperature};
      RngStream rng = RngStream::derive(cfg_.seed, "phase1", step, task.id);
      plan.tasks[static_cast<std::size_t>(i)].task = &task;
      plan.tasks[static_cast<std::size_t>(i)].phase1 = rollout_group(
          world_, agent, task, train_mode, Phase::Training, cfg_.group_size, cfg_.retrieval_k, rng,
          phase1_opt);
    });

    double mean_pass = 0.0;
    for (TaskPlan& tp : plan.tasks) mean_pass += pass_rate(tp.phase1);
    mean_pass /= static_cast<double>(plan.tasks.size());
    plan.batch_pass_mean = mean_pass;
    plan.eta = router_->push_pass_and_threshold(mean_pass);
    plan.u_anchor = router_->utilization_anchor();

    for (TaskPlan& tp : plan.tasks) tp.tier = route(pass_rate(tp.phase1), plan.eta);

    // Phase 2 rollouts (teacher groups for hard, probes for easy)
    parallel_indexed(static_cast<int>(plan.tasks.size()), threads, [&](int i) {
      TaskPlan& tp = plan.tasks[static_cast<std::size_t>(i)];
      SnapshotAgent agent{&snap, cfg_.train_temperature};
      if (tp.tier == Tier::Hard && method_distills(cfg_.method)) {
        RngStream rng = RngStream::derive(cfg_.seed, "teacher", step, tp.task->id);
        RolloutOptions opt{cfg_.train_temperature, true, true};
        tp.teacher = rollout_group(world_, agent, *tp.task, ContextMode::Privileged, Phase::Training,
                                   cfg_.group_size, cfg_.retrieval_k, rng, opt);
      } else if (tp.tier == Tier::Easy && method_probes(cfg_.method)) {
        RngStream rng = RngStream::derive(cfg_.seed, "probe", step, tp.task->id);
        tp.probe = rollout_group(world_, agent, *tp.task, ContextMode::NoSkill, Phase::Training,
                                 cfg_.probe_episodes, cfg_.retrieval_k, rng, phase1_opt);
      }
    });

    // utilization gains and advantages over this batch's easy tier
    std::vector<int> easy_idx;
    std::vector<double> gains;
    for (int i = 0; i < static_cast<int>(plan.tasks.size()); ++i) {
      TaskPlan& tp = plan.tasks[static_cast<std::size_t>(i)];
      if (tp.tier == Tier::Easy && tp.probe.has_value()) {
        tp.gain = utilization_gain(pass_rate(tp.phase1), pass_rate(*tp.probe));
        easy_idx.push_back(i);
        gains.push_back(tp.gain);
      }
    }
    if (!gains.empty()) {
      std::vector<double> a_u = utilization_advantages(gains, plan.u_anchor);
      for (std::size_t j = 0; j < easy_idx.size(); ++j)
        plan.tasks[static_cast<std::size_t>(easy_idx[j])].a_u = a_u[j];
    }

    // advantages and tokens
    for (TaskPlan& tp : plan.tasks) {
      switch (tp.tier) {
        case Tier::Hard:
          if (method_distills(cfg_.method)) {
            tp.golden = golden_filter(*tp.teacher);
            if (tp.golden.empty()) {
              plan.golden_skipped += 1;
              tp.loss_kind = "none";
            } else {
              tp.loss_kind = "distill";
            }
          } else {
            // plain GRPO on the phase-1 group with raw binary rewards: a
            // pass-rate-zero group is zero-variance, hence contributes nothing
            tp.loss_kind = "none";
          }
          break;
        case Tier::Medium: {
          std::vector<double> shaped = shaped_rewards(tp.phase1, cfg_.clip.invalid_penalty_coeff);
          tp.adv = group_advantage(shaped);
          tp.loss_kind = "grpo";
          break;
        }
        case Tier::Easy: {
          std::vector<double> shaped = shaped_rewards(tp.phase1, cfg_.clip.invalid_penalty_coeff);
          tp.adv = group_advantage(shaped);
          if (tp.probe.has_value()) {
            tp.adv = composite_advantage(std::move(tp.adv), tp.a_u);
            tp.loss_kind = "grpo_composite";
          } else {
            tp.loss_kind = "grpo";
          }
          break;
        }
      }
    }

    build_tokens(plan);
    return plan;
  }

  // Loss and (optionally) gradient of the full step objective at `params`.
  LossReport evaluate_plan(const StepPlan& plan, const PolicyParams& params,
                           const PolicySnapshot& snap, std::vector<double>* grad) const {
    LossReport rep;
    double reg_w = plan.me_tokens > 0 ? 1.0 / static_cast<double>(plan.me_tokens) : 0.0;
    std::vector<double> dlogits(static_cast<std::size_t>(params.shape.actions));
    for (const Token& tok : plan.tokens) {
      std::fill(dlogits.begin(), dlogits.end(), 0.0);
      ActionDistribution live = forward(params, *tok.obs, cfg_.train_temperature);
      double v = 0.0;
      if (tok.tier == Tier::Hard) {
        v = distill_token(live, *tok.teacher_probs, cfg_.clip.jsd_topk, tok.w_main, dlogits);
        rep.hard += v;
        rep.hard_tokens += 1;
      } else {
        v = grpo_token(live, tok.action, tok.logp_old, tok.advantage, cfg_.clip.epsilon, tok.w_main,
                       dlogits);
        if (tok.tier == Tier::Medium) {
          rep.medium += v;
          rep.medium_tokens += 1;
        } else {
          rep.easy += v;
          rep.easy_tokens += 1;
        }
      }
      if (tok.regularized && reg_w > 0.0) {
        ActionDistribution ref = eval_frozen(snap, *tok.obs, cfg_.train_temperature);
        rep.kl += kl_token(live, ref.probs, cfg_.clip.kl_coeff * reg_w, dlogits);
        rep.entropy += entropy_token(live, cfg_.clip.entropy_coeff * reg_w, dlogits);
      }
      if (grad != nullptr) backward(params, *tok.obs, live, dlogits, cfg_.train_temperature, *grad);
    }
    rep.finalize();
    return rep;
  }

  bool apply_updates(int step, const StepPlan& plan, const PolicySnapshot& snap, std::string& note) {
    std::vector<double> pre_params = params_.values;
    std::vector<double> pre_m = adam_->m();
    std::vector<double> pre_v = adam_->v();
    int pre_t = adam_->t();

    int n = static_cast<int>(plan.tokens.size());
    double reg_w = plan.me_tokens > 0 ? 1.0 / static_cast<double>(plan.me_tokens) : 0.0;
    std::vector<double> grad(static_cast<std::size_t>(params_.shape.param_count()));
    std::vector<double> dlogits(static_cast<std::size_t>(params_.shape.actions));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    try {
      for (int epoch = 0; epoch < cfg_.ppo_epochs; ++epoch) {
        RngStream shuffle_rng = RngStream::derive(cfg_.seed, "shuffle", step, epoch);
        for (int i = n - 1; i > 0; --i) {
          int j = shuffle_rng.uniform_index(i + 1);
          std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }
        for (int lo = 0; lo < n; lo += cfg_.minibatch_tokens) {
          int hi = std::min(n, lo + cfg_.minibatch_tokens);
          std::fill(grad.begin(), grad.end(), 0.0);
          for (int oi = lo; oi < hi; ++oi) {
            const Token& tok = plan.tokens[static_cast<std::size_t>(order[static_cast<std::size_t>(oi)])];
            std::fill(dlogits.begin(), dlogits.end(), 0.0);
            ActionDistribution live = forward(params_, *tok.obs, cfg_.train_temperature);
            if (tok.tier == Tier::Hard) {
              distill_token(live, *tok.teacher_probs, cfg_.clip.jsd_topk, tok.w_main, dlogits);
            } else {
              grpo_token(live, tok.action, tok.logp_old, tok.advantage, cfg_.clip.epsilon, tok.w_main,
                         dlogits);
            }
            if (tok.regularized && reg_w > 0.0) {
              ActionDistribution ref = eval_frozen(snap, *tok.obs, cfg_.train_temperature);
              kl_token(live, ref.probs, cfg_.clip.kl_coeff * reg_w, dlogits);
              entropy_token(live, cfg_.clip.entropy_coeff * reg_w, dlogits);
            }
            backward(params_, *tok.obs, live, dlogits, cfg_.train_temperature, grad);
          }
          // rescale so each minibatch estimates the full-batch gradient
          double scale = static_cast<double>(n) / static_cast<double>(hi - lo);
          for (double& g : grad) {
            g *= scale;
            if (!std::isfinite(g)) throw NumericalError("train_step: non-finite gradient");
          }
          adam_->step(params_.values, grad);
        }
      }
    } catch (const NumericalError& e) {
      params_.values = std::move(pre_params);
      adam_->restore(std::move(pre_m), std::move(pre_v), pre_t);
      note = std::string("update aborted: ") + e.what();
      return false;
    }
    return true;
  }

  // --- resume state (resume-v1) ----------------------------------------------

  std::string serialize_state(long long csv_offset, long long router_csv_offset) const {
    std::ostringstream ss;
    ss << "resume-v1\n";
    ss << "step " << step_ << "\n";
    ss << "adam_t " << adam_->t() << "\n";
    ss << "csv_offset " << csv_offset << "\n";
    ss << "router_csv_offset " << router_csv_offset << "\n";
    auto dump = [&ss](const char* tag, const auto& v) {
      ss << tag;
      for (double x : v) ss << ' ' << detail::fmt17(x);
      ss << "\n";
    };
    dump("pass_buffer", router_->pass_buffer());
    dump("gain_buffer", router_->gain_buffer());
    dump("params", params_.values);
    dump("adam_m", adam_->m());
    dump("adam_v", adam_->v());
    ss << "end\n";
    return ss.str();
  }

  struct ResumeInfo {
    long long csv_offset = 0;
    long long router_csv_offset = 0;
  };

  ResumeInfo restore_state(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "resume-v1")
      throw IoError("resume: bad or missing format header");
    ResumeInfo info;
    int adam_t = 0;
    std::deque<double> pass_buf, gain_buf;
    std::vector<double> params, m, v;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string tag;
      ls >> tag;
      if (tag == "end") {
        if (params.size() != params_.values.size()) throw IoError("resume: parameter count mismatch");
        params_.values = std::move(params);
        adam_->restore(std::move(m), std::move(v), adam_t);
        router_->restore(std::move(pass_buf), std::move(gain_buf));
        return info;
      }
      if (tag == "step") ls >> step_;
      else if (tag == "adam_t") ls >> adam_t;
      else if (tag == "csv_offset") ls >> info.csv_offset;
      else if (tag == "router_csv_offset") ls >> info.router_csv_offset;
      else if (tag == "pass_buffer") { double x; while (ls >> x) pass_buf.push_back(x); }
      else if (tag == "gain_buffer") { double x; while (ls >> x) gain_buf.push_back(x); }
      else if (tag == "params") { double x; while (ls >> x) params.push_back(x); }
      else if (tag == "adam_m") { double x; while (ls >> x) m.push_back(x); }
      else if (tag == "adam_v") { double x; while (ls >> x) v.push_back(x); }
      else throw IoError("resume: unknown record tag " + tag);
    }
    throw IoError("resume: truncated state (missing end)");
  }

 private:
  void build_tokens(StepPlan& plan) const {
    for (TaskPlan& tp : plan.tasks) {
      if (tp.loss_kind == "distill") {
        double n_golden = static_cast<double>(tp.golden.size());
        for (const Trajectory* traj : tp.golden) {
          double w = 1.0 / (n_golden * static_cast<double>(traj->steps.size()));
          for (const TrajStep& ts : traj->steps) {
            Token tok;
            tok.tier = Tier::Hard;
            tok.obs = &ts.student_obs;
            tok.teacher_probs = &ts.acting_probs;
            tok.source = traj;
            tok.w_main = w;
            plan.tokens.push_back(tok);
          }
        }
      } else if (tp.loss_kind == "grpo" || tp.loss_kind == "grpo_composite") {
        double w = 1.0 / static_cast<double>(tp.phase1.trajs.size());
        for (std::size_t g = 0; g < tp.phase1.trajs.size(); ++g) {
          const Trajectory& traj = tp.phase1.trajs[g];
          for (const TrajStep& ts : traj.steps) {
            Token tok;
            tok.tier = tp.tier;
            tok.obs = &ts.obs;
            tok.source = &traj;
            tok.action = ts.action;
            tok.logp_old = ts.logp_act;
            tok.advantage = tp.adv.values[g];
            tok.w_main = w;
            tok.regularized = true;
            plan.tokens.push_back(tok);
            plan.me_tokens += 1;
          }
        }
      }
    }
  }

  World world_;
  TrainConfig cfg_;
  PolicyParams params_;
  std::optional<Adam> adam_;
  std::optional<RouterState> router_;
  int step_ = 0;
  bool capture_plans_ = false;
  StepPlan last_plan_;
};

}  // namespace skillworld
