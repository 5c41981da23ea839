#pragma once

// Run configuration. Human-readable JSON with three sections (env, train,
// run), full defaulting (an empty object is a valid config), and strict
// unknown-key rejection so typos fail loudly. `resolved_config_json` dumps the
// fully-defaulted result in a fixed key order, which makes manifests
// self-describing and `--print-config` deterministic.

#include <chrono>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "skillworld/env.hpp"
#include "skillworld/trainer.hpp"
#include "skillworld/world_io.hpp"

namespace skillworld {

inline constexpr const char* kCodeVersion = "skillworld-0.1.0";

struct RunSection {
  std::string out_dir = "run";
  std::string world;  // snapshot path; empty = generate from the env section
};

struct RunConfig {
  EnvConfig env;
  TrainConfig train;
  RunSection run;
};

using Json = nlohmann::ordered_json;

namespace detail {

// Reads cfg[key] into `out` if present, erasing the key so the caller can
// reject leftovers afterwards.
template <class T>
void take(Json& obj, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string("config: bad value type for key ") + key);
  }
  obj.erase(it);
}

inline void reject_leftovers(const Json& obj, const char* section) {
  if (obj.empty()) return;
  throw ConfigError(std::string("config: unknown key '") + obj.begin().key() + "' in section " +
                    section);
}

}  // namespace detail

inline void env_from_json(Json obj, EnvConfig& c) {
  using detail::take;
  take(obj, "seed", c.seed);
  take(obj, "n_domains_id", c.n_domains_id);
  take(obj, "n_domains_ood", c.n_domains_ood);
  take(obj, "n_patterns", c.n_patterns);
  take(obj, "n_distractors", c.n_distractors);
  take(obj, "procedure_len", c.procedure_len);
  take(obj, "prefix_options", c.prefix_options);
  take(obj, "code_options", c.code_options);
  take(obj, "junk_actions", c.junk_actions);
  take(obj, "horizon", c.horizon);
  take(obj, "d_emb", c.d_emb);
  take(obj, "d_dom", c.d_dom);
  take(obj, "retrieval_slots", c.retrieval_slots);
  take(obj, "train_tasks_per_domain", c.train_tasks_per_domain);
  take(obj, "val_tasks_per_domain", c.val_tasks_per_domain);
  take(obj, "ood_tasks_per_domain", c.ood_tasks_per_domain);
  take(obj, "gamma", c.gamma);
  detail::reject_leftovers(obj, "env");
}

inline Json env_to_json(const EnvConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["n_domains_id"] = c.n_domains_id;
  j["n_domains_ood"] = c.n_domains_ood;
  j["n_patterns"] = c.n_patterns;
  j["n_distractors"] = c.n_distractors;
  j["procedure_len"] = c.procedure_len;
  j["prefix_options"] = c.prefix_options;
  j["code_options"] = c.code_options;
  j["junk_actions"] = c.junk_actions;
  j["horizon"] = c.horizon;
  j["d_emb"] = c.d_emb;
  j["d_dom"] = c.d_dom;
  j["retrieval_slots"] = c.retrieval_slots;
  j["train_tasks_per_domain"] = c.train_tasks_per_domain;
  j["val_tasks_per_domain"] = c.val_tasks_per_domain;
  j["ood_tasks_per_domain"] = c.ood_tasks_per_domain;
  j["gamma"] = c.gamma;
  return j;
}

inline void train_from_json(Json obj, TrainConfig& c) {
  using detail::take;
  take(obj, "seed", c.seed);
  take(obj, "steps", c.steps);
  take(obj, "batch_size", c.batch_size);
  take(obj, "group_size", c.group_size);
  take(obj, "probe_episodes", c.probe_episodes);
  take(obj, "window", c.window);
  take(obj, "retrieval_k", c.retrieval_k);
  take(obj, "hidden", c.hidden);
  take(obj, "learning_rate", c.learning_rate);
  take(obj, "weight_decay", c.weight_decay);
  take(obj, "clip_epsilon", c.clip.epsilon);
  take(obj, "kl_coeff", c.clip.kl_coeff);
  take(obj, "entropy_coeff", c.clip.entropy_coeff);
  take(obj, "invalid_penalty_coeff", c.clip.invalid_penalty_coeff);
  take(obj, "jsd_topk", c.clip.jsd_topk);
  take(obj, "ppo_epochs", c.ppo_epochs);
  take(obj, "minibatch_tokens", c.minibatch_tokens);
  take(obj, "train_temperature", c.train_temperature);
  take(obj, "eval_temperature", c.eval_temperature);
  take(obj, "eval_every", c.eval_every);
  take(obj, "eval_episodes", c.eval_episodes);
  take(obj, "horizon_override", c.horizon_override);
  std::string method = method_name(c.method);
  take(obj, "method", method);
  c.method = method_from_name(method);
  std::string init = c.init == InitMode::Zero     ? "zero"
                     : c.init == InitMode::Random ? "random"
                                                  : "skill_prior";
  take(obj, "init", init);
  c.init = init_mode_from_name(init);
  take(obj, "gate_gain", c.prior.gate_gain);
  take(obj, "head_gain", c.prior.head_gain);
  take(obj, "feature_scale", c.prior.feature_scale);
  take(obj, "noise_scale", c.prior.noise_scale);
  detail::reject_leftovers(obj, "train");
}

inline Json train_to_json(const TrainConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["steps"] = c.steps;
  j["batch_size"] = c.batch_size;
  j["group_size"] = c.group_size;
  j["probe_episodes"] = c.probe_episodes;
  j["window"] = c.window;
  j["retrieval_k"] = c.retrieval_k;
  j["hidden"] = c.hidden;
  j["learning_rate"] = c.learning_rate;
  j["weight_decay"] = c.weight_decay;
  j["clip_epsilon"] = c.clip.epsilon;
  j["kl_coeff"] = c.clip.kl_coeff;
  j["entropy_coeff"] = c.clip.entropy_coeff;
  j["invalid_penalty_coeff"] = c.clip.invalid_penalty_coeff;
  j["jsd_topk"] = c.clip.jsd_topk;
  j["ppo_epochs"] = c.ppo_epochs;
  j["minibatch_tokens"] = c.minibatch_tokens;
  j["train_temperature"] = c.train_temperature;
  j["eval_temperature"] = c.eval_temperature;
  j["eval_every"] = c.eval_every;
  j["eval_episodes"] = c.eval_episodes;
  j["horizon_override"] = c.horizon_override;
  j["method"] = method_name(c.method);
  j["init"] = c.init == InitMode::Zero ? "zero" : c.init == InitMode::Random ? "random" : "skill_prior";
  j["gate_gain"] = c.prior.gate_gain;
  j["head_gain"] = c.prior.head_gain;
  j["feature_scale"] = c.prior.feature_scale;
  j["noise_scale"] = c.prior.noise_scale;
  return j;
}

inline RunConfig config_from_json_text(const std::string& text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  RunConfig rc;
  if (auto it = root.find("env"); it != root.end()) {
    env_from_json(*it, rc.env);
    root.erase(it);
  }
  if (auto it = root.find("train"); it != root.end()) {
    train_from_json(*it, rc.train);
    root.erase(it);
  }
  if (auto it = root.find("run"); it != root.end()) {
    Json obj = *it;
    detail::take(obj, "out_dir", rc.run.out_dir);
    detail::take(obj, "world", rc.run.world);
    detail::reject_leftovers(obj, "run");
    root.erase(it);
  }
  detail::reject_leftovers(root, "(top level)");
  rc.env.validate();
  rc.train.validate();
  return rc;
}

inline RunConfig load_config(const std::string& path) {
  return config_from_json_text(read_file(path));
}

inline Json config_to_json(const RunConfig& rc) {
  Json j;
  j["env"] = env_to_json(rc.env);
  j["train"] = train_to_json(rc.train);
  Json run;
  run["out_dir"] = rc.run.out_dir;
  run["world"] = rc.run.world;
  j["run"] = run;
  return j;
}

inline std::string resolved_config_json(const RunConfig& rc) { return config_to_json(rc).dump(2) + "\n"; }

inline std::string utc_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Everything needed to rerun: resolved config, seeds, world fingerprint, and
// where the outputs went. Given the same build, the manifest determines the
// run.
struct RunManifest {
  RunConfig config;
  std::string world_fingerprint;
  std::string started_utc;
  std::string finished_utc;
  std::string metrics_csv, router_csv, checkpoint, resume_file, world_file;

  Json to_json() const {
    Json j;
    j["code_version"] = kCodeVersion;
    j["started_utc"] = started_utc;
    j["finished_utc"] = finished_utc;
    Json seeds;
    seeds["env"] = config.env.seed;
    seeds["train"] = config.train.seed;
    j["seeds"] = seeds;
    j["world_fingerprint"] = world_fingerprint;
    Json outputs;
    outputs["metrics_csv"] = metrics_csv;
    outputs["router_csv"] = router_csv;
    outputs["checkpoint"] = checkpoint;
    outputs["resume_file"] = resume_file;
    outputs["world_file"] = world_file;
    j["outputs"] = outputs;
    j["config"] = config_to_json(config);
    return j;
  }
};

inline void save_manifest(const std::string& path, const RunManifest& m) {
  write_file_atomic(path, m.to_json().dump(2) + "\n");
}

}  // namespace skillworld
