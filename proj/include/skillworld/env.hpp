#pragma once

// SkillWorld: a procedural multi-domain environment where each task hides a
// fixed action sequence (a shared prefix of gated choices followed by one
// domain-specific code). Skills injected into the observation reveal parts of
// that sequence; everything else must be learned or memorized.
//
// Action alphabet: (L-1)*m position-tagged prefix actions, then k code
// actions, then optional junk actions that are never legal anywhere.
//  - correct next action      -> progress advances
//  - legal-but-wrong action   -> progress resets to 0 (recoverable)
//  - action outside affordance-> invalid flag, progress unchanged, turn burned
// Success means finishing the whole hidden sequence within the horizon.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "skillworld/errors.hpp"
#include "skillworld/rng.hpp"
#include "skillworld/skillbank.hpp"

namespace skillworld {

struct EnvConfig {
  std::uint64_t seed = 4;
  int n_domains_id = 4;
  int n_domains_ood = 3;
  int n_patterns = 4;    // specific skills per domain (one per pattern)
  int n_distractors = 4;
  int procedure_len = 4;  // L: prefix positions (L-1) plus the final code step
  int prefix_options = 6;  // m: options per prefix position
  int code_options = 6;    // k: distinct codes
  int junk_actions = 0;
  int horizon = 8;  // T
  int d_emb = 32;
  int d_dom = 8;
  int retrieval_slots = 3;  // specific-skill slots in the observation layout
  int train_tasks_per_domain = 40;
  int val_tasks_per_domain = 25;
  int ood_tasks_per_domain = 40;
  double gamma = 1.0;

  int n_actions() const {
    return (procedure_len - 1) * prefix_options + code_options + junk_actions;
  }
  int n_prefix_actions() const { return (procedure_len - 1) * prefix_options; }

  void validate() const {
    if (n_domains_id < 1 || n_domains_ood < 1) throw ConfigError("env: need at least one domain per split");
    if (n_patterns < 1) throw ConfigError("env: n_patterns must be positive");
    if (n_distractors < 1) throw ConfigError("env: n_distractors must be positive");
    if (procedure_len < 2) throw ConfigError("env: procedure_len must be at least 2");
    if (prefix_options < 2) throw ConfigError("env: prefix_options must be at least 2");
    if (code_options < 2) throw ConfigError("env: code_options must be at least 2");
    if (junk_actions < 0) throw ConfigError("env: junk_actions must be non-negative");
    if (horizon < procedure_len) throw ConfigError("env: horizon shorter than the procedure");
    if (d_emb < 4) throw ConfigError("env: d_emb too small");
    if (d_dom < 1) throw ConfigError("env: d_dom must be positive");
    if (retrieval_slots < 1) throw ConfigError("env: retrieval_slots must be positive");
    if (train_tasks_per_domain < 1 || val_tasks_per_domain < 1 || ood_tasks_per_domain < 1)
      throw ConfigError("env: task counts must be positive");
    if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("env: gamma must be in (0, 1]");
  }
};

enum class Split { TrainID, ValID, ValOOD };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::TrainID: return "train_id";
    case Split::ValID: return "val_id";
    default: return "val_ood";
  }
}

inline Split split_from_name(const std::string& s) {
  if (s == "train_id") return Split::TrainID;
  if (s == "val_id") return Split::ValID;
  if (s == "val_ood") return Split::ValOOD;
  throw ConfigError("unknown split name: " + s);
}

struct Task {
  std::string id;
  int domain_index = 0;
  std::string domain;
  int pattern = 0;
  int distractor = 0;
  Split split = Split::TrainID;
};

// Per-position observation feedback about the previous action.
enum class Feedback { None = 0, Ok = 1, Wrong = 2, Invalid = 3 };
inline constexpr int kFeedbackDim = 4;

struct ObservationLayout {
  int d_dom = 0, n_patterns = 0, n_distractors = 0, procedure_len = 0;
  int gen_slots = 0, spec_slots = 0, d_skill = 0;
  int off_domain = 0, off_pattern = 0, off_distractor = 0, off_progress = 0;
  int off_feedback = 0, off_turn = 0, off_context = 0;
  int total = 0;

  int gen_slot_offset(int j) const { return off_context + j * d_skill; }
  int spec_slot_offset(int i) const { return off_context + (gen_slots + i) * d_skill; }
};

inline ObservationLayout make_layout(const EnvConfig& cfg) {
  ObservationLayout lay;
  lay.d_dom = cfg.d_dom;
  lay.n_patterns = cfg.n_patterns;
  lay.n_distractors = cfg.n_distractors;
  lay.procedure_len = cfg.procedure_len;
  lay.gen_slots = cfg.procedure_len - 1;
  lay.spec_slots = cfg.retrieval_slots;
  lay.d_skill = 2 + cfg.n_patterns + cfg.code_options + (cfg.procedure_len - 1) + cfg.prefix_options;
  int off = 0;
  lay.off_domain = off;
  off += lay.d_dom;
  lay.off_pattern = off;
  off += lay.n_patterns;
  lay.off_distractor = off;
  off += lay.n_distractors;
  lay.off_progress = off;
  off += lay.procedure_len;
  lay.off_feedback = off;
  off += kFeedbackDim;
  lay.off_turn = off;
  off += 1;
  lay.off_context = off;
  off += (lay.gen_slots + lay.spec_slots) * lay.d_skill;
  lay.total = off;
  return lay;
}

// Payload layout inside one skill slot (width d_skill):
//   [0] general flag, [1] specific flag,
//   [2, 2+n_patterns)                pattern one-hot   (specific)
//   [+, +code_options)               code one-hot      (specific)
//   [+, +procedure_len-1)            position one-hot  (general)
//   [+, +prefix_options)             option one-hot    (general)
struct PayloadLayout {
  int pattern_off = 2, code_off = 0, position_off = 0, option_off = 0, width = 0;
};

inline PayloadLayout make_payload_layout(const EnvConfig& cfg) {
  PayloadLayout p;
  p.pattern_off = 2;
  p.code_off = p.pattern_off + cfg.n_patterns;
  p.position_off = p.code_off + cfg.code_options;
  p.option_off = p.position_off + (cfg.procedure_len - 1);
  p.width = p.option_off + cfg.prefix_options;
  return p;
}

struct World {
  EnvConfig config;
  std::vector<std::string> domains;  // ID domains first, then OOD
  std::vector<std::vector<double>> domain_signatures;
  std::vector<std::vector<int>> rules;  // rules[domain][pattern] -> code in [0, k)
  std::vector<int> prefix_correct;      // o*_j for each prefix position
  SkillBank bank;
  std::vector<Task> train_id, val_id, val_ood;
  ObservationLayout layout;
  PayloadLayout payload_layout;
  std::map<std::string, const Task*> task_index;

  bool domain_is_ood(int domain_index) const { return domain_index >= config.n_domains_id; }
  int prefix_action(int position, int option) const { return position * config.prefix_options + option; }
  int code_action(int code) const { return config.n_prefix_actions() + code; }

  const std::vector<Task>& tasks(Split s) const {
    switch (s) {
      case Split::TrainID: return train_id;
      case Split::ValID: return val_id;
      default: return val_ood;
    }
  }

  const Task& find_task(const std::string& id) const {
    auto it = task_index.find(id);
    if (it == task_index.end()) throw UnknownTask("no task with id " + id);
    return *it->second;
  }

  void rebuild_task_index() {
    task_index.clear();
    for (const Task& t : train_id) task_index[t.id] = &t;
    for (const Task& t : val_id) task_index[t.id] = &t;
    for (const Task& t : val_ood) task_index[t.id] = &t;
  }

  // The task's full hidden action sequence: prefix choices then its code.
  std::vector<int> hidden_procedure(const Task& t) const {
    std::vector<int> seq;
    seq.reserve(static_cast<std::size_t>(config.procedure_len));
    for (int j = 0; j < config.procedure_len - 1; ++j) seq.push_back(prefix_action(j, prefix_correct[static_cast<std::size_t>(j)]));
    seq.push_back(code_action(rules[static_cast<std::size_t>(t.domain_index)][static_cast<std::size_t>(t.pattern)]));
    return seq;
  }
};

namespace detail {

inline std::vector<std::string> domain_names(int n_id, int n_ood) {
  static const char* kWords[] = {"algebra", "circuits", "orbits",  "peptides", "glaciers", "lexicon",
                                 "minerals", "syntax",  "harmony", "botany",   "ciphers",  "tides"};
  constexpr int kWordCount = static_cast<int>(sizeof(kWords) / sizeof(kWords[0]));
  std::vector<std::string> out;
  for (int i = 0; i < n_id + n_ood; ++i) {
    if (i < kWordCount) {
      out.emplace_back(kWords[i]);
    } else {
      out.push_back("domain" + std::to_string(i));
    }
  }
  return out;
}

inline std::vector<double> domain_signature(const std::string& name, int d_dom) {
  RngStream rs = RngStream::derive(hash64(name), "domain-signature");
  std::vector<double> sig(static_cast<std::size_t>(d_dom));
  for (double& v : sig) v = (rs.next_u64() & 1ull) ? 1.0 : -1.0;
  return sig;
}

inline std::string task_id(Split split, const std::string& domain, int idx) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03d", idx);
  return std::string(split_name(split)) + "-" + domain + "-" + buf;
}

}  // namespace detail

// Key tokens used both for task queries and specific-skill keys, so a task's
// matching skill retrieves at rank 1 with cosine exactly 1.
inline std::vector<std::string> task_key_tokens(const Task& t) {
  return {"dom:" + t.domain, "pat:" + std::to_string(t.pattern)};
}

inline Embedding task_embedding(const World& w, const Task& t) {
  std::vector<std::string> toks = task_key_tokens(t);
  return embed(toks, w.config.d_emb);
}

inline World generate_world(const EnvConfig& cfg) {
  cfg.validate();
  World w;
  w.config = cfg;
  w.layout = make_layout(cfg);
  w.payload_layout = make_payload_layout(cfg);
  w.domains = detail::domain_names(cfg.n_domains_id, cfg.n_domains_ood);
  for (const std::string& name : w.domains) w.domain_signatures.push_back(detail::domain_signature(name, cfg.d_dom));

  {
    RngStream rs = RngStream::derive(cfg.seed, "prefix-options");
    for (int j = 0; j < cfg.procedure_len - 1; ++j) w.prefix_correct.push_back(rs.uniform_index(cfg.prefix_options));
  }
  for (const std::string& name : w.domains) {
    RngStream rs = RngStream::derive(cfg.seed, "rule-table", name);
    std::vector<int> row(static_cast<std::size_t>(cfg.n_patterns));
    for (int& c : row) c = rs.uniform_index(cfg.code_options);
    w.rules.push_back(std::move(row));
  }

  // skill bank ------------------------------------------------------------
  const PayloadLayout& pl = w.payload_layout;
  w.bank.d_skill = pl.width;
  w.bank.k_default = cfg.retrieval_slots;
  for (int j = 0; j < cfg.procedure_len - 1; ++j) {
    std::vector<double> payload(static_cast<std::size_t>(pl.width), 0.0);
    payload[0] = 1.0;
    payload[static_cast<std::size_t>(pl.position_off + j)] = 1.0;
    payload[static_cast<std::size_t>(pl.option_off + w.prefix_correct[static_cast<std::size_t>(j)])] = 1.0;
    w.bank.general.push_back(make_skill("gen-pos" + std::to_string(j), SkillKind::General, "",
                                        {"skill:general", "pos:" + std::to_string(j)}, std::move(payload),
                                        cfg.d_emb));
  }
  for (int d = 0; d < static_cast<int>(w.domains.size()); ++d) {
    for (int p = 0; p < cfg.n_patterns; ++p) {
      std::vector<double> payload(static_cast<std::size_t>(pl.width), 0.0);
      payload[1] = 1.0;
      payload[static_cast<std::size_t>(pl.pattern_off + p)] = 1.0;
      payload[static_cast<std::size_t>(pl.code_off + w.rules[static_cast<std::size_t>(d)][static_cast<std::size_t>(p)])] = 1.0;
      Skill s = make_skill("spec-" + w.domains[static_cast<std::size_t>(d)] + "-p" + std::to_string(p),
                           SkillKind::Specific, w.domains[static_cast<std::size_t>(d)],
                           {"dom:" + w.domains[static_cast<std::size_t>(d)], "pat:" + std::to_string(p)},
                           std::move(payload), cfg.d_emb);
      if (d < cfg.n_domains_id) {
        w.bank.specific_id.push_back(std::move(s));
      } else {
        w.bank.specific_ood.push_back(std::move(s));
      }
    }
  }
  validate(w.bank);

  // tasks -------------------------------------------------------------------
  auto gen_tasks = [&](Split split, int domain_index, int count, std::vector<Task>& out) {
    const std::string& name = w.domains[static_cast<std::size_t>(domain_index)];
    RngStream rs = RngStream::derive(cfg.seed, "tasks", split_name(split), name);
    for (int i = 0; i < count; ++i) {
      Task t;
      t.id = detail::task_id(split, name, i);
      t.domain_index = domain_index;
      t.domain = name;
      t.pattern = rs.uniform_index(cfg.n_patterns);
      t.distractor = rs.uniform_index(cfg.n_distractors);
      t.split = split;
      out.push_back(std::move(t));
    }
  };
  for (int d = 0; d < cfg.n_domains_id; ++d) {
    gen_tasks(Split::TrainID, d, cfg.train_tasks_per_domain, w.train_id);
    gen_tasks(Split::ValID, d, cfg.val_tasks_per_domain, w.val_id);
  }
  for (int d = cfg.n_domains_id; d < static_cast<int>(w.domains.size()); ++d)
    gen_tasks(Split::ValOOD, d, cfg.ood_tasks_per_domain, w.val_ood);
  w.rebuild_task_index();
  return w;
}

// --- context assembly -------------------------------------------------------

enum class ContextMode { Standard, Privileged, NoSkill, FullExtern, InternID };
enum class Phase { Training, Inference };

inline const char* context_mode_name(ContextMode m) {
  switch (m) {
    case ContextMode::Standard: return "standard";
    case ContextMode::Privileged: return "privileged";
    case ContextMode::NoSkill: return "no_skill";
    case ContextMode::FullExtern: return "full_extern";
    default: return "intern_id";
  }
}

inline ContextMode context_mode_from_name(const std::string& s) {
  if (s == "standard") return ContextMode::Standard;
  if (s == "privileged") return ContextMode::Privileged;
  if (s == "no_skill") return ContextMode::NoSkill;
  if (s == "full_extern") return ContextMode::FullExtern;
  if (s == "intern_id") return ContextMode::InternID;
  throw ConfigError("unknown context mode: " + s);
}

struct ContextFeatures {
  std::vector<double> values;  // (gen_slots + spec_slots) * d_skill, zero padded
  std::vector<std::string> retrieved_ids;
  ContextMode mode = ContextMode::NoSkill;
};

// Builds the context block for one episode. Retrieval happens here, once per
// episode, and never crosses the ID/OOD pool boundary.
inline ContextFeatures build_context(const World& w, const Task& t, ContextMode mode, Phase phase,
                                     int k) {
  if (mode == ContextMode::Privileged && phase == Phase::Inference)
    throw ProtocolViolation("privileged context is training-only");
  const ObservationLayout& lay = w.layout;
  ContextFeatures ctx;
  ctx.mode = mode;
  ctx.values.assign(static_cast<std::size_t>((lay.gen_slots + lay.spec_slots) * lay.d_skill), 0.0);

  bool want_general = (mode == ContextMode::Privileged || mode == ContextMode::FullExtern);
  bool ood_task = w.domain_is_ood(t.domain_index);
  bool want_specific = (mode == ContextMode::Standard || mode == ContextMode::Privileged ||
                        mode == ContextMode::FullExtern || (mode == ContextMode::InternID && ood_task));

  if (want_general) {
    for (int j = 0; j < lay.gen_slots && j < static_cast<int>(w.bank.general.size()); ++j) {
      const Skill& s = w.bank.general[static_cast<std::size_t>(j)];
      std::copy(s.payload.begin(), s.payload.end(),
                ctx.values.begin() + (static_cast<std::size_t>(j) * static_cast<std::size_t>(lay.d_skill)));
    }
  }
  if (want_specific) {
    if (k <= 0 || k > lay.spec_slots) throw ConfigError("build_context: K out of range for layout");
    Embedding q = task_embedding(w, t);
    Pool pool = ood_task ? Pool::OOD : Pool::ID;
    std::vector<const Skill*> hits = retrieve_topk(w.bank, pool, q, k);
    for (int i = 0; i < static_cast<int>(hits.size()); ++i) {
      const Skill& s = *hits[static_cast<std::size_t>(i)];
      std::copy(s.payload.begin(), s.payload.end(),
                ctx.values.begin() +
                    (static_cast<std::size_t>(lay.gen_slots + i) * static_cast<std::size_t>(lay.d_skill)));
      ctx.retrieved_ids.push_back(s.id);
    }
  }
  return ctx;
}

// Zeroes the general block of an existing context (used when a student must
// see the same episode as a privileged teacher, minus the general skills).
inline ContextFeatures strip_general(const World& w, const ContextFeatures& ctx) {
  ContextFeatures out = ctx;
  std::size_t n = static_cast<std::size_t>(w.layout.gen_slots) * static_cast<std::size_t>(w.layout.d_skill);
  std::fill(out.values.begin(), out.values.begin() + static_cast<std::ptrdiff_t>(n), 0.0);
  out.mode = ContextMode::Standard;
  return out;
}

// --- episode dynamics --------------------------------------------------------

struct EnvState {
  const Task* task = nullptr;
  int progress = 0;
  std::vector<int> executed_prefix;  // actions that advanced progress (cleared on reset-to-zero)
  int turn = 0;
  int invalid_count = 0;
  Feedback feedback = Feedback::None;
  bool done = false;
  bool success = false;
};

struct StepFlags {
  bool done = false;
  bool success = false;
  bool invalid = false;
};

inline EnvState reset(const World& w, const Task& t) {
  const Task& owned = w.find_task(t.id);  // throws UnknownTask for foreign tasks
  EnvState st;
  st.task = &owned;
  return st;
}

// Legal actions at a given progress level (the current affordance set).
inline std::vector<int> affordance(const World& w, int progress) {
  std::vector<int> out;
  if (progress < w.config.procedure_len - 1) {
    for (int o = 0; o < w.config.prefix_options; ++o) out.push_back(w.prefix_action(progress, o));
  } else {
    for (int c = 0; c < w.config.code_options; ++c) out.push_back(w.code_action(c));
  }
  return out;
}

inline bool action_in_affordance(const World& w, int progress, int action) {
  if (progress < w.config.procedure_len - 1) {
    int lo = progress * w.config.prefix_options;
    return action >= lo && action < lo + w.config.prefix_options;
  }
  int lo = w.config.n_prefix_actions();
  return action >= lo && action < lo + w.config.code_options;
}

inline StepFlags step(const World& w, EnvState& st, int action) {
  if (st.task == nullptr) throw EpisodeFinished("step before reset");
  if (st.done) throw EpisodeFinished("step on a finished episode");
  if (action < 0 || action >= w.config.n_actions()) throw ShapeError("step: action out of range");
  StepFlags flags;
  st.turn += 1;
  if (!action_in_affordance(w, st.progress, action)) {
    st.invalid_count += 1;
    st.feedback = Feedback::Invalid;
    flags.invalid = true;
  } else {
    std::vector<int> proc = w.hidden_procedure(*st.task);
    if (action == proc[static_cast<std::size_t>(st.progress)]) {
      st.progress += 1;
      st.executed_prefix.push_back(action);
      st.feedback = Feedback::Ok;
      if (st.progress == w.config.procedure_len) {
        st.done = true;
        st.success = true;
      }
    } else {
      st.progress = 0;
      st.executed_prefix.clear();
      st.feedback = Feedback::Wrong;
    }
  }
  if (!st.done && st.turn >= w.config.horizon) st.done = true;
  flags.done = st.done;
  flags.success = st.success;
  return flags;
}

struct Observation {
  std::vector<double> features;
};

inline Observation observe(const World& w, const EnvState& st, const ContextFeatures& ctx) {
  if (st.task == nullptr) throw EpisodeFinished("observe before reset");
  if (st.done) throw EpisodeFinished("observe on a finished episode");
  const ObservationLayout& lay = w.layout;
  if (static_cast<int>(ctx.values.size()) != (lay.gen_slots + lay.spec_slots) * lay.d_skill)
    throw ShapeError("observe: context block size mismatch");
  Observation obs;
  obs.features.assign(static_cast<std::size_t>(lay.total), 0.0);
  const Task& t = *st.task;
  const std::vector<double>& sig = w.domain_signatures[static_cast<std::size_t>(t.domain_index)];
  std::copy(sig.begin(), sig.end(), obs.features.begin() + lay.off_domain);
  obs.features[static_cast<std::size_t>(lay.off_pattern + t.pattern)] = 1.0;
  obs.features[static_cast<std::size_t>(lay.off_distractor + t.distractor)] = 1.0;
  obs.features[static_cast<std::size_t>(lay.off_progress + st.progress)] = 1.0;
  obs.features[static_cast<std::size_t>(lay.off_feedback + static_cast<int>(st.feedback))] = 1.0;
  obs.features[static_cast<std::size_t>(lay.off_turn)] =
      static_cast<double>(st.turn) / static_cast<double>(w.config.horizon);
  std::copy(ctx.values.begin(), ctx.values.end(), obs.features.begin() + lay.off_context);
  return obs;
}

}  // namespace skillworld
