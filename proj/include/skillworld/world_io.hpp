#pragma once

// World serialization (skillworld-v1). A world file stores the generating
// config plus all sampled content (rules, prefix options, task manifests) and
// references its skill bank as a sibling file, guarded by a content hash.
// Derived data (signatures, layouts) is recomputed on load.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "skillworld/env.hpp"

namespace skillworld {

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Writes via a temp file + rename so failures never leave partial output.
inline void write_file_atomic(const std::string& path, const std::string& content) {
  std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
    os << content;
    if (!os) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

inline std::string hash_hex(const std::string& bytes) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash64(bytes)));
  return buf;
}

inline std::string serialize_bank(const SkillBank& bank) {
  std::ostringstream ss;
  save_bank(ss, bank);
  return ss.str();
}

inline std::string serialize_world(const World& w, const std::string& bank_file,
                                   const std::string& bank_hash) {
  const EnvConfig& c = w.config;
  std::ostringstream ss;
  ss << "skillworld-v1\n";
  ss << "seed " << c.seed << "\n";
  ss << "n_domains_id " << c.n_domains_id << "\n";
  ss << "n_domains_ood " << c.n_domains_ood << "\n";
  ss << "n_patterns " << c.n_patterns << "\n";
  ss << "n_distractors " << c.n_distractors << "\n";
  ss << "procedure_len " << c.procedure_len << "\n";
  ss << "prefix_options " << c.prefix_options << "\n";
  ss << "code_options " << c.code_options << "\n";
  ss << "junk_actions " << c.junk_actions << "\n";
  ss << "horizon " << c.horizon << "\n";
  ss << "d_emb " << c.d_emb << "\n";
  ss << "d_dom " << c.d_dom << "\n";
  ss << "retrieval_slots " << c.retrieval_slots << "\n";
  ss << "train_tasks_per_domain " << c.train_tasks_per_domain << "\n";
  ss << "val_tasks_per_domain " << c.val_tasks_per_domain << "\n";
  ss << "ood_tasks_per_domain " << c.ood_tasks_per_domain << "\n";
  ss << "gamma " << detail::fmt17(c.gamma) << "\n";
  for (int d = 0; d < static_cast<int>(w.domains.size()); ++d)
    ss << "domain " << w.domains[static_cast<std::size_t>(d)] << " " << (w.domain_is_ood(d) ? "ood" : "id") << "\n";
  ss << "prefix_correct";
  for (int o : w.prefix_correct) ss << ' ' << o;
  ss << "\n";
  for (std::size_t d = 0; d < w.rules.size(); ++d) {
    ss << "rule " << w.domains[d];
    for (int code : w.rules[d]) ss << ' ' << code;
    ss << "\n";
  }
  auto dump_tasks = [&](const std::vector<Task>& ts) {
    for (const Task& t : ts)
      ss << "task " << t.id << " " << t.domain << " " << t.pattern << " " << t.distractor << " "
         << split_name(t.split) << "\n";
  };
  dump_tasks(w.train_id);
  dump_tasks(w.val_id);
  dump_tasks(w.val_ood);
  ss << "bank_file " << bank_file << "\n";
  ss << "bank_hash " << bank_hash << "\n";
  ss << "end\n";
  return ss.str();
}

// Stable content fingerprint of a world (config + sampled content + bank).
inline std::string world_fingerprint(const World& w) {
  std::string bank = serialize_bank(w.bank);
  std::string body = serialize_world(w, "-", hash_hex(bank));
  return hash_hex(body + bank);
}

// Writes <path> and <path>.bank (both atomically).
inline void save_world(const std::string& path, const World& w) {
  std::string bank = serialize_bank(w.bank);
  std::string bank_name = std::filesystem::path(path).filename().string() + ".bank";
  write_file_atomic(path + ".bank", bank);
  write_file_atomic(path, serialize_world(w, bank_name, hash_hex(bank)));
}

inline World load_world(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("world: cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line != "skillworld-v1")
    throw IoError("world: bad or missing format header in " + path);

  World w;
  EnvConfig& c = w.config;
  std::vector<std::pair<std::string, bool>> domains;  // (name, is_ood)
  std::string bank_file, bank_hash;
  bool saw_end = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "seed") ls >> c.seed;
    else if (tag == "n_domains_id") ls >> c.n_domains_id;
    else if (tag == "n_domains_ood") ls >> c.n_domains_ood;
    else if (tag == "n_patterns") ls >> c.n_patterns;
    else if (tag == "n_distractors") ls >> c.n_distractors;
    else if (tag == "procedure_len") ls >> c.procedure_len;
    else if (tag == "prefix_options") ls >> c.prefix_options;
    else if (tag == "code_options") ls >> c.code_options;
    else if (tag == "junk_actions") ls >> c.junk_actions;
    else if (tag == "horizon") ls >> c.horizon;
    else if (tag == "d_emb") ls >> c.d_emb;
    else if (tag == "d_dom") ls >> c.d_dom;
    else if (tag == "retrieval_slots") ls >> c.retrieval_slots;
    else if (tag == "train_tasks_per_domain") ls >> c.train_tasks_per_domain;
    else if (tag == "val_tasks_per_domain") ls >> c.val_tasks_per_domain;
    else if (tag == "ood_tasks_per_domain") ls >> c.ood_tasks_per_domain;
    else if (tag == "gamma") ls >> c.gamma;
    else if (tag == "domain") {
      std::string name, kind;
      ls >> name >> kind;
      domains.emplace_back(name, kind == "ood");
    } else if (tag == "prefix_correct") {
      int o;
      while (ls >> o) w.prefix_correct.push_back(o);
    } else if (tag == "rule") {
      std::string name;
      ls >> name;
      std::vector<int> row;
      int code;
      while (ls >> code) row.push_back(code);
      w.rules.push_back(std::move(row));
    } else if (tag == "task") {
      Task t;
      std::string split;
      ls >> t.id >> t.domain >> t.pattern >> t.distractor >> split;
      t.split = split_from_name(split);
      if (t.split == Split::TrainID) w.train_id.push_back(std::move(t));
      else if (t.split == Split::ValID) w.val_id.push_back(std::move(t));
      else w.val_ood.push_back(std::move(t));
    } else if (tag == "bank_file") {
      ls >> bank_file;
    } else if (tag == "bank_hash") {
      ls >> bank_hash;
    } else if (tag == "end") {
      saw_end = true;
      break;
    } else {
      throw IoError("world: unknown record tag " + tag);
    }
  }
  if (!saw_end) throw IoError("world: truncated file " + path);
  c.validate();

  for (const auto& [name, is_ood] : domains) {
    w.domains.push_back(name);
    w.domain_signatures.push_back(detail::domain_signature(name, c.d_dom));
    (void)is_ood;  // ordering (ID block first) is implied by n_domains_id
  }
  if (static_cast<int>(w.domains.size()) != c.n_domains_id + c.n_domains_ood)
    throw IoError("world: domain count mismatch in " + path);
  w.layout = make_layout(c);
  w.payload_layout = make_payload_layout(c);

  auto fix_domain_indices = [&](std::vector<Task>& ts) {
    for (Task& t : ts) {
      auto it = std::find(w.domains.begin(), w.domains.end(), t.domain);
      if (it == w.domains.end()) throw IoError("world: task references unknown domain " + t.domain);
      t.domain_index = static_cast<int>(it - w.domains.begin());
    }
  };
  fix_domain_indices(w.train_id);
  fix_domain_indices(w.val_id);
  fix_domain_indices(w.val_ood);
  w.rebuild_task_index();

  if (bank_file.empty()) throw IoError("world: missing bank_file record");
  std::filesystem::path bank_path = std::filesystem::path(path).parent_path() / bank_file;
  std::string bank_bytes = read_file(bank_path.string());
  if (hash_hex(bank_bytes) != bank_hash)
    throw IoError("world: bank hash mismatch for " + bank_path.string());
  std::istringstream bs(bank_bytes);
  w.bank = load_bank(bs);
  return w;
}

}  // namespace skillworld
