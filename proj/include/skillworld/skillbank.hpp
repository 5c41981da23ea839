#pragma once

// Skill bank: immutable library of general (domain-agnostic) and specific
// (domain-bound) skills. Payloads are fixed-width numeric blocks that the
// environment splices into observations; retrieval ranks a pool by cosine
// similarity between hashed key embeddings.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "skillworld/embedding.hpp"
#include "skillworld/errors.hpp"

namespace skillworld {

enum class SkillKind { General, Specific };

struct Skill {
  std::string id;
  SkillKind kind = SkillKind::Specific;
  std::string domain;  // empty for general skills
  std::vector<std::string> keys;
  std::vector<double> payload;
  Embedding embedding;  // cached embed(keys) set at construction
};

enum class Pool { ID, OOD };

struct SkillBank {
  int d_skill = 0;
  int k_default = 3;
  std::vector<Skill> general;
  std::vector<Skill> specific_id;
  std::vector<Skill> specific_ood;

  const std::vector<Skill>& pool(Pool p) const { return p == Pool::ID ? specific_id : specific_ood; }
};

inline Skill make_skill(std::string id, SkillKind kind, std::string domain,
                        std::vector<std::string> keys, std::vector<double> payload, int d_emb) {
  Skill s;
  s.id = std::move(id);
  s.kind = kind;
  s.domain = std::move(domain);
  s.keys = std::move(keys);
  s.payload = std::move(payload);
  s.embedding = embed(s.keys, d_emb);
  return s;
}

inline void validate(const SkillBank& bank) {
  std::set<std::string> ids;
  auto check = [&](const Skill& s, SkillKind kind, const char* where) {
    if (s.id.empty()) throw ConfigError(std::string("skillbank: empty skill id in ") + where);
    if (!ids.insert(s.id).second) throw ConfigError("skillbank: duplicate skill id " + s.id);
    if (s.kind != kind) throw ConfigError("skillbank: skill " + s.id + " in wrong pool");
    if (s.kind == SkillKind::General && !s.domain.empty())
      throw ConfigError("skillbank: general skill " + s.id + " has a domain");
    if (s.kind == SkillKind::Specific && s.domain.empty())
      throw UnassignedDomain("skillbank: specific skill " + s.id + " has no domain");
    if (s.keys.empty()) throw InvalidKey("skillbank: skill " + s.id + " has no key tokens");
    if (static_cast<int>(s.payload.size()) != bank.d_skill)
      throw ShapeError("skillbank: skill " + s.id + " payload size mismatch");
  };
  for (const Skill& s : bank.general) check(s, SkillKind::General, "general");
  for (const Skill& s : bank.specific_id) check(s, SkillKind::Specific, "specific_id");
  for (const Skill& s : bank.specific_ood) check(s, SkillKind::Specific, "specific_ood");
  if (bank.k_default <= 0) throw ConfigError("skillbank: k_default must be positive");
}

// Top-K skills of one pool by descending cosine to the query; ties broken by
// ascending skill id. Never crosses pools. Returns min(K, pool size) hits.
inline std::vector<const Skill*> retrieve_topk(const SkillBank& bank, Pool pool,
                                               const Embedding& query, int k) {
  if (k <= 0) throw ConfigError("retrieve_topk: K must be positive");
  const std::vector<Skill>& cands = bank.pool(pool);
  if (cands.empty()) throw EmptyPool("retrieve_topk: pool is empty");
  std::vector<std::pair<double, const Skill*>> scored;
  scored.reserve(cands.size());
  for (const Skill& s : cands) scored.emplace_back(cosine(query, s.embedding), &s);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->id < b.second->id;
  });
  std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(k), scored.size());
  std::vector<const Skill*> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(scored[i].second);
  return out;
}

// Reassigns every specific skill to the ID or OOD pool by its domain.
// General skills are shared. Domain sets must be disjoint and jointly cover
// every specific skill's domain.
inline SkillBank partition(const SkillBank& bank, const std::set<std::string>& id_domains,
                           const std::set<std::string>& ood_domains) {
  for (const std::string& d : id_domains)
    if (ood_domains.count(d)) throw ConfigError("partition: domain " + d + " in both splits");
  SkillBank out;
  out.d_skill = bank.d_skill;
  out.k_default = bank.k_default;
  out.general = bank.general;
  auto place = [&](const Skill& s) {
    if (id_domains.count(s.domain)) {
      out.specific_id.push_back(s);
    } else if (ood_domains.count(s.domain)) {
      out.specific_ood.push_back(s);
    } else {
      throw UnassignedDomain("partition: domain " + s.domain + " not assigned to a split");
    }
  };
  for (const Skill& s : bank.specific_id) place(s);
  for (const Skill& s : bank.specific_ood) place(s);
  validate(out);
  return out;
}

// --- serialization (skillbank-v1) ---------------------------------------
//
// Line-oriented key/value records; payload floats printed with %.17g so a
// save/load cycle is bit-exact.

namespace detail {

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline const char* kind_name(SkillKind k) { return k == SkillKind::General ? "general" : "specific"; }

inline void write_skill(std::ostream& os, const Skill& s, const char* pool_name) {
  os << "skill " << s.id << "\n";
  os << "pool " << pool_name << "\n";
  os << "kind " << kind_name(s.kind) << "\n";
  os << "domain " << (s.domain.empty() ? "-" : s.domain) << "\n";
  os << "keys";
  for (const std::string& t : s.keys) {
    if (t.find_first_of(" \t\n") != std::string::npos)
      throw IoError("skillbank: key token contains whitespace: " + t);
    os << ' ' << t;
  }
  os << "\n";
  os << "payload";
  for (double v : s.payload) os << ' ' << fmt17(v);
  os << "\n";
}

}  // namespace detail

inline void save_bank(std::ostream& os, const SkillBank& bank) {
  os << "skillbank-v1\n";
  os << "d_skill " << bank.d_skill << "\n";
  os << "k_default " << bank.k_default << "\n";
  os << "d_emb " << (bank.general.empty()
                         ? (bank.specific_id.empty()
                                ? (bank.specific_ood.empty() ? 0
                                                             : static_cast<int>(bank.specific_ood[0].embedding.v.size()))
                                : static_cast<int>(bank.specific_id[0].embedding.v.size()))
                         : static_cast<int>(bank.general[0].embedding.v.size()))
     << "\n";
  for (const Skill& s : bank.general) detail::write_skill(os, s, "general");
  for (const Skill& s : bank.specific_id) detail::write_skill(os, s, "id");
  for (const Skill& s : bank.specific_ood) detail::write_skill(os, s, "ood");
  os << "end\n";
}

inline void save_bank(const std::string& path, const SkillBank& bank) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("skillbank: cannot open " + path + " for writing");
  save_bank(os, bank);
  if (!os) throw IoError("skillbank: write failed for " + path);
}

inline SkillBank load_bank(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "skillbank-v1")
    throw IoError("skillbank: bad or missing format header");
  SkillBank bank;
  int d_emb = 0;
  std::string cur_pool;
  Skill cur;
  bool in_skill = false;
  auto flush = [&]() {
    if (!in_skill) return;
    cur.embedding = embed(cur.keys, d_emb);
    if (cur_pool == "general") {
      bank.general.push_back(cur);
    } else if (cur_pool == "id") {
      bank.specific_id.push_back(cur);
    } else if (cur_pool == "ood") {
      bank.specific_ood.push_back(cur);
    } else {
      throw IoError("skillbank: unknown pool " + cur_pool);
    }
    cur = Skill{};
    in_skill = false;
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "end") {
      flush();
      validate(bank);
      return bank;
    } else if (tag == "d_skill") {
      ls >> bank.d_skill;
    } else if (tag == "k_default") {
      ls >> bank.k_default;
    } else if (tag == "d_emb") {
      ls >> d_emb;
    } else if (tag == "skill") {
      flush();
      in_skill = true;
      ls >> cur.id;
    } else if (tag == "pool") {
      ls >> cur_pool;
    } else if (tag == "kind") {
      std::string k;
      ls >> k;
      cur.kind = (k == "general") ? SkillKind::General : SkillKind::Specific;
    } else if (tag == "domain") {
      std::string d;
      ls >> d;
      cur.domain = (d == "-") ? std::string() : d;
    } else if (tag == "keys") {
      std::string t;
      while (ls >> t) cur.keys.push_back(t);
    } else if (tag == "payload") {
      double v;
      while (ls >> v) cur.payload.push_back(v);
    } else {
      throw IoError("skillbank: unknown record tag " + tag);
    }
  }
  throw IoError("skillbank: truncated file (missing end)");
}

inline SkillBank load_bank(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("skillbank: cannot open " + path);
  return load_bank(is);
}

}  // namespace skillworld
