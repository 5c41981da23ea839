#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include <skillworld/skillbank.hpp>

using namespace skillworld;

static SkillBank tiny_bank() {
  SkillBank bank;
  bank.d_skill = 4;
  bank.k_default = 2;
  bank.general.push_back(
      make_skill("gen-pos0", SkillKind::General, "", {"skill:general", "pos:0"}, {1, 0, 0, 0}, 16));
  bank.specific_id.push_back(
      make_skill("spec-a-p0", SkillKind::Specific, "a", {"dom:a", "pat:0"}, {0, 1, 0, 0}, 16));
  bank.specific_id.push_back(
      make_skill("spec-a-p1", SkillKind::Specific, "a", {"dom:a", "pat:1"}, {0, 1, 1, 0}, 16));
  bank.specific_ood.push_back(
      make_skill("spec-z-p0", SkillKind::Specific, "z", {"dom:z", "pat:0"}, {0, 0, 0, 1}, 16));
  return bank;
}

TEST_CASE("validate accepts a well-formed bank and rejects malformed ones") {
  SkillBank bank = tiny_bank();
  REQUIRE_NOTHROW(validate(bank));

  SkillBank dup = tiny_bank();
  dup.specific_id.push_back(dup.specific_id[0]);
  REQUIRE_THROWS_AS(validate(dup), ConfigError);

  SkillBank wrong_pool = tiny_bank();
  wrong_pool.general.push_back(
      make_skill("spec-misplaced", SkillKind::Specific, "a", {"dom:a"}, {0, 0, 0, 0}, 16));
  REQUIRE_THROWS_AS(validate(wrong_pool), ConfigError);

  SkillBank no_domain = tiny_bank();
  no_domain.specific_id.push_back(
      make_skill("spec-nodom", SkillKind::Specific, "", {"dom:a"}, {0, 0, 0, 0}, 16));
  REQUIRE_THROWS_AS(validate(no_domain), UnassignedDomain);

  SkillBank bad_payload = tiny_bank();
  bad_payload.specific_id.push_back(
      make_skill("spec-short", SkillKind::Specific, "a", {"dom:a", "pat:9"}, {0, 0}, 16));
  REQUIRE_THROWS_AS(validate(bad_payload), ShapeError);
}

TEST_CASE("retrieval ranks by cosine, breaks ties by id, and never crosses pools") {
  SkillBank bank = tiny_bank();
  Embedding q = embed(std::vector<std::string>{"dom:a", "pat:1"}, 16);

  std::vector<const Skill*> hits = retrieve_topk(bank, Pool::ID, q, 2);
  REQUIRE(hits.size() == 2);
  REQUIRE(hits[0]->id == "spec-a-p1");  // exact key match first
  for (const Skill* s : hits) REQUIRE(s->domain != "z");

  // OOD pool query returns only the OOD skill even though ID skills are nearer
  std::vector<const Skill*> ood_hits = retrieve_topk(bank, Pool::OOD, q, 2);
  REQUIRE(ood_hits.size() == 1);  // min(K, pool size)
  REQUIRE(ood_hits[0]->id == "spec-z-p0");

  SkillBank empty = tiny_bank();
  empty.specific_ood.clear();
  REQUIRE_THROWS_AS(retrieve_topk(empty, Pool::OOD, q, 1), EmptyPool);
  REQUIRE_THROWS_AS(retrieve_topk(bank, Pool::ID, q, 0), ConfigError);
}

TEST_CASE("equal-cosine candidates come back in id order") {
  SkillBank bank;
  bank.d_skill = 1;
  bank.k_default = 3;
  // identical keys -> identical embeddings -> pure id tie-break
  bank.specific_id.push_back(make_skill("s-b", SkillKind::Specific, "d", {"same"}, {0}, 16));
  bank.specific_id.push_back(make_skill("s-a", SkillKind::Specific, "d", {"same"}, {0}, 16));
  bank.specific_id.push_back(make_skill("s-c", SkillKind::Specific, "d", {"same"}, {0}, 16));
  Embedding q = embed(std::vector<std::string>{"same"}, 16);
  std::vector<const Skill*> hits = retrieve_topk(bank, Pool::ID, q, 3);
  REQUIRE(hits[0]->id == "s-a");
  REQUIRE(hits[1]->id == "s-b");
  REQUIRE(hits[2]->id == "s-c");
}

TEST_CASE("partition reassigns pools by domain") {
  SkillBank bank = tiny_bank();
  SkillBank swapped = partition(bank, {"z"}, {"a"});
  REQUIRE(swapped.specific_id.size() == 1);
  REQUIRE(swapped.specific_ood.size() == 2);
  REQUIRE(swapped.general.size() == 1);
  REQUIRE(swapped.specific_id[0].domain == "z");

  REQUIRE_THROWS_AS(partition(bank, {"a", "z"}, {"z"}), ConfigError);
  REQUIRE_THROWS_AS(partition(bank, {"a"}, {}), UnassignedDomain);
}

TEST_CASE("bank serialization round-trips bit-exactly") {
  SkillBank bank = tiny_bank();
  bank.specific_id[0].payload = {0.1, -2.5e-17, 1.0 / 3.0, 7e300};
  std::ostringstream first;
  save_bank(first, bank);
  std::istringstream in(first.str());
  SkillBank reloaded = load_bank(in);
  std::ostringstream second;
  save_bank(second, reloaded);
  REQUIRE(first.str() == second.str());
  REQUIRE(reloaded.specific_id[0].payload == bank.specific_id[0].payload);
  REQUIRE(reloaded.general[0].embedding.v == bank.general[0].embedding.v);
}

TEST_CASE("bank loader rejects malformed input") {
  std::istringstream bad_header("not-a-bank\n");
  REQUIRE_THROWS_AS(load_bank(bad_header), IoError);
  std::istringstream truncated("skillbank-v1\nd_skill 4\n");
  REQUIRE_THROWS_AS(load_bank(truncated), IoError);
}
