#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include <skillworld/config.hpp>

using namespace skillworld;

TEST_CASE("an empty config object resolves to pure defaults") {
  RunConfig rc = config_from_json_text("{}");
  EnvConfig env_default;
  TrainConfig train_default;
  REQUIRE(rc.env.seed == env_default.seed);
  REQUIRE(rc.env.n_patterns == env_default.n_patterns);
  REQUIRE(rc.env.horizon == env_default.horizon);
  REQUIRE(rc.train.steps == train_default.steps);
  REQUIRE(rc.train.batch_size == train_default.batch_size);
  REQUIRE(rc.train.method == Method::Full);
  REQUIRE(rc.train.init == InitMode::SkillPrior);
  REQUIRE(rc.run.out_dir == "run");
  REQUIRE(rc.run.world.empty());
}

TEST_CASE("partial configs keep defaults for everything unspecified") {
  RunConfig rc = config_from_json_text(R"({
    "env": {"seed": 11, "horizon": 9},
    "train": {"steps": 3, "method": "grpo_no_skill", "clip_epsilon": 0.3},
    "run": {"out_dir": "elsewhere"}
  })");
  REQUIRE(rc.env.seed == 11);
  REQUIRE(rc.env.horizon == 9);
  REQUIRE(rc.env.n_patterns == EnvConfig{}.n_patterns);
  REQUIRE(rc.train.steps == 3);
  REQUIRE(rc.train.method == Method::GrpoNoSkill);
  REQUIRE(rc.train.clip.epsilon == 0.3);
  REQUIRE(rc.train.group_size == TrainConfig{}.group_size);
  REQUIRE(rc.run.out_dir == "elsewhere");
}

TEST_CASE("unknown keys are rejected by name") {
  try {
    config_from_json_text(R"({"train": {"stepz": 3}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    REQUIRE(msg.find("stepz") != std::string::npos);
    REQUIRE(msg.find("train") != std::string::npos);
  }
  REQUIRE_THROWS_AS(config_from_json_text(R"({"environment": {}})"), ConfigError);
  REQUIRE_THROWS_AS(config_from_json_text(R"({"run": {"outdir": "x"}})"), ConfigError);
}

TEST_CASE("bad value types and malformed json fail as config errors") {
  REQUIRE_THROWS_AS(config_from_json_text(R"({"train": {"steps": "many"}})"), ConfigError);
  REQUIRE_THROWS_AS(config_from_json_text(R"({"env": {"seed": []}})"), ConfigError);
  REQUIRE_THROWS_AS(config_from_json_text("not json at all"), ConfigError);
  REQUIRE_THROWS_AS(config_from_json_text("[1,2,3]"), ConfigError);
  REQUIRE_THROWS_AS(config_from_json_text(R"({"train": {"method": "mystery"}})"), ConfigError);
  REQUIRE_THROWS_AS(config_from_json_text(R"({"train": {"init": "psychic"}})"), ConfigError);
}

TEST_CASE("invalid field values are caught by validation") {
  REQUIRE_THROWS_AS(config_from_json_text(R"({"env": {"horizon": 1}})"), ConfigError);
  REQUIRE_THROWS_AS(config_from_json_text(R"({"train": {"group_size": 1}})"), ConfigError);
  REQUIRE_THROWS_AS(config_from_json_text(R"({"train": {"clip_epsilon": 1.5}})"), ConfigError);
}

TEST_CASE("resolved config round-trips exactly") {
  RunConfig rc = config_from_json_text(R"({
    "env": {"seed": 77, "n_patterns": 3},
    "train": {"method": "internalize_only", "learning_rate": 0.005, "init": "random"},
    "run": {"world": "some/world.snapshot"}
  })");
  std::string dumped = resolved_config_json(rc);
  RunConfig again = config_from_json_text(dumped);
  REQUIRE(resolved_config_json(again) == dumped);
  REQUIRE(again.env.seed == 77);
  REQUIRE(again.train.method == Method::InternalizeOnly);
  REQUIRE(again.train.init == InitMode::Random);
  REQUIRE(again.train.learning_rate == 0.005);
  REQUIRE(again.run.world == "some/world.snapshot");

  // the resolved dump names every tunable explicitly
  for (const char* key : {"n_patterns", "horizon", "learning_rate", "weight_decay",
                          "clip_epsilon", "method", "init", "gate_gain", "out_dir"})
    REQUIRE(dumped.find(key) != std::string::npos);
}

TEST_CASE("config files load from disk") {
  std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "skillworld_config_test";
  std::filesystem::create_directories(dir);
  std::filesystem::path path = dir / "config.json";
  {
    std::ofstream os(path);
    os << R"({"train": {"steps": 2}})";
  }
  RunConfig rc = load_config(path.string());
  REQUIRE(rc.train.steps == 2);
  REQUIRE_THROWS_AS(load_config((dir / "missing.json").string()), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("manifests expose seeds, fingerprint, outputs, and the full config") {
  RunManifest m;
  m.config = config_from_json_text(R"({"env": {"seed": 5}, "train": {"seed": 9}})");
  m.world_fingerprint = "deadbeef00000000";
  m.started_utc = "2026-01-01T00:00:00Z";
  m.finished_utc = "2026-01-01T00:05:00Z";
  m.metrics_csv = "out/metrics.csv";
  m.router_csv = "out/router.csv";
  m.checkpoint = "out/policy.ckpt";
  m.resume_file = "out/resume.state";
  m.world_file = "out/world.snapshot";

  Json j = m.to_json();
  REQUIRE(j["code_version"] == kCodeVersion);
  REQUIRE(j["seeds"]["env"] == 5);
  REQUIRE(j["seeds"]["train"] == 9);
  REQUIRE(j["world_fingerprint"] == "deadbeef00000000");
  REQUIRE(j["outputs"]["metrics_csv"] == "out/metrics.csv");
  REQUIRE(j["config"]["train"]["seed"] == 9);

  std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "skillworld_manifest_test";
  std::filesystem::create_directories(dir);
  std::filesystem::path path = dir / "manifest.json";
  save_manifest(path.string(), m);
  Json back = Json::parse(read_file(path.string()));
  REQUIRE(back == j);
  std::filesystem::remove_all(dir);
}

TEST_CASE("timestamps are iso-8601 utc") {
  std::string ts = utc_timestamp();
  REQUIRE(ts.size() == 20);
  REQUIRE(ts[4] == '-');
  REQUIRE(ts[10] == 'T');
  REQUIRE(ts.back() == 'Z');
}
