#include <catch2/catch_amalgamated.hpp>

#include <deque>
#include <vector>

#include <skillworld/rng.hpp>
#include <skillworld/router.hpp>

#include "support/oracles.hpp"

using namespace skillworld;

TEST_CASE("tier boundaries are exact") {
  // p == 0 is hard even when eta is 0; p == eta lands on medium inclusively
  REQUIRE(route(0.0, 0.0) == Tier::Hard);
  REQUIRE(route(0.0, 0.7) == Tier::Hard);
  REQUIRE(route(0.5, 0.5) == Tier::Medium);
  REQUIRE(route(0.25, 0.25) == Tier::Medium);
  REQUIRE(route(0.2, 0.5) == Tier::Medium);
  REQUIRE(route(0.500001, 0.5) == Tier::Easy);
  REQUIRE(route(1.0, 0.99) == Tier::Easy);
  REQUIRE(route(1.0, 1.0) == Tier::Medium);
  // anything above eta is easy even with an empty-history threshold of 0
  REQUIRE(route(1e-12, 0.0) == Tier::Easy);

  REQUIRE_THROWS_AS(route(-0.1, 0.5), InvalidDistribution);
  REQUIRE_THROWS_AS(route(1.1, 0.5), InvalidDistribution);

  REQUIRE(std::string(tier_name(Tier::Hard)) == "hard");
  REQUIRE(std::string(tier_name(Tier::Medium)) == "medium");
  REQUIRE(std::string(tier_name(Tier::Easy)) == "easy");
}

TEST_CASE("threshold is the push-then-average sliding window") {
  RouterState r(3);
  REQUIRE(r.push_pass_and_threshold(0.2) == Catch::Approx(0.2).margin(1e-15));
  REQUIRE(r.push_pass_and_threshold(0.4) == Catch::Approx(0.3).margin(1e-15));
  REQUIRE(r.push_pass_and_threshold(0.6) == Catch::Approx(0.4).margin(1e-15));
  // window full: the oldest value (0.2) falls out
  REQUIRE(r.push_pass_and_threshold(0.8) == Catch::Approx(0.6).margin(1e-15));
  REQUIRE(r.pass_buffer().size() == 3);
  REQUIRE(r.pass_buffer().front() == 0.4);
  REQUIRE(r.pass_buffer().back() == 0.8);

  REQUIRE_THROWS_AS(r.push_pass_and_threshold(-0.01), InvalidDistribution);
  REQUIRE_THROWS_AS(r.push_pass_and_threshold(1.01), InvalidDistribution);
  REQUIRE_THROWS_AS(RouterState(0), ConfigError);
}

TEST_CASE("utilization anchor averages the gain window and defaults to zero") {
  RouterState r(2);
  REQUIRE(r.utilization_anchor() == 0.0);  // before any easy batch
  r.push_gain(0.5);
  REQUIRE(r.utilization_anchor() == Catch::Approx(0.5).margin(1e-15));
  r.push_gain(-0.1);
  REQUIRE(r.utilization_anchor() == Catch::Approx(0.2).margin(1e-15));
  r.push_gain(0.3);  // evicts 0.5
  REQUIRE(r.utilization_anchor() == Catch::Approx(0.1).margin(1e-15));

  REQUIRE_THROWS_AS(r.push_gain(1.5), InvalidDistribution);
  REQUIRE_THROWS_AS(r.push_gain(-1.5), InvalidDistribution);
}

TEST_CASE("restore validates buffer lengths and reproduces the threshold stream") {
  RouterState a(4);
  std::vector<double> history{0.1, 0.0, 0.9, 0.4, 0.4, 1.0};
  for (double h : history) a.push_pass_and_threshold(h);

  RouterState b(4);
  b.restore(a.pass_buffer(), a.gain_buffer());
  REQUIRE(b.push_pass_and_threshold(0.5) == a.push_pass_and_threshold(0.5));
  REQUIRE(b.pass_buffer() == a.pass_buffer());

  RouterState tiny(2);
  REQUIRE_THROWS_AS(tiny.restore(std::deque<double>{0.1, 0.2, 0.3}, {}), ConfigError);
  REQUIRE_THROWS_AS(tiny.restore({}, std::deque<double>{0.1, 0.2, 0.3}), ConfigError);
}

TEST_CASE("incremental thresholds and tiers agree with from-scratch recomputation") {
  RngStream rs = RngStream::derive(99, "router-prop");
  for (int trial = 0; trial < 200; ++trial) {
    int window = 1 + rs.uniform_index(8);
    int len = 1 + rs.uniform_index(40);
    RouterState inc(window);
    std::vector<double> history;
    for (int t = 0; t < len; ++t) {
      double p;
      int kind = rs.uniform_index(4);
      if (kind == 0) p = 0.0;                       // force the hard boundary
      else if (kind == 1) p = 1.0;
      else p = rs.uniform_index(17) / 16.0;         // grid values so p == eta can occur
      history.push_back(p);
      double eta = inc.push_pass_and_threshold(p);
      double expect = oracle::brute_force_eta(history, window, t);
      REQUIRE(eta == Catch::Approx(expect).margin(1e-12));

      // route a probe pass rate, including the exact boundary cases
      for (double probe : {0.0, eta, std::min(1.0, eta + 1e-9), 1.0}) {
        Tier got = route(probe, eta);
        Tier want = probe == 0.0 ? Tier::Hard : (probe <= eta ? Tier::Medium : Tier::Easy);
        REQUIRE(got == want);
      }
    }
  }
}
