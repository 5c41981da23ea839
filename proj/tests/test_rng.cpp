#include <catch2/catch_amalgamated.hpp>

#include <set>

#include <skillworld/rng.hpp>

using namespace skillworld;

TEST_CASE("derived streams are deterministic and tag-sensitive") {
  RngStream a = RngStream::derive(7, "phase1", 3, "task-001");
  RngStream b = RngStream::derive(7, "phase1", 3, "task-001");
  for (int i = 0; i < 64; ++i) REQUIRE(a.next_u64() == b.next_u64());

  RngStream c = RngStream::derive(7, "phase1", 3, "task-002");
  RngStream d = RngStream::derive(8, "phase1", 3, "task-001");
  RngStream e = RngStream::derive(7, "phase2", 3, "task-001");
  std::set<std::uint64_t> firsts{RngStream::derive(7, "phase1", 3, "task-001").next_u64(),
                                 c.next_u64(), d.next_u64(), e.next_u64()};
  REQUIRE(firsts.size() == 4);
}

TEST_CASE("tag order matters") {
  REQUIRE(RngStream::derive(1, "a", "b").next_u64() != RngStream::derive(1, "b", "a").next_u64());
  REQUIRE(RngStream::derive(1, 2, 3).next_u64() != RngStream::derive(1, 3, 2).next_u64());
}

TEST_CASE("uniform01 stays in the half-open unit interval") {
  RngStream rs = RngStream::derive(11, "u01");
  for (int i = 0; i < 10000; ++i) {
    double u = rs.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("uniform_int is bounded and roughly uniform") {
  RngStream rs = RngStream::derive(13, "uint");
  const int n = 7;
  std::vector<int> counts(n, 0);
  const int draws = 70000;
  for (int i = 0; i < draws; ++i) {
    int v = rs.uniform_index(n);
    REQUIRE(v >= 0);
    REQUIRE(v < n);
    counts[static_cast<std::size_t>(v)] += 1;
  }
  // each bin expects 10000; allow 5 sigma (sigma ~ 92.6)
  for (int c : counts) REQUIRE(std::abs(c - draws / n) < 500);
  REQUIRE_THROWS_AS(rs.uniform_int(0), InvalidDistribution);
}

TEST_CASE("uniform respects its bounds") {
  RngStream rs = RngStream::derive(17, "range");
  for (int i = 0; i < 1000; ++i) {
    double v = rs.uniform(-2.5, 3.5);
    REQUIRE(v >= -2.5);
    REQUIRE(v < 3.5);
  }
}

TEST_CASE("hash64 output is frozen") {
  // These values are the stream-compatibility contract: stored worlds and
  // manifests depend on them, so any change to the basis or prime must fail
  // here before it silently regenerates every artifact.
  REQUIRE(hash64("") == kHashBasis);
  REQUIRE(hash64("") == 1469598103934665603ull);
  REQUIRE(hash64("a") == 4953267810257967366ull);
  REQUIRE(hash64("ab") == 11217423238573040876ull);
  REQUIRE(hash64_u64(0) == 5187598658539770339ull);
  REQUIRE(hash64_u64(1) == 2955283251572180930ull);
}

TEST_CASE("hash64 is sensitive to every input position") {
  REQUIRE(hash64("a") != hash64("b"));
  REQUIRE(hash64("ab") != hash64("ba"));
  REQUIRE(hash64("ab") != hash64(std::string_view("ab\0", 3)));
  // chaining two pieces must differ from hashing the concatenation's parts
  // in the other order
  REQUIRE(hash64("y", hash64("x")) != hash64("x", hash64("y")));
  // all 8 bytes of a u64 participate
  for (int byte = 0; byte < 8; ++byte) {
    REQUIRE(hash64_u64(1ull << (8 * byte)) != hash64_u64(0));
  }
}
