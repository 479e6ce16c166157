// Noise schedule construction against independently computed constants.
// The frozen values below come from a standalone brute-force script run
// before this implementation existed (linear interpolation and running
// product evaluated in plain Python floats).
#include <catch2/catch_amalgamated.hpp>

#include "mmdiff/schedule.hpp"

using namespace mmdiff;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("single-step schedule is the degenerate case", "[schedule]") {
  NoiseSchedule s = build_linear_schedule(1, 1e-4, 0.02);
  REQUIRE(s.T == 1);
  CHECK_THAT(s.beta[1], WithinAbs(1e-4, 1e-18));
  CHECK_THAT(s.alpha_bar[1], WithinAbs(0.9999, 1e-15));
  CHECK(s.alpha_bar[0] == 1.0);
}

TEST_CASE("default 1000-step schedule matches the brute-force oracle", "[schedule]") {
  NoiseSchedule s = build_linear_schedule(1000, 1e-4, 0.02);
  // beta_500 = 1e-4 + (0.02 - 1e-4) * 499/999
  CHECK_THAT(s.beta[500], WithinRel(0.01004004004004004, 1e-12));
  // Running product, frozen from the standalone script.
  CHECK_THAT(s.alpha_bar[1000], WithinRel(4.0358297653756754e-05, 1e-9));
  CHECK_THAT(s.sqrt_alpha_bar(1000), WithinRel(0.006352818087570016, 1e-9));
  // Endpoints land exactly on the configured betas.
  CHECK_THAT(s.beta[1], WithinAbs(1e-4, 1e-18));
  CHECK_THAT(s.beta[1000], WithinAbs(0.02, 1e-15));
}

TEST_CASE("schedule invariants: monotone beta, strictly decreasing alpha_bar", "[schedule]") {
  NoiseSchedule s = build_linear_schedule(1000, 1e-4, 0.02);
  for (int t = 2; t <= s.T; ++t) {
    REQUIRE(s.beta[t] >= s.beta[t - 1]);
    REQUIRE(s.alpha_bar[t] < s.alpha_bar[t - 1]);
  }
  for (int t = 1; t <= s.T; ++t) {
    REQUIRE(std::isfinite(s.beta[t]));
    REQUIRE(s.beta[t] > 0.0);
    REQUIRE(s.beta[t] < 1.0);
  }
}

TEST_CASE("schedule rejects invalid arguments", "[schedule]") {
  CHECK_THROWS_AS(build_linear_schedule(0, 1e-4, 0.02), config_error);
  CHECK_THROWS_AS(build_linear_schedule(-5, 1e-4, 0.02), config_error);
  CHECK_THROWS_AS(build_linear_schedule(10, 0.0, 0.02), config_error);
  CHECK_THROWS_AS(build_linear_schedule(10, 0.03, 0.02), config_error);
  CHECK_THROWS_AS(build_linear_schedule(10, 1e-4, 1.0), config_error);
}

TEST_CASE("posterior-variance mode stays below beta and starts at the exact ratio", "[schedule]") {
  NoiseSchedule s = build_linear_schedule(1000, 1e-4, 0.02, SigmaMode::beta_tilde);
  for (int t = 2; t <= s.T; ++t) {
    CHECK(s.sigma2[t] < s.beta[t]);
    CHECK(s.sigma2[t] > 0.0);
  }
  // t=1: (1 - abar_0) = 0, so the posterior variance collapses to zero.
  CHECK(s.sigma2[1] == 0.0);
}

TEST_CASE("strided sub-schedule reproduces alpha_bar at the retained steps", "[schedule]") {
  NoiseSchedule base = build_linear_schedule(1000, 1e-4, 0.02);
  for (int stride : {10, 20, 7}) {
    StridedSchedule st = make_strided(base, stride);
    REQUIRE(st.orig_t.front() == 0);
    REQUIRE(st.orig_t.back() == 1000);
    for (int k = 1; k <= st.sub.T; ++k) {
      // The composed product over the sub-schedule must equal the original
      // cumulative product at the retained original step.
      CHECK_THAT(st.sub.alpha_bar[k], WithinRel(base.alpha_bar[st.orig_t[k]], 1e-10));
      REQUIRE(st.orig_t[k] > st.orig_t[k - 1]);
    }
  }
}

TEST_CASE("stride one is the identity sub-schedule", "[schedule]") {
  NoiseSchedule base = build_linear_schedule(100, 1e-4, 0.02);
  StridedSchedule st = make_strided(base, 1);
  REQUIRE(st.sub.T == base.T);
  for (int t = 1; t <= base.T; ++t) {
    REQUIRE(st.sub.beta[t] == base.beta[t]);
    REQUIRE(st.sub.alpha_bar[t] == base.alpha_bar[t]);
    REQUIRE(st.orig_t[t] == t);
  }
}

TEST_CASE("strided handles non-divisible tails", "[schedule]") {
  NoiseSchedule base = build_linear_schedule(103, 1e-4, 0.02);
  StridedSchedule st = make_strided(base, 10);
  REQUIRE(st.orig_t.back() == 103);
  REQUIRE(st.orig_t[st.orig_t.size() - 2] == 100);
}
