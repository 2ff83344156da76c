#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dualdiff/schedule.hpp"

using namespace dualdiff;

namespace {

// Extended-precision product over the exact beta formula, independent of the
// incremental double accumulation inside NoiseSchedule.
long double alpha_bar_oracle_linear(int T, long double b0, long double b1, int upto) {
  long double prod = 1.0L;
  for (int t = 1; t <= upto; ++t) {
    const long double w = static_cast<long double>(t - 1) / (T - 1);
    prod *= 1.0L - ((1.0L - w) * b0 + w * b1);
  }
  return prod;
}

long double cosine_f(long double u, long double T, long double s) {
  const long double c = std::cos((u / T + s) / (1.0L + s) * std::numbers::pi_v<long double> / 2.0L);
  return c * c;
}

}  // namespace

TEST_SUITE_BEGIN("schedule");

TEST_CASE("linear schedule endpoints and derived values") {
  const NoiseSchedule s = make_linear(1000, 1e-4, 2e-2);
  CHECK(s.beta(1) == 1e-4);
  CHECK(s.beta(1000) == 2e-2);
  CHECK(s.alpha_bar(1) == doctest::Approx(0.9999).epsilon(1e-12));
  CHECK(s.alpha_bar_before(1) == 1.0);

  const long double oracle = alpha_bar_oracle_linear(1000, 1e-4L, 2e-2L, 1000);
  CHECK(std::abs(s.alpha_bar(1000) - static_cast<double>(oracle)) <=
        1e-10 * static_cast<double>(oracle));
  // ballpark stays meaningful: the terminal retention is ~4e-5
  CHECK(s.alpha_bar(1000) > 1e-5);
  CHECK(s.alpha_bar(1000) < 1e-4);
}

TEST_CASE("linear schedule rejects bad endpoints") {
  CHECK_THROWS(make_linear(1, 1e-4, 2e-2));
  CHECK_THROWS(make_linear(1000, 0.0, 2e-2));
  CHECK_THROWS(make_linear(1000, 2e-2, 1e-4));
  CHECK_THROWS(make_linear(1000, 1e-4, 1.0));
  CHECK_THROWS(make_linear(1000, std::nan(""), 2e-2));
}

TEST_CASE("schedule invariants hold for linear and cosine") {
  for (const NoiseSchedule& s : {make_linear(1000, 1e-4, 2e-2), make_cosine(1000, 0.008),
                                 make_linear(100, 1e-3, 0.2)}) {
    double prod = 1.0;
    double prev = 1.0;
    for (int t = 1; t <= s.T; ++t) {
      CHECK(s.beta(t) > 0.0);
      CHECK(s.beta(t) < 1.0);
      CHECK(s.alpha_bar(t) < prev);
      CHECK(s.beta_tilde(t) <= s.beta(t));
      CHECK(std::abs(s.alpha(t) * s.alpha_bar_before(t) - s.alpha_bar(t)) <=
            1e-12 * s.alpha_bar(t));
      prev = s.alpha_bar(t);
      prod *= s.alpha(t);
    }
    CHECK(std::abs(prod - s.alpha_bar(s.T)) <= 1e-10 * s.alpha_bar(s.T));
    CHECK(s.beta_tilde(1) == 0.0);
  }
}

TEST_CASE("cosine schedule matches its closed form and clips the last beta") {
  const NoiseSchedule s = make_cosine(1000, 0.008);
  CHECK(s.alpha_bar_before(1) == 1.0);

  // away from the clipped tail the product reproduces f(t)/f(0)
  for (int t : {1, 10, 250, 500, 900}) {
    const double expect =
        static_cast<double>(cosine_f(t, 1000.0L, 0.008L) / cosine_f(0.0L, 1000.0L, 0.008L));
    CHECK(s.alpha_bar(t) == doctest::Approx(expect).epsilon(1e-9));
  }

  // the unclipped final ratio exceeds the clip threshold, so beta_T = 0.999
  const long double raw = 1.0L - cosine_f(1000.0L, 1000.0L, 0.008L) / cosine_f(999.0L, 1000.0L, 0.008L);
  CHECK(static_cast<double>(raw) > 0.999);
  CHECK(s.beta(1000) == 0.999);

  CHECK_THROWS(make_cosine(1000, 0.0));
  CHECK_THROWS(make_cosine(1000, -0.1));
}

TEST_CASE("respace selects the documented indices") {
  const NoiseSchedule s = make_linear(1000, 1e-4, 2e-2);

  SUBCASE("identity respacing is exact") {
    const NoiseSchedule r = respace(s, 1000);
    CHECK(r.T == 1000);
    CHECK(r.betas == s.betas);
    CHECK(r.alpha_bars == s.alpha_bars);
    REQUIRE(r.source_indices.size() == 1000);
    CHECK(r.source_indices.front() == 1);
    CHECK(r.source_indices.back() == 1000);
  }

  SUBCASE("K = 10 keeps the original alpha_bar at the selected indices") {
    const NoiseSchedule r = respace(s, 10);
    REQUIRE(r.T == 10);
    for (int j = 1; j <= 10; ++j) {
      const int orig = static_cast<int>(std::llround(j * 1000.0 / 10.0));
      CHECK(r.source_timestep(j) == orig);
      CHECK(r.alpha_bar(j) == s.alpha_bar(orig));
    }
    CHECK(r.source_timestep(10) == 1000);  // the final step is always kept
  }

  SUBCASE("K = 1 keeps only the last step") {
    const NoiseSchedule r = respace(s, 1);
    REQUIRE(r.T == 1);
    CHECK(r.alpha_bar(1) == s.alpha_bar(1000));
    CHECK(r.alpha_bar_before(1) == 1.0);
    CHECK(r.source_timestep(1) == 1000);
  }

  SUBCASE("respacing composes") {
    const NoiseSchedule once = respace(s, 17);
    const NoiseSchedule twice = respace(once, 17);
    CHECK(once.betas == twice.betas);
    CHECK(once.alpha_bars == twice.alpha_bars);
    CHECK(once.source_indices == twice.source_indices);
  }

  CHECK_THROWS(respace(s, 0));
  CHECK_THROWS(respace(s, 1001));
}

TEST_CASE("stability guard warnings") {
  const NoiseSchedule lin = make_linear(1000, 1e-4, 2e-2);
  CHECK(guard_stability(lin, 1e-8).empty());

  const NoiseSchedule tight = respace(make_cosine(1000, 0.008), 5);
  const auto warnings = guard_stability(tight, 1e-3);
  CHECK(!warnings.empty());
  // the warning concerns the deepest timestep of the 5-step schedule
  CHECK(warnings.back().find("t=5") != std::string::npos);

  CHECK_THROWS(guard_stability(lin, 0.0));
  CHECK_THROWS(guard_stability(lin, -1.0));
}

TEST_CASE("json round trip reconstructs schedules exactly") {
  for (const NoiseSchedule& s :
       {make_linear(1000, 1e-4, 2e-2), make_cosine(200, 0.008), respace(make_linear(100, 1e-3, 0.2), 7)}) {
    const NoiseSchedule back = NoiseSchedule::from_json(s.to_json());
    CHECK(back.T == s.T);
    CHECK(back.betas == s.betas);
    CHECK(back.alpha_bars == s.alpha_bars);
  }

  nlohmann::json j = make_linear(10, 1e-3, 1e-2).to_json();
  j["betas"][3] = 0.5;  // corrupted file
  CHECK_THROWS(NoiseSchedule::from_json(j));
}

TEST_CASE("timestep accessors reject out-of-range t") {
  const NoiseSchedule s = make_linear(10, 1e-3, 1e-2);
  CHECK_THROWS(s.beta(0));
  CHECK_THROWS(s.beta(11));
  CHECK_THROWS(s.alpha_bar(-1));
}

TEST_SUITE_END();
