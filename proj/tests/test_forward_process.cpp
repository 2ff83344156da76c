#include <doctest.h>

#include <cmath>

#include "dualdiff/forward_process.hpp"
#include "dualdiff/rng.hpp"

using namespace dualdiff;

namespace {

FloatMat row_of(std::initializer_list<float> vals) {
  FloatMat m(1, vals.size());
  std::copy(vals.begin(), vals.end(), m.row(0));
  return m;
}

}  // namespace

TEST_SUITE_BEGIN("forward_process");

TEST_CASE("q_sample zero-noise and zero-signal cases") {
  const NoiseSchedule s = make_linear(100, 1e-3, 0.2);
  Rng rng(5);
  FloatMat x0(1, 4), eps(1, 4), zero(1, 4);
  rng.fill_normal(x0.row(0), 4);
  rng.fill_normal(eps.row(0), 4);

  for (int t : {1, 17, 100}) {
    const Batch a = q_sample({x0, 0, ""}, t, zero, s);
    const float ca = static_cast<float>(std::sqrt(s.alpha_bar(t)));
    for (int d = 0; d < 4; ++d)
      CHECK(a.data.row(0)[d] == doctest::Approx(ca * x0.row(0)[d]).epsilon(1e-7));

    const Batch b = q_sample({zero, 0, ""}, t, eps, s);
    const float cb = static_cast<float>(std::sqrt(1.0 - s.alpha_bar(t)));
    for (int d = 0; d < 4; ++d)
      CHECK(b.data.row(0)[d] == doctest::Approx(cb * eps.row(0)[d]).epsilon(1e-7));
  }
}

TEST_CASE("q_sample at alpha_bar = 0.25") {
  // betas (0.5, 2/3) give alpha_bar_2 = 0.5 * 1/3... use (0.5, 0.5): 0.25
  const NoiseSchedule s = make_from_betas({0.5, 0.5});
  REQUIRE(s.alpha_bar(2) == doctest::Approx(0.25).epsilon(1e-15));
  const Batch out = q_sample({row_of({1.0f}), 0, ""}, 2, row_of({1.0f}), s);
  // 0.5 + sqrt(0.75)
  CHECK(out.data.row(0)[0] == doctest::Approx(1.3660254).epsilon(1e-6));
}

TEST_CASE("forward kernel single step") {
  const NoiseSchedule s = make_from_betas({0.5, 0.1});
  FloatMat zero(1, 3);
  Rng rng(6);
  FloatMat x(1, 3), e(1, 3);
  rng.fill_normal(x.row(0), 3);
  rng.fill_normal(e.row(0), 3);

  const Batch a = forward_kernel_step({x, 1, ""}, 2, zero, s);
  for (int d = 0; d < 3; ++d)
    CHECK(a.data.row(0)[d] ==
          doctest::Approx(std::sqrt(0.9) * x.row(0)[d]).epsilon(1e-6));

  const Batch b = forward_kernel_step({zero, 1, ""}, 2, e, s);
  for (int d = 0; d < 3; ++d)
    CHECK(b.data.row(0)[d] ==
          doctest::Approx(std::sqrt(0.1) * e.row(0)[d]).epsilon(1e-6));

  FloatMat bad(1, 2);
  CHECK_THROWS(forward_kernel_step({x, 1, ""}, 2, bad, s));
}

TEST_CASE("iterated kernel matches the closed-form marginal (Monte Carlo)") {
  // Unit-test-sized version of the marginal consistency check; the
  // acceptance suite repeats it at 100k chains on the 1000-step schedule.
  const NoiseSchedule s = make_linear(100, 1e-3, 0.2);
  const std::size_t n = 20000;
  const float x0 = 1.0f;

  FloatMat x(n, 1), eps(n, 1);
  for (std::size_t i = 0; i < n; ++i) x.row(i)[0] = x0;
  Rng rng(77);

  auto check_moments = [&](int t) {
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum += x.row(i)[0];
      sumsq += static_cast<double>(x.row(i)[0]) * x.row(i)[0];
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    const double expect_mean = std::sqrt(s.alpha_bar(t)) * x0;
    const double expect_var = 1.0 - s.alpha_bar(t);
    const double se_mean = std::sqrt(expect_var / n);
    const double se_var = expect_var * std::sqrt(2.0 / (n - 1));
    CHECK(std::abs(mean - expect_mean) <= 4.0 * se_mean);
    CHECK(std::abs(var - expect_var) <= 4.0 * se_var);
  };

  for (int t = 1; t <= s.T; ++t) {
    for (std::size_t i = 0; i < n; ++i) eps.row(i)[0] = rng.normal_f();
    for (std::size_t i = 0; i < n; ++i)
      fwd::kernel_step(x.row_span(i), t, eps.row_span(i), s, x.row_span(i));
    if (t == 10 || t == 50 || t == 100) check_moments(t);
  }
}

TEST_CASE("backtrace inverts q_sample") {
  const NoiseSchedule s = make_linear(100, 1e-3, 0.2);
  Rng rng(8);
  const std::size_t D = 8;
  FloatMat x0(1, D), eps(1, D), x_t(1, D), back(1, D);
  rng.fill_normal(x0.row(0), D);
  rng.fill_normal(eps.row(0), D);

  for (int t = 1; t <= s.T; ++t) {
    fwd::q_sample(x0.row_span(0), t, eps.row_span(0), s, x_t.row_span(0));
    fwd::backtrace_x0(x_t.row_span(0), eps.row_span(0), t, s, back.row_span(0));
    // The float rounding of x_t is amplified by 1/sqrt(abar) on the way
    // back, so the attainable bound degrades as abar shrinks.
    const double tol = std::max(1e-6, 5e-7 / std::sqrt(s.alpha_bar(t)));
    for (std::size_t d = 0; d < D; ++d) {
      const double denom = std::max(1.0, std::abs((double)x0.row(0)[d]));
      CHECK(std::abs((double)back.row(0)[d] - (double)x0.row(0)[d]) / denom <= tol);
    }
  }
}

TEST_CASE("backtrace examples") {
  const NoiseSchedule s = make_from_betas({0.5, 0.1});  // alpha_bar_2 = 0.45

  SUBCASE("zero noise divides by sqrt(abar)") {
    const Batch out = backtrace_x0({row_of({1.0f}), 2, ""}, row_of({0.0f}), 2, s);
    CHECK(out.data.row(0)[0] == doctest::Approx(1.0 / std::sqrt(0.45)).epsilon(1e-6));
  }

  SUBCASE("hand-built consistent pair recovers x0 = 1") {
    const Batch out = backtrace_x0({row_of({1.0f}), 2, ""}, row_of({0.44386f}), 2, s);
    CHECK(out.data.row(0)[0] == doctest::Approx(1.0).epsilon(1e-4));
  }

  SUBCASE("guard fires below the floor and clamps when enabled") {
    const NoiseSchedule deep = respace(make_cosine(1000, 0.008), 5);
    REQUIRE(deep.alpha_bar(5) < 1e-8);
    FloatMat x(1, 1), e(1, 1), out(1, 1);
    x.row(0)[0] = 1.0f;
    e.row(0)[0] = 0.5f;
    CHECK_THROWS_AS(
        fwd::backtrace_x0(x.row_span(0), e.row_span(0), 5, deep, out.row_span(0), {}),
        std::domain_error);
    fwd::backtrace_x0(x.row_span(0), e.row_span(0), 5, deep, out.row_span(0), {true, 1e-8});
    CHECK(std::isfinite(out.row(0)[0]));
  }
}

TEST_CASE("posterior mean and variance") {
  const NoiseSchedule s = make_from_betas({0.5, 0.1});

  SUBCASE("t = 1 collapses onto x0 with zero variance") {
    Rng rng(9);
    FloatMat x_t(1, 5), x0(1, 5);
    rng.fill_normal(x_t.row(0), 5);
    rng.fill_normal(x0.row(0), 5);
    const auto [mean, var] = posterior_mean_var({x_t, 1, ""}, {x0, 0, ""}, 1, s);
    for (int d = 0; d < 5; ++d) CHECK(mean.row(0)[d] == x0.row(0)[d]);
    CHECK(var == 0.0);
  }

  SUBCASE("hand-evaluated scalars at t = 2") {
    const auto [mean, var] =
        posterior_mean_var({row_of({1.0f}), 2, ""}, {row_of({1.0f}), 0, ""}, 2, s);
    // sqrt(0.5)*0.1/0.55 + sqrt(0.9)*0.5/0.55
    CHECK(mean.row(0)[0] == doctest::Approx(0.9910047).epsilon(1e-6));
    CHECK(var == doctest::Approx(0.5 / 0.55 * 0.1).epsilon(1e-12));
    CHECK(var == doctest::Approx(0.0909091).epsilon(1e-6));
  }

  SUBCASE("posterior mean equals the subtractive mean on the true pair") {
    const NoiseSchedule lin = make_linear(200, 1e-3, 0.1);
    Rng rng(10);
    FloatMat x0(1, 6), eps(1, 6), x_t(1, 6);
    rng.fill_normal(x0.row(0), 6);
    rng.fill_normal(eps.row(0), 6);
    for (int t : {1, 3, 50, 137, 200}) {
      fwd::q_sample(x0.row_span(0), t, eps.row_span(0), lin, x_t.row_span(0));
      FloatMat post(1, 6);
      fwd::posterior_mean_var(x_t.row_span(0), x0.row_span(0), t, lin, post.row_span(0));
      // mu_eps formula applied directly to the true noise
      const double alpha = lin.alpha(t);
      const double abar = lin.alpha_bar(t);
      for (int d = 0; d < 6; ++d) {
        const double mu_e = x_t.row(0)[d] / std::sqrt(alpha) -
                            (1.0 - alpha) / (std::sqrt(1.0 - abar) * std::sqrt(alpha)) *
                                eps.row(0)[d];
        CHECK(std::abs(post.row(0)[d] - mu_e) <=
              1e-6 * std::max(1.0, std::abs(mu_e)));
      }
    }
  }
}

TEST_SUITE_END();
