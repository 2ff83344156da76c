#include <doctest.h>

#include <cmath>
#include <limits>

#include "dualdiff/forward_process.hpp"
#include "dualdiff/parameterization.hpp"
#include "dualdiff/sampler.hpp"

using namespace dualdiff;

namespace {

SamplerConfig implicit_cfg(int K, PathMode mode = PathMode::dual) {
  SamplerConfig c;
  c.method = SampleMethod::implicit;
  c.sigma_rule = SigmaRule::zero;
  c.steps = K;
  c.mode = mode;
  c.seed = 1234;
  return c;
}

}  // namespace

TEST_SUITE_BEGIN("sampler");

TEST_CASE("config validation") {
  SamplerConfig c = implicit_cfg(5);
  CHECK_NOTHROW(c.validate());
  c.mode = PathMode::fixed_r;
  CHECK_THROWS(c.validate());  // missing profile
  c.fixed_r_profile = {0.1f, 0.2f, 0.3f, 0.4f, 0.5f};
  CHECK_NOTHROW(c.validate());
  c.fixed_r_profile.push_back(0.6f);
  CHECK_THROWS(c.validate());  // size != steps
  c.fixed_r_profile = {0.1f, 0.2f, 0.3f, 0.4f, 1.5f};
  CHECK_THROWS(c.validate());  // out of range
  c = implicit_cfg(5);
  c.fixed_r_profile = {0.5f};  // profile without fixed_r mode
  CHECK_THROWS(c.validate());
  c = implicit_cfg(5);
  c.sigma_rule = SigmaRule::eta;
  c.eta = 1.5;
  CHECK_THROWS(c.validate());
}

TEST_CASE("sigma rules: beta dominates beta_tilde") {
  const NoiseSchedule s = make_linear(100, 1e-3, 0.2);
  for (int t = 2; t <= s.T; ++t) CHECK(s.beta(t) / s.beta_tilde(t) >= 1.0);
  CHECK(s.beta_tilde(1) == 0.0);
}

TEST_CASE("ancestral final step adds no noise") {
  const NoiseSchedule s = make_linear(30, 1e-3, 0.2);
  const std::vector<float> c{0.5f, -0.25f};
  const DenoiserFn oracle = oracle_denoiser(c, s);
  SamplerConfig cfg = implicit_cfg(30);
  cfg.method = SampleMethod::ancestral;
  cfg.sigma_rule = SigmaRule::beta;

  const std::vector<float> x_t{0.3f, 0.1f};
  Rng r1(1), r2(999);
  const auto a = ancestral_step(oracle, x_t, 1, s, cfg, r1);
  const auto b = ancestral_step(oracle, x_t, 1, s, cfg, r2);
  CHECK(a == b);  // generator state cannot matter at t = 1

  // and the value is the exact additive mean (the posterior collapses onto
  // the prediction at t = 1)
  CHECK(a[0] == c[0]);
  CHECK(a[1] == c[1]);
}

TEST_CASE("ancestral sampling over the oracle lands on the point") {
  const NoiseSchedule s = make_linear(30, 1e-3, 0.2);
  const std::vector<float> c{0.5f, -0.25f};
  const DenoiserFn oracle = oracle_denoiser(c, s);
  SamplerConfig cfg = implicit_cfg(30);
  cfg.method = SampleMethod::ancestral;
  cfg.sigma_rule = SigmaRule::beta;
  cfg.seed = 31;

  const GenerateResult run = generate(oracle, s, cfg, 1000, 2);
  for (std::size_t i = 0; i < run.samples.rows; ++i)
    for (int d = 0; d < 2; ++d)
      CHECK(std::abs(run.samples.row(i)[d] - c[d]) <= 1e-5);
}

TEST_CASE("implicit step determinism and oracle exactness") {
  const NoiseSchedule s = make_linear(100, 1e-3, 0.2);
  const std::vector<float> c{-0.8f, 0.2f};
  const DenoiserFn oracle = oracle_denoiser(c, s);

  SUBCASE("bitwise reproducible with sigma 0") {
    const SamplerConfig cfg = implicit_cfg(10);
    const GenerateResult a = generate(oracle, s, cfg, 4, 2);
    const GenerateResult b = generate(oracle, s, cfg, 4, 2);
    CHECK(a.samples.v == b.samples.v);
  }

  SUBCASE("one step to alpha_bar_prev = 1 returns the point exactly") {
    const SamplerConfig cfg = implicit_cfg(1, PathMode::x_only);
    const GenerateResult run = generate(oracle, s, cfg, 8, 2);
    for (std::size_t i = 0; i < run.samples.rows; ++i) {
      CHECK(run.samples.row(i)[0] == c[0]);
      CHECK(run.samples.row(i)[1] == c[1]);
    }
  }

  SUBCASE("consistent heads: eps-only equals x-only stepwise") {
    std::vector<float> x_t{0.4f, 1.1f};
    for (int t : {2, 40, 100}) {
      const auto via_eps =
          implicit_step(oracle, x_t, t, s, implicit_cfg(100, PathMode::eps_only));
      const auto via_x = implicit_step(oracle, x_t, t, s, implicit_cfg(100, PathMode::x_only));
      for (int d = 0; d < 2; ++d)
        CHECK(via_eps[d] == doctest::Approx(via_x[d]).epsilon(1e-6));
    }
  }
}

TEST_CASE("dual mode interpolates between the single paths") {
  const NoiseSchedule s = make_linear(100, 1e-3, 0.2);
  // a denoiser with deliberately inconsistent heads so the paths separate
  const DenoiserFn crooked = [](std::span<const float> x, int) {
    ModelOutput out;
    out.eps_hat.assign(x.begin(), x.end());
    for (auto& v : out.eps_hat) v *= 0.5f;
    out.x_hat.assign(x.size(), 0.25f);
    out.r = {0.37f};
    return out;
  };

  const std::vector<float> x_t{1.0f, -2.0f};
  for (int t : {3, 50, 100}) {
    const auto dual = sampler_step(crooked, x_t, t, s, implicit_cfg(100, PathMode::dual), nullptr);
    const auto ex = sampler_step(crooked, x_t, t, s, implicit_cfg(100, PathMode::eps_only), nullptr);
    const auto xx = sampler_step(crooked, x_t, t, s, implicit_cfg(100, PathMode::x_only), nullptr);
    for (int d = 0; d < 2; ++d) {
      const float lo = std::min(ex.x_prev[d], xx.x_prev[d]);
      const float hi = std::max(ex.x_prev[d], xx.x_prev[d]);
      CHECK(dual.x_prev[d] >= lo - 1e-6f);
      CHECK(dual.x_prev[d] <= hi + 1e-6f);
    }
    CHECK(dual.r_used == std::vector<float>{0.37f});
    CHECK(ex.r_used == std::vector<float>{0.0f});
    CHECK(xx.r_used == std::vector<float>{1.0f});
  }
}

TEST_CASE("dual with saturated r reproduces x_only exactly") {
  const NoiseSchedule s = make_linear(60, 1e-3, 0.2);
  const std::vector<float> c{0.1f, 0.9f};
  const DenoiserFn base = oracle_denoiser(c, s);
  const DenoiserFn saturated = [base](std::span<const float> x, int t) {
    ModelOutput out = base(x, t);
    out.r = {1.0f};
    return out;
  };
  const GenerateResult dual = generate(saturated, s, implicit_cfg(10, PathMode::dual), 6, 2);
  const GenerateResult xonly = generate(saturated, s, implicit_cfg(10, PathMode::x_only), 6, 2);
  CHECK(dual.samples.v == xonly.samples.v);
}

TEST_CASE("generate basics") {
  const NoiseSchedule s = make_linear(60, 1e-3, 0.2);
  const MlpParams p = init_params(2, 16, 8, 50);
  const DenoiserFn model = make_denoiser_fn(p);

  SUBCASE("zero samples give empty output") {
    const GenerateResult run = generate(model, s, implicit_cfg(5), 0, 2);
    CHECK(run.samples.rows == 0);
    CHECK(run.trajectories.empty());
  }

  SUBCASE("same seed, different respacing: different but finite") {
    const GenerateResult k5 = generate(model, s, implicit_cfg(5), 3, 2);
    const GenerateResult k10 = generate(model, s, implicit_cfg(10), 3, 2);
    CHECK(k5.samples.v != k10.samples.v);
    for (float v : k5.samples.v) CHECK(std::isfinite(v));
    for (float v : k10.samples.v) CHECK(std::isfinite(v));
  }

  SUBCASE("respaced K = T reproduces a manual full-schedule loop bitwise") {
    SamplerConfig cfg = implicit_cfg(60);
    const GenerateResult run = generate(model, s, cfg, 2, 2, true);
    for (std::size_t i = 0; i < 2; ++i) {
      Rng rng(cfg.seed, i);
      std::vector<float> x(2);
      rng.fill_normal(x.data(), 2);
      CHECK(x == run.trajectories[i].states.front());
      for (int t = s.T; t >= 1; --t) x = sampler_step(model, x, t, s, cfg, &rng).x_prev;
      CHECK(x == run.trajectories[i].states.back());
      for (int d = 0; d < 2; ++d) CHECK(x[d] == run.samples.row(i)[d]);
    }
  }

  SUBCASE("trajectory shapes are consistent with K") {
    const GenerateResult run = generate(model, s, implicit_cfg(7), 3, 2, true);
    REQUIRE(run.trajectories.size() == 3);
    for (const Trajectory& tr : run.trajectories) {
      CHECK(tr.states.size() == 8);
      CHECK(tr.pred_x0.size() == 7);
      CHECK(tr.r_values.size() == 7);
      CHECK(tr.step_times.size() == 7);
    }
  }

  SUBCASE("step errors carry the step index") {
    const DenoiserFn broken = [](std::span<const float> x, int) {
      ModelOutput out;
      out.eps_hat.assign(x.size(), std::numeric_limits<float>::quiet_NaN());
      out.x_hat.assign(x.size(), std::numeric_limits<float>::quiet_NaN());
      out.r = {0.5f};
      return out;
    };
    CHECK_THROWS_WITH_AS(generate(broken, s, implicit_cfg(5), 1, 2),
                         doctest::Contains("step"), std::runtime_error);
  }
}

TEST_CASE("fixed r profile from stats") {
  const std::vector<double> means{0.5, 0.5, 0.5};
  CHECK(fixed_r_profile_from_stats(means, 3) == std::vector<float>{0.5f, 0.5f, 0.5f});
  const std::vector<double> wild{-0.2, 0.7, 1.4};
  CHECK(fixed_r_profile_from_stats(wild, 3) == std::vector<float>{0.0f, 0.7f, 1.0f});
  CHECK_THROWS(fixed_r_profile_from_stats(means, 4));
}

TEST_CASE("fixed_r mode follows the frozen profile") {
  const NoiseSchedule s = make_linear(40, 1e-3, 0.2);
  const std::vector<float> c{0.0f, 0.0f};
  const DenoiserFn oracle = oracle_denoiser(c, s);

  SamplerConfig cfg = implicit_cfg(4, PathMode::fixed_r);
  cfg.fixed_r_profile = {0.9f, 0.6f, 0.3f, 0.1f};
  const GenerateResult run = generate(oracle, s, cfg, 2, 2, true);
  for (const Trajectory& tr : run.trajectories) {
    REQUIRE(tr.r_values.size() == 4);
    for (int j = 0; j < 4; ++j) CHECK(tr.r_values[j] == std::vector<float>{cfg.fixed_r_profile[j]});
  }
}

TEST_SUITE_END();
