#include "dualdiff/sampler.hpp"

#include <chrono>
#include <cmath>

#include "dualdiff/forward_process.hpp"
#include "dualdiff/kernels.hpp"
#include "dualdiff/parameterization.hpp"
#include "dualdiff/rng.hpp"

namespace dualdiff {

void SamplerConfig::validate() const {
  require(steps >= 1, "sampler: steps must be >= 1");
  if (mode == PathMode::fixed_r) {
    require(static_cast<int>(fixed_r_profile.size()) == steps,
            "sampler: fixed_r_profile size must equal steps");
    for (float r : fixed_r_profile)
      require(r >= 0.0f && r <= 1.0f, "sampler: fixed_r_profile entries must be in [0, 1]");
  } else {
    require(fixed_r_profile.empty(), "sampler: fixed_r_profile only valid for mode fixed_r");
  }
  if (sigma_rule == SigmaRule::eta)
    require(eta >= 0.0 && eta <= 1.0, "sampler: eta must be in [0, 1]");
  if (clamp_enabled) require(clamp_lo < clamp_hi, "sampler: clamp_lo must be < clamp_hi");
}

namespace {

double sigma_for(const SamplerConfig& cfg, const NoiseSchedule& s, int t) {
  if (t == 1) return 0.0;  // the last step never adds noise
  switch (cfg.sigma_rule) {
    case SigmaRule::beta:
      return std::sqrt(s.beta(t));
    case SigmaRule::beta_tilde:
      return std::sqrt(s.beta_tilde(t));
    case SigmaRule::zero:
      return 0.0;
    case SigmaRule::eta:
      return cfg.eta * std::sqrt(s.beta_tilde(t));
  }
  return 0.0;
}

// Effective interpolation weights for this step (size 1 or data_dim).
std::vector<float> resolve_r(const SamplerConfig& cfg, const NoiseSchedule& s, int t,
                             const ModelOutput& out) {
  switch (cfg.mode) {
    case PathMode::eps_only:
      return {0.0f};
    case PathMode::x_only:
      return {1.0f};
    case PathMode::dual:
      return out.r;
    case PathMode::fixed_r:
      // profile is ordered by generation step: entry 0 is the noisiest step
      return {cfg.fixed_r_profile[static_cast<std::size_t>(s.T - t)]};
  }
  return {0.5f};
}

std::vector<float> lerp_by_r(std::span<const float> r, std::span<const float> a,
                             std::span<const float> b) {
  std::vector<float> out(a.size());
  if (r.size() == 1) {
    kernels::axpby(a.size(), r[0], a.data(), 1.0f - r[0], b.data(), out.data());
  } else {
    kernels::lerp(a.size(), r.data(), a.data(), b.data(), out.data());
  }
  return out;
}

}  // namespace

StepResult sampler_step(const DenoiserFn& model, std::span<const float> x_t, int t,
                        const NoiseSchedule& s, const SamplerConfig& cfg, Rng* rng) {
  require(t >= 1 && t <= s.T, "sampler_step: t outside schedule");
  StepResult res;
  res.model_out = model(x_t, s.source_timestep(t));
  const std::vector<float> x_hat =
      clamp_x0(res.model_out.x_hat, cfg.clamp_lo, cfg.clamp_hi, cfg.clamp_enabled);
  res.r_used = resolve_r(cfg, s, t, res.model_out);

  const bool need_x = cfg.mode != PathMode::eps_only;
  const bool need_eps = cfg.mode != PathMode::x_only;

  const double sigma = sigma_for(cfg, s, t);
  std::vector<float> mean;
  if (cfg.method == SampleMethod::ancestral) {
    MuEstimate mu_x, mu_e;
    if (need_x) mu_x = mu_from_x(x_t, x_hat, t, s, cfg.guard);
    if (need_eps) mu_e = mu_from_eps(x_t, res.model_out.eps_hat, t, s, cfg.guard);
    if (cfg.mode == PathMode::x_only)
      mean = std::move(mu_x.mean);
    else if (cfg.mode == PathMode::eps_only)
      mean = std::move(mu_e.mean);
    else
      mean = interpolate_mu(mu_x, mu_e, res.r_used).mean;
  } else {
    MuEstimate mu_x, mu_e;
    if (need_x) mu_x = ddim_mean_from_x(x_t, x_hat, t, s, sigma, cfg.guard);
    if (need_eps) mu_e = ddim_mean_from_eps(x_t, res.model_out.eps_hat, t, s, sigma, cfg.guard);
    if (cfg.mode == PathMode::x_only)
      mean = std::move(mu_x.mean);
    else if (cfg.mode == PathMode::eps_only)
      mean = std::move(mu_e.mean);
    else
      mean = lerp_by_r(res.r_used, mu_x.mean, mu_e.mean);
  }

  if (sigma > 0.0) {
    if (!rng) throw std::invalid_argument("sampler_step: sigma > 0 requires a generator");
    for (float& m : mean) m += static_cast<float>(sigma) * rng->normal_f();
  }
  for (float m : mean)
    if (!std::isfinite(m))
      throw std::runtime_error("sampler_step: non-finite state at t = " + std::to_string(t) +
                               " (enable the stability guard?)");

  // x0 estimate of the active path; the subtractive one comes from the
  // noise-removal identity.
  std::vector<float> x0_eps;
  if (need_eps) {
    x0_eps.resize(x_t.size());
    fwd::backtrace_x0(x_t, res.model_out.eps_hat, t, s, x0_eps, cfg.guard);
  }
  if (cfg.mode == PathMode::eps_only)
    res.pred_x0 = std::move(x0_eps);
  else if (cfg.mode == PathMode::x_only)
    res.pred_x0 = x_hat;
  else
    res.pred_x0 = lerp_by_r(res.r_used, x_hat, x0_eps);

  res.x_prev = std::move(mean);
  return res;
}

std::vector<float> ancestral_step(const DenoiserFn& model, std::span<const float> x_t, int t,
                                  const NoiseSchedule& s, const SamplerConfig& cfg, Rng& rng) {
  SamplerConfig c = cfg;
  c.method = SampleMethod::ancestral;
  return sampler_step(model, x_t, t, s, c, &rng).x_prev;
}

std::vector<float> implicit_step(const DenoiserFn& model, std::span<const float> x_t, int t,
                                 const NoiseSchedule& s, const SamplerConfig& cfg, Rng* rng) {
  SamplerConfig c = cfg;
  c.method = SampleMethod::implicit;
  return sampler_step(model, x_t, t, s, c, rng).x_prev;
}

GenerateResult generate(const DenoiserFn& model, const NoiseSchedule& s,
                        const SamplerConfig& cfg, std::size_t n_samples, int data_dim,
                        bool record_trajectories, const StepObserver& observer) {
  cfg.validate();
  require(data_dim >= 1, "generate: data_dim must be >= 1");
  require(cfg.steps <= s.T, "generate: steps exceed schedule length");
  const NoiseSchedule rs = respace(s, cfg.steps);

  GenerateResult out;
  out.samples = FloatMat(n_samples, static_cast<std::size_t>(data_dim));
  if (record_trajectories) out.trajectories.resize(n_samples);

  std::vector<float> x(data_dim);
  for (std::size_t i = 0; i < n_samples; ++i) {
    Rng rng(cfg.seed, i);
    rng.fill_normal(x.data(), x.size());
    Trajectory* traj = record_trajectories ? &out.trajectories[i] : nullptr;
    if (traj) traj->states.push_back(x);

    for (int t = rs.T; t >= 1; --t) {
      const auto t0 = std::chrono::steady_clock::now();
      StepResult step;
      try {
        step = sampler_step(model, x, t, rs, cfg, &rng);
      } catch (const std::exception& e) {
        throw std::runtime_error("generate: sample " + std::to_string(i) + ", step " +
                                 std::to_string(rs.T - t) + " (t=" + std::to_string(t) +
                                 "): " + e.what());
      }
      if (observer) observer(rs.T - t, t, x, step);
      x = step.x_prev;
      if (traj) {
        traj->states.push_back(x);
        traj->pred_x0.push_back(std::move(step.pred_x0));
        traj->r_values.push_back(std::move(step.r_used));
        traj->step_times.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      }
    }
    std::copy(x.begin(), x.end(), out.samples.row(i));
  }
  return out;
}

std::vector<float> fixed_r_profile_from_stats(std::span<const double> r_step_means, int K) {
  if (static_cast<int>(r_step_means.size()) != K)
    throw std::invalid_argument("fixed_r_profile_from_stats: expected " + std::to_string(K) +
                                " per-step means, got " + std::to_string(r_step_means.size()));
  std::vector<float> profile(r_step_means.size());
  for (std::size_t i = 0; i < profile.size(); ++i)
    profile[i] = static_cast<float>(std::clamp(r_step_means[i], 0.0, 1.0));
  return profile;
}

const char* to_string(PathMode m) {
  switch (m) {
    case PathMode::eps_only: return "eps_only";
    case PathMode::x_only: return "x_only";
    case PathMode::dual: return "dual";
    case PathMode::fixed_r: return "fixed_r";
  }
  return "?";
}

const char* to_string(SampleMethod m) {
  return m == SampleMethod::ancestral ? "ancestral" : "implicit";
}

const char* to_string(SigmaRule r) {
  switch (r) {
    case SigmaRule::beta: return "beta";
    case SigmaRule::beta_tilde: return "beta_tilde";
    case SigmaRule::zero: return "zero";
    case SigmaRule::eta: return "eta";
  }
  return "?";
}

PathMode path_mode_from_string(const std::string& s) {
  if (s == "eps_only") return PathMode::eps_only;
  if (s == "x_only") return PathMode::x_only;
  if (s == "dual") return PathMode::dual;
  if (s == "fixed_r") return PathMode::fixed_r;
  throw std::invalid_argument("unknown path mode: " + s);
}

SampleMethod sample_method_from_string(const std::string& s) {
  if (s == "ancestral") return SampleMethod::ancestral;
  if (s == "implicit") return SampleMethod::implicit;
  throw std::invalid_argument("unknown sampling method: " + s);
}

SigmaRule sigma_rule_from_string(const std::string& s) {
  if (s == "beta") return SigmaRule::beta;
  if (s == "beta_tilde") return SigmaRule::beta_tilde;
  if (s == "zero") return SigmaRule::zero;
  if (s == "eta") return SigmaRule::eta;
  throw std::invalid_argument("unknown sigma rule: " + s);
}

}  // namespace dualdiff
