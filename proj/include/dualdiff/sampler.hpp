#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dualdiff/common.hpp"
#include "dualdiff/denoiser.hpp"
#include "dualdiff/rng.hpp"
#include "dualdiff/schedule.hpp"

namespace dualdiff {

enum class PathMode { eps_only, x_only, dual, fixed_r };
enum class SampleMethod { ancestral, implicit };
enum class SigmaRule { beta, beta_tilde, zero, eta };

struct SamplerConfig {
  PathMode mode = PathMode::dual;
  SampleMethod method = SampleMethod::implicit;
  int steps = 50;  // K: schedule positions kept after uniform respacing
  SigmaRule sigma_rule = SigmaRule::zero;
  double eta = 0.0;
  bool clamp_enabled = false;
  float clamp_lo = -1.0f;
  float clamp_hi = 1.0f;
  std::uint64_t seed = 0;
  // Interpolation weights frozen per generation step (entry 0 applies to the
  // first, noisiest step). Present iff mode == fixed_r; size must equal steps.
  std::vector<float> fixed_r_profile;
  StabilityGuard guard;

  void validate() const;
};

// One sampling run. states runs from x_T down to x_0 (steps+1 entries);
// pred_x0 and r_values hold the per-step x0 estimate and the interpolation
// weights that drove the step. step_times stays in memory and is never
// serialized, so written trajectories stay byte-reproducible.
struct Trajectory {
  std::vector<std::vector<float>> states;
  std::vector<std::vector<float>> pred_x0;
  std::vector<std::vector<float>> r_values;
  std::vector<double> step_times;
};

// Everything one backward step produces.
struct StepResult {
  std::vector<float> x_prev;
  std::vector<float> pred_x0;
  std::vector<float> r_used;
  ModelOutput model_out;
};

// t indexes the (possibly respaced) schedule `s`; the model itself is
// conditioned on s.source_timestep(t). rng may be null when the step draws
// no noise (implicit with sigma = 0, or the final step).
StepResult sampler_step(const DenoiserFn& model, std::span<const float> x_t, int t,
                        const NoiseSchedule& s, const SamplerConfig& cfg, Rng* rng);

std::vector<float> ancestral_step(const DenoiserFn& model, std::span<const float> x_t, int t,
                                  const NoiseSchedule& s, const SamplerConfig& cfg, Rng& rng);
std::vector<float> implicit_step(const DenoiserFn& model, std::span<const float> x_t, int t,
                                 const NoiseSchedule& s, const SamplerConfig& cfg,
                                 Rng* rng = nullptr);

struct GenerateResult {
  FloatMat samples;
  std::vector<Trajectory> trajectories;  // empty unless recording was requested
};

using StepObserver =
    std::function<void(int step_index, int t, std::span<const float> x_t, const StepResult&)>;

// Full generation: respaces the schedule to cfg.steps, draws x_T per sample
// from the seeded generator (stream = sample index) and iterates the
// configured step down to x_0.
GenerateResult generate(const DenoiserFn& model, const NoiseSchedule& s,
                        const SamplerConfig& cfg, std::size_t n_samples, int data_dim,
                        bool record_trajectories = false, const StepObserver& observer = {});

// Per-step mean interpolation weights -> frozen profile, clamped to [0, 1].
std::vector<float> fixed_r_profile_from_stats(std::span<const double> r_step_means, int K);

const char* to_string(PathMode m);
const char* to_string(SampleMethod m);
const char* to_string(SigmaRule r);
PathMode path_mode_from_string(const std::string& s);
SampleMethod sample_method_from_string(const std::string& s);
SigmaRule sigma_rule_from_string(const std::string& s);

}  // namespace dualdiff
