#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dualdiff/common.hpp"
#include "dualdiff/denoiser.hpp"
#include "dualdiff/sampler.hpp"
#include "dualdiff/schedule.hpp"

namespace dualdiff {

// Named per-timestep series sharing one t axis. Monte Carlo estimators come
// with a companion "<name>_se" series holding the standard error.
struct CurveSet {
  std::vector<int> t_values;
  std::map<std::string, std::vector<double>> series;

  void validate() const;
};

// Monte Carlo prediction losses per timestep, through both heads:
//   mu_loss_{x,eps}   squared error against the posterior mean
//   eps_loss_{eps,x}  noise error, direct and derived from x_hat
//   x0_loss_{x,eps}   data error, direct and derived from eps_hat
// All are per-element means over n_per_t draws of (x0, eps).
CurveSet per_timestep_losses(const DenoiserFn& model, const FloatMat& data,
                             const NoiseSchedule& s, int n_per_t, std::uint64_t seed,
                             const StabilityGuard& guard = {});

// Mean and variance of the predicted x0 through both paths at every step of
// a generation run, with the reference data statistics as constant series.
CurveSet predicted_x0_stats(const DenoiserFn& model, const NoiseSchedule& s,
                            std::size_t n_samples, const SamplerConfig& cfg, int data_dim,
                            const FloatMat& reference);

// Per-step mean/min/max of the interpolation weight across recorded
// trajectories; t_values is the generation step index.
CurveSet r_trajectory_stats(const std::vector<Trajectory>& trajectories);

// Average over seeded random unit projections of the 1-D Wasserstein-1
// distance between the projected empirical distributions.
double sliced_wasserstein(const FloatMat& A, const FloatMat& B, int n_proj, std::uint64_t seed);

struct CompareRow {
  int steps = 0;
  PathMode mode = PathMode::dual;
  double swd = 0.0;
  std::uint64_t seed = 0;
  std::size_t n_samples = 0;
};

// The Table-1-shaped sweep: for every K and every path mode, generate
// n_samples and score them against held-out data. The fixed_r profile of
// each K is learned from a dedicated recorded dual run.
std::vector<CompareRow> compare_paths_report(const DenoiserFn& model, const NoiseSchedule& s,
                                             const std::vector<int>& step_counts,
                                             const SamplerConfig& base, const FloatMat& heldout,
                                             std::size_t n_samples, int n_proj, int data_dim,
                                             int n_profile_trajectories = 64);

// A non-empty annotation (e.g. "config_hash=... seed=...") becomes a leading
// '#' comment line so every written artifact names its provenance.
void write_curveset_csv(const std::string& path, const CurveSet& curves,
                        const std::string& annotation = "");
void write_compare_csv(const std::string& path, const std::vector<CompareRow>& rows,
                       const std::string& annotation = "");
nlohmann::json compare_report_json(const std::vector<CompareRow>& rows,
                                   const nlohmann::json& config_echo);

}  // namespace dualdiff
