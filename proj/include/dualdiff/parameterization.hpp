#pragma once

#include <span>
#include <vector>

#include "dualdiff/common.hpp"
#include "dualdiff/schedule.hpp"

namespace dualdiff {

enum class MuPath { subtractive, additive, dual };

// One estimate of the backward-step mean. r_used is empty for single-path
// estimates; for interpolations it holds the weights that produced the mix
// (one shared scalar or one weight per element).
struct MuEstimate {
  std::vector<float> mean;
  MuPath path = MuPath::subtractive;
  std::vector<float> r_used;
};

// Additive path: the mean rebuilt from a direct prediction of x0.
MuEstimate mu_from_x(std::span<const float> x_t, std::span<const float> x_pred, int t,
                     const NoiseSchedule& s, const StabilityGuard& guard = {});

// Subtractive path: the mean obtained by removing predicted noise from x_t.
MuEstimate mu_from_eps(std::span<const float> x_t, std::span<const float> eps_pred, int t,
                       const NoiseSchedule& s, const StabilityGuard& guard = {});

// mean = r * mu_x + (1 - r) * mu_eps, r in [0,1] with size 1 (broadcast) or
// one entry per element.
MuEstimate interpolate_mu(const MuEstimate& mu_x, const MuEstimate& mu_eps,
                          std::span<const float> r);

// Implicit (DDIM-style) step means. sigma_t^2 may not exceed 1 - abar_{t-1};
// sigma_t = 0 gives the deterministic step.
MuEstimate ddim_mean_from_x(std::span<const float> x_t, std::span<const float> x_pred, int t,
                            const NoiseSchedule& s, double sigma_t,
                            const StabilityGuard& guard = {});
MuEstimate ddim_mean_from_eps(std::span<const float> x_t, std::span<const float> eps_pred,
                              int t, const NoiseSchedule& s, double sigma_t,
                              const StabilityGuard& guard = {});

std::vector<float> clamp_x0(std::span<const float> x_pred, float lo, float hi, bool enabled);

}  // namespace dualdiff
