#pragma once

#include <span>
#include <string>
#include <utility>

#include "dualdiff/common.hpp"
#include "dualdiff/schedule.hpp"

namespace dualdiff {

// A set of samples sharing one timestep. t = 0 is clean data.
struct Batch {
  FloatMat data;
  int t = 0;
  std::string meta;
};

// Span-level primitives. All pure: noise comes from the caller, coefficients
// are computed in double and applied to 32-bit data.
namespace fwd {

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
void q_sample(std::span<const float> x0, int t, std::span<const float> eps,
              const NoiseSchedule& s, std::span<float> out);

// x_t = sqrt(1 - beta_t) x_{t-1} + sqrt(beta_t) eps
void kernel_step(std::span<const float> x_prev, int t, std::span<const float> eps,
                 const NoiseSchedule& s, std::span<float> out);

// x0 = (x_t - sqrt(1 - abar_t) eps) / sqrt(abar_t)
void backtrace_x0(std::span<const float> x_t, std::span<const float> eps, int t,
                  const NoiseSchedule& s, std::span<float> out,
                  const StabilityGuard& guard = {});

// Posterior q(x_{t-1} | x_t, x0): mean into `out`, returns the variance.
double posterior_mean_var(std::span<const float> x_t, std::span<const float> x0, int t,
                          const NoiseSchedule& s, std::span<float> out,
                          const StabilityGuard& guard = {});

}  // namespace fwd

// Batch wrappers over the primitives above.
Batch q_sample(const Batch& x0, int t, const FloatMat& eps, const NoiseSchedule& s);
Batch forward_kernel_step(const Batch& x_prev, int t, const FloatMat& eps,
                          const NoiseSchedule& s);
Batch backtrace_x0(const Batch& x_t, const FloatMat& eps, int t, const NoiseSchedule& s,
                   const StabilityGuard& guard = {});
std::pair<FloatMat, double> posterior_mean_var(const Batch& x_t, const Batch& x0, int t,
                                               const NoiseSchedule& s,
                                               const StabilityGuard& guard = {});

}  // namespace dualdiff
