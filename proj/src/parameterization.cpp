#include "dualdiff/parameterization.hpp"

#include <algorithm>
#include <cmath>

#include "dualdiff/kernels.hpp"

namespace dualdiff {

namespace {

void check_pair(std::size_t a, std::size_t b, const char* op) {
  if (a != b) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

double ddim_noise_coef(double abar_prev, double sigma_t, const char* op) {
  if (!(sigma_t >= 0.0))
    throw std::invalid_argument(std::string(op) + ": sigma_t must be >= 0");
  const double radicand = 1.0 - abar_prev - sigma_t * sigma_t;
  if (radicand < -1e-12)
    throw std::invalid_argument(std::string(op) + ": sigma_t^2 exceeds 1 - alpha_bar_prev");
  return std::sqrt(std::max(radicand, 0.0));
}

}  // namespace

MuEstimate mu_from_x(std::span<const float> x_t, std::span<const float> x_pred, int t,
                     const NoiseSchedule& s, const StabilityGuard& guard) {
  check_pair(x_t.size(), x_pred.size(), "mu_from_x");
  const double abar = s.alpha_bar(t);
  const double abar_prev = s.alpha_bar_before(t);
  const double denom = guard.den(1.0 - abar, "1 - alpha_bar");
  const double coef_xt = std::sqrt(s.alpha(t)) * (1.0 - abar_prev) / denom;
  const double coef_x0 = std::sqrt(abar_prev) * s.beta(t) / denom;
  MuEstimate e;
  e.path = MuPath::additive;
  e.mean.resize(x_t.size());
  kernels::axpby(x_t.size(), static_cast<float>(coef_xt), x_t.data(),
                 static_cast<float>(coef_x0), x_pred.data(), e.mean.data());
  return e;
}

MuEstimate mu_from_eps(std::span<const float> x_t, std::span<const float> eps_pred, int t,
                       const NoiseSchedule& s, const StabilityGuard& guard) {
  check_pair(x_t.size(), eps_pred.size(), "mu_from_eps");
  const double alpha = s.alpha(t);
  const double abar = s.alpha_bar(t);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
  const double coef_eps =
      (1.0 - alpha) / (std::sqrt(guard.den(1.0 - abar, "1 - alpha_bar")) * std::sqrt(alpha));
  MuEstimate e;
  e.path = MuPath::subtractive;
  e.mean.resize(x_t.size());
  kernels::axpby(x_t.size(), static_cast<float>(inv_sqrt_alpha), x_t.data(),
                 static_cast<float>(-coef_eps), eps_pred.data(), e.mean.data());
  return e;
}

MuEstimate interpolate_mu(const MuEstimate& mu_x, const MuEstimate& mu_eps,
                          std::span<const float> r) {
  const std::size_t n = mu_x.mean.size();
  check_pair(n, mu_eps.mean.size(), "interpolate_mu");
  if (r.size() != 1 && r.size() != n)
    throw std::invalid_argument("interpolate_mu: r must have size 1 or match the mean");
  for (float w : r)
    if (!(w >= 0.0f && w <= 1.0f))
      throw std::invalid_argument("interpolate_mu: r outside [0, 1]");
  MuEstimate e;
  e.path = MuPath::dual;
  e.r_used.assign(r.begin(), r.end());
  e.mean.resize(n);
  if (r.size() == 1) {
    kernels::axpby(n, r[0], mu_x.mean.data(), 1.0f - r[0], mu_eps.mean.data(), e.mean.data());
  } else {
    kernels::lerp(n, r.data(), mu_x.mean.data(), mu_eps.mean.data(), e.mean.data());
  }
  return e;
}

MuEstimate ddim_mean_from_x(std::span<const float> x_t, std::span<const float> x_pred, int t,
                            const NoiseSchedule& s, double sigma_t,
                            const StabilityGuard& guard) {
  check_pair(x_t.size(), x_pred.size(), "ddim_mean_from_x");
  const double abar = s.alpha_bar(t);
  const double abar_prev = s.alpha_bar_before(t);
  const double noise_coef = ddim_noise_coef(abar_prev, sigma_t, "ddim_mean_from_x");
  // eps_hat = (x_t - sqrt(abar) x_pred) / sqrt(1 - abar)
  const double inv = 1.0 / std::sqrt(guard.den(1.0 - abar, "1 - alpha_bar"));
  std::vector<float> eps_hat(x_t.size());
  kernels::axpby(x_t.size(), static_cast<float>(inv), x_t.data(),
                 static_cast<float>(-std::sqrt(abar) * inv), x_pred.data(), eps_hat.data());
  MuEstimate e;
  e.path = MuPath::additive;
  e.mean.resize(x_t.size());
  kernels::axpby(x_t.size(), static_cast<float>(std::sqrt(abar_prev)), x_pred.data(),
                 static_cast<float>(noise_coef), eps_hat.data(), e.mean.data());
  return e;
}

MuEstimate ddim_mean_from_eps(std::span<const float> x_t, std::span<const float> eps_pred,
                              int t, const NoiseSchedule& s, double sigma_t,
                              const StabilityGuard& guard) {
  check_pair(x_t.size(), eps_pred.size(), "ddim_mean_from_eps");
  const double abar = s.alpha_bar(t);
  const double abar_prev = s.alpha_bar_before(t);
  const double noise_coef = ddim_noise_coef(abar_prev, sigma_t, "ddim_mean_from_eps");
  // x0_hat = (x_t - sqrt(1 - abar) eps_pred) / sqrt(abar)
  const double inv = 1.0 / std::sqrt(guard.den(abar, "alpha_bar"));
  std::vector<float> x0_hat(x_t.size());
  kernels::axpby(x_t.size(), static_cast<float>(inv), x_t.data(),
                 static_cast<float>(-std::sqrt(1.0 - abar) * inv), eps_pred.data(),
                 x0_hat.data());
  MuEstimate e;
  e.path = MuPath::subtractive;
  e.mean.resize(x_t.size());
  kernels::axpby(x_t.size(), static_cast<float>(std::sqrt(abar_prev)), x0_hat.data(),
                 static_cast<float>(noise_coef), eps_pred.data(), e.mean.data());
  return e;
}

std::vector<float> clamp_x0(std::span<const float> x_pred, float lo, float hi, bool enabled) {
  require(lo < hi, "clamp_x0: need lo < hi");
  std::vector<float> out(x_pred.begin(), x_pred.end());
  if (enabled)
    for (float& x : out) x = std::clamp(x, lo, hi);
  return out;
}

}  // namespace dualdiff
