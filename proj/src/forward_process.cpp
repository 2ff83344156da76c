#include "dualdiff/forward_process.hpp"

#include <cmath>

#include "dualdiff/kernels.hpp"

namespace dualdiff {

namespace {

void check_shapes(std::size_t a, std::size_t b, std::size_t out, const char* op) {
  if (a != b || a != out)
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

namespace fwd {

void q_sample(std::span<const float> x0, int t, std::span<const float> eps,
              const NoiseSchedule& s, std::span<float> out) {
  check_shapes(x0.size(), eps.size(), out.size(), "q_sample");
  const double abar = s.alpha_bar(t);
  kernels::axpby(out.size(), static_cast<float>(std::sqrt(abar)), x0.data(),
                 static_cast<float>(std::sqrt(1.0 - abar)), eps.data(), out.data());
}

void kernel_step(std::span<const float> x_prev, int t, std::span<const float> eps,
                 const NoiseSchedule& s, std::span<float> out) {
  check_shapes(x_prev.size(), eps.size(), out.size(), "forward_kernel_step");
  const double beta = s.beta(t);
  kernels::axpby(out.size(), static_cast<float>(std::sqrt(1.0 - beta)), x_prev.data(),
                 static_cast<float>(std::sqrt(beta)), eps.data(), out.data());
}

void backtrace_x0(std::span<const float> x_t, std::span<const float> eps, int t,
                  const NoiseSchedule& s, std::span<float> out, const StabilityGuard& guard) {
  check_shapes(x_t.size(), eps.size(), out.size(), "backtrace_x0");
  const double abar = guard.den(s.alpha_bar(t), "alpha_bar");
  const double inv = 1.0 / std::sqrt(abar);
  kernels::axpby(out.size(), static_cast<float>(inv), x_t.data(),
                 static_cast<float>(-std::sqrt(1.0 - s.alpha_bar(t)) * inv), eps.data(),
                 out.data());
}

double posterior_mean_var(std::span<const float> x_t, std::span<const float> x0, int t,
                          const NoiseSchedule& s, std::span<float> out,
                          const StabilityGuard& guard) {
  check_shapes(x_t.size(), x0.size(), out.size(), "posterior_mean_var");
  const double abar = s.alpha_bar(t);
  const double abar_prev = s.alpha_bar_before(t);
  const double denom = guard.den(1.0 - abar, "1 - alpha_bar");
  const double coef_x0 = std::sqrt(abar_prev) * s.beta(t) / denom;
  const double coef_xt = std::sqrt(s.alpha(t)) * (1.0 - abar_prev) / denom;
  kernels::axpby(out.size(), static_cast<float>(coef_x0), x0.data(),
                 static_cast<float>(coef_xt), x_t.data(), out.data());
  return s.beta_tilde(t);
}

}  // namespace fwd

namespace {

template <class F>
Batch map_batch(const FloatMat& a, const FloatMat& b, int t, const char* op, F&& f) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument(std::string(op) + ": batch shape mismatch");
  Batch r;
  r.t = t;
  r.data = FloatMat(a.rows, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    f(a.row_span(i), b.row_span(i), r.data.row_span(i));
  return r;
}

}  // namespace

Batch q_sample(const Batch& x0, int t, const FloatMat& eps, const NoiseSchedule& s) {
  Batch r = map_batch(x0.data, eps, t, "q_sample",
                      [&](auto a, auto e, auto o) { fwd::q_sample(a, t, e, s, o); });
  r.meta = x0.meta;
  return r;
}

Batch forward_kernel_step(const Batch& x_prev, int t, const FloatMat& eps,
                          const NoiseSchedule& s) {
  Batch r = map_batch(x_prev.data, eps, t, "forward_kernel_step",
                      [&](auto a, auto e, auto o) { fwd::kernel_step(a, t, e, s, o); });
  r.meta = x_prev.meta;
  return r;
}

Batch backtrace_x0(const Batch& x_t, const FloatMat& eps, int t, const NoiseSchedule& s,
                   const StabilityGuard& guard) {
  Batch r = map_batch(x_t.data, eps, t, "backtrace_x0",
                      [&](auto a, auto e, auto o) { fwd::backtrace_x0(a, e, t, s, o, guard); });
  r.t = 0;
  r.meta = x_t.meta;
  return r;
}

std::pair<FloatMat, double> posterior_mean_var(const Batch& x_t, const Batch& x0, int t,
                                               const NoiseSchedule& s,
                                               const StabilityGuard& guard) {
  double var = 0.0;
  Batch r = map_batch(x_t.data, x0.data, t, "posterior_mean_var", [&](auto a, auto b, auto o) {
    var = fwd::posterior_mean_var(a, b, t, s, o, guard);
  });
  return {std::move(r.data), var};
}

}  // namespace dualdiff
