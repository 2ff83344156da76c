#pragma once

#include <cmath>
#include <cstddef>

// Inner-loop arithmetic kernels.
//
// Every kernel has a scalar reference implementation (templated, any float
// type) and may have an AVX2+FMA variant. The float entry points below go
// through a dispatch table chosen at startup from CPU capabilities; the two
// paths are equivalence-tested against each other. Set DUALDIFF_KERNELS=scalar
// in the environment to pin the scalar path.

namespace dualdiff::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
const char* backend_name();
bool avx2_available();
// Switches the dispatch table (tests). Throws if the backend is unavailable.
void set_backend(Backend b);

// out[i] = a*x[i] + b*y[i]
void axpby(std::size_t n, float a, const float* x, float b, const float* y, float* out);
// y[i] += a*x[i]
void axpy(std::size_t n, float a, const float* x, float* y);
float dot(std::size_t n, const float* a, const float* b);
// out[i] = w[i]*a[i] + (1-w[i])*b[i]
void lerp(std::size_t n, const float* w, const float* a, const float* b, float* out);
// sum_i (a[i]-b[i])^2, accumulated in double
double sum_sq_diff(std::size_t n, const float* a, const float* b);
// Adam with bias corrections bc1 = 1-beta1^t, bc2 = 1-beta2^t precomputed.
void adam_step(std::size_t n, float* w, const float* g, float* m, float* v,
               float lr, float beta1, float beta2, float eps, double bc1, double bc2);
void ema_update(std::size_t n, float* ema, const float* w, float decay);

// x * sigmoid(x) and its input gradient. Scalar on all backends.
void silu(std::size_t n, const float* z, float* out);
void silu_backward(std::size_t n, const float* z, const float* g_out, float* g_in);

// Scalar reference implementations. The float dispatch falls back to these;
// the double instantiations back the high-precision twin of the denoiser.
namespace ref {

template <class T>
void axpby(std::size_t n, T a, const T* x, T b, const T* y, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

template <class T>
void axpy(std::size_t n, T a, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class T>
T dot(std::size_t n, const T* a, const T* b) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <class T>
void lerp(std::size_t n, const T* w, const T* a, const T* b, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = w[i] * a[i] + (T(1) - w[i]) * b[i];
}

template <class T>
double sum_sq_diff(std::size_t n, const T* a, const T* b) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

template <class T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <class T>
void silu(std::size_t n, const T* z, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = z[i] * sigmoid(z[i]);
}

template <class T>
void silu_backward(std::size_t n, const T* z, const T* g_out, T* g_in) {
  for (std::size_t i = 0; i < n; ++i) {
    const T s = sigmoid(z[i]);
    g_in[i] = g_out[i] * (s * (T(1) + z[i] * (T(1) - s)));
  }
}

template <class T>
void adam_step(std::size_t n, T* w, const T* g, T* m, T* v,
               T lr, T beta1, T beta2, T eps, double bc1, double bc2) {
  const T inv_bc1 = T(1.0 / bc1);
  const T inv_bc2 = T(1.0 / bc2);
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    const T m_hat = m[i] * inv_bc1;
    const T v_hat = v[i] * inv_bc2;
    w[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

template <class T>
void ema_update(std::size_t n, T* ema, const T* w, T decay) {
  for (std::size_t i = 0; i < n; ++i) ema[i] = decay * ema[i] + (T(1) - decay) * w[i];
}

}  // namespace ref
}  // namespace dualdiff::kernels
