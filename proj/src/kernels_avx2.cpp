// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma on x86-64 and must only be entered through the dispatch
// table after a runtime CPU check.

#include "dualdiff/kernels.hpp"

#ifdef DUALDIFF_X86

#include <immintrin.h>

namespace dualdiff::kernels::avx2 {

void axpby(std::size_t n, float a, const float* x, float b, const float* y, float* out) {
  const __m256 va = _mm256_set1_ps(a);
  const __m256 vb = _mm256_set1_ps(b);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vx = _mm256_loadu_ps(x + i);
    const __m256 vy = _mm256_loadu_ps(y + i);
    _mm256_storeu_ps(out + i, _mm256_fmadd_ps(va, vx, _mm256_mul_ps(vb, vy)));
  }
  for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void axpy(std::size_t n, float a, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vy = _mm256_loadu_ps(y + i);
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

static inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
  return _mm_cvtss_f32(lo);
}

float dot(std::size_t n, const float* a, const float* b) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  }
  float s = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void lerp(std::size_t n, const float* w, const float* a, const float* b, float* out) {
  const __m256 one = _mm256_set1_ps(1.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vw = _mm256_loadu_ps(w + i);
    const __m256 va = _mm256_loadu_ps(a + i);
    const __m256 vb = _mm256_loadu_ps(b + i);
    const __m256 r = _mm256_fmadd_ps(vw, va, _mm256_mul_ps(_mm256_sub_ps(one, vw), vb));
    _mm256_storeu_ps(out + i, r);
  }
  for (; i < n; ++i) out[i] = w[i] * a[i] + (1.0f - w[i]) * b[i];
}

double sum_sq_diff(std::size_t n, const float* a, const float* b) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 d = _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i));
    const __m256d d0 = _mm256_cvtps_pd(_mm256_castps256_ps128(d));
    const __m256d d1 = _mm256_cvtps_pd(_mm256_extractf128_ps(d, 1));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  const __m256d acc = _mm256_add_pd(acc0, acc1);
  __m128d lo = _mm_add_pd(_mm256_castpd256_pd128(acc), _mm256_extractf128_pd(acc, 1));
  double s = _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
  for (; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

void adam_step(std::size_t n, float* w, const float* g, float* m, float* v,
               float lr, float beta1, float beta2, float eps, double bc1, double bc2) {
  const __m256 vb1 = _mm256_set1_ps(beta1);
  const __m256 vb2 = _mm256_set1_ps(beta2);
  const __m256 vc1 = _mm256_set1_ps(1.0f - beta1);
  const __m256 vc2 = _mm256_set1_ps(1.0f - beta2);
  const __m256 vinv1 = _mm256_set1_ps(static_cast<float>(1.0 / bc1));
  const __m256 vinv2 = _mm256_set1_ps(static_cast<float>(1.0 / bc2));
  const __m256 vlr = _mm256_set1_ps(lr);
  const __m256 veps = _mm256_set1_ps(eps);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vg = _mm256_loadu_ps(g + i);
    __m256 vm = _mm256_fmadd_ps(vb1, _mm256_loadu_ps(m + i), _mm256_mul_ps(vc1, vg));
    __m256 vv = _mm256_fmadd_ps(vb2, _mm256_loadu_ps(v + i), _mm256_mul_ps(vc2, _mm256_mul_ps(vg, vg)));
    _mm256_storeu_ps(m + i, vm);
    _mm256_storeu_ps(v + i, vv);
    const __m256 m_hat = _mm256_mul_ps(vm, vinv1);
    const __m256 v_hat = _mm256_mul_ps(vv, vinv2);
    const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(v_hat), veps);
    const __m256 upd = _mm256_div_ps(_mm256_mul_ps(vlr, m_hat), denom);
    _mm256_storeu_ps(w + i, _mm256_sub_ps(_mm256_loadu_ps(w + i), upd));
  }
  if (i < n)
    ref::adam_step(n - i, w + i, g + i, m + i, v + i, lr, beta1, beta2, eps, bc1, bc2);
}

void ema_update(std::size_t n, float* ema, const float* w, float decay) {
  const __m256 vd = _mm256_set1_ps(decay);
  const __m256 vc = _mm256_set1_ps(1.0f - decay);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 r = _mm256_fmadd_ps(vd, _mm256_loadu_ps(ema + i),
                                     _mm256_mul_ps(vc, _mm256_loadu_ps(w + i)));
    _mm256_storeu_ps(ema + i, r);
  }
  for (; i < n; ++i) ema[i] = decay * ema[i] + (1.0f - decay) * w[i];
}

}  // namespace dualdiff::kernels::avx2

#endif  // DUALDIFF_X86
