#include "dualdiff/kernels.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace dualdiff::kernels {

namespace scalar {
void axpby(std::size_t, float, const float*, float, const float*, float*);
void axpy(std::size_t, float, const float*, float*);
float dot(std::size_t, const float*, const float*);
void lerp(std::size_t, const float*, const float*, const float*, float*);
double sum_sq_diff(std::size_t, const float*, const float*);
void adam_step(std::size_t, float*, const float*, float*, float*, float, float, float, float, double, double);
void ema_update(std::size_t, float*, const float*, float);
}  // namespace scalar

#ifdef DUALDIFF_X86
namespace avx2 {
void axpby(std::size_t, float, const float*, float, const float*, float*);
void axpy(std::size_t, float, const float*, float*);
float dot(std::size_t, const float*, const float*);
void lerp(std::size_t, const float*, const float*, const float*, float*);
double sum_sq_diff(std::size_t, const float*, const float*);
void adam_step(std::size_t, float*, const float*, float*, float*, float, float, float, float, double, double);
void ema_update(std::size_t, float*, const float*, float);
}  // namespace avx2
#endif

namespace {

struct Table {
  void (*axpby)(std::size_t, float, const float*, float, const float*, float*);
  void (*axpy)(std::size_t, float, const float*, float*);
  float (*dot)(std::size_t, const float*, const float*);
  void (*lerp)(std::size_t, const float*, const float*, const float*, float*);
  double (*sum_sq_diff)(std::size_t, const float*, const float*);
  void (*adam_step)(std::size_t, float*, const float*, float*, float*, float, float, float, float, double, double);
  void (*ema_update)(std::size_t, float*, const float*, float);
};

constexpr Table kScalar{scalar::axpby, scalar::axpy, scalar::dot, scalar::lerp,
                        scalar::sum_sq_diff, scalar::adam_step, scalar::ema_update};

#ifdef DUALDIFF_X86
constexpr Table kAvx2{avx2::axpby, avx2::axpy, avx2::dot, avx2::lerp,
                      avx2::sum_sq_diff, avx2::adam_step, avx2::ema_update};
#endif

bool detect_avx2() {
#ifdef DUALDIFF_X86
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

struct State {
  bool has_avx2 = false;
  Backend backend = Backend::scalar;
  const Table* table = &kScalar;

  State() {
    has_avx2 = detect_avx2();
    Backend wanted = has_avx2 ? Backend::avx2 : Backend::scalar;
    if (const char* env = std::getenv("DUALDIFF_KERNELS")) {
      if (std::strcmp(env, "scalar") == 0) {
        wanted = Backend::scalar;
      } else if (std::strcmp(env, "avx2") == 0) {
        if (!has_avx2) {
          std::fprintf(stderr, "dualdiff: DUALDIFF_KERNELS=avx2 but CPU lacks AVX2+FMA, using scalar\n");
          wanted = Backend::scalar;
        } else {
          wanted = Backend::avx2;
        }
      } else {
        std::fprintf(stderr, "dualdiff: ignoring unknown DUALDIFF_KERNELS=%s\n", env);
      }
    }
    select(wanted);
  }

  void select(Backend b) {
    backend = b;
#ifdef DUALDIFF_X86
    table = (b == Backend::avx2) ? &kAvx2 : &kScalar;
#else
    table = &kScalar;
#endif
  }
};

State& state() {
  static State s;
  return s;
}

}  // namespace

Backend active_backend() { return state().backend; }

const char* backend_name() {
  return state().backend == Backend::avx2 ? "avx2" : "scalar";
}

bool avx2_available() { return state().has_avx2; }

void set_backend(Backend b) {
  if (b == Backend::avx2 && !state().has_avx2)
    throw std::runtime_error("kernels: AVX2 backend not available on this CPU");
  state().select(b);
}

void axpby(std::size_t n, float a, const float* x, float b, const float* y, float* out) {
  state().table->axpby(n, a, x, b, y, out);
}
void axpy(std::size_t n, float a, const float* x, float* y) {
  state().table->axpy(n, a, x, y);
}
float dot(std::size_t n, const float* a, const float* b) {
  return state().table->dot(n, a, b);
}
void lerp(std::size_t n, const float* w, const float* a, const float* b, float* out) {
  state().table->lerp(n, w, a, b, out);
}
double sum_sq_diff(std::size_t n, const float* a, const float* b) {
  return state().table->sum_sq_diff(n, a, b);
}
void adam_step(std::size_t n, float* w, const float* g, float* m, float* v,
               float lr, float beta1, float beta2, float eps, double bc1, double bc2) {
  state().table->adam_step(n, w, g, m, v, lr, beta1, beta2, eps, bc1, bc2);
}
void ema_update(std::size_t n, float* ema, const float* w, float decay) {
  state().table->ema_update(n, ema, w, decay);
}

void silu(std::size_t n, const float* z, float* out) { ref::silu(n, z, out); }
void silu_backward(std::size_t n, const float* z, const float* g_out, float* g_in) {
  ref::silu_backward(n, z, g_out, g_in);
}

}  // namespace dualdiff::kernels
