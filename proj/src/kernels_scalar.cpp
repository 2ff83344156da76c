#include "dualdiff/kernels.hpp"

namespace dualdiff::kernels::scalar {

void axpby(std::size_t n, float a, const float* x, float b, const float* y, float* out) {
  ref::axpby(n, a, x, b, y, out);
}

void axpy(std::size_t n, float a, const float* x, float* y) {
  ref::axpy(n, a, x, y);
}

float dot(std::size_t n, const float* a, const float* b) {
  return ref::dot(n, a, b);
}

void lerp(std::size_t n, const float* w, const float* a, const float* b, float* out) {
  ref::lerp(n, w, a, b, out);
}

double sum_sq_diff(std::size_t n, const float* a, const float* b) {
  return ref::sum_sq_diff(n, a, b);
}

void adam_step(std::size_t n, float* w, const float* g, float* m, float* v,
               float lr, float beta1, float beta2, float eps, double bc1, double bc2) {
  ref::adam_step(n, w, g, m, v, lr, beta1, beta2, eps, bc1, bc2);
}

void ema_update(std::size_t n, float* ema, const float* w, float decay) {
  ref::ema_update(n, ema, w, decay);
}

}  // namespace dualdiff::kernels::scalar
