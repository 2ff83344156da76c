#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "dualdiff/kernels.hpp"
#include "dualdiff/rng.hpp"

using namespace dualdiff;
namespace k = dualdiff::kernels;

namespace {

std::vector<float> random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(scale * rng.normal());
  return v;
}

void check_close(const std::vector<float>& a, const std::vector<float>& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs((double)a[i]), std::abs((double)b[i]), 1.0});
    CHECK(std::abs((double)a[i] - (double)b[i]) / denom <= tol);
  }
}

// Runs fn under both backends and hands both results to cmp.
template <class Fn, class Cmp>
void for_both_backends(Fn&& fn, Cmp&& cmp) {
  if (!k::avx2_available()) return;  // nothing to compare on single-backend machines
  const k::Backend prev = k::active_backend();
  k::set_backend(k::Backend::scalar);
  auto ref = fn();
  k::set_backend(k::Backend::avx2);
  auto simd = fn();
  k::set_backend(prev);
  cmp(ref, simd);
}

}  // namespace

TEST_SUITE_BEGIN("kernels");

TEST_CASE("axpby matches the scalar reference across sizes") {
  Rng rng(11);
  for (std::size_t n : {std::size_t{0}, std::size_t{1}, std::size_t{7}, std::size_t{8},
                        std::size_t{9}, std::size_t{31}, std::size_t{128}, std::size_t{1000}}) {
    const auto x = random_vec(rng, n);
    const auto y = random_vec(rng, n);
    for_both_backends(
        [&] {
          std::vector<float> out(n);
          k::axpby(n, 0.37f, x.data(), -1.25f, y.data(), out.data());
          return out;
        },
        [&](const auto& a, const auto& b) { check_close(a, b, 1e-6); });
  }
}

TEST_CASE("dot and sum_sq_diff match the scalar path") {
  Rng rng(12);
  for (std::size_t n : {std::size_t{1}, std::size_t{16}, std::size_t{130}, std::size_t{4097}}) {
    const auto a = random_vec(rng, n);
    const auto b = random_vec(rng, n);
    for_both_backends([&] { return k::dot(n, a.data(), b.data()); },
                      [&](float r, float s) {
                        const double denom = std::max(std::abs((double)r), 1.0);
                        CHECK(std::abs((double)r - (double)s) / denom <= 1e-4);
                      });
    for_both_backends([&] { return k::sum_sq_diff(n, a.data(), b.data()); },
                      [&](double r, double s) {
                        // accumulation order differs between the backends
                        CHECK(std::abs(r - s) / std::max(r, 1e-12) <= 1e-9);
                      });
  }
}

TEST_CASE("lerp, axpy, ema, adam equivalence") {
  Rng rng(13);
  const std::size_t n = 257;
  const auto a = random_vec(rng, n);
  const auto b = random_vec(rng, n);
  std::vector<float> w(n);
  for (auto& x : w) x = static_cast<float>(rng.uniform());

  for_both_backends(
      [&] {
        std::vector<float> out(n);
        k::lerp(n, w.data(), a.data(), b.data(), out.data());
        return out;
      },
      [&](const auto& r, const auto& s) { check_close(r, s, 1e-6); });

  for_both_backends(
      [&] {
        std::vector<float> y = b;
        k::axpy(n, 0.618f, a.data(), y.data());
        return y;
      },
      [&](const auto& r, const auto& s) { check_close(r, s, 1e-6); });

  for_both_backends(
      [&] {
        std::vector<float> ema = a;
        k::ema_update(n, ema.data(), b.data(), 0.99f);
        return ema;
      },
      [&](const auto& r, const auto& s) { check_close(r, s, 1e-6); });

  const auto g = random_vec(rng, n, 0.1);
  for_both_backends(
      [&] {
        std::vector<float> wts = a, m(n, 0.01f), v(n, 0.002f);
        k::adam_step(n, wts.data(), g.data(), m.data(), v.data(), 1e-3f, 0.9f, 0.999f, 1e-8f,
                     0.5, 0.1);
        return wts;
      },
      [&](const auto& r, const auto& s) { check_close(r, s, 1e-5); });
}

TEST_CASE("kernel properties") {
  Rng rng(14);
  const std::size_t n = 64;
  const auto x = random_vec(rng, n);
  const auto y = random_vec(rng, n);

  SUBCASE("axpby with unit/zero coefficients") {
    std::vector<float> out(n);
    k::axpby(n, 1.0f, x.data(), 0.0f, y.data(), out.data());
    CHECK(out == x);
    k::axpby(n, 0.0f, x.data(), 1.0f, y.data(), out.data());
    CHECK(out == y);
  }

  SUBCASE("lerp endpoints") {
    std::vector<float> w0(n, 0.0f), w1(n, 1.0f), out(n);
    k::lerp(n, w1.data(), x.data(), y.data(), out.data());
    CHECK(out == x);
    k::lerp(n, w0.data(), x.data(), y.data(), out.data());
    CHECK(out == y);
  }

  SUBCASE("sum_sq_diff of identical vectors is zero") {
    CHECK(k::sum_sq_diff(n, x.data(), x.data()) == 0.0);
  }

  SUBCASE("dot against double accumulation") {
    double ref = 0.0;
    for (std::size_t i = 0; i < n; ++i) ref += (double)x[i] * (double)y[i];
    CHECK(std::abs(k::dot(n, x.data(), y.data()) - ref) <= 1e-4 * std::max(1.0, std::abs(ref)));
  }

  SUBCASE("adam with zero gradient and zero moments leaves weights alone") {
    std::vector<float> w = x, g(n, 0.0f), m(n, 0.0f), v(n, 0.0f);
    k::adam_step(n, w.data(), g.data(), m.data(), v.data(), 1e-3f, 0.9f, 0.999f, 1e-8f, 0.1,
                 0.001);
    CHECK(w == x);
  }

  SUBCASE("ema with decay 0 copies the source") {
    std::vector<float> ema = x;
    k::ema_update(n, ema.data(), y.data(), 0.0f);
    CHECK(ema == y);
  }

  SUBCASE("silu values and derivative against central differences") {
    std::vector<float> z = {-4.0f, -1.0f, 0.0f, 0.5f, 3.0f};
    std::vector<float> out(z.size());
    k::silu(z.size(), z.data(), out.data());
    CHECK(out[2] == 0.0f);
    CHECK(out[4] == doctest::Approx(3.0 / (1.0 + std::exp(-3.0))).epsilon(1e-6));
    std::vector<float> ones(z.size(), 1.0f), grad(z.size());
    k::silu_backward(z.size(), z.data(), ones.data(), grad.data());
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double h = 1e-3;
      const double zp = (z[i] + h) / (1.0 + std::exp(-(z[i] + h)));
      const double zm = (z[i] - h) / (1.0 + std::exp(-(z[i] - h)));
      CHECK(grad[i] == doctest::Approx((zp - zm) / (2 * h)).epsilon(1e-4));
    }
  }
}

TEST_CASE("backend switch is observable and reversible") {
  const k::Backend prev = k::active_backend();
  k::set_backend(k::Backend::scalar);
  CHECK(std::string(k::backend_name()) == "scalar");
  if (k::avx2_available()) {
    k::set_backend(k::Backend::avx2);
    CHECK(std::string(k::backend_name()) == "avx2");
  } else {
    CHECK_THROWS(k::set_backend(k::Backend::avx2));
  }
  k::set_backend(prev);
}

TEST_SUITE_END();
