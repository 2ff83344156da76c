#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dualdiff {

// Row-major sample matrix: rows = samples, cols = dimension.
struct FloatMat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> v;

  FloatMat() = default;
  FloatMat(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0f) {}

  float* row(std::size_t i) { return v.data() + i * cols; }
  const float* row(std::size_t i) const { return v.data() + i * cols; }
  std::span<float> row_span(std::size_t i) { return {row(i), cols}; }
  std::span<const float> row_span(std::size_t i) const { return {row(i), cols}; }
  std::size_t size() const { return v.size(); }
  bool empty() const { return rows == 0; }
};

inline bool all_finite(std::span<const float> x) {
  for (float a : x)
    if (!std::isfinite(a)) return false;
  return true;
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Clamps division denominators that may collapse toward zero at the noisy
// end of a schedule. Disabled by default: out-of-range denominators are a
// hard error unless the caller opts in.
struct StabilityGuard {
  bool enabled = false;
  double floor = 1e-8;

  double den(double d, const char* what) const {
    if (d < floor) {
      if (!enabled)
        throw std::domain_error(std::string("stability guard: ") + what + " = " +
                                std::to_string(d) + " below floor " + std::to_string(floor) +
                                " (guard disabled)");
      return floor;
    }
    return d;
  }
};

}  // namespace dualdiff
