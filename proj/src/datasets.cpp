#include "dualdiff/datasets.hpp"

#include <cmath>
#include <numbers>

#include "dualdiff/rng.hpp"

namespace dualdiff {

namespace {

constexpr double kPi = std::numbers::pi;

void fill_gauss8(FloatMat& m, Rng& rng) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    const int k = rng.uniform_int(0, 7);
    const double ang = 2.0 * kPi * k / 8.0;
    m.row(i)[0] = static_cast<float>(std::cos(ang) + 0.1 * rng.normal());
    m.row(i)[1] = static_cast<float>(std::sin(ang) + 0.1 * rng.normal());
  }
}

void fill_swissroll(FloatMat& m, Rng& rng) {
  // Spiral from 1.5pi to 4.5pi, scaled so the outer arm touches radius 1.
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double t = 1.5 * kPi * (1.0 + 2.0 * rng.uniform());
    const double scale = 1.0 / (4.5 * kPi);
    m.row(i)[0] = static_cast<float>(t * std::cos(t) * scale);
    m.row(i)[1] = static_cast<float>(t * std::sin(t) * scale);
  }
}

void fill_checkerboard(FloatMat& m, Rng& rng) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    const int col = rng.uniform_int(0, 3);
    const int row = 2 * rng.uniform_int(0, 1) + (col % 2);  // (col + row) even
    m.row(i)[0] = static_cast<float>(-2.0 + col + rng.uniform());
    m.row(i)[1] = static_cast<float>(-2.0 + row + rng.uniform());
  }
}

void fill_image8(FloatMat& m, Rng& rng) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    float* px = m.row(i);
    const int family = rng.uniform_int(0, 3);
    const double freq = 0.5 + 1.5 * rng.uniform();
    const double phase = 2.0 * kPi * rng.uniform();
    const double contrast = 0.4 + 0.6 * rng.uniform();
    const double cx = 1.0 + 6.0 * rng.uniform();
    const double cy = 1.0 + 6.0 * rng.uniform();
    const double rad = 1.5 + 2.0 * rng.uniform();
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        double v = 0.0;
        switch (family) {
          case 0: v = std::sin(freq * y + phase); break;
          case 1: v = std::sin(freq * x + phase); break;
          case 2: v = ((x + y) % 2 == 0) ? 1.0 : -1.0; break;
          case 3: {
            const double dx = x - cx, dy = y - cy;
            v = (dx * dx + dy * dy < rad * rad) ? 1.0 : -1.0;
            break;
          }
        }
        px[y * 8 + x] = static_cast<float>(std::clamp(contrast * v, -1.0, 1.0));
      }
    }
  }
}

}  // namespace

int dataset_dim(const std::string& name, const DatasetParams& params) {
  if (name == "gauss8" || name == "swissroll" || name == "checkerboard") return 2;
  if (name == "point") return params.point_dim;
  if (name == "image8") return 64;
  throw std::invalid_argument("unknown dataset: " + name);
}

FloatMat dataset_sample(const std::string& name, std::size_t n, std::uint64_t seed,
                        const DatasetParams& params) {
  FloatMat m(n, static_cast<std::size_t>(dataset_dim(name, params)));
  Rng rng(seed);
  if (name == "gauss8") {
    fill_gauss8(m, rng);
  } else if (name == "swissroll") {
    fill_swissroll(m, rng);
  } else if (name == "checkerboard") {
    fill_checkerboard(m, rng);
  } else if (name == "point") {
    std::fill(m.v.begin(), m.v.end(), params.point_value);
  } else if (name == "image8") {
    fill_image8(m, rng);
  }
  return m;
}

}  // namespace dualdiff
