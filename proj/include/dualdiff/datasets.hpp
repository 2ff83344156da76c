#pragma once

#include <cstdint>
#include <string>

#include "dualdiff/common.hpp"

namespace dualdiff {

struct DatasetParams {
  float point_value = 0.0f;  // constant for the "point" dataset
  int point_dim = 2;
};

// gauss8     mixture of 8 sigma-0.1 Gaussians on the unit circle (D = 2)
// swissroll  2-D spiral scaled into the unit disc
// checkerboard  uniform on the dark unit squares of [-2, 2]^2
// point      the constant vector c
// image8     procedural 8x8 patterns in [-1, 1] (D = 64)
FloatMat dataset_sample(const std::string& name, std::size_t n, std::uint64_t seed,
                        const DatasetParams& params = {});

int dataset_dim(const std::string& name, const DatasetParams& params = {});

}  // namespace dualdiff
