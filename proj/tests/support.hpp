#pragma once

// Shared fixtures for the heavier behavioral tests: a small dual-output
// model trained once per test-binary run on gauss8.

#include "dualdiff/datasets.hpp"
#include "dualdiff/denoiser.hpp"
#include "dualdiff/schedule.hpp"
#include "dualdiff/training.hpp"

namespace dualdiff::testsupport {

struct TrainedToy {
  NoiseSchedule schedule;
  MlpParams params;
  FloatMat heldout;
};

inline const TrainedToy& trained_toy() {
  static const TrainedToy fixture = [] {
    TrainedToy f{make_linear(100, 1e-3, 0.2), init_params(2, 32, 16, 13),
                 dataset_sample("gauss8", 2000, 555)};
    AdamState opt;
    Rng rng(13, 1);
    TrainConfig cfg;
    // the r head only sees weak gradients at deep timesteps, so the fixture
    // needs the longer run for its interpolation profile to form
    for (long step = 1; step <= 12000; ++step) {
      const FloatMat batch =
          dataset_sample("gauss8", 64, splitmix64(13 + 0x9e3779b97f4a7c15ull * step));
      train_step(f.params, opt, batch, f.schedule, rng, cfg);
    }
    return f;
  }();
  return fixture;
}

}  // namespace dualdiff::testsupport
