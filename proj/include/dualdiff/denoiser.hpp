#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dualdiff/common.hpp"
#include "dualdiff/schedule.hpp"

namespace dualdiff {

// The three heads produced by one denoiser evaluation. r is the
// interpolation weight squashed to (0, 1); the bundled network emits one
// scalar r per sample (its output layer is fixed at 2D+1 channels).
struct ModelOutput {
  std::vector<float> eps_hat;
  std::vector<float> x_hat;
  std::vector<float> r;
};

// Anything that can act as the denoiser: the trained network, the Bayes
// oracle for a single-point dataset, or a test stub. Called with (x_t, t)
// where t is the original-schedule timestep.
using DenoiserFn = std::function<ModelOutput(std::span<const float>, int)>;

// Fully-connected net: input layer (D+E -> H), two hidden layers (H -> H),
// output layer (H -> 2D+1), SiLU activations on all but the output. All
// weights live in one flat vector so the optimizer and EMA can treat the
// model as a single array.
template <class T>
struct MlpParamsT {
  int data_dim = 0;
  int hidden = 0;
  int embed = 0;
  // Bumped on every in-place mutation; lets backward() reject stale caches.
  std::uint64_t version = 0;
  std::vector<T> theta;

  struct LayerView {
    std::size_t w = 0;  // offset of the (out x in) row-major weight block
    std::size_t b = 0;  // offset of the bias
    int out = 0;
    int in = 0;
  };
  std::array<LayerView, 4> layer{};

  int out_width() const { return 2 * data_dim + 1; }
  const T* w(int l) const { return theta.data() + layer[l].w; }
  T* w(int l) { return theta.data() + layer[l].w; }
  const T* b(int l) const { return theta.data() + layer[l].b; }
  T* b(int l) { return theta.data() + layer[l].b; }
};

using MlpParams = MlpParamsT<float>;

template <class T>
struct ForwardCacheT {
  std::uint64_t version = 0;
  const void* owner = nullptr;
  int t = 0;
  std::vector<T> input;
  std::array<std::vector<T>, 3> z;
  std::array<std::vector<T>, 3> a;
  std::vector<T> out_raw;
  T r = 0;
};

using ForwardCache = ForwardCacheT<float>;

// Gradients of the scalar loss with respect to the squashed model outputs.
struct OutputGradsT {
  std::vector<double> d_eps;
  std::vector<double> d_x;
  double d_r = 0.0;
};

MlpParams init_params(int D, int H, int E, std::uint64_t seed);
std::size_t param_count(int D, int H, int E);

// Sinusoidal conditioning: pairs (sin, cos) of t at frequencies 10000^(-2i/E).
std::vector<float> time_embedding(int t, int T, int E);

template <class T>
struct ModelOutputT {
  std::vector<T> eps_hat, x_hat, r;
};

template <class T>
ModelOutputT<T> mlp_forward(const MlpParamsT<T>& p, std::span<const T> x, int t,
                            ForwardCacheT<T>* cache = nullptr);

// Exact reverse-mode gradients, accumulated into grad (same layout as theta).
template <class T>
void mlp_backward(const MlpParamsT<T>& p, const ForwardCacheT<T>& cache,
                  const OutputGradsT& grads, std::span<T> grad);

ModelOutput forward(const MlpParams& p, std::span<const float> x, int t,
                    ForwardCache* cache = nullptr);

MlpParamsT<double> to_double(const MlpParams& p);

DenoiserFn make_denoiser_fn(const MlpParams& p);

// Bayes-optimal heads for the single-point dataset {c}: x_hat = c,
// eps_hat = (x_t - sqrt(abar_t) c) / sqrt(1 - abar_t), r = 0.5.
DenoiserFn oracle_denoiser(std::vector<float> c, NoiseSchedule s,
                           StabilityGuard guard = {true, 1e-8});

struct CheckpointMeta {
  std::uint64_t seed = 0;
  long step = 0;
  std::string kind = "raw";  // raw | ema
  nlohmann::json schedule;
  std::string config_hash;
};

void save_checkpoint(const std::string& path, const MlpParams& p, const CheckpointMeta& meta);
std::pair<MlpParams, CheckpointMeta> load_checkpoint(const std::string& path);

}  // namespace dualdiff
