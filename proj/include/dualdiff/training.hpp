#pragma once

#include <array>
#include <ostream>
#include <span>
#include <vector>

#include "dualdiff/common.hpp"
#include "dualdiff/denoiser.hpp"
#include "dualdiff/rng.hpp"
#include "dualdiff/schedule.hpp"

namespace dualdiff {

struct LossBreakdown {
  double l_eps = 0.0;
  double l_x = 0.0;
  double l_mu = 0.0;
  double total = 0.0;
  std::array<double, 3> lambdas{1.0, 1.0, 1.0};
  double mean_r = 0.0;
};

struct TrainConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double lambda_eps = 1.0;
  double lambda_x = 1.0;
  double lambda_mu = 1.0;
};

struct AdamState {
  std::vector<float> m;
  std::vector<float> v;
  long step = 0;
};

// Mean squared error over all elements.
double loss_eps(std::span<const float> eps_true, std::span<const float> eps_hat);
double loss_x(std::span<const float> x0_true, std::span<const float> x_hat);

// The interpolation loss with both mean estimates detached: only r receives
// gradient. r has size 1 (shared) or one weight per element; d_r matches.
struct MuLossResult {
  double loss = 0.0;
  std::vector<double> d_r;
};
MuLossResult loss_mu_stopgrad(std::span<const float> x_t, std::span<const float> x0_true,
                              std::span<const float> eps_hat, std::span<const float> x_hat,
                              std::span<const float> r, int t, const NoiseSchedule& s,
                              const StabilityGuard& guard = {});

LossBreakdown total_loss(double l_eps, double l_x, double l_mu,
                         const std::array<double, 3>& lambdas);

// One batch worth of fixed random draws: per-sample timestep, noise, and the
// noised state. Keeping these explicit makes every loss evaluation a pure
// function of the parameters.
struct TrainBatch {
  FloatMat x0;
  std::vector<int> ts;
  FloatMat eps;
  FloatMat x_t;
};

TrainBatch make_train_batch(const FloatMat& x0, const NoiseSchedule& s, Rng& rng);

// Detached mean estimates captured at a reference parameter point, used to
// evaluate the loss as finite-difference oracles see it: the stop-graded
// values are constants of the graph and must not move with the perturbation.
struct FrozenMus {
  std::vector<std::vector<double>> mu_x;
  std::vector<std::vector<double>> mu_eps;
};

// Loss over a batch; optionally accumulates parameter gradients into `grad`
// (zeroed by the caller) and fills `breakdown`. The double instantiation
// backs the gradient-checking oracle.
template <class T>
double batch_loss(const MlpParamsT<T>& p, const TrainBatch& batch, const NoiseSchedule& s,
                  const TrainConfig& cfg, const StabilityGuard& guard = {},
                  LossBreakdown* breakdown = nullptr, std::span<T> grad = {},
                  const FrozenMus* frozen = nullptr, FrozenMus* capture = nullptr);

// Draws (t, eps) per sample, runs forward/backward, applies one Adam update.
// Throws on a non-finite loss.
LossBreakdown train_step(MlpParams& p, AdamState& opt, const FloatMat& x0,
                         const NoiseSchedule& s, Rng& rng, const TrainConfig& cfg,
                         const StabilityGuard& guard = {});

void ema_update(MlpParams& ema, const MlpParams& p, double decay);

void write_train_log_header(std::ostream& os);
void append_train_log(std::ostream& os, long step, const LossBreakdown& lb);

}  // namespace dualdiff
