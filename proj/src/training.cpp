#include "dualdiff/training.hpp"

#include <cmath>
#include <cstdio>

#include "dualdiff/forward_process.hpp"
#include "dualdiff/kernels.hpp"

namespace dualdiff {

namespace {

struct StepCoefs {
  double post_x0, post_xt;   // posterior mean
  double eps_xt, eps_e;      // subtractive mean: eps_xt * x_t - eps_e * eps_hat
};

StepCoefs step_coefs(const NoiseSchedule& s, int t, const StabilityGuard& guard) {
  const double abar = s.alpha_bar(t);
  const double abar_prev = s.alpha_bar_before(t);
  const double alpha = s.alpha(t);
  const double denom = guard.den(1.0 - abar, "1 - alpha_bar");
  StepCoefs c;
  c.post_x0 = std::sqrt(abar_prev) * s.beta(t) / denom;
  c.post_xt = std::sqrt(alpha) * (1.0 - abar_prev) / denom;
  c.eps_xt = 1.0 / std::sqrt(alpha);
  c.eps_e = (1.0 - alpha) / (std::sqrt(denom) * std::sqrt(alpha));
  return c;
}

void check_same_shape(std::size_t a, std::size_t b, const char* op) {
  if (a != b) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

double loss_eps(std::span<const float> eps_true, std::span<const float> eps_hat) {
  check_same_shape(eps_true.size(), eps_hat.size(), "loss_eps");
  require(!eps_true.empty(), "loss_eps: empty input");
  return kernels::sum_sq_diff(eps_true.size(), eps_true.data(), eps_hat.data()) /
         static_cast<double>(eps_true.size());
}

double loss_x(std::span<const float> x0_true, std::span<const float> x_hat) {
  check_same_shape(x0_true.size(), x_hat.size(), "loss_x");
  require(!x0_true.empty(), "loss_x: empty input");
  return kernels::sum_sq_diff(x0_true.size(), x0_true.data(), x_hat.data()) /
         static_cast<double>(x0_true.size());
}

MuLossResult loss_mu_stopgrad(std::span<const float> x_t, std::span<const float> x0_true,
                              std::span<const float> eps_hat, std::span<const float> x_hat,
                              std::span<const float> r, int t, const NoiseSchedule& s,
                              const StabilityGuard& guard) {
  const std::size_t n = x_t.size();
  check_same_shape(n, x0_true.size(), "loss_mu_stopgrad");
  check_same_shape(n, eps_hat.size(), "loss_mu_stopgrad");
  check_same_shape(n, x_hat.size(), "loss_mu_stopgrad");
  if (r.size() != 1 && r.size() != n)
    throw std::invalid_argument("loss_mu_stopgrad: r must have size 1 or match the data");
  const StepCoefs c = step_coefs(s, t, guard);

  MuLossResult out;
  out.d_r.assign(r.size(), 0.0);
  double loss_sum = 0.0;
  double d_shared = 0.0;
  for (std::size_t d = 0; d < n; ++d) {
    const double mu_target = c.post_x0 * x0_true[d] + c.post_xt * x_t[d];
    const double mu_x = c.post_xt * x_t[d] + c.post_x0 * x_hat[d];
    const double mu_e = c.eps_xt * x_t[d] - c.eps_e * eps_hat[d];
    const double w = r.size() == 1 ? r[0] : r[d];
    const double mix = w * mu_x + (1.0 - w) * mu_e;
    const double resid = mix - mu_target;
    loss_sum += resid * resid;
    const double g = 2.0 * resid * (mu_x - mu_e) / static_cast<double>(n);
    if (r.size() == 1)
      d_shared += g;
    else
      out.d_r[d] = g;
  }
  if (r.size() == 1) out.d_r[0] = d_shared;
  out.loss = loss_sum / static_cast<double>(n);
  return out;
}

LossBreakdown total_loss(double l_eps, double l_x, double l_mu,
                         const std::array<double, 3>& lambdas) {
  for (double l : lambdas) require(l >= 0.0, "total_loss: lambdas must be >= 0");
  LossBreakdown lb;
  lb.l_eps = l_eps;
  lb.l_x = l_x;
  lb.l_mu = l_mu;
  lb.lambdas = lambdas;
  lb.total = lambdas[0] * l_eps + lambdas[1] * l_x + lambdas[2] * l_mu;
  return lb;
}

TrainBatch make_train_batch(const FloatMat& x0, const NoiseSchedule& s, Rng& rng) {
  require(x0.rows > 0 && x0.cols > 0, "make_train_batch: empty batch");
  TrainBatch b;
  b.x0 = x0;
  b.ts.resize(x0.rows);
  b.eps = FloatMat(x0.rows, x0.cols);
  b.x_t = FloatMat(x0.rows, x0.cols);
  for (std::size_t i = 0; i < x0.rows; ++i) {
    b.ts[i] = rng.uniform_int(1, s.T);
    rng.fill_normal(b.eps.row(i), x0.cols);
    fwd::q_sample(x0.row_span(i), b.ts[i], b.eps.row_span(i), s, b.x_t.row_span(i));
  }
  return b;
}

template <class T>
double batch_loss(const MlpParamsT<T>& p, const TrainBatch& batch, const NoiseSchedule& s,
                  const TrainConfig& cfg, const StabilityGuard& guard,
                  LossBreakdown* breakdown, std::span<T> grad, const FrozenMus* frozen,
                  FrozenMus* capture) {
  const std::size_t B = batch.x0.rows;
  const std::size_t D = batch.x0.cols;
  require(B > 0, "batch_loss: empty batch");
  if (capture) {
    capture->mu_x.assign(B, std::vector<double>(D, 0.0));
    capture->mu_eps.assign(B, std::vector<double>(D, 0.0));
  }

  double sum_eps = 0.0, sum_x = 0.0, sum_mu = 0.0, sum_r = 0.0;
  const double elem_scale = 1.0 / static_cast<double>(B * D);

  ForwardCacheT<T> cache;
  std::vector<T> x_in(D);
  OutputGradsT og;
  og.d_eps.resize(D);
  og.d_x.resize(D);

  for (std::size_t i = 0; i < B; ++i) {
    const int t = batch.ts[i];
    const float* x_t = batch.x_t.row(i);
    const float* x0 = batch.x0.row(i);
    const float* eps = batch.eps.row(i);
    for (std::size_t d = 0; d < D; ++d) x_in[d] = static_cast<T>(x_t[d]);

    const ModelOutputT<T> out = mlp_forward<T>(p, x_in, s.source_timestep(t), &cache);
    const double r = static_cast<double>(out.r[0]);
    sum_r += r;

    const StepCoefs c = step_coefs(s, t, guard);
    double d_r = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      const double eh = static_cast<double>(out.eps_hat[d]);
      const double xh = static_cast<double>(out.x_hat[d]);
      const double de = eh - static_cast<double>(eps[d]);
      const double dx = xh - static_cast<double>(x0[d]);
      sum_eps += de * de;
      sum_x += dx * dx;

      double mu_x = c.post_xt * x_t[d] + c.post_x0 * xh;
      double mu_e = c.eps_xt * x_t[d] - c.eps_e * eh;
      if (capture) {
        (*capture).mu_x[i][d] = mu_x;
        (*capture).mu_eps[i][d] = mu_e;
      }
      if (frozen) {
        mu_x = frozen->mu_x[i][d];
        mu_e = frozen->mu_eps[i][d];
      }
      const double mu_target = c.post_x0 * x0[d] + c.post_xt * x_t[d];
      const double resid = r * mu_x + (1.0 - r) * mu_e - mu_target;
      sum_mu += resid * resid;

      if (!grad.empty()) {
        og.d_eps[d] = cfg.lambda_eps * 2.0 * de * elem_scale;
        og.d_x[d] = cfg.lambda_x * 2.0 * dx * elem_scale;
        d_r += cfg.lambda_mu * 2.0 * resid * (mu_x - mu_e) * elem_scale;
      }
    }
    if (!grad.empty()) {
      og.d_r = d_r;
      mlp_backward<T>(p, cache, og, grad);
    }
  }

  const LossBreakdown lb = [&] {
    LossBreakdown l = total_loss(sum_eps * elem_scale, sum_x * elem_scale, sum_mu * elem_scale,
                                 {cfg.lambda_eps, cfg.lambda_x, cfg.lambda_mu});
    l.mean_r = sum_r / static_cast<double>(B);
    return l;
  }();
  if (breakdown) *breakdown = lb;
  return lb.total;
}

template double batch_loss<float>(const MlpParamsT<float>&, const TrainBatch&,
                                  const NoiseSchedule&, const TrainConfig&,
                                  const StabilityGuard&, LossBreakdown*, std::span<float>,
                                  const FrozenMus*, FrozenMus*);
template double batch_loss<double>(const MlpParamsT<double>&, const TrainBatch&,
                                   const NoiseSchedule&, const TrainConfig&,
                                   const StabilityGuard&, LossBreakdown*, std::span<double>,
                                   const FrozenMus*, FrozenMus*);

LossBreakdown train_step(MlpParams& p, AdamState& opt, const FloatMat& x0,
                         const NoiseSchedule& s, Rng& rng, const TrainConfig& cfg,
                         const StabilityGuard& guard) {
  require(static_cast<int>(x0.cols) == p.data_dim, "train_step: batch dim != model dim");
  const TrainBatch batch = make_train_batch(x0, s, rng);

  if (opt.m.empty()) {
    opt.m.assign(p.theta.size(), 0.0f);
    opt.v.assign(p.theta.size(), 0.0f);
  }
  require(opt.m.size() == p.theta.size(), "train_step: optimizer state size mismatch");

  std::vector<float> grad(p.theta.size(), 0.0f);
  LossBreakdown lb;
  batch_loss<float>(p, batch, s, cfg, guard, &lb, grad);

  if (!std::isfinite(lb.total))
    throw std::runtime_error(
        "train_step: non-finite loss at optimizer step " + std::to_string(opt.step + 1) +
        " (l_eps=" + std::to_string(lb.l_eps) + ", l_x=" + std::to_string(lb.l_x) +
        ", l_mu=" + std::to_string(lb.l_mu) + ")");

  opt.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.step));
  kernels::adam_step(p.theta.size(), p.theta.data(), grad.data(), opt.m.data(), opt.v.data(),
                     static_cast<float>(cfg.lr), static_cast<float>(cfg.beta1),
                     static_cast<float>(cfg.beta2), static_cast<float>(cfg.adam_eps), bc1, bc2);
  p.version += 1;
  return lb;
}

void ema_update(MlpParams& ema, const MlpParams& p, double decay) {
  require(decay >= 0.0 && decay < 1.0, "ema_update: decay outside [0, 1)");
  require(ema.theta.size() == p.theta.size(), "ema_update: parameter size mismatch");
  kernels::ema_update(p.theta.size(), ema.theta.data(), p.theta.data(),
                      static_cast<float>(decay));
  ema.version += 1;
}

void write_train_log_header(std::ostream& os) {
  os << "step,l_eps,l_x,l_mu,total,mean_r\n";
}

void append_train_log(std::ostream& os, long step, const LossBreakdown& lb) {
  char buf[192];
  std::snprintf(buf, sizeof(buf), "%ld,%.9g,%.9g,%.9g,%.9g,%.9g\n", step, lb.l_eps, lb.l_x,
                lb.l_mu, lb.total, lb.mean_r);
  os << buf;
}

}  // namespace dualdiff
