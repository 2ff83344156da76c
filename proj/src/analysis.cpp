#include "dualdiff/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "dualdiff/forward_process.hpp"
#include "dualdiff/parameterization.hpp"
#include "dualdiff/rng.hpp"

namespace dualdiff {

namespace {

// Running mean/variance accumulator.
struct Welford {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double var() const { return n > 0 ? m2 / static_cast<double>(n) : 0.0; }
  double se() const { return n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0; }
};

double w1_sorted(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() == b.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
  }
  // Unequal sample counts: integrate |F_a - F_b| over the merged support.
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double fa = 0.0, fb = 0.0, w = 0.0;
  double prev = 0.0;
  bool first = true;
  while (i < a.size() || j < b.size()) {
    double x;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j]))
      x = a[i];
    else
      x = b[j];
    if (!first) w += std::abs(fa - fb) * (x - prev);
    first = false;
    while (i < a.size() && a[i] == x) {
      fa += 1.0 / na;
      ++i;
    }
    while (j < b.size() && b[j] == x) {
      fb += 1.0 / nb;
      ++j;
    }
    prev = x;
  }
  return w;
}

void check_model_output(const ModelOutput& out, int t, const char* where) {
  if (!all_finite(out.eps_hat) || !all_finite(out.x_hat) || !all_finite(out.r))
    throw std::runtime_error(std::string(where) + ": non-finite model output at t = " +
                             std::to_string(t));
}

std::uint64_t row_seed(std::uint64_t base, int K, int mode_idx) {
  return splitmix64(base ^ splitmix64(static_cast<std::uint64_t>(K) * 8 +
                                      static_cast<std::uint64_t>(mode_idx)));
}

}  // namespace

void CurveSet::validate() const {
  for (const auto& [name, values] : series)
    if (values.size() != t_values.size())
      throw std::logic_error("CurveSet: series '" + name + "' length != t axis length");
}

CurveSet per_timestep_losses(const DenoiserFn& model, const FloatMat& data,
                             const NoiseSchedule& s, int n_per_t, std::uint64_t seed,
                             const StabilityGuard& guard) {
  require(!data.empty(), "per_timestep_losses: empty dataset");
  require(n_per_t >= 2, "per_timestep_losses: n_per_t too small");
  const std::size_t D = data.cols;

  static const char* names[6] = {"mu_loss_x",  "mu_loss_eps", "eps_loss_eps",
                                 "eps_loss_x", "x0_loss_x",   "x0_loss_eps"};
  CurveSet cs;
  for (const char* n : names) {
    cs.series[n] = {};
    cs.series[std::string(n) + "_se"] = {};
  }

  Rng rng(seed);
  std::vector<float> x_t(D), eps(D);
  for (int t = 1; t <= s.T; ++t) {
    Welford acc[6];
    const double abar = s.alpha_bar(t);
    const double abar_prev = s.alpha_bar_before(t);
    const double denom = guard.den(1.0 - abar, "1 - alpha_bar");
    const double post_x0 = std::sqrt(abar_prev) * s.beta(t) / denom;
    const double post_xt = std::sqrt(s.alpha(t)) * (1.0 - abar_prev) / denom;
    const double eps_xt = 1.0 / std::sqrt(s.alpha(t));
    const double eps_e = (1.0 - s.alpha(t)) / (std::sqrt(denom) * std::sqrt(s.alpha(t)));
    const double inv_sq = 1.0 / std::sqrt(denom);
    const double inv_sa = 1.0 / std::sqrt(guard.den(abar, "alpha_bar"));

    for (int k = 0; k < n_per_t; ++k) {
      const float* x0 = data.row(static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<int>(data.rows) - 1)));
      rng.fill_normal(eps.data(), D);
      fwd::q_sample({x0, D}, t, eps, s, x_t);
      const ModelOutput out = model(x_t, s.source_timestep(t));
      check_model_output(out, t, "per_timestep_losses");

      double sums[6] = {0, 0, 0, 0, 0, 0};
      for (std::size_t d = 0; d < D; ++d) {
        const double xh = out.x_hat[d];
        const double eh = out.eps_hat[d];
        const double mu_target = post_x0 * x0[d] + post_xt * x_t[d];
        const double mu_x = post_xt * x_t[d] + post_x0 * xh;
        const double mu_e = eps_xt * x_t[d] - eps_e * eh;
        const double eps_from_x = (x_t[d] - std::sqrt(abar) * xh) * inv_sq;
        const double x0_from_eps = (x_t[d] - std::sqrt(1.0 - abar) * eh) * inv_sa;
        const double diffs[6] = {mu_x - mu_target,       mu_e - mu_target,
                                 eh - eps[d],            eps_from_x - eps[d],
                                 xh - x0[d],             x0_from_eps - x0[d]};
        for (int q = 0; q < 6; ++q) sums[q] += diffs[q] * diffs[q];
      }
      for (int q = 0; q < 6; ++q) acc[q].add(sums[q] / static_cast<double>(D));
    }
    cs.t_values.push_back(t);
    for (int q = 0; q < 6; ++q) {
      cs.series[names[q]].push_back(acc[q].mean);
      cs.series[std::string(names[q]) + "_se"].push_back(acc[q].se());
    }
  }
  cs.validate();
  return cs;
}

CurveSet predicted_x0_stats(const DenoiserFn& model, const NoiseSchedule& s,
                            std::size_t n_samples, const SamplerConfig& cfg, int data_dim,
                            const FloatMat& reference) {
  require(n_samples >= 2, "predicted_x0_stats: need at least 2 samples");
  require(!reference.empty(), "predicted_x0_stats: empty reference data");
  const NoiseSchedule rs = respace(s, cfg.steps);
  const std::size_t K = static_cast<std::size_t>(cfg.steps);

  std::vector<Welford> acc_eps(K), acc_x(K);
  std::vector<float> x0_eps(static_cast<std::size_t>(data_dim));

  const StepObserver observer = [&](int step_index, int t, std::span<const float> x_t,
                                    const StepResult& step) {
    fwd::backtrace_x0(x_t, step.model_out.eps_hat, t, rs, x0_eps, cfg.guard);
    const std::vector<float> xc =
        clamp_x0(step.model_out.x_hat, cfg.clamp_lo, cfg.clamp_hi, cfg.clamp_enabled);
    for (std::size_t d = 0; d < x0_eps.size(); ++d) {
      acc_eps[step_index].add(x0_eps[d]);
      acc_x[step_index].add(xc[d]);
    }
  };
  generate(model, s, cfg, n_samples, data_dim, false, observer);

  double ref_mean = 0.0, ref_var = 0.0;
  {
    Welford w;
    for (float v : reference.v) w.add(v);
    ref_mean = w.mean;
    ref_var = w.var();
  }

  CurveSet cs;
  for (std::size_t j = 0; j < K; ++j) {
    cs.t_values.push_back(rs.source_timestep(static_cast<int>(K - j)));
    cs.series["pred_x0_mean_eps"].push_back(acc_eps[j].mean);
    cs.series["pred_x0_mean_eps_se"].push_back(acc_eps[j].se());
    cs.series["pred_x0_var_eps"].push_back(acc_eps[j].var());
    cs.series["pred_x0_mean_x"].push_back(acc_x[j].mean);
    cs.series["pred_x0_mean_x_se"].push_back(acc_x[j].se());
    cs.series["pred_x0_var_x"].push_back(acc_x[j].var());
    cs.series["data_mean"].push_back(ref_mean);
    cs.series["data_var"].push_back(ref_var);
  }
  cs.validate();
  return cs;
}

CurveSet r_trajectory_stats(const std::vector<Trajectory>& trajectories) {
  require(!trajectories.empty(), "r_trajectory_stats: no trajectories");
  const std::size_t K = trajectories.front().r_values.size();
  require(K > 0, "r_trajectory_stats: trajectories carry no r values");
  for (const Trajectory& tr : trajectories)
    require(tr.r_values.size() == K, "r_trajectory_stats: inconsistent trajectory lengths");

  CurveSet cs;
  for (std::size_t j = 0; j < K; ++j) {
    double mn = 1e300, mx = -1e300, sum = 0.0;
    std::size_t cnt = 0;
    for (const Trajectory& tr : trajectories) {
      // multi-element r collapses to its mean for the step statistic
      double v = 0.0;
      for (float r : tr.r_values[j]) v += r;
      v /= static_cast<double>(tr.r_values[j].size());
      mn = std::min(mn, v);
      mx = std::max(mx, v);
      sum += v;
      ++cnt;
    }
    cs.t_values.push_back(static_cast<int>(j));
    cs.series["r_mean"].push_back(sum / static_cast<double>(cnt));
    cs.series["r_min"].push_back(mn);
    cs.series["r_max"].push_back(mx);
  }
  cs.validate();
  return cs;
}

double sliced_wasserstein(const FloatMat& A, const FloatMat& B, int n_proj,
                          std::uint64_t seed) {
  require(A.cols == B.cols, "sliced_wasserstein: dimension mismatch");
  require(!A.empty() && !B.empty(), "sliced_wasserstein: empty sample set");
  require(n_proj >= 32, "sliced_wasserstein: need n_proj >= 32");
  const std::size_t D = A.cols;

  Rng rng(seed);
  std::vector<double> dir(D);
  std::vector<double> pa(A.rows), pb(B.rows);
  double total = 0.0;
  for (int p = 0; p < n_proj; ++p) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (std::size_t d = 0; d < D; ++d) {
        dir[d] = rng.normal();
        norm += dir[d] * dir[d];
      }
      norm = std::sqrt(norm);
    } while (norm < 1e-12);
    for (std::size_t d = 0; d < D; ++d) dir[d] /= norm;

    for (std::size_t i = 0; i < A.rows; ++i) {
      const float* r = A.row(i);
      double s = 0.0;
      for (std::size_t d = 0; d < D; ++d) s += r[d] * dir[d];
      pa[i] = s;
    }
    for (std::size_t i = 0; i < B.rows; ++i) {
      const float* r = B.row(i);
      double s = 0.0;
      for (std::size_t d = 0; d < D; ++d) s += r[d] * dir[d];
      pb[i] = s;
    }
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    total += w1_sorted(pa, pb);
  }
  return total / static_cast<double>(n_proj);
}

std::vector<CompareRow> compare_paths_report(const DenoiserFn& model, const NoiseSchedule& s,
                                             const std::vector<int>& step_counts,
                                             const SamplerConfig& base, const FloatMat& heldout,
                                             std::size_t n_samples, int n_proj, int data_dim,
                                             int n_profile_trajectories) {
  require(!step_counts.empty(), "compare_paths_report: no step counts");
  require(n_profile_trajectories >= 1, "compare_paths_report: need profile trajectories");
  const PathMode modes[4] = {PathMode::dual, PathMode::fixed_r, PathMode::eps_only,
                             PathMode::x_only};
  std::vector<CompareRow> rows;
  for (int K : step_counts) {
    // learn the frozen profile for this K from a recorded dual run
    SamplerConfig profile_cfg = base;
    profile_cfg.mode = PathMode::dual;
    profile_cfg.fixed_r_profile.clear();
    profile_cfg.steps = K;
    profile_cfg.seed = row_seed(base.seed, K, 7);
    const GenerateResult profile_run = generate(
        model, s, profile_cfg, static_cast<std::size_t>(n_profile_trajectories), data_dim, true);
    const CurveSet r_stats = r_trajectory_stats(profile_run.trajectories);
    const std::vector<float> profile =
        fixed_r_profile_from_stats(r_stats.series.at("r_mean"), K);

    for (int m = 0; m < 4; ++m) {
      SamplerConfig cfg = base;
      cfg.mode = modes[m];
      cfg.steps = K;
      cfg.fixed_r_profile = (modes[m] == PathMode::fixed_r) ? profile : std::vector<float>{};
      // one generation seed across every row: all modes and step counts see
      // the same x_T population, so their scores are paired comparisons
      cfg.seed = splitmix64(base.seed ^ 0x9e3779b97f4a7c15ull);
      const GenerateResult run = generate(model, s, cfg, n_samples, data_dim, false);
      CompareRow row;
      row.steps = K;
      row.mode = modes[m];
      row.seed = cfg.seed;
      row.n_samples = n_samples;
      row.swd = sliced_wasserstein(run.samples, heldout, n_proj, base.seed);
      rows.push_back(row);
    }
  }
  return rows;
}

void write_curveset_csv(const std::string& path, const CurveSet& curves,
                        const std::string& annotation) {
  curves.validate();
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  if (!annotation.empty()) f << "# " << annotation << "\n";
  f << "t";
  for (const auto& [name, values] : curves.series) f << "," << name;
  f << "\n";
  char buf[48];
  for (std::size_t i = 0; i < curves.t_values.size(); ++i) {
    f << curves.t_values[i];
    for (const auto& [name, values] : curves.series) {
      std::snprintf(buf, sizeof(buf), ",%.9g", values[i]);
      f << buf;
    }
    f << "\n";
  }
}

void write_compare_csv(const std::string& path, const std::vector<CompareRow>& rows,
                       const std::string& annotation) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  if (!annotation.empty()) f << "# " << annotation << "\n";
  f << "steps,mode,swd,n_samples,seed\n";
  char buf[64];
  for (const CompareRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.9g", r.swd);
    f << r.steps << "," << to_string(r.mode) << "," << buf << "," << r.n_samples << ","
      << r.seed << "\n";
  }
}

nlohmann::json compare_report_json(const std::vector<CompareRow>& rows,
                                   const nlohmann::json& config_echo) {
  nlohmann::json j;
  j["config"] = config_echo;
  j["rows"] = nlohmann::json::array();
  for (const CompareRow& r : rows) {
    j["rows"].push_back({{"steps", r.steps},
                         {"mode", to_string(r.mode)},
                         {"swd", r.swd},
                         {"n_samples", r.n_samples},
                         {"seed", r.seed}});
  }
  return j;
}

}  // namespace dualdiff
