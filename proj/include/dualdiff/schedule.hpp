#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace dualdiff {

// Per-timestep scalars of a noising schedule. Everything is derived from the
// beta sequence at construction and immutable afterwards; timesteps are
// 1-based (t in [1, T]) with the convention alpha_bar(0) = 1 so the t = 1
// formulas need no special case.
//
// All scalars are kept in double: the alpha_bar product loses meaningful
// precision in float over 1000 steps.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> betas;           // beta_t, index t-1
  std::vector<double> alphas;          // 1 - beta_t
  std::vector<double> alpha_bars;      // prod_{s<=t} alpha_s
  std::vector<double> alpha_bar_prev;  // alpha_bar_{t-1}, alpha_bar_0 := 1
  std::vector<double> betas_tilde;     // (1-abar_{t-1})/(1-abar_t) * beta_t
  // Original 1-based timesteps behind each entry of a respaced schedule;
  // empty for a schedule that was never respaced.
  std::vector<int> source_indices;

  std::string kind = "custom";  // linear | cosine | custom | respaced
  nlohmann::json params;

  double beta(int t) const { return betas[check(t)]; }
  double alpha(int t) const { return alphas[check(t)]; }
  double alpha_bar(int t) const { return alpha_bars[check(t)]; }
  double alpha_bar_before(int t) const { return alpha_bar_prev[check(t)]; }
  double beta_tilde(int t) const { return betas_tilde[check(t)]; }

  // Timestep to condition the model on: the original schedule position when
  // respaced, t itself otherwise.
  int source_timestep(int t) const {
    return source_indices.empty() ? t : source_indices[check(t)];
  }

  void validate() const;

  nlohmann::json to_json() const;
  static NoiseSchedule from_json(const nlohmann::json& j);

 private:
  std::size_t check(int t) const;
};

NoiseSchedule make_linear(int T, double beta_start, double beta_end);
NoiseSchedule make_cosine(int T, double s);
NoiseSchedule make_from_betas(std::vector<double> betas);

// Picks K timesteps at uniform stride: original index round((j+1)*T/K) - 1
// for j = 0..K-1 (0-based), so the final timestep is always kept. K == T is
// an exact copy.
NoiseSchedule respace(const NoiseSchedule& s, int K);

// One warning per timestep whose alpha_bar or 1 - alpha_bar sits below the
// floor; such schedules need the stability guard during sampling.
std::vector<std::string> guard_stability(const NoiseSchedule& s, double floor = 1e-8);

}  // namespace dualdiff
