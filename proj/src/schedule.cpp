#include "dualdiff/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dualdiff/common.hpp"

namespace dualdiff {

namespace {

constexpr double kCosineBetaClip = 0.999;

void derive_from_betas(NoiseSchedule& s) {
  const int T = s.T;
  s.alphas.resize(T);
  s.alpha_bars.resize(T);
  s.alpha_bar_prev.resize(T);
  s.betas_tilde.resize(T);
  double abar = 1.0;
  for (int i = 0; i < T; ++i) {
    s.alphas[i] = 1.0 - s.betas[i];
    s.alpha_bar_prev[i] = abar;
    abar *= s.alphas[i];
    s.alpha_bars[i] = abar;
    s.betas_tilde[i] = (1.0 - s.alpha_bar_prev[i]) / (1.0 - s.alpha_bars[i]) * s.betas[i];
  }
}

}  // namespace

std::size_t NoiseSchedule::check(int t) const {
  if (t < 1 || t > T)
    throw std::out_of_range("NoiseSchedule: timestep " + std::to_string(t) +
                            " outside [1, " + std::to_string(T) + "]");
  return static_cast<std::size_t>(t - 1);
}

void NoiseSchedule::validate() const {
  require(T >= 1, "NoiseSchedule: T must be >= 1");
  require(static_cast<int>(betas.size()) == T, "NoiseSchedule: betas size != T");
  require(alpha_bar_prev[0] == 1.0, "NoiseSchedule: alpha_bar_0 must be 1");
  double prev = 1.0;
  for (int i = 0; i < T; ++i) {
    const double b = betas[i];
    if (!(b > 0.0 && b < 1.0) || !std::isfinite(b))
      throw std::domain_error("NoiseSchedule: beta_" + std::to_string(i + 1) +
                              " = " + std::to_string(b) + " outside (0, 1)");
    if (!(alpha_bars[i] < prev))
      throw std::domain_error("NoiseSchedule: alpha_bar not strictly decreasing at t = " +
                              std::to_string(i + 1));
    if (!(betas_tilde[i] <= betas[i]))
      throw std::domain_error("NoiseSchedule: beta_tilde > beta at t = " + std::to_string(i + 1));
    const double recomposed = alphas[i] * alpha_bar_prev[i];
    if (std::abs(recomposed - alpha_bars[i]) > 1e-12 * alpha_bars[i])
      throw std::domain_error("NoiseSchedule: alpha * alpha_bar_prev != alpha_bar at t = " +
                              std::to_string(i + 1));
    prev = alpha_bars[i];
  }
}

NoiseSchedule make_linear(int T, double beta_start, double beta_end) {
  require(T >= 2, "make_linear: T must be >= 2");
  require(std::isfinite(beta_start) && std::isfinite(beta_end),
          "make_linear: endpoints must be finite");
  require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
          "make_linear: need 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.T = T;
  s.kind = "linear";
  s.params = {{"beta_start", beta_start}, {"beta_end", beta_end}};
  s.betas.resize(T);
  for (int t = 1; t <= T; ++t) {
    // Two-sided lerp so both endpoints are hit exactly.
    const double w = static_cast<double>(t - 1) / static_cast<double>(T - 1);
    s.betas[t - 1] = (1.0 - w) * beta_start + w * beta_end;
  }
  derive_from_betas(s);
  s.validate();
  return s;
}

NoiseSchedule make_cosine(int T, double shift) {
  require(T >= 2, "make_cosine: T must be >= 2");
  require(std::isfinite(shift) && shift > 0.0, "make_cosine: s must be > 0");
  NoiseSchedule s;
  s.T = T;
  s.kind = "cosine";
  s.params = {{"s", shift}};
  s.betas.resize(T);
  auto f = [&](double u) {
    const double c = std::cos((u / T + shift) / (1.0 + shift) * std::numbers::pi / 2.0);
    return c * c;
  };
  double f_prev = f(0.0);
  for (int t = 1; t <= T; ++t) {
    const double f_t = f(static_cast<double>(t));
    s.betas[t - 1] = std::min(1.0 - f_t / f_prev, kCosineBetaClip);
    f_prev = f_t;
  }
  derive_from_betas(s);
  s.validate();
  return s;
}

NoiseSchedule make_from_betas(std::vector<double> betas) {
  require(!betas.empty(), "make_from_betas: empty beta sequence");
  NoiseSchedule s;
  s.T = static_cast<int>(betas.size());
  s.kind = "custom";
  s.betas = std::move(betas);
  derive_from_betas(s);
  s.validate();
  return s;
}

NoiseSchedule respace(const NoiseSchedule& s, int K) {
  require(K >= 1 && K <= s.T, "respace: need 1 <= K <= T");
  if (K == s.T) {
    // Identity respacing reproduces the schedule exactly instead of
    // re-deriving betas from alpha_bar ratios.
    NoiseSchedule r = s;
    if (r.source_indices.empty()) {
      r.source_indices.resize(K);
      for (int j = 0; j < K; ++j) r.source_indices[j] = j + 1;
    }
    return r;
  }
  NoiseSchedule r;
  r.T = K;
  r.kind = "respaced";
  r.params = {{"K", K}, {"base", s.to_json()}};
  r.betas.resize(K);
  r.alphas.resize(K);
  r.alpha_bars.resize(K);
  r.alpha_bar_prev.resize(K);
  r.betas_tilde.resize(K);
  r.source_indices.resize(K);
  double abar_prev = 1.0;
  for (int j = 0; j < K; ++j) {
    const int orig =
        static_cast<int>(std::llround((static_cast<double>(j + 1) * s.T) / K)) - 1;
    r.source_indices[j] = s.source_indices.empty() ? orig + 1 : s.source_indices[orig];
    const double abar = s.alpha_bars[orig];
    r.alpha_bars[j] = abar;
    r.alpha_bar_prev[j] = abar_prev;
    // alpha from the ratio, beta from alpha: 1 - (1 - q) would cancel when
    // the respaced step swallows almost the entire remaining signal.
    r.alphas[j] = abar / abar_prev;
    r.betas[j] = 1.0 - r.alphas[j];
    r.betas_tilde[j] = (1.0 - abar_prev) / (1.0 - abar) * r.betas[j];
    abar_prev = abar;
  }
  r.validate();
  return r;
}

std::vector<std::string> guard_stability(const NoiseSchedule& s, double floor) {
  require(floor > 0.0, "guard_stability: floor must be > 0");
  std::vector<std::string> warnings;
  for (int t = 1; t <= s.T; ++t) {
    const double abar = s.alpha_bar(t);
    if (abar < floor)
      warnings.push_back("t=" + std::to_string(t) + ": alpha_bar = " + std::to_string(abar) +
                         " below floor " + std::to_string(floor));
    if (1.0 - abar < floor)
      warnings.push_back("t=" + std::to_string(t) + ": 1 - alpha_bar = " +
                         std::to_string(1.0 - abar) + " below floor " + std::to_string(floor));
  }
  return warnings;
}

nlohmann::json NoiseSchedule::to_json() const {
  nlohmann::json j;
  j["T"] = T;
  j["betas"] = betas;
  j["kind"] = kind;
  j["params"] = params;
  j["source_indices"] = source_indices;
  return j;
}

NoiseSchedule NoiseSchedule::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const int T = j.at("T").get<int>();
  NoiseSchedule s;
  if (kind == "linear") {
    s = make_linear(T, j.at("params").at("beta_start").get<double>(),
                    j.at("params").at("beta_end").get<double>());
  } else if (kind == "cosine") {
    s = make_cosine(T, j.at("params").at("s").get<double>());
  } else if (kind == "respaced") {
    s = respace(from_json(j.at("params").at("base")), j.at("params").at("K").get<int>());
  } else {
    s = make_from_betas(j.at("betas").get<std::vector<double>>());
  }
  const auto stored = j.at("betas").get<std::vector<double>>();
  require(stored.size() == s.betas.size(), "schedule from_json: beta count mismatch");
  for (std::size_t i = 0; i < stored.size(); ++i) {
    const double rel = std::abs(stored[i] - s.betas[i]) / std::max(std::abs(stored[i]), 1e-300);
    if (rel > 1e-12)
      throw std::runtime_error("schedule from_json: stored betas disagree with reconstruction");
  }
  return s;
}

}  // namespace dualdiff
