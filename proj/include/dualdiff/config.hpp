#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dualdiff/datasets.hpp"
#include "dualdiff/sampler.hpp"
#include "dualdiff/schedule.hpp"
#include "dualdiff/training.hpp"

namespace dualdiff {

// Flat key=value experiment description. '#' starts a comment, blank lines
// are skipped, unknown keys are an error. The canonical serialization (sorted
// keys, one per line) is what gets echoed into run directories and hashed
// into output file headers.
struct ExperimentConfig {
  // data
  std::string dataset = "gauss8";
  double point_value = 0.0;
  int point_dim = 2;
  // schedule
  std::string schedule = "linear";  // linear | cosine
  int schedule_T = 100;
  double beta_start = 1e-3;
  double beta_end = 0.2;
  double cosine_s = 0.008;
  // model
  int model_hidden = 128;
  int time_embed = 32;
  // training
  long train_steps = 10000;
  int batch = 128;
  double lr = 2e-4;
  double ema_decay = 0.9999;
  std::uint64_t seed = 7;
  double lambda_eps = 1.0;
  double lambda_x = 1.0;
  double lambda_mu = 1.0;
  // sampling
  std::string sample_mode = "dual";        // eps_only | x_only | dual | fixed_r
  std::string sample_method = "implicit";  // implicit | ancestral
  std::string sample_steps = "50";         // comma-separated K values
  std::string sigma_rule = "auto";         // auto | zero | beta | beta_tilde | eta
  double eta = 0.0;
  bool clamp_enabled = false;
  double clamp_lo = -1.0;
  double clamp_hi = 1.0;
  bool guard_enabled = false;
  double guard_floor = 1e-8;
  long n_samples = 1024;
  bool record_trajectories = false;
  std::string fixed_r_profile;  // comma-separated weights, only for fixed_r
  // diagnostics
  int diag_n_per_t = 200;
  int swd_projections = 128;
  long heldout_n = 4096;
  // io
  std::string out_dir = "out";

  void apply(const std::string& key, const std::string& value);
  static ExperimentConfig from_file(const std::string& path);

  std::map<std::string, std::string> to_kv() const;
  std::string canonical() const;
  std::string hash_hex() const;
};

std::vector<int> parse_int_list(const std::string& csv);
std::vector<float> parse_float_list(const std::string& csv);

// Derived objects.
NoiseSchedule make_schedule(const ExperimentConfig& cfg);
DatasetParams dataset_params(const ExperimentConfig& cfg);
TrainConfig train_config(const ExperimentConfig& cfg);
StabilityGuard stability_guard(const ExperimentConfig& cfg);
// Sampler config for one step count K; resolves sigma_rule = auto to beta
// for ancestral sampling and zero for implicit.
SamplerConfig sampler_config(const ExperimentConfig& cfg, int K);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace dualdiff
