#include "dualdiff/cli.hpp"

#include <filesystem>
#include <fstream>
#include <memory>

#include "dualdiff/analysis.hpp"
#include "dualdiff/tensor_io.hpp"

namespace fs = std::filesystem;

namespace dualdiff {

namespace {

std::uint64_t derived_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index = 0) {
  return splitmix64(base ^ splitmix64(tag) ^ splitmix64(index * 0x9e3779b97f4a7c15ull + 1));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f << text;
}

nlohmann::json config_echo_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  for (const auto& [k, v] : cfg.to_kv()) j[k] = v;
  return j;
}

struct LoadedModel {
  DenoiserFn fn;
  int data_dim = 0;
  NoiseSchedule schedule;
};

// "oracle" is a reserved checkpoint name: for the point dataset it stands in
// the Bayes-optimal denoiser built straight from the config.
LoadedModel load_model(const ExperimentConfig& cfg, const std::string& checkpoint,
                       bool use_raw) {
  LoadedModel m;
  if (checkpoint == "oracle") {
    require(cfg.dataset == "point", "checkpoint 'oracle' requires dataset=point");
    const DatasetParams dp = dataset_params(cfg);
    m.data_dim = dp.point_dim;
    m.schedule = make_schedule(cfg);
    m.fn = oracle_denoiser(std::vector<float>(m.data_dim, dp.point_value), m.schedule);
    return m;
  }
  auto [params, meta] = load_checkpoint(resolve_checkpoint(checkpoint, use_raw));
  m.data_dim = params.data_dim;
  m.schedule = NoiseSchedule::from_json(meta.schedule);
  auto owned = std::make_shared<MlpParams>(std::move(params));
  m.fn = [owned](std::span<const float> x, int t) { return forward(*owned, x, t); };
  return m;
}

std::string provenance(const ExperimentConfig& cfg) {
  return "config_hash=" + cfg.hash_hex() + " seed=" + std::to_string(cfg.seed);
}

void write_trajectories(const fs::path& dir, const std::vector<Trajectory>& trajs,
                        const ExperimentConfig& cfg, int K) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const Trajectory& tr = trajs[i];
    nlohmann::json j;
    j["config_hash"] = cfg.hash_hex();
    j["seed"] = cfg.seed;
    j["sample_index"] = i;
    j["steps"] = K;
    j["states"] = tr.states;
    j["pred_x0"] = tr.pred_x0;
    j["r"] = tr.r_values;
    char name[32];
    std::snprintf(name, sizeof(name), "traj_%05zu.json", i);
    write_text(dir / name, j.dump());
  }
}

}  // namespace

std::string resolve_checkpoint(const std::string& path, bool use_raw) {
  if (fs::is_directory(path))
    return (fs::path(path) / (use_raw ? "model.ckpt" : "model_ema.ckpt")).string();
  return path;
}

int cmd_train(const ExperimentConfig& cfg) {
  const NoiseSchedule s = make_schedule(cfg);
  const DatasetParams dp = dataset_params(cfg);
  const int D = dataset_dim(cfg.dataset, dp);
  const TrainConfig tc = train_config(cfg);
  const StabilityGuard guard = stability_guard(cfg);

  fs::create_directories(cfg.out_dir);
  write_text(fs::path(cfg.out_dir) / "config.echo.txt", cfg.canonical());

  MlpParams params = init_params(D, cfg.model_hidden, cfg.time_embed, cfg.seed);
  MlpParams ema = params;
  AdamState opt;
  Rng rng(cfg.seed, 1);

  std::ofstream log(fs::path(cfg.out_dir) / "train_log.csv", std::ios::trunc | std::ios::binary);
  if (!log) throw std::runtime_error("cannot open train_log.csv in " + cfg.out_dir);
  log << "# " << provenance(cfg) << "\n";
  write_train_log_header(log);

  for (long step = 1; step <= cfg.train_steps; ++step) {
    const FloatMat batch =
        dataset_sample(cfg.dataset, cfg.batch, derived_seed(cfg.seed, 0xba7c4, step), dp);
    const LossBreakdown lb = train_step(params, opt, batch, s, rng, tc, guard);
    ema_update(ema, params, cfg.ema_decay);
    append_train_log(log, step, lb);
  }
  log.flush();

  CheckpointMeta meta;
  meta.seed = cfg.seed;
  meta.step = cfg.train_steps;
  meta.schedule = s.to_json();
  meta.config_hash = cfg.hash_hex();
  meta.kind = "raw";
  save_checkpoint((fs::path(cfg.out_dir) / "model.ckpt").string(), params, meta);
  meta.kind = "ema";
  save_checkpoint((fs::path(cfg.out_dir) / "model_ema.ckpt").string(), ema, meta);
  return 0;
}

int cmd_sample(const ExperimentConfig& cfg, const std::string& checkpoint, bool use_raw) {
  const LoadedModel m = load_model(cfg, checkpoint, use_raw);
  fs::create_directories(cfg.out_dir);
  write_text(fs::path(cfg.out_dir) / "config.echo.txt", cfg.canonical());

  for (int K : parse_int_list(cfg.sample_steps)) {
    const SamplerConfig sc = sampler_config(cfg, K);
    const GenerateResult run = generate(m.fn, m.schedule, sc, cfg.n_samples, m.data_dim,
                                        cfg.record_trajectories);
    TensorFile tf;
    tf.shape = {static_cast<std::size_t>(cfg.n_samples),
                static_cast<std::size_t>(m.data_dim)};
    tf.seed = cfg.seed;
    tf.config_hash = cfg.hash_hex();
    tf.extra = config_echo_json(cfg);
    tf.extra["steps"] = K;
    tf.data = run.samples.v;
    write_tensor_file((fs::path(cfg.out_dir) / ("samples_K" + std::to_string(K) + ".tf")).string(),
                      tf);
    if (cfg.record_trajectories)
      write_trajectories(fs::path(cfg.out_dir) / ("trajectories_K" + std::to_string(K)),
                         run.trajectories, cfg, K);
  }
  return 0;
}

int cmd_compare(const ExperimentConfig& cfg, const std::string& checkpoint, bool use_raw) {
  const LoadedModel m = load_model(cfg, checkpoint, use_raw);
  const DatasetParams dp = dataset_params(cfg);
  fs::create_directories(cfg.out_dir);
  write_text(fs::path(cfg.out_dir) / "config.echo.txt", cfg.canonical());

  const FloatMat heldout =
      dataset_sample(cfg.dataset, cfg.heldout_n, derived_seed(cfg.seed, 0x4e1d), dp);
  const std::vector<int> step_counts = parse_int_list(cfg.sample_steps);
  const SamplerConfig base = sampler_config(cfg, step_counts.front());
  const std::vector<CompareRow> rows =
      compare_paths_report(m.fn, m.schedule, step_counts, base, heldout, cfg.n_samples,
                           cfg.swd_projections, m.data_dim);
  write_compare_csv((fs::path(cfg.out_dir) / "compare.csv").string(), rows, provenance(cfg));
  write_text(fs::path(cfg.out_dir) / "compare.json",
             compare_report_json(rows, config_echo_json(cfg)).dump(2));
  return 0;
}

int cmd_diagnose(const ExperimentConfig& cfg, const std::string& checkpoint, bool use_raw) {
  const LoadedModel m = load_model(cfg, checkpoint, use_raw);
  const DatasetParams dp = dataset_params(cfg);
  const StabilityGuard guard = stability_guard(cfg);
  fs::create_directories(cfg.out_dir);

  const FloatMat heldout =
      dataset_sample(cfg.dataset, cfg.heldout_n, derived_seed(cfg.seed, 0x4e1d), dp);

  const CurveSet losses = per_timestep_losses(m.fn, heldout, m.schedule, cfg.diag_n_per_t,
                                              derived_seed(cfg.seed, 0x105e), guard);
  write_curveset_csv((fs::path(cfg.out_dir) / "timestep_losses.csv").string(), losses,
                     provenance(cfg));

  const int K = parse_int_list(cfg.sample_steps).front();
  SamplerConfig sc = sampler_config(cfg, K);
  const CurveSet x0_stats = predicted_x0_stats(
      m.fn, m.schedule, std::min<long>(cfg.n_samples, 512), sc, m.data_dim, heldout);
  write_curveset_csv((fs::path(cfg.out_dir) / "pred_x0_stats.csv").string(), x0_stats,
                     provenance(cfg));

  SamplerConfig traj_cfg = sc;
  traj_cfg.mode = PathMode::dual;
  traj_cfg.fixed_r_profile.clear();
  traj_cfg.seed = derived_seed(cfg.seed, 0x7121);
  const GenerateResult dual_run = generate(m.fn, m.schedule, traj_cfg, 64, m.data_dim, true);
  write_curveset_csv((fs::path(cfg.out_dir) / "r_stats.csv").string(),
                     r_trajectory_stats(dual_run.trajectories), provenance(cfg));

  return cmd_compare(cfg, checkpoint, use_raw);
}

}  // namespace dualdiff
