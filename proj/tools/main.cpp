#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dualdiff/cli.hpp"
#include "dualdiff/kernels.hpp"

namespace {

dualdiff::ExperimentConfig build_config(const std::string& config_path,
                                        const std::vector<std::string>& overrides) {
  dualdiff::ExperimentConfig cfg;
  if (!config_path.empty()) cfg = dualdiff::ExperimentConfig::from_file(config_path);
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-output diffusion toolbox"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string checkpoint;
  bool use_raw = false;
  bool show_backend = false;
  app.add_flag("--backend", show_backend, "print the selected kernel backend");

  auto add_common = [&](CLI::App* sub, bool needs_checkpoint) {
    sub->add_option("--config", config_path, "key=value config file");
    sub->add_option("--set", overrides, "override one config key (key=value), repeatable");
    if (needs_checkpoint) {
      sub->add_option("--checkpoint", checkpoint, "checkpoint file or run directory")
          ->required();
      sub->add_flag("--raw", use_raw, "use the raw (non-EMA) weights");
    }
  };

  CLI::App* train = app.add_subcommand("train", "train a dual-output denoiser");
  add_common(train, false);
  CLI::App* sample = app.add_subcommand("sample", "generate samples from a checkpoint");
  add_common(sample, true);
  CLI::App* diagnose = app.add_subcommand("diagnose", "emit loss/statistics curves and the comparison report");
  add_common(diagnose, true);
  CLI::App* compare = app.add_subcommand("compare", "score path modes against held-out data");
  add_common(compare, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (show_backend)
      std::fprintf(stderr, "kernel backend: %s\n", dualdiff::kernels::backend_name());
    const dualdiff::ExperimentConfig cfg = build_config(config_path, overrides);
    if (train->parsed()) return dualdiff::cmd_train(cfg);
    if (sample->parsed()) return dualdiff::cmd_sample(cfg, checkpoint, use_raw);
    if (diagnose->parsed()) return dualdiff::cmd_diagnose(cfg, checkpoint, use_raw);
    if (compare->parsed()) return dualdiff::cmd_compare(cfg, checkpoint, use_raw);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dualdiff: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
