#pragma once

#include <string>

#include "dualdiff/config.hpp"

namespace dualdiff {

// Subcommand bodies. They throw on failure; the CLI entry point turns
// exceptions into nonzero exits. `checkpoint` may be a run directory, in
// which case model_ema.ckpt (or model.ckpt with use_raw) is picked up.
int cmd_train(const ExperimentConfig& cfg);
int cmd_sample(const ExperimentConfig& cfg, const std::string& checkpoint, bool use_raw = false);
int cmd_diagnose(const ExperimentConfig& cfg, const std::string& checkpoint,
                 bool use_raw = false);
int cmd_compare(const ExperimentConfig& cfg, const std::string& checkpoint,
                bool use_raw = false);

std::string resolve_checkpoint(const std::string& path, bool use_raw);

}  // namespace dualdiff
