#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "offrl/envs.hpp"
#include "offrl/training.hpp"

namespace offrl {

struct DatasetSpecCfg {
  std::string name;
  std::string env = "point_reach";
  RewardMode mode = RewardMode::sparse;
  bool sparsify_flag = false;  // dense generation followed by return relocation
  GeneratorSpec mixture;
  uint64_t seed = 0;
  std::string path;  // nonempty: load this file instead of generating
  bool rtg_auto = true;
  double rtg_target = 1.0;
  double random_ref = 0.0;
  double expert_ref = 1.0;
};

// Everything a benchmark run needs. Values left at the "auto" sentinel are
// resolved per dataset regime when arms are materialised: context 1 /
// rtg_scale 1 / eval cadence 50 for sparse data, context 20 / rtg_scale
// 1000 / cadence 100 for sparsified data.
struct ExperimentConfig {
  std::string name = "experiment";
  std::string out_dir;
  std::vector<DatasetSpecCfg> datasets;
  std::vector<Method> methods{Method::bc, Method::fbc, Method::dt, Method::fdt};
  std::vector<uint64_t> seeds{0, 1, 2, 3, 4};

  int epochs = 100;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double grad_clip = 0.25;
  std::string filter_mode = "auto";  // auto | success | top_fraction
  double filter_fraction = 0.10;

  int bc_batch = 100;
  int bc_depth = 2;
  int bc_hidden = 512;
  int bc_decay_epoch = 80;
  double bc_decay_factor = 0.1;

  int dt_batch = 512;
  int dt_layers = 3;
  int dt_heads = 1;
  int dt_embed = 128;
  int dt_context = 0;  // 0 = auto
  double dt_dropout = 0.1;
  int64_t dt_warmup = 100000;
  double dt_rtg_scale = 0;  // 0 = auto
  std::string dt_pos_encoding = "sinusoidal";

  int eval_rollouts = 50;
  int eval_every = 0;  // 0 = auto
};

// Plain-text key = value tree, '#' comments, dotted keys, comma lists.
// Unknown keys and malformed values are all collected and reported in one
// UsageError. The full schema lives in docs/FORMATS.md.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);

// Single key=value override (CLI flags win over file values).
void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value);

// Canonical echo of the resolved configuration, suitable for re-parsing;
// embedded in the run manifest.
std::string resolved_config_text(const ExperimentConfig& cfg);

GeneratorSpec parse_mixture(const std::string& text);  // expert:60,medium:120:0.5,...
std::string mixture_to_string(const GeneratorSpec& spec);

}  // namespace offrl
