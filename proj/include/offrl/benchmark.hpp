#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "offrl/config.hpp"
#include "offrl/report.hpp"

namespace offrl {

// Per-dataset knob resolution: "auto" sentinels become regime defaults.
// Sparse data: success filter, context 1, return scale 1, eval cadence 50,
// success-rate scoring, return target 1. Anything else: top-fraction
// filter, context 20, scale 1000, cadence 100, normalized scoring, return
// target = best training return.
struct DatasetResolution {
  FilterSpec filter;
  int dt_context = 1;
  double rtg_scale = 1.0;
  int eval_every = 50;
  double rtg_target = 1.0;
  ScoreKind kind = ScoreKind::success_rate;
};

DatasetResolution resolve_dataset_knobs(const ExperimentConfig& cfg,
                                        const TrajectoryDataset& ds,
                                        bool rtg_auto, double rtg_target);

// The TrainConfig an arm runs with; shared by `bench` and the standalone
// `train` subcommand so the two produce identical logs.
TrainConfig make_train_config(const ExperimentConfig& cfg, const DatasetResolution& res,
                              Method method, uint64_t seed);

struct ArmResult {
  std::string dataset;
  Method method = Method::bc;
  uint64_t seed = 0;
  bool ok = false;
  std::string error;
  int64_t param_count = 0;
  int64_t steps_per_epoch = 0;
  std::vector<EvalPoint> evals;
  double wall_seconds = 0.0;
};

struct BenchOutcome {
  std::vector<ArmResult> arms;
  SummaryTable summary;
  bool any_failed = false;
};

// Runs the dataset x method x seed matrix and writes the report bundle
// (manifest.json, per-arm logs and checkpoints, aggregated curves, summary
// table, plots) under out_dir. Arms are independent and carry their own
// derived RNG streams, so the worker count never changes an output byte;
// wall-clock diagnostics go to timings.csv, which is outside that contract.
// A failed arm is recorded and skipped in aggregation; the rest complete.
BenchOutcome run_benchmark(const ExperimentConfig& cfg, int parallel,
                           const std::string& out_dir, bool dry_run,
                           std::ostream& log);

std::string arm_dir_name(const std::string& dataset, Method method, uint64_t seed);

}  // namespace offrl
