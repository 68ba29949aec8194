#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "offrl/dataset.hpp"
#include "offrl/evaluation.hpp"
#include "offrl/optim.hpp"
#include "offrl/policies.hpp"
#include "offrl/transforms.hpp"

namespace offrl {

enum class Method { bc, fbc, dt, fdt };

Method method_from_string(const std::string& s);
std::string to_string(Method m);
bool is_filtered(Method m);   // fbc, fdt
bool is_sequence(Method m);   // dt, fdt

struct TrainConfig {
  Method method = Method::bc;
  uint64_t seed = 0;
  int epochs = 100;
  int batch_size = 0;  // 0 -> family default: 100 (mlp) / 512 (sequence)
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double grad_clip = 0.25;
  int64_t warmup_steps = 100000;  // sequence family: linear warmup
  int decay_epoch = 80;           // mlp family: rate * decay_factor after this many epochs
  double decay_factor = 0.1;
  FilterSpec filter;       // consulted by fbc/fdt only
  MLPPolicyConfig mlp;     // d_s/d_a are filled in from the dataset
  DTPolicyConfig dt;
  int eval_every_epochs = 50;

  int effective_batch() const {
    return batch_size > 0 ? batch_size : (is_sequence(method) ? 512 : 100);
  }
};

struct StepRecord {
  int64_t step = 0;  // 1-based
  double lr = 0.0;
  double loss = 0.0;
  double gnorm_pre = 0.0;
  double gnorm_post = 0.0;
};

// Per-step and per-eval records. The CSV forms carry no method or arm
// identity, so runs that see identical data and seeds serialise to
// identical bytes.
struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EvalPoint> evals;
  std::string steps_csv() const;
  std::string evals_csv() const;
};

using EvalHook = std::function<EvalResult(const PolicyVariant& policy, int eval_index)>;

struct TrainOutcome {
  PolicyVariant policy;               // final parameters
  std::optional<PolicyVariant> best;  // snapshot at the best eval mean
  int64_t best_step = 0;
  double best_mean = 0.0;
  TrainLog log;
  int64_t steps_per_epoch = 0;
};

// One epoch = ceil(total transitions / batch) optimizer steps. The
// filtered variants materialise the filtered dataset and then run the
// exact unfiltered code path on it. Bit-reproducible for a fixed seed;
// all randomness is drawn from streams derived from cfg.seed.
TrainOutcome train_policy(const TrajectoryDataset& ds, const TrainConfig& cfg,
                          const EvalHook& eval_hook = nullptr);

}  // namespace offrl
