#pragma once

#include <vector>

#include "offrl/envs.hpp"
#include "offrl/policies.hpp"

namespace offrl {

// 100 * (raw - random_ref) / (expert_ref - random_ref)
double normalized_score(double raw, double random_ref, double expert_ref);

// Rolling inference state for the sequence policy: keeps the last K-1
// committed (return-to-go, state, action) triplets plus the pending step.
// The return target decrements by each observed reward, i.e. the pending
// token always equals target minus the rewards seen so far, exactly.
class DTSession {
 public:
  DTSession(const DTPolicy& policy, double rtg_target);

  Tensor act(const Tensor& state);
  void observe(const Tensor& action_taken, double reward);
  double current_rtg() const { return target_ - cum_reward_; }
  double target() const { return target_; }
  int steps() const { return t_; }

 private:
  struct Slot {
    double rtg;
    std::vector<double> state;
    std::vector<double> action;
    int t;
  };

  const DTPolicy* policy_;
  double target_;
  double cum_reward_ = 0.0;
  int t_ = 0;
  std::vector<Slot> history_;  // at most context_k - 1 entries
  bool pending_ = false;
  Slot pending_slot_;
};

struct RolloutResult {
  Trajectory traj;
  double total_return = 0.0;
  bool success = false;
};

// One episode to the horizon. MLP policies act on the raw observation;
// sequence policies run through a DTSession with the given target.
RolloutResult run_rollout(const PolicyVariant& policy, Env& env,
                          uint64_t episode_seed, double rtg_target);

enum class ScoreKind { success_rate, normalized_return, raw_return };

std::string to_string(ScoreKind k);

struct EvalConfig {
  int rollouts = 50;
  int every_epochs = 50;
  double rtg_target = 1.0;
  double random_ref = 0.0;
  double expert_ref = 1.0;
  ScoreKind kind = ScoreKind::success_rate;
};

struct EvalSample {
  double total_return = 0.0;
  bool success = false;
  double score = 0.0;
};

struct EvalResult {
  double mean = 0.0;
  double stddev = 0.0;  // sample stddev over rollouts
  std::vector<EvalSample> samples;
};

// Episode seeds come from eval_stream.child(eval_index).child(rollout).
EvalResult evaluate_policy(const PolicyVariant& policy, Env& env,
                           const EvalConfig& cfg, RngStream eval_stream,
                           int eval_index);

struct EvalPoint {
  int epoch = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double best_so_far = 0.0;  // running max of the means
  int n = 0;
};

void append_eval_point(std::vector<EvalPoint>& points, int epoch, double mean,
                       double stddev, int n);

double sample_stddev(const std::vector<double>& xs);  // n-1 denominator; 0 if n < 2

}  // namespace offrl
