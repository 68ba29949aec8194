#pragma once

#include <memory>
#include <string>
#include <vector>

#include "offrl/dataset.hpp"
#include "offrl/rng.hpp"
#include "offrl/tensor.hpp"

namespace offrl {

enum class RewardMode { dense, sparse };

std::string to_string(RewardMode m);
RewardMode reward_mode_from_string(const std::string& s);

struct EnvInfo {
  std::string name;
  int d_s = 0;
  int d_a = 0;
  int horizon = 0;
  RewardMode reward_mode = RewardMode::dense;
};

struct StepResult {
  Tensor obs;
  Tensor action_taken;  // after clamping; this is what datasets record
  double reward = 0.0;
  bool done = false;
};

// Episodes are deterministic given (reset seed, action sequence); all
// stochasticity lives in reset. Envs run exactly `horizon` steps.
class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvInfo& info() const = 0;
  virtual Tensor reset(uint64_t episode_seed) = 0;
  virtual StepResult step(const Tensor& action) = 0;
  virtual Tensor expert_action(const Tensor& obs) const = 0;
  virtual bool success() const = 0;  // meaningful once done; dense-only envs return false
};

std::unique_ptr<Env> make_env(const std::string& name, RewardMode mode);

// 2-D point mass: obs = [pos_x, pos_y, goal_x, goal_y], velocity action
// clamped to [-1,1]^2, pos += action * dt. Horizon 50. Sparse mode pays 1
// at the final step iff the final distance to goal is < 0.1; dense mode
// pays -distance each step. Most resets place the goal a long axis run
// away so only near-full-speed policies finish in time; a small fraction
// are near-goal starts so a random policy succeeds occasionally.
class PointReach : public Env {
 public:
  static constexpr int kHorizon = 50;
  static constexpr double kDt = 0.045;
  static constexpr double kGoalThreshold = 0.1;
  static constexpr double kNearProb = 0.1;
  static constexpr double kNearRadius = 0.12;
  static constexpr double kMinAxisDist = 0.9;

  explicit PointReach(RewardMode mode);
  const EnvInfo& info() const override { return info_; }
  Tensor reset(uint64_t episode_seed) override;
  void reset_to(double px, double py, double gx, double gy);
  StepResult step(const Tensor& action) override;
  Tensor expert_action(const Tensor& obs) const override;
  bool success() const override;
  double goal_distance() const;

 private:
  Tensor observe() const;
  EnvInfo info_;
  double pos_[2] = {0, 0}, goal_[2] = {0, 0};
  int t_ = 0;
};

// 1-D momentum runner: obs = [pos, vel], scalar action clamped to [-1,1],
// vel = 0.9*vel + 0.1*action, pos += vel, reward = per-step displacement
// (so total return telescopes to the final position). Horizon 100, dense
// rewards only; starts at rest at the origin.
class ChainRun : public Env {
 public:
  static constexpr int kHorizon = 100;
  static constexpr double kMomentum = 0.9;
  static constexpr double kGain = 0.1;

  ChainRun();
  const EnvInfo& info() const override { return info_; }
  Tensor reset(uint64_t episode_seed) override;
  StepResult step(const Tensor& action) override;
  Tensor expert_action(const Tensor& obs) const override;
  bool success() const override { return false; }

 private:
  Tensor observe() const;
  EnvInfo info_;
  double pos_ = 0, vel_ = 0;
  int t_ = 0;
};

enum class Quality { expert, medium, random };

Quality quality_from_string(const std::string& s);
std::string to_string(Quality q);

struct MixtureEntry {
  Quality quality = Quality::expert;
  int count = 0;
  double noise = 0.0;  // medium: stddev of Gaussian action noise
};

struct GeneratorSpec {
  std::vector<MixtureEntry> mixture;
};

// Scripted rollouts in mixture order; episode RNG streams are derived from
// (seed, entry index, episode index). Sparse envs attach success flags
// taken from the terminal reward.
TrajectoryDataset generate_dataset(Env& env, const GeneratorSpec& spec, uint64_t seed);

}  // namespace offrl
