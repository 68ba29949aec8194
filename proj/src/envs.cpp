#include "offrl/envs.hpp"

#include <cmath>
#include <stdexcept>

namespace offrl {

namespace {

constexpr double kPi = 3.14159265358979323846;

double clamp_unit(double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace

std::string to_string(RewardMode m) {
  return m == RewardMode::dense ? "dense" : "sparse";
}

RewardMode reward_mode_from_string(const std::string& s) {
  if (s == "dense") return RewardMode::dense;
  if (s == "sparse") return RewardMode::sparse;
  throw UsageError("unknown reward mode '" + s + "' (expected dense or sparse)");
}

PointReach::PointReach(RewardMode mode) {
  info_.name = "point_reach";
  info_.d_s = 4;
  info_.d_a = 2;
  info_.horizon = kHorizon;
  info_.reward_mode = mode;
}

Tensor PointReach::observe() const {
  return Tensor::from({4}, {pos_[0], pos_[1], goal_[0], goal_[1]});
}

Tensor PointReach::reset(uint64_t episode_seed) {
  RngStream s = RngStream::root(episode_seed);
  pos_[0] = s.uniform(-1.0, 1.0);
  pos_[1] = s.uniform(-1.0, 1.0);
  if (s.next_double() < kNearProb) {
    const double angle = s.uniform(0.0, 2.0 * kPi);
    const double r = s.uniform(0.0, kNearRadius);
    goal_[0] = pos_[0] + r * std::cos(angle);
    goal_[1] = pos_[1] + r * std::sin(angle);
  } else {
    // long run: per-axis separation of at least kMinAxisDist, placed on the
    // other side of the origin so the goal stays inside [-1,1]^2
    for (int i = 0; i < 2; ++i) {
      const double u = s.uniform(kMinAxisDist, 1.0 + std::abs(pos_[i]));
      goal_[i] = pos_[i] - (pos_[i] < 0.0 ? -u : u);
    }
  }
  t_ = 0;
  return observe();
}

void PointReach::reset_to(double px, double py, double gx, double gy) {
  pos_[0] = px;
  pos_[1] = py;
  goal_[0] = gx;
  goal_[1] = gy;
  t_ = 0;
}

double PointReach::goal_distance() const {
  const double dx = pos_[0] - goal_[0];
  const double dy = pos_[1] - goal_[1];
  return std::sqrt(dx * dx + dy * dy);
}

StepResult PointReach::step(const Tensor& action) {
  if (t_ >= kHorizon) throw std::logic_error("point_reach: step called after episode end");
  if (action.size() != 2)
    throw std::invalid_argument("point_reach: action size " + std::to_string(action.size()) +
                                ", expected 2");
  StepResult r;
  r.action_taken = Tensor::from({2}, {clamp_unit(action.at(0)), clamp_unit(action.at(1))});
  pos_[0] += r.action_taken.at(0) * kDt;
  pos_[1] += r.action_taken.at(1) * kDt;
  ++t_;
  r.done = t_ >= kHorizon;
  if (info_.reward_mode == RewardMode::dense)
    r.reward = -goal_distance();
  else
    r.reward = (r.done && goal_distance() < kGoalThreshold) ? 1.0 : 0.0;
  r.obs = observe();
  return r;
}

Tensor PointReach::expert_action(const Tensor& obs) const {
  if (obs.size() != 4)
    throw std::invalid_argument("point_reach: obs size " + std::to_string(obs.size()) +
                                ", expected 4");
  return Tensor::from({2}, {clamp_unit((obs.at(2) - obs.at(0)) / kDt),
                            clamp_unit((obs.at(3) - obs.at(1)) / kDt)});
}

bool PointReach::success() const {
  return t_ >= kHorizon && goal_distance() < kGoalThreshold;
}

ChainRun::ChainRun() {
  info_.name = "chain_run";
  info_.d_s = 2;
  info_.d_a = 1;
  info_.horizon = kHorizon;
  info_.reward_mode = RewardMode::dense;
}

Tensor ChainRun::observe() const { return Tensor::from({2}, {pos_, vel_}); }

Tensor ChainRun::reset(uint64_t) {
  pos_ = 0.0;
  vel_ = 0.0;
  t_ = 0;
  return observe();
}

StepResult ChainRun::step(const Tensor& action) {
  if (t_ >= kHorizon) throw std::logic_error("chain_run: step called after episode end");
  if (action.size() != 1)
    throw std::invalid_argument("chain_run: action size " + std::to_string(action.size()) +
                                ", expected 1");
  StepResult r;
  r.action_taken = Tensor::from({1}, {clamp_unit(action.at(0))});
  vel_ = kMomentum * vel_ + kGain * r.action_taken.at(0);
  pos_ += vel_;
  ++t_;
  r.done = t_ >= kHorizon;
  r.reward = vel_;  // per-step displacement; the sum telescopes to pos_
  r.obs = observe();
  return r;
}

Tensor ChainRun::expert_action(const Tensor&) const { return Tensor::from({1}, {1.0}); }

std::unique_ptr<Env> make_env(const std::string& name, RewardMode mode) {
  if (name == "point_reach") return std::make_unique<PointReach>(mode);
  if (name == "chain_run") {
    if (mode == RewardMode::sparse)
      throw UsageError("chain_run has no sparse reward mode (rewards are per-step displacement)");
    return std::make_unique<ChainRun>();
  }
  throw UsageError("unknown env '" + name + "' (expected point_reach or chain_run)");
}

Quality quality_from_string(const std::string& s) {
  if (s == "expert") return Quality::expert;
  if (s == "medium") return Quality::medium;
  if (s == "random") return Quality::random;
  throw UsageError("unknown policy quality '" + s + "' (expected expert, medium or random)");
}

std::string to_string(Quality q) {
  switch (q) {
    case Quality::expert: return "expert";
    case Quality::medium: return "medium";
    case Quality::random: return "random";
  }
  return "expert";
}

TrajectoryDataset generate_dataset(Env& env, const GeneratorSpec& spec, uint64_t seed) {
  if (spec.mixture.empty()) throw UsageError("dataset mixture is empty");
  TrajectoryDataset ds;
  ds.meta.env_name = env.info().name;
  ds.meta.d_s = env.info().d_s;
  ds.meta.d_a = env.info().d_a;
  ds.meta.max_episode_length = env.info().horizon;
  const bool sparse = env.info().reward_mode == RewardMode::sparse;
  ds.meta.reward_regime = sparse ? RewardRegime::sparse : RewardRegime::dense;
  const RngStream gen = RngStream::root(seed).child("gen");
  for (size_t ei = 0; ei < spec.mixture.size(); ++ei) {
    const MixtureEntry& entry = spec.mixture[ei];
    if (entry.count <= 0)
      throw UsageError("mixture entry " + std::to_string(ei + 1) + " has count " +
                       std::to_string(entry.count));
    if (entry.quality == Quality::medium && entry.noise < 0.0)
      throw UsageError("mixture entry " + std::to_string(ei + 1) + " has negative noise");
    for (int ep = 0; ep < entry.count; ++ep) {
      const RngStream eps = gen.child(static_cast<uint64_t>(ei)).child(static_cast<uint64_t>(ep));
      RngStream env_stream = eps.child("env");
      RngStream noise = eps.child("noise");
      Tensor obs = env.reset(env_stream.next_u64());
      Trajectory traj;
      traj.transitions.reserve(static_cast<size_t>(env.info().horizon));
      while (true) {
        Tensor a;
        switch (entry.quality) {
          case Quality::expert:
            a = env.expert_action(obs);
            break;
          case Quality::medium: {
            a = env.expert_action(obs);
            for (int64_t i = 0; i < a.size(); ++i)
              a.data()[i] += entry.noise * noise.next_gaussian();
            break;
          }
          case Quality::random: {
            a = Tensor::zeros({env.info().d_a});
            for (int64_t i = 0; i < a.size(); ++i) a.data()[i] = noise.uniform(-1.0, 1.0);
            break;
          }
        }
        StepResult r = env.step(a);
        Transition tr;
        tr.state = obs.vec();
        tr.action = r.action_taken.vec();  // record what actually ran
        tr.reward = r.reward;
        traj.transitions.push_back(std::move(tr));
        obs = r.obs;
        if (r.done) break;
      }
      if (sparse) traj.success = env.success();
      ds.trajectories.push_back(std::move(traj));
    }
  }
  ds.validate();
  return ds;
}

}  // namespace offrl
