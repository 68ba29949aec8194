#include "offrl/evaluation.hpp"

#include "offrl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace offrl {

double normalized_score(double raw, double random_ref, double expert_ref) {
  if (expert_ref == random_ref)
    throw UsageError("normalized_score: reference returns coincide at " +
                                std::to_string(random_ref));
  return 100.0 * (raw - random_ref) / (expert_ref - random_ref);
}

DTSession::DTSession(const DTPolicy& policy, double rtg_target)
    : policy_(&policy), target_(rtg_target) {}

Tensor DTSession::act(const Tensor& state) {
  if (pending_) throw std::logic_error("dt session: act called twice without observe");
  const DTPolicyConfig& cfg = policy_->config();
  if (state.size() != cfg.d_s)
    throw std::invalid_argument("dt session: state size " + std::to_string(state.size()) +
                                ", policy expects " + std::to_string(cfg.d_s));
  pending_slot_.rtg = current_rtg();
  pending_slot_.state = state.vec();
  pending_slot_.action.assign(static_cast<size_t>(cfg.d_a), 0.0);  // unknown
  pending_slot_.t = t_;
  const int k = cfg.context_k;
  const int real = static_cast<int>(history_.size()) + 1;
  const int pad = k - real;
  DTBatch b;
  b.batch = 1;
  b.k = k;
  b.rtg = Tensor::zeros({k, 1});
  b.states = Tensor::zeros({k, cfg.d_s});
  b.actions = Tensor::zeros({k, cfg.d_a});
  b.timesteps.assign(static_cast<size_t>(k), 0);
  b.keep = Tensor::zeros({k});
  for (int r = pad; r < k; ++r) {
    const Slot& slot = r == k - 1 ? pending_slot_ : history_[static_cast<size_t>(r - pad)];
    b.rtg.at2(r, 0) = slot.rtg;
    for (int j = 0; j < cfg.d_s; ++j) b.states.at2(r, j) = slot.state[static_cast<size_t>(j)];
    for (int j = 0; j < cfg.d_a; ++j) b.actions.at2(r, j) = slot.action[static_cast<size_t>(j)];
    b.timesteps[static_cast<size_t>(r)] = slot.t;
    b.keep.at(r) = 1.0;
  }
  pending_ = true;
  return policy_->act(b);
}

void DTSession::observe(const Tensor& action_taken, double reward) {
  if (!pending_) throw std::logic_error("dt session: observe without a preceding act");
  pending_slot_.action = action_taken.vec();
  history_.push_back(pending_slot_);
  const size_t cap = static_cast<size_t>(policy_->config().context_k) - 1;
  while (history_.size() > cap) history_.erase(history_.begin());
  cum_reward_ += reward;
  ++t_;
  pending_ = false;
}

RolloutResult run_rollout(const PolicyVariant& policy, Env& env,
                          uint64_t episode_seed, double rtg_target) {
  RolloutResult out;
  Tensor obs = env.reset(episode_seed);
  const int d_s = env.info().d_s;
  if (const MLPPolicy* mlp = std::get_if<MLPPolicy>(&policy)) {
    while (true) {
      const Tensor batch = Tensor::from({1, d_s}, obs.vec());
      const Tensor pred = mlp->act(batch);
      Tensor a = Tensor::zeros({env.info().d_a});
      for (int j = 0; j < env.info().d_a; ++j) a.at(j) = pred.at2(0, j);
      StepResult r = env.step(a);
      Transition tr;
      tr.state = obs.vec();
      tr.action = r.action_taken.vec();
      tr.reward = r.reward;
      out.traj.transitions.push_back(std::move(tr));
      obs = r.obs;
      if (r.done) break;
    }
  } else {
    DTSession session(std::get<DTPolicy>(policy), rtg_target);
    while (true) {
      const Tensor a = session.act(obs);
      StepResult r = env.step(a);
      session.observe(r.action_taken, r.reward);
      Transition tr;
      tr.state = obs.vec();
      tr.action = r.action_taken.vec();
      tr.reward = r.reward;
      out.traj.transitions.push_back(std::move(tr));
      obs = r.obs;
      if (r.done) break;
    }
  }
  out.total_return = total_return(out.traj);
  out.success = env.success();
  return out;
}

std::string to_string(ScoreKind k) {
  switch (k) {
    case ScoreKind::success_rate: return "success_rate";
    case ScoreKind::normalized_return: return "normalized_return";
    case ScoreKind::raw_return: return "raw_return";
  }
  return "success_rate";
}

EvalResult evaluate_policy(const PolicyVariant& policy, Env& env,
                           const EvalConfig& cfg, RngStream eval_stream,
                           int eval_index) {
  if (cfg.rollouts <= 0)
    throw std::invalid_argument("evaluate_policy: rollouts must be positive, got " +
                                std::to_string(cfg.rollouts));
  const RngStream ev = eval_stream.child(static_cast<uint64_t>(eval_index));
  EvalResult res;
  res.samples.reserve(static_cast<size_t>(cfg.rollouts));
  std::vector<double> scores;
  scores.reserve(static_cast<size_t>(cfg.rollouts));
  for (int i = 0; i < cfg.rollouts; ++i) {
    RngStream ep = ev.child(static_cast<uint64_t>(i));
    const RolloutResult r = run_rollout(policy, env, ep.next_u64(), cfg.rtg_target);
    EvalSample s;
    s.total_return = r.total_return;
    s.success = r.success;
    switch (cfg.kind) {
      case ScoreKind::success_rate:
        s.score = r.success ? 100.0 : 0.0;
        break;
      case ScoreKind::normalized_return:
        s.score = normalized_score(r.total_return, cfg.random_ref, cfg.expert_ref);
        break;
      case ScoreKind::raw_return:
        s.score = r.total_return;
        break;
    }
    scores.push_back(s.score);
    res.samples.push_back(s);
  }
  double sum = 0.0;
  for (double v : scores) sum += v;
  res.mean = sum / static_cast<double>(scores.size());
  res.stddev = sample_stddev(scores);
  return res;
}

void append_eval_point(std::vector<EvalPoint>& points, int epoch, double mean,
                       double stddev, int n) {
  EvalPoint p;
  p.epoch = epoch;
  p.mean = mean;
  p.stddev = stddev;
  p.n = n;
  p.best_so_far = points.empty() ? mean : std::max(points.back().best_so_far, mean);
  points.push_back(p);
}

double sample_stddev(const std::vector<double>& xs) {
  const size_t n = xs.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double v : xs) mean += v;
  mean /= static_cast<double>(n);
  double sq = 0.0;
  for (double v : xs) sq += (v - mean) * (v - mean);
  return std::sqrt(sq / static_cast<double>(n - 1));
}

}  // namespace offrl
