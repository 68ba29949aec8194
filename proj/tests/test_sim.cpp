#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "offrl/envs.hpp"
#include "offrl/errors.hpp"
#include "offrl/evaluation.hpp"
#include "offrl/rng.hpp"
#include "offrl/training.hpp"
#include "offrl/transforms.hpp"

#include "test_support.hpp"

using namespace offrl;

namespace {

// replay a fixed pseudo-random action sequence and collect the episode
Trajectory scripted_episode(Env& env, uint64_t reset_seed, uint64_t action_seed) {
  Trajectory traj;
  Tensor obs = env.reset(reset_seed);
  RngStream rng = RngStream::root(action_seed);
  const int d_a = env.info().d_a;
  for (int t = 0; t < env.info().horizon; ++t) {
    Tensor a = Tensor::zeros({d_a});
    for (int c = 0; c < d_a; ++c) a.at(c) = rng.uniform(-1.5, 1.5);
    const StepResult r = env.step(a);
    Transition tr;
    tr.state = obs.vec();
    tr.action = r.action_taken.vec();
    tr.reward = r.reward;
    traj.transitions.push_back(tr);
    obs = r.obs;
    if (r.done) break;
  }
  return traj;
}

TrajectoryDataset expert_point_reach(int n, uint64_t seed) {
  auto env = make_env("point_reach", RewardMode::sparse);
  GeneratorSpec spec;
  spec.mixture.push_back({Quality::expert, n, 0.0});
  return generate_dataset(*env, spec, seed);
}

}  // namespace

// ----------------------------------------------------------- environments

TEST_CASE("sim: episodes are deterministic given seed and actions") {
  for (const char* name : {"point_reach", "chain_run"}) {
    const RewardMode mode =
        std::string(name) == "chain_run" ? RewardMode::dense : RewardMode::sparse;
    auto a = make_env(name, mode);
    auto b = make_env(name, mode);
    const Trajectory ta = scripted_episode(*a, 42, 7);
    const Trajectory tb = scripted_episode(*b, 42, 7);
    REQUIRE_EQ(ta.length(), tb.length());
    CHECK_EQ(ta.length(), a->info().horizon);
    for (int t = 0; t < ta.length(); ++t) {
      CHECK(testsup::bits_equal(ta.transitions[t].state, tb.transitions[t].state));
      CHECK(testsup::bits_equal(ta.transitions[t].action, tb.transitions[t].action));
      CHECK_EQ(ta.transitions[t].reward, tb.transitions[t].reward);
    }
    // a different reset seed moves the start state
    auto c = make_env(name, mode);
    const Trajectory tc = scripted_episode(*c, 43, 7);
    if (std::string(name) == "point_reach")
      CHECK_FALSE(testsup::bits_equal(ta.transitions[0].state, tc.transitions[0].state));
  }
}

TEST_CASE("sim: point_reach geometry and reward regimes") {
  PointReach env(RewardMode::sparse);
  CHECK_EQ(env.info().d_s, 4);
  CHECK_EQ(env.info().d_a, 2);
  CHECK_EQ(env.info().horizon, 50);

  // reset mixes a small near-goal pocket into mostly long runs
  int near = 0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const Tensor obs = env.reset(1000 + static_cast<uint64_t>(i));
    const double dx = std::fabs(obs.at(2) - obs.at(0));
    const double dy = std::fabs(obs.at(3) - obs.at(1));
    const double dist = std::hypot(obs.at(2) - obs.at(0), obs.at(3) - obs.at(1));
    if (dist <= PointReach::kNearRadius) {
      ++near;
    } else {
      CHECK_GE(std::max(dx, dy), PointReach::kMinAxisDist);
    }
  }
  CHECK_GT(near, n / 20);      // pocket exists
  CHECK_LT(near, n / 5);       // but stays small
  // expert from a scripted far start: runs at full speed and succeeds
  env.reset_to(-0.5, -0.5, 0.5, 0.55);
  double last_reward = 0.0;
  Tensor obs = Tensor::from({4}, {-0.5, -0.5, 0.5, 0.55});
  for (int t = 0; t < PointReach::kHorizon; ++t) {
    const StepResult r = env.step(env.expert_action(obs));
    obs = r.obs;
    last_reward = r.reward;
    if (t + 1 < PointReach::kHorizon) CHECK_EQ(r.reward, 0.0);  // sparse: quiet until done
    CHECK_EQ(r.done, t + 1 == PointReach::kHorizon);
  }
  CHECK(env.success());
  CHECK_EQ(last_reward, 1.0);
  CHECK_LT(env.goal_distance(), PointReach::kGoalThreshold);

  // dense mode pays -distance every step instead
  PointReach dense(RewardMode::dense);
  dense.reset_to(0.0, 0.0, 1.0, 0.0);
  const StepResult r = dense.step(Tensor::from({2}, {0.0, 0.0}));
  CHECK_EQ(r.reward, -1.0);  // did not move, distance still 1
  CHECK_FALSE(r.done);
}

TEST_CASE("sim: point_reach clamps actions before recording them") {
  PointReach env(RewardMode::sparse);
  env.reset_to(0.0, 0.0, 1.0, 1.0);
  const StepResult r = env.step(Tensor::from({2}, {3.0, -9.0}));
  CHECK_EQ(r.action_taken.at(0), 1.0);
  CHECK_EQ(r.action_taken.at(1), -1.0);
  CHECK_EQ(r.obs.at(0), PointReach::kDt);
  CHECK_EQ(r.obs.at(1), -PointReach::kDt);
}

TEST_CASE("sim: chain_run follows its momentum recurrence exactly") {
  ChainRun env;
  CHECK_EQ(env.info().d_s, 2);
  CHECK_EQ(env.info().d_a, 1);
  CHECK_EQ(env.info().horizon, 100);
  Tensor obs = env.reset(5);
  CHECK_EQ(obs.at(0), 0.0);  // starts at rest at the origin
  CHECK_EQ(obs.at(1), 0.0);

  RngStream rng = RngStream::root(17);
  double pos = 0.0, vel = 0.0, total = 0.0;
  for (int t = 0; t < ChainRun::kHorizon; ++t) {
    const double raw = rng.uniform(-2.0, 2.0);
    const double a = raw < -1.0 ? -1.0 : (raw > 1.0 ? 1.0 : raw);
    const StepResult r = env.step(Tensor::from({1}, {raw}));
    vel = ChainRun::kMomentum * vel + ChainRun::kGain * a;  // independent replica
    pos += vel;
    total += r.reward;
    CHECK_EQ(r.action_taken.at(0), a);
    CHECK_EQ(r.reward, vel);  // reward is the per-step displacement
    CHECK_EQ(r.obs.at(0), pos);
    CHECK_EQ(r.obs.at(1), vel);
  }
  // the return telescopes to the final position
  CHECK_LT(std::fabs(total - pos), 1e-12);

  // expert pushes full throttle; closed form: vel_t = 0.1 * sum 0.9^i
  ChainRun full;
  full.reset(0);
  Tensor o = Tensor::from({2}, {0.0, 0.0});
  double expect_vel = 0.0;
  for (int t = 0; t < 5; ++t) {
    const StepResult r = full.step(full.expert_action(o));
    expect_vel = 0.9 * expect_vel + 0.1;
    CHECK_LT(std::fabs(r.obs.at(1) - expect_vel), 1e-15);
    o = r.obs;
  }
}

TEST_CASE("sim: env factory validates its arguments") {
  CHECK_THROWS_AS(make_env("chain_run", RewardMode::sparse), UsageError);
  CHECK_THROWS_AS(make_env("no_such_env", RewardMode::dense), UsageError);
  CHECK_NOTHROW(make_env("point_reach", RewardMode::dense));
  CHECK_THROWS_AS(reward_mode_from_string("blurry"), UsageError);
  CHECK(reward_mode_from_string("sparse") == RewardMode::sparse);
  CHECK_EQ(to_string(RewardMode::dense), "dense");
}

// ----------------------------------------------------------- generation

TEST_CASE("sim: generator honours mixture order, counts and flags") {
  auto env = make_env("point_reach", RewardMode::sparse);
  GeneratorSpec spec;
  spec.mixture.push_back({Quality::expert, 5, 0.0});
  spec.mixture.push_back({Quality::medium, 7, 0.5});
  spec.mixture.push_back({Quality::random, 4, 0.0});
  const TrajectoryDataset ds = generate_dataset(*env, spec, 99);
  ds.validate();
  CHECK_EQ(ds.n(), 16);
  CHECK_EQ(ds.meta.env_name, "point_reach");
  CHECK(ds.meta.reward_regime == RewardRegime::sparse);
  for (const Trajectory& t : ds.trajectories) {
    CHECK_EQ(t.length(), 50);
    CHECK(t.success.has_value());  // sparse envs label success
    for (const Transition& tr : t.transitions)
      for (double a : tr.action) {
        CHECK_GE(a, -1.0);  // recorded actions are post-clamp
        CHECK_LE(a, 1.0);
      }
  }
  // the first five arms are experts: all succeed
  for (int i = 0; i < 5; ++i) CHECK(*ds.trajectories[i].success);

  // reproducible, and seed-sensitive
  auto env2 = make_env("point_reach", RewardMode::sparse);
  const TrajectoryDataset again = generate_dataset(*env2, spec, 99);
  REQUIRE_EQ(again.n(), ds.n());
  for (int i = 0; i < ds.n(); ++i) {
    REQUIRE_EQ(again.trajectories[i].length(), ds.trajectories[i].length());
    for (int t = 0; t < ds.trajectories[i].length(); ++t) {
      CHECK(testsup::bits_equal(again.trajectories[i].transitions[t].state,
                                ds.trajectories[i].transitions[t].state));
      CHECK(testsup::bits_equal(again.trajectories[i].transitions[t].action,
                                ds.trajectories[i].transitions[t].action));
    }
  }
  auto env3 = make_env("point_reach", RewardMode::sparse);
  const TrajectoryDataset other = generate_dataset(*env3, spec, 100);
  CHECK_FALSE(testsup::bits_equal(other.trajectories[5].transitions[0].action,
                                  ds.trajectories[5].transitions[0].action));

  // dense envs leave success unset
  auto chain = make_env("chain_run", RewardMode::dense);
  GeneratorSpec cspec;
  cspec.mixture.push_back({Quality::medium, 3, 0.3});
  const TrajectoryDataset cds = generate_dataset(*chain, cspec, 1);
  for (const Trajectory& t : cds.trajectories) CHECK_FALSE(t.success.has_value());

  GeneratorSpec empty;
  CHECK_THROWS_AS(generate_dataset(*env, empty, 0), UsageError);
}

TEST_CASE("sim: medium noise degrades success smoothly") {
  auto env = make_env("point_reach", RewardMode::sparse);
  GeneratorSpec heavy;
  heavy.mixture.push_back({Quality::medium, 60, 2.5});
  const TrajectoryDataset noisy = generate_dataset(*env, heavy, 3);
  int succ = 0;
  for (const Trajectory& t : noisy.trajectories) succ += *t.success ? 1 : 0;
  GeneratorSpec clean;
  clean.mixture.push_back({Quality::medium, 60, 0.1});
  auto env2 = make_env("point_reach", RewardMode::sparse);
  const TrajectoryDataset crisp = generate_dataset(*env2, clean, 3);
  int succ2 = 0;
  for (const Trajectory& t : crisp.trajectories) succ2 += *t.success ? 1 : 0;
  CHECK_GT(succ2, succ);  // less noise, more goals
  CHECK_EQ(succ2, 60);    // sigma 0.1 barely perturbs the expert
}

// ----------------------------------------------------------- rollouts & eval

TEST_CASE("sim: dt session tracks return-to-go exactly") {
  DTPolicyConfig cfg;
  cfg.d_s = 4;
  cfg.d_a = 2;
  cfg.layers = 1;
  cfg.heads = 1;
  cfg.embed_dim = 8;
  cfg.dropout = 0.0;
  cfg.context_k = 5;
  cfg.max_episode_length = 50;
  const DTPolicy pol(cfg, RngStream::root(30).child("init"));

  RngStream rng = RngStream::root(31);
  for (int episode = 0; episode < 100; ++episode) {
    const double target = episode % 2 == 0 ? 1.0 : rng.uniform(-3.0, 3.0);
    DTSession sess(pol, target);
    double cum = 0.0;
    Tensor state = Tensor::from({4}, {rng.uniform(-1, 1), rng.uniform(-1, 1),
                                      rng.uniform(-1, 1), rng.uniform(-1, 1)});
    for (int t = 0; t < 12; ++t) {
      CHECK_EQ(sess.current_rtg(), target - cum);  // exact, not approximate
      const Tensor a = sess.act(state);
      REQUIRE_EQ(a.size(), 2);
      const double r = rng.uniform(-0.5, 0.5);
      sess.observe(a, r);
      cum += r;
      CHECK_EQ(sess.current_rtg(), target - cum);
      state.at(0) = rng.uniform(-1, 1);
    }
    CHECK_EQ(sess.steps(), 12);
  }
}

TEST_CASE("sim: rollouts run to the horizon and report the episode") {
  MLPPolicyConfig mcfg;
  mcfg.d_s = 4;
  mcfg.d_a = 2;
  mcfg.depth = 1;
  mcfg.hidden = 8;
  const PolicyVariant pol = MLPPolicy(mcfg, RngStream::root(40).child("init"));
  auto env = make_env("point_reach", RewardMode::sparse);
  const RolloutResult r = run_rollout(pol, *env, 123, 1.0);
  CHECK_EQ(r.traj.length(), 50);
  CHECK_EQ(r.total_return, total_return(r.traj));
  CHECK_EQ(r.success, r.total_return == 1.0);
  // same episode seed, same rollout
  const RolloutResult r2 = run_rollout(pol, *env, 123, 1.0);
  CHECK_EQ(r2.total_return, r.total_return);
  for (int t = 0; t < r.traj.length(); ++t)
    CHECK(testsup::bits_equal(r2.traj.transitions[t].action,
                              r.traj.transitions[t].action));

  // an expert-cloning rollout through the dt session also works end to end
  DTPolicyConfig dcfg;
  dcfg.d_s = 4;
  dcfg.d_a = 2;
  dcfg.layers = 1;
  dcfg.heads = 1;
  dcfg.embed_dim = 8;
  dcfg.dropout = 0.1;
  dcfg.context_k = 3;
  dcfg.max_episode_length = 50;
  const PolicyVariant dpol = DTPolicy(dcfg, RngStream::root(41).child("init"));
  const RolloutResult dr = run_rollout(dpol, *env, 9, 1.0);
  CHECK_EQ(dr.traj.length(), 50);
  const RolloutResult dr2 = run_rollout(dpol, *env, 9, 1.0);
  CHECK_EQ(dr2.total_return, dr.total_return);
}

TEST_CASE("sim: evaluate_policy yields exactly the requested rollouts") {
  MLPPolicyConfig mcfg;
  mcfg.d_s = 4;
  mcfg.d_a = 2;
  mcfg.depth = 0;
  const PolicyVariant pol = MLPPolicy(mcfg, RngStream::root(50).child("init"));
  auto env = make_env("point_reach", RewardMode::sparse);
  EvalConfig cfg;
  cfg.rollouts = 50;
  cfg.kind = ScoreKind::success_rate;
  const EvalResult res =
      evaluate_policy(pol, *env, cfg, RngStream::root(7).child("eval"), 0);
  CHECK_EQ(res.samples.size(), 50);
  double mean = 0.0;
  std::vector<double> scores;
  for (const EvalSample& s : res.samples) {
    CHECK((s.score == 0.0 || s.score == 100.0));  // percent scale
    CHECK_EQ(s.score, s.success ? 100.0 : 0.0);
    mean += s.score;
    scores.push_back(s.score);
  }
  mean /= 50.0;
  CHECK_LT(std::fabs(res.mean - mean), 1e-15);
  CHECK_EQ(res.stddev, sample_stddev(scores));

  // repeatable for the same stream and index, fresh episodes per index
  const EvalResult again =
      evaluate_policy(pol, *env, cfg, RngStream::root(7).child("eval"), 0);
  CHECK_EQ(again.mean, res.mean);
  for (size_t i = 0; i < res.samples.size(); ++i)
    CHECK_EQ(again.samples[i].total_return, res.samples[i].total_return);
  const EvalResult later =
      evaluate_policy(pol, *env, cfg, RngStream::root(7).child("eval"), 1);
  bool all_same = true;
  for (size_t i = 0; i < res.samples.size(); ++i)
    all_same = all_same && later.samples[i].total_return == res.samples[i].total_return;
  CHECK_FALSE(all_same);

  // normalized scoring maps through the reference returns
  EvalConfig ncfg;
  ncfg.rollouts = 10;
  ncfg.kind = ScoreKind::normalized_return;
  ncfg.random_ref = -2.0;
  ncfg.expert_ref = 2.0;
  MLPPolicyConfig ccfg;
  ccfg.d_s = 2;
  ccfg.d_a = 1;
  ccfg.depth = 0;
  const PolicyVariant cpol = MLPPolicy(ccfg, RngStream::root(51).child("init"));
  auto chain = make_env("chain_run", RewardMode::dense);
  const EvalResult nres =
      evaluate_policy(cpol, *chain, ncfg, RngStream::root(8).child("eval"), 0);
  for (const EvalSample& s : nres.samples)
    CHECK_LT(std::fabs(s.score - normalized_score(s.total_return, -2.0, 2.0)), 1e-12);
}

TEST_CASE("sim: scoring helpers") {
  CHECK_EQ(normalized_score(0.5, 0.0, 1.0), 50.0);
  CHECK_EQ(normalized_score(-2.0, -2.0, 6.0), 0.0);
  CHECK_EQ(normalized_score(6.0, -2.0, 6.0), 100.0);
  CHECK_THROWS_AS(normalized_score(1.0, 3.0, 3.0), UsageError);

  CHECK_EQ(sample_stddev({}), 0.0);
  CHECK_EQ(sample_stddev({4.0}), 0.0);
  CHECK_LT(std::fabs(sample_stddev({1.0, 2.0, 3.0, 4.0}) -
                     std::sqrt(5.0 / 3.0)), 1e-15);

  std::vector<EvalPoint> pts;
  append_eval_point(pts, 10, 0.3, 0.1, 50);
  append_eval_point(pts, 20, 0.7, 0.1, 50);
  append_eval_point(pts, 30, 0.5, 0.1, 50);
  append_eval_point(pts, 40, 0.9, 0.1, 50);
  REQUIRE_EQ(pts.size(), 4);
  CHECK_EQ(pts[0].best_so_far, 0.3);
  CHECK_EQ(pts[1].best_so_far, 0.7);
  CHECK_EQ(pts[2].best_so_far, 0.7);  // dip does not lower the running best
  CHECK_EQ(pts[3].best_so_far, 0.9);
  CHECK_EQ(pts[2].mean, 0.5);
  CHECK_EQ(pts[3].epoch, 40);
}

// ----------------------------------------------------------- training

TEST_CASE("sim: bc training drives the imitation loss down") {
  const TrajectoryDataset ds = expert_point_reach(12, 7);
  TrainConfig cfg;
  cfg.method = Method::bc;
  cfg.seed = 1;
  cfg.epochs = 12;
  cfg.batch_size = 64;
  cfg.lr = 1e-3;
  cfg.mlp.depth = 1;
  cfg.mlp.hidden = 32;
  cfg.eval_every_epochs = 0;  // no eval hook in this smoke test
  const TrainOutcome out = train_policy(ds, cfg);
  REQUIRE_GT(out.log.steps.size(), 10);
  CHECK_EQ(out.steps_per_epoch, (12 * 50 + 63) / 64);
  CHECK_EQ(static_cast<int64_t>(out.log.steps.size()), out.steps_per_epoch * 12);
  const double first = out.log.steps.front().loss;
  const double last = out.log.steps.back().loss;
  CHECK_LT(last, first * 0.5);
  for (const StepRecord& s : out.log.steps) {
    CHECK(std::isfinite(s.loss));
    CHECK_LE(s.gnorm_post, s.gnorm_pre + 1e-12);
    CHECK_LE(s.gnorm_post, cfg.grad_clip + 1e-12);
  }
  // step records count 1..N with the mlp schedule applied
  CHECK_EQ(out.log.steps.front().step, 1);
  CHECK_EQ(out.log.steps.back().step, static_cast<int64_t>(out.log.steps.size()));
}

TEST_CASE("sim: dt training drives the imitation loss down") {
  const TrajectoryDataset ds = expert_point_reach(10, 8);
  TrainConfig cfg;
  cfg.method = Method::dt;
  cfg.seed = 2;
  cfg.epochs = 10;
  cfg.batch_size = 64;
  cfg.lr = 1e-3;
  cfg.warmup_steps = 20;
  cfg.dt.layers = 1;
  cfg.dt.heads = 1;
  cfg.dt.embed_dim = 16;
  cfg.dt.dropout = 0.1;
  cfg.dt.context_k = 4;
  cfg.eval_every_epochs = 0;
  const TrainOutcome out = train_policy(ds, cfg);
  const double first = out.log.steps.front().loss;
  const double last = out.log.steps.back().loss;
  CHECK_LT(last, first * 0.8);
  // warmup shows in the recorded learning rates
  CHECK_LT(out.log.steps.front().lr, cfg.lr / 10.0);
  CHECK_EQ(out.log.steps[19].lr, cfg.lr);  // step 20 reaches the base rate
}

TEST_CASE("sim: eval hook cadence and best-checkpoint bookkeeping") {
  const TrajectoryDataset ds = expert_point_reach(6, 9);
  TrainConfig cfg;
  cfg.method = Method::bc;
  cfg.seed = 3;
  cfg.epochs = 7;
  cfg.batch_size = 128;
  cfg.mlp.depth = 1;
  cfg.mlp.hidden = 16;
  cfg.eval_every_epochs = 3;
  std::vector<int> calls;
  auto env = make_env("point_reach", RewardMode::sparse);
  const EvalHook hook = [&](const PolicyVariant& p, int eval_index) {
    calls.push_back(eval_index);
    EvalConfig ec;
    ec.rollouts = 4;
    return evaluate_policy(p, *env, ec, RngStream::root(cfg.seed).child("eval"),
                           eval_index);
  };
  const TrainOutcome out = train_policy(ds, cfg, hook);
  // epochs 3, 6 on cadence plus the forced final epoch 7
  REQUIRE_EQ(out.log.evals.size(), 3);
  CHECK_EQ(out.log.evals[0].epoch, 3);
  CHECK_EQ(out.log.evals[1].epoch, 6);
  CHECK_EQ(out.log.evals[2].epoch, 7);
  CHECK_EQ(calls.size(), 3);
  CHECK_EQ(calls[0], 0);
  CHECK_EQ(calls[2], 2);
  for (size_t i = 1; i < out.log.evals.size(); ++i)
    CHECK_GE(out.log.evals[i].best_so_far, out.log.evals[i - 1].best_so_far);
  REQUIRE(out.best.has_value());
  double best = out.log.evals[0].mean;
  for (const EvalPoint& p : out.log.evals) best = std::max(best, p.mean);
  CHECK_EQ(out.best_mean, best);
}

TEST_CASE("sim: filtered methods with a full-width filter match their base") {
  // a mixed-quality sparsified pile; top-fraction 1.0 keeps every
  // trajectory so the filtered arm must reproduce the base arm byte for
  // byte
  auto env = make_env("chain_run", RewardMode::dense);
  GeneratorSpec spec;
  spec.mixture.push_back({Quality::medium, 6, 0.4});
  spec.mixture.push_back({Quality::random, 6, 0.0});
  const TrajectoryDataset ds = sparsify(generate_dataset(*env, spec, 55));

  auto run = [&](Method m, double fraction) {
    TrainConfig cfg;
    cfg.method = m;
    cfg.seed = 11;
    cfg.epochs = 4;
    cfg.batch_size = 100;
    cfg.mlp.depth = 1;
    cfg.mlp.hidden = 16;
    cfg.dt.layers = 1;
    cfg.dt.heads = 1;
    cfg.dt.embed_dim = 8;
    cfg.dt.context_k = 3;
    cfg.dt.rtg_scale = 50.0;
    cfg.warmup_steps = 10;
    cfg.filter.mode = FilterSpec::Mode::top_fraction;
    cfg.filter.fraction = fraction;
    cfg.eval_every_epochs = 2;
    std::shared_ptr<Env> eval_env = make_env("chain_run", RewardMode::dense);
    const EvalHook hook = [&cfg, eval_env](const PolicyVariant& p, int eval_index) {
      EvalConfig ec;
      ec.rollouts = 3;
      ec.kind = ScoreKind::raw_return;
      ec.rtg_target = 50.0;
      return evaluate_policy(p, *eval_env, ec,
                             RngStream::root(cfg.seed).child("eval"), eval_index);
    };
    return train_policy(ds, cfg, hook);
  };

  const TrainOutcome bc = run(Method::bc, 1.0);
  const TrainOutcome fbc = run(Method::fbc, 1.0);
  CHECK_EQ(bc.log.steps_csv(), fbc.log.steps_csv());
  CHECK_EQ(bc.log.evals_csv(), fbc.log.evals_csv());

  const TrainOutcome dt = run(Method::dt, 1.0);
  const TrainOutcome fdt = run(Method::fdt, 1.0);
  CHECK_EQ(dt.log.steps_csv(), fdt.log.steps_csv());
  CHECK_EQ(dt.log.evals_csv(), fdt.log.evals_csv());

  // and the filtered variant does differ from base once the filter bites
  const TrainOutcome narrow = run(Method::fbc, 0.5);
  CHECK_NE(narrow.log.steps_csv(), bc.log.steps_csv());
}

TEST_CASE("sim: method helpers and training validation") {
  CHECK(method_from_string("bc") == Method::bc);
  CHECK(method_from_string("fbc") == Method::fbc);
  CHECK(method_from_string("dt") == Method::dt);
  CHECK(method_from_string("fdt") == Method::fdt);
  CHECK_THROWS_AS(method_from_string("cql"), UsageError);
  CHECK_EQ(to_string(Method::fdt), "fdt");
  CHECK(is_filtered(Method::fbc));
  CHECK(is_filtered(Method::fdt));
  CHECK_FALSE(is_filtered(Method::bc));
  CHECK(is_sequence(Method::dt));
  CHECK(is_sequence(Method::fdt));
  CHECK_FALSE(is_sequence(Method::fbc));

  const TrajectoryDataset ds = expert_point_reach(3, 1);
  TrainConfig bad;
  bad.method = Method::bc;
  bad.epochs = 0;
  CHECK_THROWS_AS(train_policy(ds, bad), UsageError);
}
