#include "offrl/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>

#include <nlohmann/json.hpp>

#include "offrl/util.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace offrl {

namespace {

struct DatasetContext {
  DatasetSpecCfg spec;
  TrajectoryDataset ds;
  std::string blob_hash;
  DatasetResolution res;
};

DatasetContext materialise_dataset(const ExperimentConfig& cfg, const DatasetSpecCfg& spec,
                                   const std::string& data_dir, std::ostream& log) {
  DatasetContext ctx;
  ctx.spec = spec;
  if (!spec.path.empty()) {
    ctx.ds = load_dataset(spec.path);
  } else {
    if (spec.sparsify_flag && spec.mode != RewardMode::dense)
      throw UsageError("dataset '" + spec.name + "': relocation applies to dense generation only");
    std::unique_ptr<Env> env = make_env(spec.env, spec.mode);
    TrajectoryDataset raw = generate_dataset(*env, spec.mixture, spec.seed);
    ctx.ds = spec.sparsify_flag ? sparsify(raw) : std::move(raw);
  }
  const std::string path = join_path(data_dir, spec.name + ".traj");
  save_dataset(ctx.ds, path);
  ctx.blob_hash = git_blob_hash_file(path);
  ctx.res = resolve_dataset_knobs(cfg, ctx.ds, spec.rtg_auto, spec.rtg_target);
  log << "dataset " << spec.name << ": env=" << ctx.ds.meta.env_name
      << " regime=" << to_string(ctx.ds.meta.reward_regime) << " n=" << ctx.ds.n()
      << " transitions=" << ctx.ds.total_transitions()
      << " rtg_target=" << fmt_double(ctx.res.rtg_target) << "\n";
  return ctx;
}

ArmResult run_arm(const ExperimentConfig& cfg, const DatasetContext& ctx, Method method,
                  uint64_t seed, const std::string& arm_dir) {
  ArmResult res;
  res.dataset = ctx.spec.name;
  res.method = method;
  res.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    ensure_dir(arm_dir);
    const TrainConfig tc = make_train_config(cfg, ctx.res, method, seed);
    const RewardMode mode =
        ctx.ds.meta.reward_regime == RewardRegime::sparse ? RewardMode::sparse : RewardMode::dense;
    std::unique_ptr<Env> env = make_env(ctx.ds.meta.env_name, mode);
    EvalConfig ecfg;
    ecfg.rollouts = cfg.eval_rollouts;
    ecfg.every_epochs = ctx.res.eval_every;
    ecfg.rtg_target = ctx.res.rtg_target;
    ecfg.random_ref = ctx.spec.random_ref;
    ecfg.expert_ref = ctx.spec.expert_ref;
    ecfg.kind = ctx.res.kind;
    const RngStream eval_stream = RngStream::root(seed).child("eval");
    const EvalHook hook = [&](const PolicyVariant& policy, int eval_index) {
      return evaluate_policy(policy, *env, ecfg, eval_stream, eval_index);
    };
    TrainOutcome out = train_policy(ctx.ds, tc, hook);
    res.param_count = policy_param_count(out.policy);
    res.steps_per_epoch = out.steps_per_epoch;
    res.evals = out.log.evals;
    write_file(join_path(arm_dir, "train_log.csv"), out.log.steps_csv());
    write_file(join_path(arm_dir, "eval_log.csv"), out.log.evals_csv());
    Checkpoint final_ckpt{out.policy,
                          seed,
                          static_cast<uint64_t>(out.steps_per_epoch) *
                              static_cast<uint64_t>(cfg.epochs),
                          ctx.ds.meta.env_name,
                          to_string(ctx.ds.meta.reward_regime),
                          ctx.res.rtg_target};
    save_checkpoint(final_ckpt, join_path(arm_dir, "checkpoint_final.ckpt"));
    Checkpoint best_ckpt = final_ckpt;
    if (out.best.has_value()) {
      best_ckpt.policy = *out.best;
      best_ckpt.step = static_cast<uint64_t>(out.best_step);
    }
    save_checkpoint(best_ckpt, join_path(arm_dir, "checkpoint_best.ckpt"));
    res.ok = true;
  } catch (const std::exception& e) {
    res.ok = false;
    res.error = e.what();
  }
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace

DatasetResolution resolve_dataset_knobs(const ExperimentConfig& cfg,
                                        const TrajectoryDataset& ds,
                                        bool rtg_auto, double rtg_target) {
  DatasetResolution res;
  const bool sparse = ds.meta.reward_regime == RewardRegime::sparse;
  if (cfg.filter_mode == "success" || (cfg.filter_mode == "auto" && sparse)) {
    res.filter.mode = FilterSpec::Mode::successful;
  } else {
    res.filter.mode = FilterSpec::Mode::top_fraction;
    res.filter.fraction = cfg.filter_fraction;
  }
  res.dt_context = cfg.dt_context > 0 ? cfg.dt_context : (sparse ? 1 : 20);
  res.rtg_scale = cfg.dt_rtg_scale > 0 ? cfg.dt_rtg_scale : (sparse ? 1.0 : 1000.0);
  res.eval_every = cfg.eval_every > 0 ? cfg.eval_every : (sparse ? 50 : 100);
  res.kind = sparse ? ScoreKind::success_rate : ScoreKind::normalized_return;
  if (!rtg_auto) {
    res.rtg_target = rtg_target;
  } else if (sparse) {
    res.rtg_target = 1.0;
  } else {
    double best = 0.0;
    bool first = true;
    for (const Trajectory& t : ds.trajectories) {
      const double r = total_return(t);
      if (first || r > best) {
        best = r;
        first = false;
      }
    }
    res.rtg_target = best;
  }
  return res;
}

TrainConfig make_train_config(const ExperimentConfig& cfg, const DatasetResolution& res,
                              Method method, uint64_t seed) {
  TrainConfig tc;
  tc.method = method;
  tc.seed = seed;
  tc.epochs = cfg.epochs;
  tc.batch_size = is_sequence(method) ? cfg.dt_batch : cfg.bc_batch;
  tc.lr = cfg.lr;
  tc.weight_decay = cfg.weight_decay;
  tc.grad_clip = cfg.grad_clip;
  tc.warmup_steps = cfg.dt_warmup;
  tc.decay_epoch = cfg.bc_decay_epoch;
  tc.decay_factor = cfg.bc_decay_factor;
  tc.filter = res.filter;
  tc.mlp.depth = cfg.bc_depth;
  tc.mlp.hidden = cfg.bc_hidden;
  tc.dt.layers = cfg.dt_layers;
  tc.dt.heads = cfg.dt_heads;
  tc.dt.embed_dim = cfg.dt_embed;
  tc.dt.dropout = cfg.dt_dropout;
  tc.dt.context_k = res.dt_context;
  tc.dt.rtg_scale = res.rtg_scale;
  tc.dt.pos_encoding =
      cfg.dt_pos_encoding == "learned" ? PosEncoding::learned : PosEncoding::sinusoidal;
  tc.eval_every_epochs = res.eval_every;
  return tc;
}

std::string arm_dir_name(const std::string& dataset, Method method, uint64_t seed) {
  return dataset + "__" + to_string(method) + "__seed" + std::to_string(seed);
}

BenchOutcome run_benchmark(const ExperimentConfig& cfg, int parallel,
                           const std::string& out_dir, bool dry_run, std::ostream& log) {
  if (out_dir.empty()) throw UsageError("no output directory (set out_dir or pass --out)");
  if (parallel < 1)
    throw UsageError("worker count must be >= 1, got " + std::to_string(parallel));
  if (cfg.datasets.empty()) throw UsageError("config defines no datasets");
  if (cfg.methods.empty()) throw UsageError("config lists no methods");
  if (cfg.seeds.empty()) throw UsageError("config lists no seeds");

  BenchOutcome out;
  const size_t n_arms = cfg.datasets.size() * cfg.methods.size() * cfg.seeds.size();
  if (dry_run) {
    log << "plan: " << cfg.datasets.size() << " dataset(s) x " << cfg.methods.size()
        << " method(s) x " << cfg.seeds.size() << " seed(s) = " << n_arms << " arm(s)\n";
    for (const DatasetSpecCfg& d : cfg.datasets) {
      // transition-count estimate: loaded files are counted exactly, mixtures
      // assume full-horizon episodes (true for the built-in envs)
      int64_t n_traj = 0;
      int64_t trans = 0;
      bool sparse_regime = d.mode == RewardMode::sparse && !d.sparsify_flag;
      if (!d.path.empty()) {
        const TrajectoryDataset ds = load_dataset(d.path);
        n_traj = ds.n();
        trans = ds.total_transitions();
        sparse_regime = ds.meta.reward_regime == RewardRegime::sparse;
      } else {
        const std::unique_ptr<Env> env = make_env(d.env, d.mode);
        for (const MixtureEntry& e : d.mixture.mixture) n_traj += e.count;
        trans = n_traj * env->info().horizon;
      }
      const bool top_fraction =
          cfg.filter_mode == "top_fraction" ||
          (cfg.filter_mode == "auto" && !sparse_regime);
      // success filters keep an a-priori unknown share, so use the full count
      const int64_t kept_traj =
          top_fraction ? top_fraction_count(n_traj, cfg.filter_fraction) : n_traj;
      const int64_t filtered_trans =
          n_traj > 0 ? (trans * kept_traj + n_traj - 1) / n_traj : 0;
      for (const Method m : cfg.methods) {
        const int64_t t = is_filtered(m) ? filtered_trans : trans;
        const int batch = is_sequence(m) ? cfg.dt_batch : cfg.bc_batch;
        const int64_t steps =
            static_cast<int64_t>(cfg.epochs) * ((t + batch - 1) / batch);
        for (const uint64_t s : cfg.seeds)
          log << "  arm " << arm_dir_name(d.name, m, s) << "  est_steps=" << steps << "\n";
      }
    }
    log << "dry run: nothing written\n";
    return out;
  }

  ensure_dir(out_dir);
  const std::string data_dir = join_path(out_dir, "data");
  const std::string arms_dir = join_path(out_dir, "arms");
  const std::string curves_dir = join_path(out_dir, "curves");
  const std::string plots_dir = join_path(out_dir, "plots");
  ensure_dir(data_dir);
  ensure_dir(arms_dir);
  ensure_dir(curves_dir);
  ensure_dir(plots_dir);

  std::vector<DatasetContext> contexts;
  contexts.reserve(cfg.datasets.size());
  for (const DatasetSpecCfg& spec : cfg.datasets)
    contexts.push_back(materialise_dataset(cfg, spec, data_dir, log));

  struct ArmPlan {
    const DatasetContext* ctx;
    Method method;
    uint64_t seed;
    std::string dir;
  };
  std::vector<ArmPlan> plan;
  plan.reserve(n_arms);
  for (const DatasetContext& ctx : contexts)
    for (const Method m : cfg.methods)
      for (const uint64_t s : cfg.seeds)
        plan.push_back({&ctx, m, s,
                        join_path(arms_dir, arm_dir_name(ctx.spec.name, m, s))});

  out.arms.resize(plan.size());
  const int n = static_cast<int>(plan.size());
  // worker count is a throughput knob only: arms are independent and every
  // byte they write is derived from (dataset, method, seed)
#pragma omp parallel for num_threads(parallel) schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    const ArmPlan& p = plan[static_cast<size_t>(i)];
    ArmResult r = run_arm(cfg, *p.ctx, p.method, p.seed, p.dir);
#ifdef _OPENMP
#pragma omp critical(offrl_bench_log)
#endif
    {
      log << "arm " << arm_dir_name(p.ctx->spec.name, p.method, p.seed) << ": "
          << (r.ok ? "ok" : std::string("FAILED: ") + r.error);
      if (r.ok && !r.evals.empty())
        log << " best=" << fmt_double(r.evals.back().best_so_far);
      log << "\n";
    }
    out.arms[static_cast<size_t>(i)] = std::move(r);
  }
  for (const ArmResult& r : out.arms)
    if (!r.ok) out.any_failed = true;

  // aggregation in fixed config order
  out.summary.datasets.clear();
  for (const DatasetContext& ctx : contexts) out.summary.datasets.push_back(ctx.spec.name);
  for (const Method m : cfg.methods) out.summary.methods.push_back(to_string(m));
  out.summary.cells.assign(contexts.size(),
                           std::vector<CellStat>(cfg.methods.size()));
  for (size_t di = 0; di < contexts.size(); ++di) {
    std::vector<CurveSeries> series;
    for (size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      std::vector<std::vector<EvalPoint>> per_seed;
      for (const ArmResult& r : out.arms)
        if (r.ok && r.dataset == contexts[di].spec.name && r.method == cfg.methods[mi])
          per_seed.push_back(r.evals);
      CellStat& cell = out.summary.cells[di][mi];
      if (per_seed.empty()) {
        cell.present = true;
        cell.failed = true;
        continue;
      }
      const std::vector<CurvePoint> curve = aggregate_curves(per_seed);
      write_file(join_path(curves_dir, contexts[di].spec.name + "__" +
                                           to_string(cfg.methods[mi]) + ".csv"),
                 render_curve_csv(curve));
      cell = cell_from_curve(curve);
      series.push_back({to_string(cfg.methods[mi]), curve});
    }
    write_file(join_path(plots_dir, contexts[di].spec.name + ".svg"),
               render_curves_svg(contexts[di].spec.name, series));
  }

  write_file(join_path(out_dir, "summary.txt"), render_summary_text(out.summary, 2, false));
  write_file(join_path(out_dir, "summary.csv"), render_summary_csv(out.summary));

  // diagnostics only; the one file allowed to differ between repeat runs
  std::string timings = "dataset,method,seed,wall_seconds\n";
  for (const ArmResult& r : out.arms) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", r.wall_seconds);
    timings += r.dataset + "," + to_string(r.method) + "," + std::to_string(r.seed) + "," +
               buf + "\n";
  }
  write_file(join_path(out_dir, "timings.csv"), timings);

  nlohmann::json manifest;
  manifest["name"] = cfg.name;
  manifest["config"] = resolved_config_text(cfg);
  nlohmann::json jds = nlohmann::json::array();
  for (const DatasetContext& ctx : contexts) {
    nlohmann::json d;
    d["name"] = ctx.spec.name;
    d["env"] = ctx.ds.meta.env_name;
    d["regime"] = to_string(ctx.ds.meta.reward_regime);
    d["trajectories"] = ctx.ds.n();
    d["transitions"] = ctx.ds.total_transitions();
    d["blob"] = ctx.blob_hash;
    d["filter_mode"] = to_string(ctx.res.filter.mode);
    d["filter_fraction"] = ctx.res.filter.fraction;
    d["dt_context"] = ctx.res.dt_context;
    d["rtg_scale"] = ctx.res.rtg_scale;
    d["rtg_target"] = ctx.res.rtg_target;
    d["eval_every"] = ctx.res.eval_every;
    d["score"] = to_string(ctx.res.kind);
    d["random_ref"] = ctx.spec.random_ref;
    d["expert_ref"] = ctx.spec.expert_ref;
    jds.push_back(d);
  }
  manifest["datasets"] = jds;
  nlohmann::json jarms = nlohmann::json::array();
  for (const ArmResult& r : out.arms) {
    nlohmann::json a;
    a["dir"] = arm_dir_name(r.dataset, r.method, r.seed);
    a["dataset"] = r.dataset;
    a["method"] = to_string(r.method);
    a["seed"] = r.seed;
    a["status"] = r.ok ? "ok" : "failed";
    if (!r.ok) a["error"] = r.error;
    if (r.ok) {
      a["param_count"] = r.param_count;
      a["steps_per_epoch"] = r.steps_per_epoch;
      a["evals"] = r.evals.size();
      if (!r.evals.empty()) a["best_mean"] = r.evals.back().best_so_far;
    }
    jarms.push_back(a);
  }
  manifest["arms"] = jarms;
  write_file(join_path(out_dir, "manifest.json"), manifest.dump(2) + "\n");

  log << "\n" << render_summary_text(out.summary, 2, color_enabled());
  return out;
}

}  // namespace offrl
