// Command-line front end: dataset plumbing, single-arm training, rollout
// evaluation, benchmark bundles and bundle re-reporting. Exit codes:
// 0 ok, 1 usage, 2 bad data, 3 run/arm failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "offrl/benchmark.hpp"
#include "offrl/errors.hpp"
#include "offrl/util.hpp"

namespace {

using namespace offrl;

// linear-interpolation quantile of an already sorted sample
double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  if (sorted.size() == 1) return sorted[0];
  const double h = p * static_cast<double>(sorted.size() - 1);
  const size_t lo = static_cast<size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

FilterSpec::Mode parse_filter_mode(const std::string& s) {
  if (s == "successful" || s == "success") return FilterSpec::Mode::successful;
  if (s == "top-fraction" || s == "top_fraction") return FilterSpec::Mode::top_fraction;
  throw UsageError("unknown filter mode '" + s + "' (expected successful or top-fraction)");
}

ScoreKind parse_score_kind(const std::string& s) {
  if (s == "success-rate" || s == "success_rate") return ScoreKind::success_rate;
  if (s == "normalized-return" || s == "normalized_return") return ScoreKind::normalized_return;
  if (s == "raw-return" || s == "raw_return") return ScoreKind::raw_return;
  throw UsageError("unknown score kind '" + s +
                   "' (expected success-rate, normalized-return or raw-return)");
}

void apply_set_overrides(ExperimentConfig& cfg, const std::vector<std::string>& sets) {
  for (const std::string& kv : sets) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw UsageError("--set expects key=value, got '" + kv + "'");
    apply_override(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
}

// flag > OFFRL_OUT_DIR > fallback (usually the config's out_dir)
std::string resolve_out_dir(const std::string& flag, const std::string& fallback) {
  if (!flag.empty()) return flag;
  if (const char* e = std::getenv("OFFRL_OUT_DIR"); e != nullptr && *e != '\0') return e;
  if (!fallback.empty()) return fallback;
  throw UsageError("no output directory (pass --out or set OFFRL_OUT_DIR)");
}

void cmd_dataset_inspect(const std::string& path) {
  const TrajectoryDataset ds = load_dataset(path);
  ds.validate();
  std::cout << "env: " << ds.meta.env_name << "\n"
            << "regime: " << to_string(ds.meta.reward_regime) << "\n"
            << "trajectories: " << ds.n() << "\n"
            << "transitions: " << ds.total_transitions() << "\n"
            << "state_dim: " << ds.meta.d_s << "\n"
            << "action_dim: " << ds.meta.d_a << "\n"
            << "max_episode_length: " << ds.meta.max_episode_length << "\n";
  int64_t flagged = 0, succ = 0;
  std::vector<double> returns;
  returns.reserve(ds.trajectories.size());
  for (const Trajectory& t : ds.trajectories) {
    returns.push_back(total_return(t));
    if (t.success.has_value()) {
      ++flagged;
      if (*t.success) ++succ;
    }
  }
  if (flagged > 0) std::cout << "successful: " << succ << " / " << ds.n() << "\n";
  std::sort(returns.begin(), returns.end());
  double sum = 0.0;
  for (double r : returns) sum += r;
  std::cout << "returns: min=" << fmt_double(returns.front())
            << " p25=" << fmt_double(quantile(returns, 0.25))
            << " median=" << fmt_double(quantile(returns, 0.5))
            << " p75=" << fmt_double(quantile(returns, 0.75))
            << " max=" << fmt_double(returns.back())
            << " mean=" << fmt_double(sum / static_cast<double>(returns.size())) << "\n";
}

// rebuild curves, plots and summaries from an existing bundle's manifest
// and per-arm eval logs; running it twice is a no-op
void cmd_report(const std::string& bundle) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(join_path(bundle, "manifest.json")));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest.json in " + bundle + ": " + e.what());
  }
  ExperimentConfig cfg;
  std::vector<std::string> arm_datasets, arm_dirs;
  std::vector<Method> arm_methods;
  std::vector<bool> arm_ok;
  try {
    cfg = parse_experiment_config(manifest.at("config").get<std::string>());
    for (const nlohmann::json& a : manifest.at("arms")) {
      arm_datasets.push_back(a.at("dataset").get<std::string>());
      arm_methods.push_back(method_from_string(a.at("method").get<std::string>()));
      arm_dirs.push_back(a.at("dir").get<std::string>());
      arm_ok.push_back(a.at("status").get<std::string>() == "ok");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest.json in " + bundle + ": " + e.what());
  }

  const std::string curves_dir = join_path(bundle, "curves");
  const std::string plots_dir = join_path(bundle, "plots");
  ensure_dir(curves_dir);
  ensure_dir(plots_dir);

  SummaryTable table;
  for (const DatasetSpecCfg& d : cfg.datasets) table.datasets.push_back(d.name);
  for (const Method m : cfg.methods) table.methods.push_back(to_string(m));
  table.cells.assign(table.datasets.size(), std::vector<CellStat>(table.methods.size()));
  for (size_t di = 0; di < table.datasets.size(); ++di) {
    std::vector<CurveSeries> series;
    for (size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      std::vector<std::vector<EvalPoint>> per_seed;
      for (size_t ai = 0; ai < arm_dirs.size(); ++ai) {
        if (!arm_ok[ai] || arm_datasets[ai] != table.datasets[di] ||
            arm_methods[ai] != cfg.methods[mi])
          continue;
        const std::string log_path = join_path(join_path(join_path(bundle, "arms"), arm_dirs[ai]),
                                               "eval_log.csv");
        per_seed.push_back(parse_eval_log_csv(read_file(log_path), log_path));
      }
      CellStat& cell = table.cells[di][mi];
      if (per_seed.empty()) {
        cell.present = true;
        cell.failed = true;
        continue;
      }
      const std::vector<CurvePoint> curve = aggregate_curves(per_seed);
      write_file(join_path(curves_dir, table.datasets[di] + "__" +
                                           to_string(cfg.methods[mi]) + ".csv"),
                 render_curve_csv(curve));
      cell = cell_from_curve(curve);
      series.push_back({to_string(cfg.methods[mi]), curve});
    }
    write_file(join_path(plots_dir, table.datasets[di] + ".svg"),
               render_curves_svg(table.datasets[di], series));
  }
  write_file(join_path(bundle, "summary.txt"), render_summary_text(table, 2, false));
  write_file(join_path(bundle, "summary.csv"), render_summary_csv(table));
  std::cout << render_summary_text(table, 2, color_enabled());
}

int run(int argc, char** argv) {
  CLI::App app{"behavior cloning and return-conditioned sequence modelling on sparse-reward toys"};
  app.require_subcommand(1);

  // ---- dataset ----
  CLI::App* dataset = app.add_subcommand("dataset", "generate, inspect and transform trajectory files");
  dataset->require_subcommand(1);

  struct {
    std::string env = "point_reach";
    std::string mode = "dense";
    std::string mixture;
    uint64_t seed = 0;
    std::string out;
    bool text = false;
  } gen;
  CLI::App* g = dataset->add_subcommand("gen", "roll out a scripted policy mixture");
  g->add_option("--env", gen.env, "environment name")->capture_default_str();
  g->add_option("--mode", gen.mode, "reward mode: dense | sparse")->capture_default_str();
  g->add_option("--mixture", gen.mixture,
                "quality:count[:noise] list, e.g. expert:60,medium:120:0.5,random:120")
      ->required();
  g->add_option("--seed", gen.seed, "generation seed")->required();
  g->add_flag("--text", gen.text, "write the JSON-lines text form instead of binary");
  g->add_option("out", gen.out, "output .traj path")->required();
  g->callback([&]() {
    const std::unique_ptr<Env> env = make_env(gen.env, reward_mode_from_string(gen.mode));
    const TrajectoryDataset ds = generate_dataset(*env, parse_mixture(gen.mixture), gen.seed);
    if (gen.text)
      save_dataset_text(ds, gen.out);
    else
      save_dataset(ds, gen.out);
    std::cout << "wrote " << ds.n() << " trajectories (" << ds.total_transitions()
              << " transitions) to " << gen.out << "\n";
  });

  struct {
    std::string path;
  } ins;
  CLI::App* i = dataset->add_subcommand("inspect", "print size, success and return facts");
  i->add_option("file", ins.path, "dataset file")->required();
  i->callback([&]() { cmd_dataset_inspect(ins.path); });

  struct {
    std::string in, out;
  } sp;
  CLI::App* s = dataset->add_subcommand(
      "sparsify", "relocate each trajectory's return onto its final step");
  s->add_option("in", sp.in, "dense dataset")->required();
  s->add_option("out", sp.out, "output path")->required();
  s->callback([&]() {
    const TrajectoryDataset out_ds = sparsify(load_dataset(sp.in));
    save_dataset(out_ds, sp.out);
    std::cout << "relocated returns of " << out_ds.n() << " trajectories to " << sp.out << "\n";
  });

  struct {
    std::string mode = "successful";
    double fraction = 0.10;
    std::string in, out;
  } fl;
  CLI::App* f = dataset->add_subcommand("filter", "keep successful or top-return trajectories");
  f->add_option("--mode", fl.mode, "successful | top-fraction")->capture_default_str();
  f->add_option("--fraction", fl.fraction, "kept share for top-fraction")->capture_default_str();
  f->add_option("in", fl.in, "input dataset")->required();
  f->add_option("out", fl.out, "output path")->required();
  f->callback([&]() {
    const TrajectoryDataset in_ds = load_dataset(fl.in);
    FilterSpec spec;
    spec.mode = parse_filter_mode(fl.mode);
    spec.fraction = fl.fraction;
    const TrajectoryDataset out_ds = apply_filter(in_ds, spec);
    save_dataset(out_ds, fl.out);
    std::cout << "kept " << out_ds.n() << " / " << in_ds.n() << " trajectories to " << fl.out
              << "\n";
  });

  // ---- train ----
  struct {
    std::string method;
    std::string data;
    std::string out;
    std::string config;
    uint64_t seed = 0;
    std::vector<std::string> sets;
    double rtg_target = 0.0;
    double random_ref = 0.0;
    double expert_ref = 1.0;
    bool no_eval = false;
  } tr;
  CLI::App* t = app.add_subcommand("train", "fit one method on a dataset file");
  t->add_option("method", tr.method, "bc | fbc | dt | fdt")->required();
  t->add_option("--data", tr.data, "training dataset (.traj)")->required();
  t->add_option("--out", tr.out, "output directory");
  t->add_option("--seed", tr.seed, "run seed")->required();
  t->add_option("--config", tr.config, "experiment config supplying hyperparameters");
  t->add_option("--set", tr.sets, "config override key=value, repeatable")->type_size(1);
  CLI::Option* tr_rtg = t->add_option("--rtg-target", tr.rtg_target,
                                      "sequence rollout return target (default: regime rule)");
  t->add_option("--random-ref", tr.random_ref, "normalized-score random reference")
      ->capture_default_str();
  t->add_option("--expert-ref", tr.expert_ref, "normalized-score expert reference")
      ->capture_default_str();
  t->add_flag("--no-eval", tr.no_eval, "skip periodic rollout evaluation");
  t->callback([&]() {
    const Method method = method_from_string(tr.method);
    ExperimentConfig cfg;
    if (!tr.config.empty()) cfg = load_experiment_config(tr.config);
    apply_set_overrides(cfg, tr.sets);
    const std::string out_dir = resolve_out_dir(tr.out, "");
    const TrajectoryDataset ds = load_dataset(tr.data);
    ds.validate();
    const DatasetResolution res =
        resolve_dataset_knobs(cfg, ds, tr_rtg->count() == 0, tr.rtg_target);
    const TrainConfig tc = make_train_config(cfg, res, method, tr.seed);
    ensure_dir(out_dir);

    std::unique_ptr<Env> env;
    EvalConfig ecfg;
    EvalHook hook;
    RngStream eval_stream = RngStream::root(tr.seed).child("eval");
    if (!tr.no_eval) {
      const RewardMode mode = ds.meta.reward_regime == RewardRegime::sparse
                                  ? RewardMode::sparse
                                  : RewardMode::dense;
      env = make_env(ds.meta.env_name, mode);
      ecfg.rollouts = cfg.eval_rollouts;
      ecfg.every_epochs = res.eval_every;
      ecfg.rtg_target = res.rtg_target;
      ecfg.random_ref = tr.random_ref;
      ecfg.expert_ref = tr.expert_ref;
      ecfg.kind = res.kind;
      hook = [&](const PolicyVariant& policy, int eval_index) {
        return evaluate_policy(policy, *env, ecfg, eval_stream, eval_index);
      };
    }

    std::cout << "data: " << tr.data << " (env=" << ds.meta.env_name
              << " regime=" << to_string(ds.meta.reward_regime) << " n=" << ds.n() << ")\n"
              << "method: " << to_string(method) << "  seed: " << tr.seed << "\n";
    if (is_filtered(method)) {
      std::cout << "filter: " << to_string(res.filter.mode);
      if (res.filter.mode == FilterSpec::Mode::top_fraction)
        std::cout << " " << fmt_double(res.filter.fraction);
      std::cout << "\n";
    }
    const TrainOutcome out = train_policy(ds, tc, hook);
    write_file(join_path(out_dir, "train_log.csv"), out.log.steps_csv());
    write_file(join_path(out_dir, "eval_log.csv"), out.log.evals_csv());
    Checkpoint final_ckpt{out.policy,
                          tr.seed,
                          static_cast<uint64_t>(out.steps_per_epoch) *
                              static_cast<uint64_t>(cfg.epochs),
                          ds.meta.env_name,
                          to_string(ds.meta.reward_regime),
                          res.rtg_target};
    save_checkpoint(final_ckpt, join_path(out_dir, "checkpoint_final.ckpt"));
    Checkpoint best_ckpt = final_ckpt;
    if (out.best.has_value()) {
      best_ckpt.policy = *out.best;
      best_ckpt.step = static_cast<uint64_t>(out.best_step);
    }
    save_checkpoint(best_ckpt, join_path(out_dir, "checkpoint_best.ckpt"));
    std::cout << "trained " << cfg.epochs << " epoch(s), " << out.steps_per_epoch
              << " step(s)/epoch, " << policy_param_count(out.policy) << " parameters\n";
    if (!out.log.evals.empty())
      std::cout << "best eval mean " << fmt_double(out.best_mean) << " at step " << out.best_step
                << " (" << to_string(res.kind) << ")\n";
    std::cout << "wrote train_log.csv, eval_log.csv, checkpoint_best.ckpt, "
                 "checkpoint_final.ckpt to "
              << out_dir << "\n";
  });

  // ---- eval ----
  struct {
    std::string checkpoint;
    int rollouts = 50;
    uint64_t seed = 0;
    std::string score;
    double rtg_target = 0.0;
    double random_ref = 0.0;
    double expert_ref = 1.0;
    std::string out;
  } ev;
  CLI::App* e = app.add_subcommand("eval", "roll a checkpoint out and report per-episode scores");
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
  e->add_option("--rollouts", ev.rollouts, "episode count")->capture_default_str();
  e->add_option("--seed", ev.seed, "evaluation seed")->required();
  e->add_option("--score", ev.score,
                "success-rate | normalized-return | raw-return (default: regime rule)");
  CLI::Option* ev_rtg =
      e->add_option("--rtg-target", ev.rtg_target, "override the checkpoint's return target");
  e->add_option("--random-ref", ev.random_ref, "normalized-score random reference")
      ->capture_default_str();
  e->add_option("--expert-ref", ev.expert_ref, "normalized-score expert reference")
      ->capture_default_str();
  e->add_option("--out", ev.out, "write the rollout records here instead of stdout");
  e->callback([&]() {
    if (ev.rollouts < 1)
      throw UsageError("rollout count must be >= 1, got " + std::to_string(ev.rollouts));
    const Checkpoint c = load_checkpoint(ev.checkpoint);
    const RewardRegime regime = regime_from_string(c.reward_regime);
    const RewardMode mode =
        regime == RewardRegime::sparse ? RewardMode::sparse : RewardMode::dense;
    const std::unique_ptr<Env> env = make_env(c.env_name, mode);
    EvalConfig ecfg;
    ecfg.rollouts = ev.rollouts;
    ecfg.rtg_target = ev_rtg->count() > 0 ? ev.rtg_target : c.rtg_target_hint;
    ecfg.random_ref = ev.random_ref;
    ecfg.expert_ref = ev.expert_ref;
    ecfg.kind = ev.score.empty() ? (regime == RewardRegime::sparse
                                        ? ScoreKind::success_rate
                                        : ScoreKind::normalized_return)
                                 : parse_score_kind(ev.score);
    const RngStream eval_stream = RngStream::root(ev.seed).child("eval");
    const EvalResult r = evaluate_policy(c.policy, *env, ecfg, eval_stream, 0);
    std::string csv = "rollout,total_return,success,score\n";
    for (size_t idx = 0; idx < r.samples.size(); ++idx)
      csv += std::to_string(idx + 1) + "," + fmt_double(r.samples[idx].total_return) + "," +
             (r.samples[idx].success ? "1" : "0") + "," + fmt_double(r.samples[idx].score) + "\n";
    if (ev.out.empty()) {
      std::cout << csv;
    } else {
      write_file(ev.out, csv);
      std::cout << "wrote " << r.samples.size() << " rollout records to " << ev.out << "\n";
    }
    std::cout << "rollouts: " << r.samples.size() << "\n"
              << "score: " << to_string(ecfg.kind) << "\n"
              << "mean = " << fmt_double(r.mean) << "\n"
              << "stddev = " << fmt_double(r.stddev) << "\n";
  });

  // ---- bench ----
  struct {
    std::string config;
    std::string out;
    int parallel = 1;
    bool dry = false;
    std::vector<std::string> sets;
  } be;
  CLI::App* b = app.add_subcommand("bench", "run the full dataset x method x seed grid");
  b->add_option("--config", be.config, "experiment config file")->required();
  b->add_option("--out", be.out, "bundle directory (default: the config's out_dir)");
  b->add_option("--parallel", be.parallel, "arms trained concurrently")->capture_default_str();
  b->add_flag("--dry-run", be.dry, "print the arm plan and estimated step counts, write nothing");
  b->add_option("--set", be.sets, "config override key=value, repeatable")->type_size(1);
  b->callback([&]() {
    ExperimentConfig cfg = load_experiment_config(be.config);
    apply_set_overrides(cfg, be.sets);
    std::string out_dir;
    if (be.dry) {
      out_dir = be.out.empty() ? (cfg.out_dir.empty() ? "." : cfg.out_dir) : be.out;
    } else {
      out_dir = resolve_out_dir(be.out, cfg.out_dir);
    }
    const BenchOutcome outcome = run_benchmark(cfg, be.parallel, out_dir, be.dry, std::cout);
    if (outcome.any_failed) {
      std::string names;
      for (const ArmResult& a : outcome.arms)
        if (!a.ok) names += (names.empty() ? "" : ", ") + arm_dir_name(a.dataset, a.method, a.seed);
      throw ArmError("arm(s) failed: " + names);
    }
  });

  // ---- report ----
  struct {
    std::string bundle;
  } rp;
  CLI::App* r = app.add_subcommand("report", "regenerate tables, curves and plots from a bundle");
  r->add_option("--bundle", rp.bundle, "benchmark bundle directory")->required();
  r->callback([&]() { cmd_report(rp.bundle); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;  // --help exits 0; every parse failure is a usage error
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const ArmError& e) {
    std::cerr << "run failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
