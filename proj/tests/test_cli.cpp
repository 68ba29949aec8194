#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <string>
#include <vector>

#include "offrl/util.hpp"

#include "test_support.hpp"

// End-to-end exercises of the command-line binary. The harness passes the
// binary's location through OFFRL_CLI so the tests do not guess at build
// layouts.

namespace {

struct RunResult {
  int code = -1;
  std::string out;  // stdout and stderr, interleaved
};

int run_counter = 0;

RunResult run_cli(const std::string& args) {
  const char* cli = std::getenv("OFFRL_CLI");
  REQUIRE_MESSAGE(cli != nullptr, "OFFRL_CLI must point at the binary");
  static const std::string dir = testsup::scratch_dir("cli_out");
  const std::string capture =
      offrl::join_path(dir, "cmd_" + std::to_string(run_counter++) + ".txt");
  const std::string cmd = std::string(cli) + " " + args + " > " + capture + " 2>&1";
  const int rc = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = offrl::read_file(capture);
  return r;
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

int data_rows(const std::string& text, const std::string& header) {
  // rows after the header line that start with a digit
  const std::vector<std::string> lines = offrl::split(text, '\n');
  bool seen = false;
  int rows = 0;
  for (const std::string& l : lines) {
    if (l == header) {
      seen = true;
      continue;
    }
    if (seen && !l.empty() && std::isdigit(static_cast<unsigned char>(l[0]))) ++rows;
  }
  return seen ? rows : -1;
}

}  // namespace

TEST_CASE("cli: usage errors exit with code 1") {
  CHECK_EQ(run_cli("").code, 1);
  CHECK_EQ(run_cli("--help").code, 0);
  CHECK_EQ(run_cli("frobnicate").code, 1);
  CHECK_EQ(run_cli("dataset gen --env point_reach --mode sparse --mixture expert:1 x.traj").code,
           1);  // --seed is mandatory
  const RunResult r = run_cli("train bc --data nowhere.traj --out x");
  CHECK_EQ(r.code, 1);  // missing --seed trumps the missing file
}

TEST_CASE("cli: dataset pipeline from generation to filtering") {
  const std::string dir = testsup::scratch_dir("cli_data");
  const std::string traj = offrl::join_path(dir, "mix.traj");

  RunResult r = run_cli("dataset gen --env point_reach --mode sparse "
                        "--mixture expert:4,medium:3:0.5,random:3 --seed 11 " + traj);
  CHECK_EQ(r.code, 0);
  CHECK(offrl::file_exists(traj));

  r = run_cli("dataset inspect " + traj);
  CHECK_EQ(r.code, 0);
  CHECK(contains(r.out, "env: point_reach"));
  CHECK(contains(r.out, "regime: sparse"));
  CHECK(contains(r.out, "trajectories: 10"));
  CHECK(contains(r.out, "transitions: 500"));
  CHECK(contains(r.out, "successful:"));

  // success filtering keeps the successful arms only
  const std::string kept = offrl::join_path(dir, "good.traj");
  r = run_cli("dataset filter --mode successful " + traj + " " + kept);
  CHECK_EQ(r.code, 0);
  CHECK(contains(r.out, "kept"));
  CHECK(offrl::file_exists(kept));

  // a dense run can be sparsified, once
  const std::string dense = offrl::join_path(dir, "chain.traj");
  r = run_cli("dataset gen --env chain_run --mode dense "
              "--mixture medium:5:0.4,random:5 --seed 2 " + dense);
  CHECK_EQ(r.code, 0);
  const std::string sparsened = offrl::join_path(dir, "chain_sp.traj");
  r = run_cli("dataset sparsify " + dense + " " + sparsened);
  CHECK_EQ(r.code, 0);
  r = run_cli("dataset inspect " + sparsened);
  CHECK(contains(r.out, "regime: sparsified"));
  r = run_cli("dataset sparsify " + sparsened + " " +
              offrl::join_path(dir, "twice.traj"));
  CHECK_EQ(r.code, 2);  // already sparsified: data error
  CHECK(contains(r.out, "data error:"));

  // top-fraction filtering, spelled with the hyphen
  const std::string top = offrl::join_path(dir, "top.traj");
  r = run_cli("dataset filter --mode top-fraction --fraction 0.5 " + sparsened + " " + top);
  CHECK_EQ(r.code, 0);
  CHECK(contains(r.out, "kept 5 / 10"));
  r = run_cli("dataset inspect " + top);
  CHECK(contains(r.out, "trajectories: 5"));

  r = run_cli("dataset filter --mode top-fraction --fraction 1.5 " + sparsened + " " +
              offrl::join_path(dir, "bad.traj"));
  CHECK_EQ(r.code, 1);  // fraction out of range is a usage error

  r = run_cli("dataset inspect " + offrl::join_path(dir, "absent.traj"));
  CHECK_EQ(r.code, 2);
}

TEST_CASE("cli: train then evaluate a small behaviour-cloning run") {
  const std::string dir = testsup::scratch_dir("cli_train");
  const std::string traj = offrl::join_path(dir, "exp.traj");
  RunResult r = run_cli("dataset gen --env point_reach --mode sparse "
                        "--mixture expert:5 --seed 4 " + traj);
  REQUIRE_EQ(r.code, 0);

  const std::string runout = offrl::join_path(dir, "run");
  r = run_cli("train bc --data " + traj + " --out " + runout + " --seed 0 "
              "--set epochs=2 --set bc_hidden=8 --set bc_depth=1 --set bc_batch=64 "
              "--set eval_rollouts=2 --set eval_every=1");
  CHECK_EQ(r.code, 0);
  CHECK(offrl::file_exists(offrl::join_path(runout, "train_log.csv")));
  CHECK(offrl::file_exists(offrl::join_path(runout, "eval_log.csv")));
  CHECK(offrl::file_exists(offrl::join_path(runout, "checkpoint_final.ckpt")));
  CHECK(offrl::file_exists(offrl::join_path(runout, "checkpoint_best.ckpt")));
  const std::string evalcsv = offrl::read_file(offrl::join_path(runout, "eval_log.csv"));
  CHECK(contains(evalcsv, "epoch,mean,stddev,best_so_far,n"));

  // evaluation prints one record per rollout plus a summary
  r = run_cli("eval --checkpoint " + offrl::join_path(runout, "checkpoint_final.ckpt") +
              " --rollouts 4 --seed 9");
  CHECK_EQ(r.code, 0);
  CHECK_EQ(data_rows(r.out, "rollout,total_return,success,score"), 4);
  CHECK(contains(r.out, "rollouts: 4"));
  CHECK(contains(r.out, "score: success_rate"));

  // identical invocations echo identical bytes
  const RunResult again = run_cli(
      "eval --checkpoint " + offrl::join_path(runout, "checkpoint_final.ckpt") +
      " --rollouts 4 --seed 9");
  CHECK_EQ(again.out, r.out);

  r = run_cli("train bc --data " + offrl::join_path(dir, "missing.traj") +
              " --out " + runout + " --seed 0");
  CHECK_EQ(r.code, 2);
}

TEST_CASE("cli: bench dry run lists arms without writing") {
  const std::string dir = testsup::scratch_dir("cli_dry");
  const std::string cfg = offrl::join_path(dir, "exp.cfg");
  offrl::write_file(cfg,
                    "name = smoke\n"
                    "methods = bc,dt\n"
                    "seeds = 0\n"
                    "epochs = 2\n"
                    "bc_batch = 64\n"
                    "dt_batch = 64\n"
                    "dataset.toy.env = point_reach\n"
                    "dataset.toy.mode = sparse\n"
                    "dataset.toy.mixture = expert:3,random:2\n"
                    "dataset.toy.seed = 5\n");
  const std::string out = offrl::join_path(dir, "bundle");
  RunResult r = run_cli("bench --config " + cfg + " --out " + out + " --dry-run");
  CHECK_EQ(r.code, 0);
  CHECK(contains(r.out, "toy__bc__seed0"));
  CHECK(contains(r.out, "toy__dt__seed0"));
  // 5 episodes x 50 steps = 250 transitions, batch 64 -> 4 steps x 2 epochs
  CHECK(contains(r.out, "est_steps=8"));
  CHECK(contains(r.out, "nothing written"));
  CHECK_FALSE(offrl::file_exists(offrl::join_path(out, "manifest.json")));

  // overrides reshape the plan before it runs
  r = run_cli("bench --config " + cfg + " --out " + out + " --dry-run --set epochs=3");
  CHECK_EQ(r.code, 0);
  CHECK(contains(r.out, "est_steps=12"));
}

TEST_CASE("cli: bench produces a bundle and report regenerates it byte-for-byte") {
  const std::string dir = testsup::scratch_dir("cli_bench");
  const std::string cfg = offrl::join_path(dir, "exp.cfg");
  offrl::write_file(cfg,
                    "name = smoke\n"
                    "methods = bc,dt\n"
                    "seeds = 0\n"
                    "epochs = 2\n"
                    "eval_rollouts = 2\n"
                    "eval_every = 1\n"
                    "bc_batch = 64\n"
                    "bc_depth = 1\n"
                    "bc_hidden = 8\n"
                    "dt_batch = 64\n"
                    "dt_layers = 1\n"
                    "dt_heads = 1\n"
                    "dt_embed = 8\n"
                    "dt_warmup = 10\n"
                    "dataset.toy.env = point_reach\n"
                    "dataset.toy.mode = sparse\n"
                    "dataset.toy.mixture = expert:3,random:2\n"
                    "dataset.toy.seed = 5\n");
  const std::string out = offrl::join_path(dir, "bundle");
  RunResult r = run_cli("bench --config " + cfg + " --out " + out);
  CHECK_EQ(r.code, 0);
  for (const char* f : {"manifest.json", "summary.txt", "summary.csv",
                        "curves/toy__bc.csv", "curves/toy__dt.csv", "plots/toy.svg",
                        "timings.csv"})
    CHECK_MESSAGE(offrl::file_exists(offrl::join_path(out, f)), f);
  for (const char* f : {"arms/toy__bc__seed0/train_log.csv",
                        "arms/toy__bc__seed0/eval_log.csv",
                        "arms/toy__bc__seed0/checkpoint_final.ckpt",
                        "arms/toy__dt__seed0/eval_log.csv"})
    CHECK_MESSAGE(offrl::file_exists(offrl::join_path(out, f)), f);
  CHECK(contains(offrl::read_file(offrl::join_path(out, "summary.txt")), "toy"));

  // report rebuilds the derived files from the arm logs, unchanged
  std::vector<std::pair<std::string, std::string>> before;
  for (const char* f : {"summary.txt", "summary.csv", "curves/toy__bc.csv",
                        "curves/toy__dt.csv", "plots/toy.svg"})
    before.emplace_back(f, offrl::read_file(offrl::join_path(out, f)));
  r = run_cli("report --bundle " + out);
  CHECK_EQ(r.code, 0);
  for (const auto& [f, text] : before)
    CHECK_MESSAGE(offrl::read_file(offrl::join_path(out, f)) == text, f);

  r = run_cli("report --bundle " + offrl::join_path(dir, "nowhere"));
  CHECK_EQ(r.code, 2);
}

TEST_CASE("cli: a failing arm is recorded and exits with code 3") {
  const std::string dir = testsup::scratch_dir("cli_fail");
  const std::string cfg = offrl::join_path(dir, "exp.cfg");
  // two random arms on a sparse task: with this seed nothing succeeds, so
  // the success filter inside the fbc arm has nothing to keep
  offrl::write_file(cfg,
                    "name = doomed\n"
                    "methods = fbc\n"
                    "seeds = 0\n"
                    "epochs = 1\n"
                    "bc_batch = 64\n"
                    "bc_depth = 1\n"
                    "bc_hidden = 8\n"
                    "eval_rollouts = 2\n"
                    "dataset.toy.env = point_reach\n"
                    "dataset.toy.mode = sparse\n"
                    "dataset.toy.mixture = random:2\n"
                    "dataset.toy.seed = 12\n");
  const std::string out = offrl::join_path(dir, "bundle");
  const RunResult r = run_cli("bench --config " + cfg + " --out " + out);
  CHECK_EQ(r.code, 3);
  CHECK(contains(r.out, "run failure:"));
  CHECK(offrl::file_exists(offrl::join_path(out, "manifest.json")));
  CHECK(contains(offrl::read_file(offrl::join_path(out, "manifest.json")), "\"failed\""));
}

TEST_CASE("cli: the output directory can come from the environment") {
  const std::string dir = testsup::scratch_dir("cli_env");
  const std::string traj = offrl::join_path(dir, "d.traj");
  RunResult r = run_cli("dataset gen --env point_reach --mode sparse "
                        "--mixture expert:2 --seed 1 " + traj);
  REQUIRE_EQ(r.code, 0);
  const char* cli = std::getenv("OFFRL_CLI");
  REQUIRE(cli != nullptr);
  const std::string envout = offrl::join_path(dir, "from_env");
  const std::string cmd = "OFFRL_OUT_DIR=" + envout + " " + std::string(cli) +
                          " train bc --data " + traj +
                          " --seed 0 --set epochs=1 --set bc_hidden=8 --set bc_depth=1 "
                          "--set bc_batch=64 --set eval_every=0 > /dev/null 2>&1";
  CHECK_EQ(WEXITSTATUS(std::system(cmd.c_str())), 0);
  CHECK(offrl::file_exists(offrl::join_path(envout, "checkpoint_final.ckpt")));
}
