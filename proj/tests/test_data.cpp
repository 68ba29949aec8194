#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "offrl/dataset.hpp"
#include "offrl/envs.hpp"
#include "offrl/rng.hpp"
#include "offrl/transforms.hpp"
#include "offrl/util.hpp"

#include "test_support.hpp"

using namespace offrl;

namespace {

// hand-built dataset, independent of the environments
TrajectoryDataset synthetic_dense(int n, uint64_t seed, int d_s = 3, int d_a = 2,
                                  int max_len = 12) {
  TrajectoryDataset ds;
  ds.meta.env_name = "synthetic";
  ds.meta.d_s = d_s;
  ds.meta.d_a = d_a;
  ds.meta.max_episode_length = max_len;
  ds.meta.reward_regime = RewardRegime::dense;
  RngStream rng = RngStream::root(seed);
  for (int i = 0; i < n; ++i) {
    Trajectory t;
    const int len = 1 + static_cast<int>(rng.next_below(static_cast<uint64_t>(max_len)));
    for (int j = 0; j < len; ++j) {
      Transition tr;
      for (int c = 0; c < d_s; ++c) tr.state.push_back(rng.uniform(-1, 1));
      for (int c = 0; c < d_a; ++c) tr.action.push_back(rng.uniform(-1, 1));
      tr.reward = rng.uniform(-2, 2);
      t.transitions.push_back(std::move(tr));
    }
    ds.trajectories.push_back(std::move(t));
  }
  return ds;
}

// sparse fixture with an exact success count at scattered positions
TrajectoryDataset sparse_fixture(int n, int successes, uint64_t seed) {
  TrajectoryDataset ds = synthetic_dense(n, seed);
  ds.meta.reward_regime = RewardRegime::sparse;
  std::set<int> winners;
  RngStream pick = RngStream::root(seed).child("winners");
  while (static_cast<int>(winners.size()) < successes)
    winners.insert(static_cast<int>(pick.next_below(static_cast<uint64_t>(n))));
  for (int i = 0; i < n; ++i) {
    Trajectory& t = ds.trajectories[static_cast<size_t>(i)];
    const bool win = winners.count(i) > 0;
    for (Transition& tr : t.transitions) tr.reward = 0.0;
    t.transitions.back().reward = win ? 1.0 : 0.0;
    t.success = win;
  }
  ds.validate();
  return ds;
}

}  // namespace

// ---------------------------------------------------------------- container

TEST_CASE("dataset: binary round trip is bit-exact") {
  const TrajectoryDataset ds = synthetic_dense(40, 1);
  const std::string dir = testsup::scratch_dir("data_bin");
  const std::string path = join_path(dir, "ds.traj");
  save_dataset(ds, path);
  const TrajectoryDataset back = load_dataset(path);
  CHECK_EQ(back.meta.env_name, ds.meta.env_name);
  CHECK_EQ(back.meta.d_s, ds.meta.d_s);
  CHECK_EQ(back.meta.d_a, ds.meta.d_a);
  CHECK_EQ(back.meta.max_episode_length, ds.meta.max_episode_length);
  CHECK_EQ(back.meta.reward_regime, ds.meta.reward_regime);
  REQUIRE_EQ(back.n(), ds.n());
  for (int64_t i = 0; i < ds.n(); ++i) {
    const Trajectory& a = ds.trajectories[static_cast<size_t>(i)];
    const Trajectory& b = back.trajectories[static_cast<size_t>(i)];
    REQUIRE_EQ(a.length(), b.length());
    CHECK_EQ(a.success.has_value(), b.success.has_value());
    for (int j = 0; j < a.length(); ++j) {
      CHECK(testsup::bits_equal(a.transitions[static_cast<size_t>(j)].state,
                                b.transitions[static_cast<size_t>(j)].state));
      CHECK(testsup::bits_equal(a.transitions[static_cast<size_t>(j)].action,
                                b.transitions[static_cast<size_t>(j)].action));
      CHECK_EQ(a.transitions[static_cast<size_t>(j)].reward,
               b.transitions[static_cast<size_t>(j)].reward);
    }
  }
  // same content serialises to the same bytes
  const std::string path2 = join_path(dir, "ds2.traj");
  save_dataset(back, path2);
  CHECK_EQ(read_file(path), read_file(path2));
}

TEST_CASE("dataset: text round trip preserves values exactly") {
  TrajectoryDataset ds = sparse_fixture(25, 7, 2);
  const std::string dir = testsup::scratch_dir("data_txt");
  const std::string path = join_path(dir, "ds.jsonl");
  save_dataset_text(ds, path);
  const TrajectoryDataset back = load_dataset(path);  // sniffed as text
  REQUIRE_EQ(back.n(), ds.n());
  CHECK_EQ(back.meta.reward_regime, RewardRegime::sparse);
  for (int64_t i = 0; i < ds.n(); ++i) {
    const Trajectory& a = ds.trajectories[static_cast<size_t>(i)];
    const Trajectory& b = back.trajectories[static_cast<size_t>(i)];
    REQUIRE_EQ(a.length(), b.length());
    REQUIRE(b.success.has_value());
    CHECK_EQ(*a.success, *b.success);
    for (int j = 0; j < a.length(); ++j)
      CHECK(testsup::bits_equal(a.transitions[static_cast<size_t>(j)].state,
                                b.transitions[static_cast<size_t>(j)].state));
  }
}

TEST_CASE("dataset: truncated files name the failing record") {
  const TrajectoryDataset ds = synthetic_dense(10, 3);
  const std::string dir = testsup::scratch_dir("data_trunc");
  const std::string path = join_path(dir, "ds.traj");
  save_dataset(ds, path);
  const std::string whole = read_file(path);

  const std::string cut = join_path(dir, "cut.traj");
  write_file(cut, whole.substr(0, whole.size() - 7));
  CHECK_THROWS_AS(load_dataset(cut), DataError);

  write_file(cut, whole.substr(0, 10));  // inside the header
  CHECK_THROWS_AS(load_dataset(cut), DataError);

  write_file(cut, whole + "xx");  // trailing garbage
  CHECK_THROWS_AS(load_dataset(cut), DataError);

  write_file(cut, "NOTTRAJ!rest");
  CHECK_THROWS_AS(load_dataset(cut), DataError);
}

TEST_CASE("dataset: malformed text lines carry line numbers") {
  const std::string dir = testsup::scratch_dir("data_badtxt");
  const std::string path = join_path(dir, "bad.jsonl");
  write_file(path,
             "{\"format\":\"offrl-traj\",\"version\":1,\"env\":\"e\",\"d_s\":1,\"d_a\":1,"
             "\"max_episode_length\":3,\"regime\":\"dense\",\"n\":1}\n"
             "{\"states\":[[0.5]],\"actions\":[[0.1]],\"rewards\":[oops]}\n");
  try {
    load_dataset(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST_CASE("dataset: validation rejects contract violations") {
  TrajectoryDataset ds = synthetic_dense(5, 4);
  ds.validate();

  TrajectoryDataset bad = ds;
  bad.meta.d_s = 7;  // per-step dims now disagree
  CHECK_THROWS_AS(bad.validate(), DataError);

  bad = ds;
  bad.trajectories.clear();
  CHECK_THROWS_AS(bad.validate(), DataError);

  bad = ds;
  bad.meta.max_episode_length = 2;  // some trajectory exceeds it
  CHECK_THROWS_AS(bad.validate(), DataError);

  bad = ds;
  bad.meta.reward_regime = RewardRegime::sparse;  // flags missing, rewards nonzero
  CHECK_THROWS_AS(bad.validate(), DataError);

  TrajectoryDataset sp = sparse_fixture(6, 2, 5);
  sp.validate();
  sp.trajectories[0].transitions[0].reward = 0.25;  // non-final reward must be 0
  CHECK_THROWS_AS(sp.validate(), DataError);
}

TEST_CASE("dataset: return identities are exact") {
  const TrajectoryDataset ds = synthetic_dense(50, 6);
  for (const Trajectory& t : ds.trajectories) {
    const std::vector<double> rtg = returns_to_go(t);
    REQUIRE_EQ(rtg.size(), static_cast<size_t>(t.length()));
    CHECK_EQ(rtg[0], total_return(t));  // bit-exact, same fold
    for (size_t j = 0; j + 1 < rtg.size(); ++j)
      CHECK_EQ(rtg[j], t.transitions[j].reward + rtg[j + 1]);
    CHECK_EQ(rtg.back(), t.transitions.back().reward);
  }
}

// ---------------------------------------------------------------- transforms

TEST_CASE("transforms: sparsify conserves every return bit-exactly") {
  std::unique_ptr<Env> env = make_env("chain_run", RewardMode::dense);
  GeneratorSpec spec;
  spec.mixture = {{Quality::medium, 400, 0.6}, {Quality::random, 600, 0.0}};
  const TrajectoryDataset dense = generate_dataset(*env, spec, 99);
  REQUIRE_EQ(dense.n(), 1000);
  const TrajectoryDataset sp = sparsify(dense);
  CHECK_EQ(sp.meta.reward_regime, RewardRegime::sparsified);
  REQUIRE_EQ(sp.n(), dense.n());
  for (int64_t i = 0; i < dense.n(); ++i) {
    const Trajectory& a = dense.trajectories[static_cast<size_t>(i)];
    const Trajectory& b = sp.trajectories[static_cast<size_t>(i)];
    CHECK_EQ(total_return(a), total_return(b));  // bit-identical
    for (int j = 0; j + 1 < b.length(); ++j)
      CHECK_EQ(b.transitions[static_cast<size_t>(j)].reward, 0.0);
  }
}

TEST_CASE("transforms: relocation is idempotent") {
  RngStream rng = RngStream::root(12);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> r(static_cast<size_t>(1 + rng.next_below(20)));
    for (double& x : r) x = rng.uniform(-3, 3);
    const std::vector<double> once = relocate_rewards(r);
    const std::vector<double> twice = relocate_rewards(once);
    CHECK(testsup::bits_equal(once, twice));
  }
}

TEST_CASE("transforms: sparsify requires dense input") {
  const TrajectoryDataset sp = sparse_fixture(5, 2, 7);
  CHECK_THROWS_AS(sparsify(sp), DataError);
}

TEST_CASE("transforms: success filter keeps exactly the flagged runs in order") {
  const TrajectoryDataset ds = sparse_fixture(1500, 244, 8);  // manipulation-scale fixture
  const TrajectoryDataset kept = filter_successful(ds);
  CHECK_EQ(kept.n(), 244);
  int64_t seen = 0;
  size_t cursor = 0;
  for (int64_t i = 0; i < ds.n(); ++i) {
    if (!*ds.trajectories[static_cast<size_t>(i)].success) continue;
    ++seen;
    REQUIRE_LT(cursor, kept.trajectories.size());
    // same object, same order
    CHECK(testsup::bits_equal(kept.trajectories[cursor].transitions[0].state,
                              ds.trajectories[static_cast<size_t>(i)].transitions[0].state));
    ++cursor;
  }
  CHECK_EQ(seen, 244);

  const TrajectoryDataset bigger = sparse_fixture(3900, 716, 9);
  CHECK_EQ(filter_successful(bigger).n(), 716);
}

TEST_CASE("transforms: success filter error cases") {
  TrajectoryDataset ds = sparse_fixture(10, 3, 11);
  ds.trajectories[4].success.reset();
  CHECK_THROWS_AS(filter_successful(ds), DataError);

  const TrajectoryDataset none = sparse_fixture(10, 0, 13);
  try {
    filter_successful(none);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK_NE(std::string(e.what()).find("no successes"), std::string::npos);
  }

  const TrajectoryDataset dense = synthetic_dense(5, 14);
  CHECK_THROWS_AS(filter_successful(dense), DataError);
}

TEST_CASE("transforms: label_sparse rewrites rewards and attaches flags") {
  const TrajectoryDataset dense = synthetic_dense(300, 15);
  std::vector<bool> flags(300, false);
  RngStream pick = RngStream::root(16);
  int set = 0;
  while (set < 100) {
    const size_t i = static_cast<size_t>(pick.next_below(300));
    if (!flags[i]) {
      flags[i] = true;
      ++set;
    }
  }
  const TrajectoryDataset sp = label_sparse(dense, flags);
  CHECK_EQ(sp.meta.reward_regime, RewardRegime::sparse);
  CHECK_EQ(filter_successful(sp).n(), 100);
  for (int64_t i = 0; i < sp.n(); ++i) {
    const Trajectory& t = sp.trajectories[static_cast<size_t>(i)];
    REQUIRE(t.success.has_value());
    CHECK_EQ(*t.success, static_cast<bool>(flags[static_cast<size_t>(i)]));
    CHECK_EQ(t.transitions.back().reward, *t.success ? 1.0 : 0.0);
  }
  CHECK_THROWS_AS(label_sparse(dense, std::vector<bool>(299, true)), DataError);
}

TEST_CASE("transforms: top-fraction count table") {
  CHECK_EQ(top_fraction_count(1, 0.10), 1);
  CHECK_EQ(top_fraction_count(9, 0.10), 1);
  CHECK_EQ(top_fraction_count(10, 0.10), 1);
  CHECK_EQ(top_fraction_count(11, 0.10), 2);
  CHECK_EQ(top_fraction_count(1000, 0.10), 100);
  CHECK_EQ(top_fraction_count(7, 1.0), 7);
  CHECK_EQ(top_fraction_count(200, 0.333), 67);  // ceil(66.6)
}

TEST_CASE("transforms: top-fraction filter matches a brute-force oracle") {
  RngStream rng = RngStream::root(17);
  for (const int n : {1, 9, 10, 11, 137}) {
    // sparsified data with deliberately repeated final rewards to force ties
    TrajectoryDataset ds = synthetic_dense(n, 18 + static_cast<uint64_t>(n));
    for (Trajectory& t : ds.trajectories) {
      for (Transition& tr : t.transitions) tr.reward = 0.0;
      t.transitions.back().reward = static_cast<double>(rng.next_below(5));  // many ties
    }
    ds.meta.reward_regime = RewardRegime::sparsified;
    ds.validate();

    const TrajectoryDataset kept = filter_top_fraction(ds, 0.10);
    const int64_t want_n = top_fraction_count(n, 0.10);
    REQUIRE_EQ(kept.n(), want_n);

    // oracle: stable sort of (final reward, index), keep the prefix, ties to
    // the smaller original index
    std::vector<std::pair<double, int>> order;
    for (int i = 0; i < n; ++i)
      order.emplace_back(ds.trajectories[static_cast<size_t>(i)].transitions.back().reward, i);
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
      return a.first > b.first;
    });
    std::vector<int> want_idx;
    for (int64_t i = 0; i < want_n; ++i) want_idx.push_back(order[static_cast<size_t>(i)].second);
    std::sort(want_idx.begin(), want_idx.end());  // output preserves original order

    for (int64_t i = 0; i < want_n; ++i) {
      const Trajectory& got = kept.trajectories[static_cast<size_t>(i)];
      const Trajectory& want = ds.trajectories[static_cast<size_t>(want_idx[static_cast<size_t>(i)])];
      CHECK_EQ(got.transitions.back().reward, want.transitions.back().reward);
      CHECK(testsup::bits_equal(got.transitions[0].state, want.transitions[0].state));
    }
  }
}

TEST_CASE("transforms: top-fraction filter argument and regime checks") {
  TrajectoryDataset ds = synthetic_dense(10, 30);
  CHECK_THROWS_AS(filter_top_fraction(ds, 0.10), DataError);  // dense input
  for (Trajectory& t : ds.trajectories) {
    for (Transition& tr : t.transitions) tr.reward = 0.0;
  }
  ds.meta.reward_regime = RewardRegime::sparsified;
  CHECK_THROWS_AS(filter_top_fraction(ds, 0.0), UsageError);
  CHECK_THROWS_AS(filter_top_fraction(ds, 1.5), UsageError);
  CHECK_EQ(filter_top_fraction(ds, 1.0).n(), 10);
}

TEST_CASE("transforms: apply_filter dispatches on the spec") {
  const TrajectoryDataset sp = sparse_fixture(50, 9, 31);
  FilterSpec succ;
  succ.mode = FilterSpec::Mode::successful;
  CHECK_EQ(apply_filter(sp, succ).n(), 9);

  TrajectoryDataset ds = synthetic_dense(50, 32);
  const TrajectoryDataset spd = sparsify(ds);
  FilterSpec top;
  top.mode = FilterSpec::Mode::top_fraction;
  top.fraction = 0.10;
  CHECK_EQ(apply_filter(spd, top).n(), 5);
}
