#include "offrl/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "offrl/util.hpp"

namespace offrl {

std::string to_string(FilterSpec::Mode m) {
  return m == FilterSpec::Mode::successful ? "successful" : "top_fraction";
}

std::vector<double> relocate_rewards(const std::vector<double>& rewards) {
  std::vector<double> out(rewards.size(), 0.0);
  if (rewards.empty()) return out;
  double s = 0.0;
  for (size_t j = rewards.size(); j-- > 0;) s = rewards[j] + s;
  out.back() = s;
  return out;
}

TrajectoryDataset sparsify(const TrajectoryDataset& ds) {
  if (ds.meta.reward_regime != RewardRegime::dense)
    throw DataError("sparsify expects a dense dataset, got " + to_string(ds.meta.reward_regime));
  TrajectoryDataset out = ds;
  out.meta.reward_regime = RewardRegime::sparsified;
  for (Trajectory& t : out.trajectories) {
    std::vector<double> rewards(t.transitions.size());
    for (size_t j = 0; j < rewards.size(); ++j) rewards[j] = t.transitions[j].reward;
    const std::vector<double> moved = relocate_rewards(rewards);
    for (size_t j = 0; j < moved.size(); ++j) t.transitions[j].reward = moved[j];
  }
  out.validate();
  return out;
}

TrajectoryDataset label_sparse(const TrajectoryDataset& ds, const std::vector<bool>& success) {
  if (success.size() != static_cast<size_t>(ds.n()))
    throw DataError("label_sparse got " + std::to_string(success.size()) + " flags for " +
                    std::to_string(ds.n()) + " trajectories");
  TrajectoryDataset out = ds;
  out.meta.reward_regime = RewardRegime::sparse;
  for (size_t i = 0; i < out.trajectories.size(); ++i) {
    Trajectory& t = out.trajectories[i];
    for (Transition& tr : t.transitions) tr.reward = 0.0;
    t.transitions.back().reward = success[i] ? 1.0 : 0.0;
    t.success = static_cast<bool>(success[i]);
  }
  out.validate();
  return out;
}

TrajectoryDataset filter_successful(const TrajectoryDataset& ds) {
  if (ds.meta.reward_regime != RewardRegime::sparse)
    throw DataError("filter_successful expects a sparse dataset, got " +
                    to_string(ds.meta.reward_regime));
  TrajectoryDataset out;
  out.meta = ds.meta;
  for (size_t i = 0; i < ds.trajectories.size(); ++i) {
    const Trajectory& t = ds.trajectories[i];
    if (!t.success.has_value())
      throw DataError("trajectory " + std::to_string(i + 1) + " has no success flag");
    if (*t.success) out.trajectories.push_back(t);
  }
  if (out.trajectories.empty())
    throw DataError("filter kept no trajectories: no successes among " + std::to_string(ds.n()));
  return out;
}

int64_t top_fraction_count(int64_t n, double fraction) {
  return static_cast<int64_t>(std::ceil(fraction * static_cast<double>(n)));
}

TrajectoryDataset filter_top_fraction(const TrajectoryDataset& ds, double fraction) {
  if (ds.meta.reward_regime != RewardRegime::sparsified)
    throw DataError("filter_top_fraction expects a sparsified dataset, got " +
                    to_string(ds.meta.reward_regime));
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw UsageError("filter fraction must lie in (0,1], got " + fmt_double(fraction));
  if (ds.n() == 0) throw DataError("filter_top_fraction got an empty dataset");
  const int64_t keep = top_fraction_count(ds.n(), fraction);
  // rank by final-step reward; stable sort keeps ties on the earlier index
  std::vector<int64_t> order(static_cast<size_t>(ds.n()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    return ds.trajectories[static_cast<size_t>(a)].transitions.back().reward >
           ds.trajectories[static_cast<size_t>(b)].transitions.back().reward;
  });
  order.resize(static_cast<size_t>(keep));
  std::sort(order.begin(), order.end());
  TrajectoryDataset out;
  out.meta = ds.meta;
  out.trajectories.reserve(order.size());
  for (int64_t i : order) out.trajectories.push_back(ds.trajectories[static_cast<size_t>(i)]);
  return out;
}

TrajectoryDataset apply_filter(const TrajectoryDataset& ds, const FilterSpec& spec) {
  return spec.mode == FilterSpec::Mode::successful ? filter_successful(ds)
                                                   : filter_top_fraction(ds, spec.fraction);
}

}  // namespace offrl
