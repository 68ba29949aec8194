#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "offrl/errors.hpp"

namespace offrl {

enum class RewardRegime { dense, sparse, sparsified };

std::string to_string(RewardRegime r);
RewardRegime regime_from_string(const std::string& s);

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
};

struct Trajectory {
  std::vector<Transition> transitions;
  std::optional<bool> success;

  int length() const { return static_cast<int>(transitions.size()); }
};

struct DatasetMeta {
  std::string env_name;
  int d_s = 0;
  int d_a = 0;
  int max_episode_length = 0;
  RewardRegime reward_regime = RewardRegime::dense;
};

// Immutable by convention: transforms return new datasets.
struct TrajectoryDataset {
  DatasetMeta meta;
  std::vector<Trajectory> trajectories;

  int64_t n() const { return static_cast<int64_t>(trajectories.size()); }
  int64_t total_transitions() const;
  void validate() const;  // throws DataError on any contract violation
};

// Both are back-to-front folds over the rewards, so
// returns_to_go(t)[0] == total_return(t) holds bit-exactly and
// returns_to_go(t)[j] == reward[j] + returns_to_go(t)[j+1] exactly.
double total_return(const Trajectory& t);
std::vector<double> returns_to_go(const Trajectory& t);

// Binary container (canonical, bit-exact round trip) plus a JSON-lines text
// variant for fixtures. load sniffs the magic bytes and accepts either.
void save_dataset(const TrajectoryDataset& ds, const std::string& path);
void save_dataset_text(const TrajectoryDataset& ds, const std::string& path);
TrajectoryDataset load_dataset(const std::string& path);

}  // namespace offrl
