#pragma once

#include "offrl/dataset.hpp"

namespace offrl {

struct FilterSpec {
  enum class Mode { successful, top_fraction };
  Mode mode = Mode::successful;
  double fraction = 0.10;  // top_fraction only; must lie in (0, 1]
};

std::string to_string(FilterSpec::Mode m);

// Move every trajectory's total return onto its final step: r_t <- 0 for
// t < T-1, r_{T-1} <- total_return. Input regime must be dense; output is
// sparsified. Total return is conserved bit-exactly.
TrajectoryDataset sparsify(const TrajectoryDataset& ds);

// The per-trajectory relocation map used by sparsify; applying it to an
// already relocated reward vector is the identity.
std::vector<double> relocate_rewards(const std::vector<double>& rewards);

// Rewrite rewards to the binary-terminal form (1 on the last step iff the
// flag is set) and attach success flags. Output regime is sparse.
TrajectoryDataset label_sparse(const TrajectoryDataset& ds, const std::vector<bool>& success);

// Keep flagged-successful trajectories, original order. Requires a sparse
// dataset with flags on every trajectory; an empty result is an error.
TrajectoryDataset filter_successful(const TrajectoryDataset& ds);

// Keep the ceil(fraction*N) trajectories with the largest final reward,
// ties broken toward the smaller original index, original order preserved.
// Requires a sparsified dataset.
TrajectoryDataset filter_top_fraction(const TrajectoryDataset& ds, double fraction);

TrajectoryDataset apply_filter(const TrajectoryDataset& ds, const FilterSpec& spec);

int64_t top_fraction_count(int64_t n, double fraction);

}  // namespace offrl
