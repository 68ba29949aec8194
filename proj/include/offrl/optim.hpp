#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "offrl/tensor.hpp"

namespace offrl {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

// Adam with decoupled weight decay: theta <- theta - lr*wd*theta is applied
// first, then the bias-corrected moment update theta -= lr * mhat/(sqrt(vhat)+eps).
class AdamState {
 public:
  explicit AdamState(const std::vector<Tensor>& params);

  void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
            const AdamConfig& cfg, double lr);

  int64_t t() const { return t_; }

 private:
  std::vector<Tensor> m_, v_;
  int64_t t_ = 0;
};

// Global L2 clip across all gradient tensors, in place. Returns the norm
// before clipping and the recomputed norm after.
std::pair<double, double> clip_grad_norm(std::vector<Tensor>& grads, double max_norm);

struct LrSchedule {
  enum class Kind { constant, warmup_linear, step_decay };
  Kind kind = Kind::constant;
  double base_lr = 1e-4;
  int64_t warmup_steps = 100000;  // warmup_linear: lr * min(1, (step+1)/warmup)
  int64_t milestone_step = 0;     // step_decay: first step index at the reduced rate
  double decay_factor = 0.1;
};

double lr_at(const LrSchedule& s, int64_t step);  // step is 0-based

}  // namespace offrl
