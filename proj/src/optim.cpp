#include "offrl/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace offrl {

AdamState::AdamState(const std::vector<Tensor>& params) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Tensor& p : params) {
    m_.push_back(Tensor::zeros(p.shape()));
    v_.push_back(Tensor::zeros(p.shape()));
  }
}

void AdamState::step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                     const AdamConfig& cfg, double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw std::invalid_argument("adam step: expected " + std::to_string(m_.size()) +
                                " tensors, got " + std::to_string(params.size()) +
                                " params / " + std::to_string(grads.size()) + " grads");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    const Tensor& g = grads[i];
    if (!p.same_shape(g))
      throw std::invalid_argument("adam step: param/grad shape mismatch at tensor " +
                                  std::to_string(i) + ": " + p.shape_str() + " vs " +
                                  g.shape_str());
    double* pd = p.data();
    const double* gd = g.data();
    double* md = m_[i].data();
    double* vd = v_[i].data();
    const int64_t n = p.size();
    for (int64_t j = 0; j < n; ++j) {
      pd[j] -= lr * cfg.weight_decay * pd[j];
      md[j] = cfg.beta1 * md[j] + (1.0 - cfg.beta1) * gd[j];
      vd[j] = cfg.beta2 * vd[j] + (1.0 - cfg.beta2) * gd[j] * gd[j];
      const double mhat = md[j] / bc1;
      const double vhat = vd[j] / bc2;
      pd[j] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

std::pair<double, double> clip_grad_norm(std::vector<Tensor>& grads, double max_norm) {
  if (max_norm <= 0.0)
    throw std::invalid_argument("clip_grad_norm: max_norm must be positive, got " +
                                std::to_string(max_norm));
  double sq = 0.0;
  for (const Tensor& g : grads)
    for (int64_t j = 0; j < g.size(); ++j) sq += g.at(j) * g.at(j);
  const double pre = std::sqrt(sq);
  if (pre > max_norm) {
    const double s = max_norm / pre;
    for (Tensor& g : grads)
      for (int64_t j = 0; j < g.size(); ++j) g.data()[j] *= s;
  }
  double sq2 = 0.0;
  for (const Tensor& g : grads)
    for (int64_t j = 0; j < g.size(); ++j) sq2 += g.at(j) * g.at(j);
  return {pre, std::sqrt(sq2)};
}

double lr_at(const LrSchedule& s, int64_t step) {
  switch (s.kind) {
    case LrSchedule::Kind::constant:
      return s.base_lr;
    case LrSchedule::Kind::warmup_linear: {
      if (s.warmup_steps <= 0) return s.base_lr;
      const double frac = static_cast<double>(step + 1) / static_cast<double>(s.warmup_steps);
      return s.base_lr * (frac < 1.0 ? frac : 1.0);
    }
    case LrSchedule::Kind::step_decay:
      return step >= s.milestone_step && s.milestone_step > 0
                 ? s.base_lr * s.decay_factor
                 : s.base_lr;
  }
  return s.base_lr;
}

}  // namespace offrl
