#include "offrl/training.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "offrl/util.hpp"

namespace offrl {

Method method_from_string(const std::string& s) {
  if (s == "bc") return Method::bc;
  if (s == "fbc") return Method::fbc;
  if (s == "dt") return Method::dt;
  if (s == "fdt") return Method::fdt;
  throw UsageError("unknown method '" + s + "' (expected bc, fbc, dt or fdt)");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::bc: return "bc";
    case Method::fbc: return "fbc";
    case Method::dt: return "dt";
    case Method::fdt: return "fdt";
  }
  return "bc";
}

bool is_filtered(Method m) { return m == Method::fbc || m == Method::fdt; }
bool is_sequence(Method m) { return m == Method::dt || m == Method::fdt; }

std::string TrainLog::steps_csv() const {
  std::string out = "step,lr,loss,gnorm_pre,gnorm_post\n";
  for (const StepRecord& r : steps) {
    out += std::to_string(r.step);
    out += ',';
    out += fmt_double(r.lr);
    out += ',';
    out += fmt_double(r.loss);
    out += ',';
    out += fmt_double(r.gnorm_pre);
    out += ',';
    out += fmt_double(r.gnorm_post);
    out += '\n';
  }
  return out;
}

std::string TrainLog::evals_csv() const {
  std::string out = "epoch,mean,stddev,best_so_far,n\n";
  for (const EvalPoint& p : evals) {
    out += std::to_string(p.epoch);
    out += ',';
    out += fmt_double(p.mean);
    out += ',';
    out += fmt_double(p.stddev);
    out += ',';
    out += fmt_double(p.best_so_far);
    out += ',';
    out += std::to_string(p.n);
    out += '\n';
  }
  return out;
}

namespace {

// Flat (trajectory, step) index over every transition, dataset order.
struct FlatIndex {
  std::vector<std::pair<int, int>> entries;
  std::vector<std::vector<double>> rtg;  // per trajectory, back-to-front fold
};

FlatIndex build_index(const TrajectoryDataset& ds) {
  FlatIndex idx;
  idx.entries.reserve(static_cast<size_t>(ds.total_transitions()));
  idx.rtg.reserve(ds.trajectories.size());
  for (size_t i = 0; i < ds.trajectories.size(); ++i) {
    const Trajectory& t = ds.trajectories[i];
    for (int j = 0; j < t.length(); ++j)
      idx.entries.emplace_back(static_cast<int>(i), j);
    idx.rtg.push_back(returns_to_go(t));
  }
  return idx;
}

DTBatch build_windows(const TrajectoryDataset& ds, const FlatIndex& idx,
                      const std::vector<int64_t>& picks, const DTPolicyConfig& cfg) {
  const int k = cfg.context_k;
  const int batch = static_cast<int>(picks.size());
  const int n = batch * k;
  DTBatch b;
  b.batch = batch;
  b.k = k;
  b.rtg = Tensor::zeros({n, 1});
  b.states = Tensor::zeros({n, cfg.d_s});
  b.actions = Tensor::zeros({n, cfg.d_a});
  b.timesteps.assign(static_cast<size_t>(n), 0);
  b.keep = Tensor::zeros({n});
  for (int w = 0; w < batch; ++w) {
    const auto [ti, last] = idx.entries[static_cast<size_t>(picks[static_cast<size_t>(w)])];
    const Trajectory& traj = ds.trajectories[static_cast<size_t>(ti)];
    for (int r = 0; r < k; ++r) {
      const int step = last - (k - 1) + r;
      if (step < 0) continue;  // left pad
      const int row = w * k + r;
      const Transition& tr = traj.transitions[static_cast<size_t>(step)];
      b.rtg.at2(row, 0) = idx.rtg[static_cast<size_t>(ti)][static_cast<size_t>(step)];
      for (int j = 0; j < cfg.d_s; ++j) b.states.at2(row, j) = tr.state[static_cast<size_t>(j)];
      for (int j = 0; j < cfg.d_a; ++j) b.actions.at2(row, j) = tr.action[static_cast<size_t>(j)];
      b.timesteps[static_cast<size_t>(row)] = step;
      b.keep.at(row) = 1.0;
    }
  }
  return b;
}

}  // namespace

TrainOutcome train_policy(const TrajectoryDataset& ds, const TrainConfig& cfg,
                          const EvalHook& eval_hook) {
  ds.validate();
  if (cfg.epochs <= 0)
    throw UsageError("epochs must be positive, got " + std::to_string(cfg.epochs));
  const TrajectoryDataset working = is_filtered(cfg.method) ? apply_filter(ds, cfg.filter) : ds;
  // from here the filtered variants run the exact unfiltered path
  const FlatIndex idx = build_index(working);
  const int64_t m = static_cast<int64_t>(idx.entries.size());
  if (m == 0) throw DataError("training set has no transitions");
  const int batch_size = cfg.effective_batch();
  const int64_t steps_per_epoch = (m + batch_size - 1) / batch_size;

  const RngStream root = RngStream::root(cfg.seed);
  RngStream init_stream = root.child("init");
  RngStream batch_stream = root.child("batch");
  RngStream dropout_stream = root.child("dropout");

  const bool seq = is_sequence(cfg.method);
  const auto make_policy = [&]() -> PolicyVariant {
    if (seq) {
      DTPolicyConfig pcfg = cfg.dt;
      pcfg.d_s = working.meta.d_s;
      pcfg.d_a = working.meta.d_a;
      pcfg.max_episode_length = working.meta.max_episode_length;
      return DTPolicy(pcfg, init_stream);
    }
    MLPPolicyConfig pcfg = cfg.mlp;
    pcfg.d_s = working.meta.d_s;
    pcfg.d_a = working.meta.d_a;
    return MLPPolicy(pcfg, init_stream);
  };
  TrainOutcome out{make_policy()};

  LrSchedule sched;
  if (seq) {
    sched.kind = LrSchedule::Kind::warmup_linear;
    sched.base_lr = cfg.lr;
    sched.warmup_steps = cfg.warmup_steps;
  } else {
    sched.kind = LrSchedule::Kind::step_decay;
    sched.base_lr = cfg.lr;
    sched.milestone_step = cfg.decay_epoch > 0 ? cfg.decay_epoch * steps_per_epoch : 0;
    sched.decay_factor = cfg.decay_factor;
  }

  AdamConfig adam_cfg;
  adam_cfg.weight_decay = cfg.weight_decay;
  std::vector<Tensor>& params =
      std::visit([](auto& p) -> std::vector<Tensor>& { return p.params(); }, out.policy);
  AdamState adam(params);

  // flat MLP matrices once, reused every step
  Tensor all_states, all_actions;
  if (!seq) {
    all_states = Tensor::zeros({static_cast<int>(m), working.meta.d_s});
    all_actions = Tensor::zeros({static_cast<int>(m), working.meta.d_a});
    for (int64_t i = 0; i < m; ++i) {
      const auto [ti, j] = idx.entries[static_cast<size_t>(i)];
      const Transition& tr =
          working.trajectories[static_cast<size_t>(ti)].transitions[static_cast<size_t>(j)];
      for (int c = 0; c < working.meta.d_s; ++c)
        all_states.at2(static_cast<int>(i), c) = tr.state[static_cast<size_t>(c)];
      for (int c = 0; c < working.meta.d_a; ++c)
        all_actions.at2(static_cast<int>(i), c) = tr.action[static_cast<size_t>(c)];
    }
  }

  out.steps_per_epoch = steps_per_epoch;
  int64_t global_step = 0;
  int eval_index = 0;
  bool have_best = false;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (int64_t s = 0; s < steps_per_epoch; ++s) {
      std::vector<int64_t> picks(static_cast<size_t>(batch_size));
      for (int b = 0; b < batch_size; ++b)
        picks[static_cast<size_t>(b)] =
            static_cast<int64_t>(batch_stream.next_below(static_cast<uint64_t>(m)));
      const double lr = lr_at(sched, global_step);
      Tape tape;
      double loss_value = 0.0;
      int loss_node = -1;
      std::vector<int> pnodes;
      if (seq) {
        const DTPolicy& pol = std::get<DTPolicy>(out.policy);
        pnodes = pol.register_params(tape);
        const DTBatch b = build_windows(working, idx, picks, pol.config());
        const int pred = pol.forward(tape, pnodes, b, true, &dropout_stream);
        const int target = tape.constant(b.actions);
        const int keep = tape.constant(b.keep);
        loss_node = tape.masked_mse_loss(pred, target, keep);
      } else {
        const MLPPolicy& pol = std::get<MLPPolicy>(out.policy);
        pnodes = pol.register_params(tape);
        Tensor bs = Tensor::zeros({batch_size, working.meta.d_s});
        Tensor ba = Tensor::zeros({batch_size, working.meta.d_a});
        for (int b = 0; b < batch_size; ++b) {
          const int i = static_cast<int>(picks[static_cast<size_t>(b)]);
          for (int c = 0; c < working.meta.d_s; ++c) bs.at2(b, c) = all_states.at2(i, c);
          for (int c = 0; c < working.meta.d_a; ++c) ba.at2(b, c) = all_actions.at2(i, c);
        }
        const int pred = pol.forward(tape, pnodes, tape.constant(std::move(bs)));
        loss_node = tape.mse_loss(pred, tape.constant(std::move(ba)));
      }
      loss_value = tape.value(loss_node).value();
      tape.backward(loss_node);
      std::vector<Tensor> grads;
      grads.reserve(pnodes.size());
      for (int id : pnodes) grads.push_back(tape.grad_or_zeros(id));
      const auto [pre, post] = clip_grad_norm(grads, cfg.grad_clip);
      adam.step(params, grads, adam_cfg, lr);
      ++global_step;
      out.log.steps.push_back({global_step, lr, loss_value, pre, post});
    }
    const bool cadence = cfg.eval_every_epochs > 0 && epoch % cfg.eval_every_epochs == 0;
    if (eval_hook && (cadence || epoch == cfg.epochs)) {
      const EvalResult res = eval_hook(out.policy, eval_index);
      ++eval_index;
      append_eval_point(out.log.evals, epoch, res.mean, res.stddev,
                        static_cast<int>(res.samples.size()));
      if (!have_best || res.mean > out.best_mean) {
        have_best = true;
        out.best = out.policy;
        out.best_mean = res.mean;
        out.best_step = global_step;
      }
    }
  }
  return out;
}

}  // namespace offrl
