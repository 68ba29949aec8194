#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "offrl/rng.hpp"
#include "offrl/tape.hpp"
#include "offrl/tensor.hpp"

namespace offrl {

struct MLPPolicyConfig {
  int d_s = 0;
  int d_a = 0;
  int depth = 2;  // hidden layers; 0 degenerates to a direct linear map
  int hidden = 512;
};

// sum over layers of (fan_in * fan_out + fan_out)
int64_t mlp_param_count(const MLPPolicyConfig& cfg);

class MLPPolicy {
 public:
  MLPPolicy(const MLPPolicyConfig& cfg, RngStream init);

  const MLPPolicyConfig& config() const { return cfg_; }
  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }
  int64_t param_count() const;

  std::vector<int> register_params(Tape& t) const;
  // states node [B, d_s] -> action node [B, d_a]; linear output head
  int forward(Tape& t, const std::vector<int>& pnodes, int states) const;
  Tensor act(const Tensor& states) const;  // forward-only

 private:
  MLPPolicyConfig cfg_;
  std::vector<Tensor> params_;  // W0, b0, W1, b1, ...
};

enum class PosEncoding { sinusoidal, learned };

struct DTPolicyConfig {
  int d_s = 0;
  int d_a = 0;
  int layers = 3;
  int heads = 1;
  int embed_dim = 128;
  double dropout = 0.1;
  int context_k = 1;
  int max_episode_length = 1000;
  double rtg_scale = 1.0;  // returns are divided by this before embedding
  PosEncoding pos_encoding = PosEncoding::sinusoidal;
};

int64_t dt_param_count(const DTPolicyConfig& cfg);

// pe[2i] = sin(pos / 10000^(2i/dim)), pe[2i+1] = cos(pos / 10000^(2i/dim))
Tensor sinusoidal_pe(int position, int dim);

// One window batch, flattened over [batch*k] rows. Pad rows (keep == 0)
// sit on the left of each sample's window; their contents are ignored by
// both attention and the loss.
struct DTBatch {
  int batch = 0;
  int k = 0;
  Tensor rtg;                  // [batch*k, 1], unscaled returns-to-go
  Tensor states;               // [batch*k, d_s]
  Tensor actions;              // [batch*k, d_a]; zeros where pad or unknown
  std::vector<int> timesteps;  // batch*k episode time indices
  Tensor keep;                 // [batch*k], 1 real / 0 pad
};

// Three tokens per timestep (return-to-go, state, action), shared per-step
// positional encoding added after the per-modality linear embeddings,
// pre-norm residual blocks, causal attention, action read off each state
// token.
class DTPolicy {
 public:
  DTPolicy(const DTPolicyConfig& cfg, RngStream init);

  const DTPolicyConfig& config() const { return cfg_; }
  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }
  int64_t param_count() const;

  std::vector<int> register_params(Tape& t) const;
  // Predictions at every state token: node of shape [batch*k, d_a].
  // dropout_stream is required in train mode.
  int forward(Tape& t, const std::vector<int>& pnodes, const DTBatch& b,
              bool train, RngStream* dropout_stream) const;
  // Prediction at the final (current) state token of a batch=1 window.
  Tensor act(const DTBatch& b) const;

 private:
  DTPolicyConfig cfg_;
  std::vector<Tensor> params_;
  Tensor pe_table_;  // [max_episode_length, embed_dim]; unused when learned
};

using PolicyVariant = std::variant<MLPPolicy, DTPolicy>;

int64_t policy_param_count(const PolicyVariant& p);
const std::vector<Tensor>& policy_params(const PolicyVariant& p);

struct Checkpoint {
  PolicyVariant policy;
  uint64_t seed = 0;
  uint64_t step = 0;
  std::string env_name;       // provenance: environment of the training data
  std::string reward_regime;  // and its reward regime
  double rtg_target_hint = 1.0;
};

// Fixed-layout binary file: header with the architecture config, seed and
// step, then the flat f64 parameter payload. Round trip is bit-exact.
void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace offrl
