#include "offrl/policies.hpp"

#include <cmath>
#include <stdexcept>

#include "offrl/binio.hpp"
#include "offrl/errors.hpp"
#include "offrl/util.hpp"

namespace offrl {

namespace {

constexpr char kMagic[8] = {'O', 'F', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

// sigma 0.02, resampled until |z| <= 2
double trunc_normal(RngStream& s) {
  double z;
  do {
    z = s.next_gaussian();
  } while (std::abs(z) > 2.0);
  return 0.02 * z;
}

Tensor init_uniform(RngStream& s, int fan_in, int fan_out) {
  const double bound = std::sqrt(1.0 / fan_in);
  Tensor w = Tensor::zeros({fan_in, fan_out});
  for (int64_t i = 0; i < w.size(); ++i) w.data()[i] = s.uniform(-bound, bound);
  return w;
}

Tensor init_trunc(RngStream& s, std::vector<int> shape) {
  Tensor w = Tensor::zeros(std::move(shape));
  for (int64_t i = 0; i < w.size(); ++i) w.data()[i] = trunc_normal(s);
  return w;
}

}  // namespace

int64_t mlp_param_count(const MLPPolicyConfig& cfg) {
  if (cfg.depth == 0)
    return static_cast<int64_t>(cfg.d_s) * cfg.d_a + cfg.d_a;
  int64_t n = static_cast<int64_t>(cfg.d_s) * cfg.hidden + cfg.hidden;
  for (int i = 1; i < cfg.depth; ++i)
    n += static_cast<int64_t>(cfg.hidden) * cfg.hidden + cfg.hidden;
  n += static_cast<int64_t>(cfg.hidden) * cfg.d_a + cfg.d_a;
  return n;
}

MLPPolicy::MLPPolicy(const MLPPolicyConfig& cfg, RngStream init) : cfg_(cfg) {
  if (cfg.d_s <= 0 || cfg.d_a <= 0 || cfg.depth < 0 || (cfg.depth > 0 && cfg.hidden <= 0))
    throw UsageError("mlp config: bad dims d_s=" + std::to_string(cfg.d_s) +
                                " d_a=" + std::to_string(cfg.d_a) + " depth=" +
                                std::to_string(cfg.depth) + " hidden=" + std::to_string(cfg.hidden));
  int in = cfg.d_s;
  for (int i = 0; i < cfg.depth; ++i) {
    params_.push_back(init_uniform(init, in, cfg.hidden));
    params_.push_back(Tensor::zeros({cfg.hidden}));
    in = cfg.hidden;
  }
  params_.push_back(init_uniform(init, in, cfg.d_a));
  params_.push_back(Tensor::zeros({cfg.d_a}));
}

int64_t MLPPolicy::param_count() const {
  int64_t n = 0;
  for (const Tensor& p : params_) n += p.size();
  return n;
}

std::vector<int> MLPPolicy::register_params(Tape& t) const {
  std::vector<int> ids;
  ids.reserve(params_.size());
  for (const Tensor& p : params_) ids.push_back(t.leaf(p));
  return ids;
}

int MLPPolicy::forward(Tape& t, const std::vector<int>& pnodes, int states) const {
  if (pnodes.size() != params_.size())
    throw std::invalid_argument("mlp forward: expected " + std::to_string(params_.size()) +
                                " param nodes, got " + std::to_string(pnodes.size()));
  int x = states;
  for (int i = 0; i < cfg_.depth; ++i)
    x = t.relu(t.bias_add(t.matmul(x, pnodes[2 * i]), pnodes[2 * i + 1]));
  return t.bias_add(t.matmul(x, pnodes[2 * cfg_.depth]), pnodes[2 * cfg_.depth + 1]);
}

Tensor MLPPolicy::act(const Tensor& states) const {
  Tape t(false);
  const std::vector<int> pnodes = register_params(t);
  const int out = forward(t, pnodes, t.constant(states));
  return t.value(out);
}

Tensor sinusoidal_pe(int position, int dim) {
  Tensor pe = Tensor::zeros({dim});
  for (int i = 0; 2 * i < dim; ++i) {
    const double freq = std::pow(10000.0, 2.0 * i / dim);
    pe.at(2 * i) = std::sin(position / freq);
    if (2 * i + 1 < dim) pe.at(2 * i + 1) = std::cos(position / freq);
  }
  return pe;
}

int64_t dt_param_count(const DTPolicyConfig& cfg) {
  const int64_t e = cfg.embed_dim;
  int64_t n = e * (1 + cfg.d_s + cfg.d_a) + 3 * e;  // modality embeddings
  if (cfg.pos_encoding == PosEncoding::learned)
    n += static_cast<int64_t>(cfg.max_episode_length) * e;
  n += cfg.layers * (12 * e * e + 13 * e);
  n += 2 * e;                                // final norm
  n += e * cfg.d_a + cfg.d_a;                // action head
  return n;
}

DTPolicy::DTPolicy(const DTPolicyConfig& cfg, RngStream init) : cfg_(cfg) {
  if (cfg.d_s <= 0 || cfg.d_a <= 0 || cfg.layers <= 0 || cfg.heads <= 0 || cfg.embed_dim <= 0)
    throw UsageError("dt config: bad dims");
  if (cfg.embed_dim % cfg.heads != 0)
    throw UsageError("dt config: embed_dim " + std::to_string(cfg.embed_dim) +
                                " not divisible by heads " + std::to_string(cfg.heads));
  if (cfg.context_k < 1)
    throw UsageError("dt config: context_k must be >= 1, got " +
                                std::to_string(cfg.context_k));
  if (cfg.max_episode_length < 1)
    throw UsageError("dt config: max_episode_length must be >= 1");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0))
    throw UsageError("dt config: dropout must lie in [0,1)");
  if (!(cfg.rtg_scale > 0.0))
    throw UsageError("dt config: rtg_scale must be positive");
  const int e = cfg.embed_dim;
  params_.push_back(init_trunc(init, {1, e}));         // w_rtg
  params_.push_back(Tensor::zeros({e}));               // b_rtg
  params_.push_back(init_trunc(init, {cfg.d_s, e}));   // w_state
  params_.push_back(Tensor::zeros({e}));               // b_state
  params_.push_back(init_trunc(init, {cfg.d_a, e}));   // w_action
  params_.push_back(Tensor::zeros({e}));               // b_action
  if (cfg.pos_encoding == PosEncoding::learned) {
    params_.push_back(init_trunc(init, {cfg.max_episode_length, e}));
  } else {
    pe_table_ = Tensor::zeros({cfg.max_episode_length, e});
    for (int pos = 0; pos < cfg.max_episode_length; ++pos) {
      const Tensor row = sinusoidal_pe(pos, e);
      for (int j = 0; j < e; ++j) pe_table_.at2(pos, j) = row.at(j);
    }
  }
  for (int l = 0; l < cfg.layers; ++l) {
    params_.push_back(Tensor::full({e}, 1.0));         // ln1 gain
    params_.push_back(Tensor::zeros({e}));             // ln1 shift
    params_.push_back(init_trunc(init, {e, e}));       // wq
    params_.push_back(Tensor::zeros({e}));
    params_.push_back(init_trunc(init, {e, e}));       // wk
    params_.push_back(Tensor::zeros({e}));
    params_.push_back(init_trunc(init, {e, e}));       // wv
    params_.push_back(Tensor::zeros({e}));
    params_.push_back(init_trunc(init, {e, e}));       // w_proj
    params_.push_back(Tensor::zeros({e}));
    params_.push_back(Tensor::full({e}, 1.0));         // ln2 gain
    params_.push_back(Tensor::zeros({e}));             // ln2 shift
    params_.push_back(init_trunc(init, {e, 4 * e}));   // w_fc1
    params_.push_back(Tensor::zeros({4 * e}));
    params_.push_back(init_trunc(init, {4 * e, e}));   // w_fc2
    params_.push_back(Tensor::zeros({e}));
  }
  params_.push_back(Tensor::full({e}, 1.0));           // final norm gain
  params_.push_back(Tensor::zeros({e}));               // final norm shift
  params_.push_back(init_trunc(init, {e, cfg.d_a}));   // action head
  params_.push_back(Tensor::zeros({cfg.d_a}));
}

int64_t DTPolicy::param_count() const {
  int64_t n = 0;
  for (const Tensor& p : params_) n += p.size();
  return n;
}

std::vector<int> DTPolicy::register_params(Tape& t) const {
  std::vector<int> ids;
  ids.reserve(params_.size());
  for (const Tensor& p : params_) ids.push_back(t.leaf(p));
  return ids;
}

int DTPolicy::forward(Tape& t, const std::vector<int>& pnodes, const DTBatch& b,
                      bool train, RngStream* dropout_stream) const {
  if (train && dropout_stream == nullptr)
    throw std::invalid_argument("dt forward: train mode needs a dropout stream");
  if (pnodes.size() != params_.size())
    throw std::invalid_argument("dt forward: expected " + std::to_string(params_.size()) +
                                " param nodes, got " + std::to_string(pnodes.size()));
  const int e = cfg_.embed_dim;
  const int n = b.batch * b.k;
  if (b.batch <= 0 || b.k <= 0 || b.k > cfg_.context_k)
    throw std::invalid_argument("dt forward: bad window batch=" + std::to_string(b.batch) +
                                " k=" + std::to_string(b.k) + " (context " +
                                std::to_string(cfg_.context_k) + ")");
  if (b.rtg.rank() != 2 || b.rtg.dim(0) != n || b.rtg.dim(1) != 1)
    throw std::invalid_argument("dt forward: rtg shape " + b.rtg.shape_str());
  if (b.states.rank() != 2 || b.states.dim(0) != n || b.states.dim(1) != cfg_.d_s)
    throw std::invalid_argument("dt forward: states shape " + b.states.shape_str());
  if (b.actions.rank() != 2 || b.actions.dim(0) != n || b.actions.dim(1) != cfg_.d_a)
    throw std::invalid_argument("dt forward: actions shape " + b.actions.shape_str());
  if (static_cast<int>(b.timesteps.size()) != n)
    throw std::invalid_argument("dt forward: timesteps size " +
                                std::to_string(b.timesteps.size()));
  if (b.keep.size() != n)
    throw std::invalid_argument("dt forward: keep size " + std::to_string(b.keep.size()));
  for (int r = 0; r < n; ++r)
    if (b.timesteps[static_cast<size_t>(r)] < 0 ||
        b.timesteps[static_cast<size_t>(r)] >= cfg_.max_episode_length)
      throw std::invalid_argument("dt forward: timestep " +
                                  std::to_string(b.timesteps[static_cast<size_t>(r)]) +
                                  " outside [0," + std::to_string(cfg_.max_episode_length) + ")");

  int pi = 0;
  const int w_rtg = pnodes[pi++], b_rtg = pnodes[pi++];
  const int w_state = pnodes[pi++], b_state = pnodes[pi++];
  const int w_action = pnodes[pi++], b_action = pnodes[pi++];
  const int pos_table = cfg_.pos_encoding == PosEncoding::learned ? pnodes[pi++] : -1;

  const int rtg_scaled = t.scale(t.constant(b.rtg), 1.0 / cfg_.rtg_scale);
  int rtg_e = t.bias_add(t.matmul(rtg_scaled, w_rtg), b_rtg);
  int state_e = t.bias_add(t.matmul(t.constant(b.states), w_state), b_state);
  int action_e = t.bias_add(t.matmul(t.constant(b.actions), w_action), b_action);

  // one positional row per timestep, shared by the step's three tokens
  int pe;
  if (pos_table >= 0) {
    pe = t.gather_rows(pos_table, b.timesteps);
  } else {
    Tensor p = Tensor::zeros({n, e});
    for (int r = 0; r < n; ++r)
      for (int j = 0; j < e; ++j)
        p.at2(r, j) = pe_table_.at2(b.timesteps[static_cast<size_t>(r)], j);
    pe = t.constant(std::move(p));
  }
  rtg_e = t.add(rtg_e, pe);
  state_e = t.add(state_e, pe);
  action_e = t.add(action_e, pe);

  // interleave to (rtg, state, action) token triplets, samples contiguous
  const int tokens = t.reshape(t.concat_cols({rtg_e, state_e, action_e}), {3 * n, e});

  Tensor kk = Tensor::zeros({3 * n});
  for (int r = 0; r < n; ++r) {
    const double keep = b.keep.at(r) != 0.0 ? 1.0 : 0.0;
    kk.at(3 * r) = keep;
    kk.at(3 * r + 1) = keep;
    kk.at(3 * r + 2) = keep;
  }
  const int key_keep = t.constant(std::move(kk));

  RngStream dummy;
  RngStream& drop = train ? *dropout_stream : dummy;
  const kernels::AttentionShape shape{b.batch, 3 * b.k, cfg_.heads, e / cfg_.heads};

  int x = t.dropout(tokens, cfg_.dropout, train, drop);
  for (int l = 0; l < cfg_.layers; ++l) {
    const int p0 = pi + 16 * l;
    const int ln1 = t.layer_norm_rows(x, pnodes[p0], pnodes[p0 + 1]);
    const int q = t.bias_add(t.matmul(ln1, pnodes[p0 + 2]), pnodes[p0 + 3]);
    const int k = t.bias_add(t.matmul(ln1, pnodes[p0 + 4]), pnodes[p0 + 5]);
    const int v = t.bias_add(t.matmul(ln1, pnodes[p0 + 6]), pnodes[p0 + 7]);
    const int att = t.attention(q, k, v, shape, key_keep, true);
    const int proj = t.bias_add(t.matmul(att, pnodes[p0 + 8]), pnodes[p0 + 9]);
    x = t.add(x, t.dropout(proj, cfg_.dropout, train, drop));
    const int ln2 = t.layer_norm_rows(x, pnodes[p0 + 10], pnodes[p0 + 11]);
    const int h1 = t.relu(t.bias_add(t.matmul(ln2, pnodes[p0 + 12]), pnodes[p0 + 13]));
    const int h2 = t.bias_add(t.matmul(h1, pnodes[p0 + 14]), pnodes[p0 + 15]);
    x = t.add(x, t.dropout(h2, cfg_.dropout, train, drop));
  }
  const int pf = pi + 16 * cfg_.layers;
  const int xf = t.layer_norm_rows(x, pnodes[pf], pnodes[pf + 1]);
  const int state_tokens = t.gather_rows_strided(xf, 1, 3);
  return t.bias_add(t.matmul(state_tokens, pnodes[pf + 2]), pnodes[pf + 3]);
}

Tensor DTPolicy::act(const DTBatch& b) const {
  if (b.batch != 1)
    throw std::invalid_argument("dt act: expected a single window, got batch " +
                                std::to_string(b.batch));
  int last = -1;
  for (int r = 0; r < b.k; ++r)
    if (b.keep.at(r) != 0.0) last = r;
  if (last < 0) throw std::invalid_argument("dt act: window is all padding");
  Tape t(false);
  const std::vector<int> pnodes = register_params(t);
  const int out = forward(t, pnodes, b, false, nullptr);
  const Tensor& o = t.value(out);
  Tensor a = Tensor::zeros({cfg_.d_a});
  for (int j = 0; j < cfg_.d_a; ++j) a.at(j) = o.at2(last, j);
  return a;
}

int64_t policy_param_count(const PolicyVariant& p) {
  return std::visit([](const auto& pol) { return pol.param_count(); }, p);
}

const std::vector<Tensor>& policy_params(const PolicyVariant& p) {
  return std::visit([](const auto& pol) -> const std::vector<Tensor>& { return pol.params(); }, p);
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::string buf;
  buf.append(kMagic, 8);
  binio::put<uint32_t>(buf, kVersion);
  binio::put<uint8_t>(buf, std::holds_alternative<MLPPolicy>(c.policy) ? 0 : 1);
  binio::put<uint32_t>(buf, static_cast<uint32_t>(c.env_name.size()));
  buf += c.env_name;
  binio::put<uint32_t>(buf, static_cast<uint32_t>(c.reward_regime.size()));
  buf += c.reward_regime;
  binio::put<uint64_t>(buf, c.seed);
  binio::put<uint64_t>(buf, c.step);
  binio::put<double>(buf, c.rtg_target_hint);
  if (const MLPPolicy* mlp = std::get_if<MLPPolicy>(&c.policy)) {
    const MLPPolicyConfig& cfg = mlp->config();
    binio::put<uint32_t>(buf, static_cast<uint32_t>(cfg.d_s));
    binio::put<uint32_t>(buf, static_cast<uint32_t>(cfg.d_a));
    binio::put<uint32_t>(buf, static_cast<uint32_t>(cfg.depth));
    binio::put<uint32_t>(buf, static_cast<uint32_t>(cfg.hidden));
  } else {
    const DTPolicyConfig& cfg = std::get<DTPolicy>(c.policy).config();
    binio::put<uint32_t>(buf, static_cast<uint32_t>(cfg.d_s));
    binio::put<uint32_t>(buf, static_cast<uint32_t>(cfg.d_a));
    binio::put<uint32_t>(buf, static_cast<uint32_t>(cfg.layers));
    binio::put<uint32_t>(buf, static_cast<uint32_t>(cfg.heads));
    binio::put<uint32_t>(buf, static_cast<uint32_t>(cfg.embed_dim));
    binio::put<double>(buf, cfg.dropout);
    binio::put<uint32_t>(buf, static_cast<uint32_t>(cfg.context_k));
    binio::put<uint32_t>(buf, static_cast<uint32_t>(cfg.max_episode_length));
    binio::put<double>(buf, cfg.rtg_scale);
    binio::put<uint8_t>(buf, cfg.pos_encoding == PosEncoding::learned ? 1 : 0);
  }
  const std::vector<Tensor>& params = policy_params(c.policy);
  int64_t total = 0;
  for (const Tensor& p : params) total += p.size();
  binio::put<uint64_t>(buf, static_cast<uint64_t>(total));
  for (const Tensor& p : params)
    for (int64_t i = 0; i < p.size(); ++i) binio::put<double>(buf, p.at(i));
  write_file(path, buf);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string buf = read_file(path);
  binio::Reader r(buf, path);
  const std::string magic = r.get_bytes(8, "magic");
  if (std::memcmp(magic.data(), kMagic, 8) != 0)
    throw DataError("'" + path + "' is not a checkpoint (bad magic)");
  const uint32_t version = r.get<uint32_t>("version");
  if (version != kVersion)
    throw DataError("'" + path + "' has unsupported checkpoint version " +
                    std::to_string(version));
  const uint8_t kind = r.get<uint8_t>("policy kind");
  const uint32_t env_len = r.get<uint32_t>("env name length");
  const std::string env_name = r.get_bytes(env_len, "env name");
  const uint32_t reg_len = r.get<uint32_t>("regime length");
  const std::string regime = r.get_bytes(reg_len, "regime");
  const uint64_t seed = r.get<uint64_t>("seed");
  const uint64_t step = r.get<uint64_t>("step");
  const double rtg_hint = r.get<double>("rtg target hint");
  // fresh init below is immediately overwritten by the stored parameters
  const auto make_policy = [&]() -> PolicyVariant {
    if (kind == 0) {
      MLPPolicyConfig cfg;
      cfg.d_s = static_cast<int>(r.get<uint32_t>("d_s"));
      cfg.d_a = static_cast<int>(r.get<uint32_t>("d_a"));
      cfg.depth = static_cast<int>(r.get<uint32_t>("depth"));
      cfg.hidden = static_cast<int>(r.get<uint32_t>("hidden"));
      return MLPPolicy(cfg, RngStream::root(0));
    }
    if (kind == 1) {
      DTPolicyConfig cfg;
      cfg.d_s = static_cast<int>(r.get<uint32_t>("d_s"));
      cfg.d_a = static_cast<int>(r.get<uint32_t>("d_a"));
      cfg.layers = static_cast<int>(r.get<uint32_t>("layers"));
      cfg.heads = static_cast<int>(r.get<uint32_t>("heads"));
      cfg.embed_dim = static_cast<int>(r.get<uint32_t>("embed dim"));
      cfg.dropout = r.get<double>("dropout");
      cfg.context_k = static_cast<int>(r.get<uint32_t>("context"));
      cfg.max_episode_length = static_cast<int>(r.get<uint32_t>("max episode length"));
      cfg.rtg_scale = r.get<double>("rtg scale");
      cfg.pos_encoding = r.get<uint8_t>("pos encoding") == 1 ? PosEncoding::learned
                                                             : PosEncoding::sinusoidal;
      return DTPolicy(cfg, RngStream::root(0));
    }
    throw DataError("'" + path + "' has unknown policy kind " + std::to_string(kind));
  };
  Checkpoint c{make_policy(), seed, step, env_name, regime, rtg_hint};
  const uint64_t total = r.get<uint64_t>("parameter count");
  std::vector<Tensor>& params =
      std::visit([](auto& pol) -> std::vector<Tensor>& { return pol.params(); }, c.policy);
  int64_t have = 0;
  for (const Tensor& p : params) have += p.size();
  if (static_cast<uint64_t>(have) != total)
    throw DataError("'" + path + "' holds " + std::to_string(total) +
                    " parameters but the architecture needs " + std::to_string(have));
  for (Tensor& p : params) r.get_doubles(p.data(), static_cast<size_t>(p.size()), "parameters");
  if (r.remaining() != 0)
    throw DataError("'" + path + "' has " + std::to_string(r.remaining()) + " trailing bytes");
  return c;
}

}  // namespace offrl
