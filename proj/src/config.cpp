#include "offrl/config.hpp"

#include <cctype>
#include <cstdlib>
#include <stdexcept>

#include "offrl/util.hpp"

namespace offrl {

namespace {

bool parse_i64(const std::string& s, int64_t& out) {
  try {
    size_t idx = 0;
    out = std::stoll(s, &idx);
    return idx == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_u64(const std::string& s, uint64_t& out) {
  if (!s.empty() && s[0] == '-') return false;
  try {
    size_t idx = 0;
    out = std::stoull(s, &idx);
    return idx == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_f64(const std::string& s, double& out) {
  try {
    size_t idx = 0;
    out = std::stod(s, &idx);
    return idx == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0") {
    out = false;
    return true;
  }
  return false;
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
  return true;
}

DatasetSpecCfg& dataset_slot(ExperimentConfig& cfg, const std::string& name) {
  for (DatasetSpecCfg& d : cfg.datasets)
    if (d.name == name) return d;
  DatasetSpecCfg d;
  d.name = name;
  cfg.datasets.push_back(std::move(d));
  return cfg.datasets.back();
}

// one key = value pair; problems land in errors
void apply_kv(ExperimentConfig& cfg, const std::string& key, const std::string& value,
              std::vector<std::string>& errors) {
  auto bad = [&](const std::string& why) { errors.push_back("key '" + key + "': " + why); };
  auto want_int = [&](int& dst, int lo) {
    int64_t v;
    if (!parse_i64(value, v) || v < lo)
      bad("expected an integer >= " + std::to_string(lo) + ", got '" + value + "'");
    else
      dst = static_cast<int>(v);
  };
  auto want_f64 = [&](double& dst) {
    double v;
    if (!parse_f64(value, v))
      bad("expected a number, got '" + value + "'");
    else
      dst = v;
  };

  if (key == "name") {
    cfg.name = value;
  } else if (key == "out_dir") {
    cfg.out_dir = value;
  } else if (key == "methods") {
    std::vector<Method> methods;
    for (const std::string& part : split(value, ',')) {
      const std::string m = trim(part);
      try {
        methods.push_back(method_from_string(m));
      } catch (const UsageError& e) {
        bad(e.what());
        return;
      }
    }
    if (methods.empty())
      bad("no methods listed");
    else
      cfg.methods = std::move(methods);
  } else if (key == "seeds") {
    std::vector<uint64_t> seeds;
    for (const std::string& part : split(value, ',')) {
      uint64_t v;
      if (!parse_u64(trim(part), v)) {
        bad("expected a comma list of non-negative integers, got '" + value + "'");
        return;
      }
      seeds.push_back(v);
    }
    if (seeds.empty())
      bad("no seeds listed");
    else
      cfg.seeds = std::move(seeds);
  } else if (key == "epochs") {
    want_int(cfg.epochs, 1);
  } else if (key == "lr") {
    want_f64(cfg.lr);
  } else if (key == "weight_decay") {
    want_f64(cfg.weight_decay);
  } else if (key == "grad_clip") {
    want_f64(cfg.grad_clip);
  } else if (key == "filter_mode") {
    if (value == "top-fraction") {  // both spellings, hyphen as on the CLI
      cfg.filter_mode = "top_fraction";
    } else if (value != "auto" && value != "success" && value != "top_fraction") {
      bad("expected auto, success or top-fraction, got '" + value + "'");
    } else {
      cfg.filter_mode = value;
    }
  } else if (key == "filter_fraction") {
    double v;
    if (!parse_f64(value, v) || !(v > 0.0 && v <= 1.0))
      bad("expected a fraction in (0,1], got '" + value + "'");
    else
      cfg.filter_fraction = v;
  } else if (key == "bc_batch") {
    want_int(cfg.bc_batch, 1);
  } else if (key == "bc_depth") {
    want_int(cfg.bc_depth, 0);
  } else if (key == "bc_hidden") {
    want_int(cfg.bc_hidden, 1);
  } else if (key == "bc_decay_epoch") {
    want_int(cfg.bc_decay_epoch, 0);
  } else if (key == "bc_decay_factor") {
    want_f64(cfg.bc_decay_factor);
  } else if (key == "dt_batch") {
    want_int(cfg.dt_batch, 1);
  } else if (key == "dt_layers") {
    want_int(cfg.dt_layers, 1);
  } else if (key == "dt_heads") {
    want_int(cfg.dt_heads, 1);
  } else if (key == "dt_embed") {
    want_int(cfg.dt_embed, 1);
  } else if (key == "dt_context") {
    want_int(cfg.dt_context, 0);
  } else if (key == "dt_dropout") {
    double v;
    if (!parse_f64(value, v) || !(v >= 0.0 && v < 1.0))
      bad("expected a rate in [0,1), got '" + value + "'");
    else
      cfg.dt_dropout = v;
  } else if (key == "dt_warmup") {
    int64_t v;
    if (!parse_i64(value, v) || v < 0)
      bad("expected a non-negative integer, got '" + value + "'");
    else
      cfg.dt_warmup = v;
  } else if (key == "dt_rtg_scale") {
    double v;
    if (!parse_f64(value, v) || v < 0.0)
      bad("expected a non-negative number (0 = auto), got '" + value + "'");
    else
      cfg.dt_rtg_scale = v;
  } else if (key == "dt_pos_encoding") {
    if (value != "sinusoidal" && value != "learned")
      bad("expected sinusoidal or learned, got '" + value + "'");
    else
      cfg.dt_pos_encoding = value;
  } else if (key == "eval_rollouts") {
    want_int(cfg.eval_rollouts, 1);
  } else if (key == "eval_every") {
    want_int(cfg.eval_every, 0);
  } else if (key.rfind("dataset.", 0) == 0) {
    const std::string rest = key.substr(8);
    const size_t dot = rest.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 >= rest.size()) {
      bad("expected dataset.<name>.<field>");
      return;
    }
    const std::string dname = rest.substr(0, dot);
    const std::string field = rest.substr(dot + 1);
    if (!valid_name(dname)) {
      bad("dataset name '" + dname + "' must be [A-Za-z0-9_-]+");
      return;
    }
    DatasetSpecCfg& d = dataset_slot(cfg, dname);
    if (field == "env") {
      d.env = value;
    } else if (field == "mode") {
      try {
        d.mode = reward_mode_from_string(value);
      } catch (const UsageError& e) {
        bad(e.what());
      }
    } else if (field == "sparsify") {
      bool v;
      if (!parse_bool(value, v))
        bad("expected true or false, got '" + value + "'");
      else
        d.sparsify_flag = v;
    } else if (field == "mixture") {
      try {
        d.mixture = parse_mixture(value);
      } catch (const UsageError& e) {
        bad(e.what());
      }
    } else if (field == "seed") {
      uint64_t v;
      if (!parse_u64(value, v))
        bad("expected a non-negative integer, got '" + value + "'");
      else
        d.seed = v;
    } else if (field == "path") {
      d.path = value;
    } else if (field == "rtg_target") {
      if (value == "auto") {
        d.rtg_auto = true;
      } else {
        double v;
        if (!parse_f64(value, v)) {
          bad("expected 'auto' or a number, got '" + value + "'");
        } else {
          d.rtg_auto = false;
          d.rtg_target = v;
        }
      }
    } else if (field == "random_ref") {
      want_f64(d.random_ref);
    } else if (field == "expert_ref") {
      want_f64(d.expert_ref);
    } else {
      bad("unknown dataset field '" + field + "'");
    }
  } else {
    bad("unknown key");
  }
}

}  // namespace

GeneratorSpec parse_mixture(const std::string& text) {
  GeneratorSpec spec;
  for (const std::string& raw : split(text, ',')) {
    const std::string part = trim(raw);
    if (part.empty())
      throw UsageError("mixture '" + text + "' has an empty entry");
    const std::vector<std::string> bits = split(part, ':');
    if (bits.size() < 2 || bits.size() > 3)
      throw UsageError("mixture entry '" + part + "' must be quality:count[:noise]");
    MixtureEntry e;
    e.quality = quality_from_string(trim(bits[0]));
    int64_t count;
    if (!parse_i64(trim(bits[1]), count) || count <= 0)
      throw UsageError("mixture entry '" + part + "' has a bad count");
    e.count = static_cast<int>(count);
    if (bits.size() == 3) {
      if (e.quality != Quality::medium)
        throw UsageError("mixture entry '" + part + "' sets noise on a " +
                         to_string(e.quality) + " policy (medium only)");
      if (!parse_f64(trim(bits[2]), e.noise) || e.noise < 0.0)
        throw UsageError("mixture entry '" + part + "' has a bad noise level");
    } else if (e.quality == Quality::medium) {
      e.noise = 0.5;
    }
    spec.mixture.push_back(e);
  }
  if (spec.mixture.empty()) throw UsageError("mixture '" + text + "' is empty");
  return spec;
}

std::string mixture_to_string(const GeneratorSpec& spec) {
  std::string out;
  for (size_t i = 0; i < spec.mixture.size(); ++i) {
    const MixtureEntry& e = spec.mixture[i];
    if (i) out += ",";
    out += to_string(e.quality) + ":" + std::to_string(e.count);
    if (e.quality == Quality::medium) out += ":" + fmt_double(e.noise);
  }
  return out;
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  ExperimentConfig cfg;
  std::vector<std::string> errors;
  const std::vector<std::string> lines = split(text, '\n');
  for (size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(i + 1) + ": expected key = value, got '" +
                       line + "'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      errors.push_back("line " + std::to_string(i + 1) + ": empty key");
      continue;
    }
    apply_kv(cfg, key, value, errors);
  }
  for (const DatasetSpecCfg& d : cfg.datasets)
    if (d.path.empty() && d.mixture.mixture.empty())
      errors.push_back("dataset '" + d.name + "' has neither a mixture nor a path");
  if (!errors.empty()) {
    std::string msg = "config has " + std::to_string(errors.size()) + " problem(s):";
    for (const std::string& e : errors) msg += "\n  - " + e;
    throw UsageError(msg);
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  try {
    return parse_experiment_config(read_file(path));
  } catch (const UsageError& e) {
    throw UsageError("'" + path + "': " + e.what());
  }
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  std::vector<std::string> errors;
  apply_kv(cfg, trim(key), trim(value), errors);
  if (!errors.empty()) throw UsageError("override " + errors.front());
}

std::string resolved_config_text(const ExperimentConfig& cfg) {
  std::string out;
  out += "name = " + cfg.name + "\n";
  out += "out_dir = " + cfg.out_dir + "\n";
  out += "methods = ";
  for (size_t i = 0; i < cfg.methods.size(); ++i)
    out += (i ? ", " : "") + to_string(cfg.methods[i]);
  out += "\nseeds = ";
  for (size_t i = 0; i < cfg.seeds.size(); ++i)
    out += (i ? ", " : "") + std::to_string(cfg.seeds[i]);
  out += "\n";
  out += "epochs = " + std::to_string(cfg.epochs) + "\n";
  out += "lr = " + fmt_double(cfg.lr) + "\n";
  out += "weight_decay = " + fmt_double(cfg.weight_decay) + "\n";
  out += "grad_clip = " + fmt_double(cfg.grad_clip) + "\n";
  out += "filter_mode = " + cfg.filter_mode + "\n";
  out += "filter_fraction = " + fmt_double(cfg.filter_fraction) + "\n";
  out += "bc_batch = " + std::to_string(cfg.bc_batch) + "\n";
  out += "bc_depth = " + std::to_string(cfg.bc_depth) + "\n";
  out += "bc_hidden = " + std::to_string(cfg.bc_hidden) + "\n";
  out += "bc_decay_epoch = " + std::to_string(cfg.bc_decay_epoch) + "\n";
  out += "bc_decay_factor = " + fmt_double(cfg.bc_decay_factor) + "\n";
  out += "dt_batch = " + std::to_string(cfg.dt_batch) + "\n";
  out += "dt_layers = " + std::to_string(cfg.dt_layers) + "\n";
  out += "dt_heads = " + std::to_string(cfg.dt_heads) + "\n";
  out += "dt_embed = " + std::to_string(cfg.dt_embed) + "\n";
  out += "dt_context = " + std::to_string(cfg.dt_context) + "\n";
  out += "dt_dropout = " + fmt_double(cfg.dt_dropout) + "\n";
  out += "dt_warmup = " + std::to_string(cfg.dt_warmup) + "\n";
  out += "dt_rtg_scale = " + fmt_double(cfg.dt_rtg_scale) + "\n";
  out += "dt_pos_encoding = " + cfg.dt_pos_encoding + "\n";
  out += "eval_rollouts = " + std::to_string(cfg.eval_rollouts) + "\n";
  out += "eval_every = " + std::to_string(cfg.eval_every) + "\n";
  for (const DatasetSpecCfg& d : cfg.datasets) {
    const std::string p = "dataset." + d.name + ".";
    out += p + "env = " + d.env + "\n";
    out += p + "mode = " + to_string(d.mode) + "\n";
    out += p + "sparsify = " + (d.sparsify_flag ? "true" : "false") + "\n";
    if (!d.mixture.mixture.empty())
      out += p + "mixture = " + mixture_to_string(d.mixture) + "\n";
    out += p + "seed = " + std::to_string(d.seed) + "\n";
    if (!d.path.empty()) out += p + "path = " + d.path + "\n";
    out += p + "rtg_target = " + (d.rtg_auto ? "auto" : fmt_double(d.rtg_target)) + "\n";
    out += p + "random_ref = " + fmt_double(d.random_ref) + "\n";
    out += p + "expert_ref = " + fmt_double(d.expert_ref) + "\n";
  }
  return out;
}

}  // namespace offrl
