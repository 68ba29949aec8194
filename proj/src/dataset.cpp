#include "offrl/dataset.hpp"

#include <cstring>
#include <sstream>

#include <nlohmann/json.hpp>

#include "offrl/binio.hpp"
#include "offrl/util.hpp"

namespace offrl {

namespace {

using binio::put;
using binio::Reader;

constexpr char kMagic[8] = {'O', 'F', 'R', 'L', 'T', 'R', 'A', 'J'};
constexpr uint32_t kVersion = 1;

uint8_t regime_code(RewardRegime r) {
  switch (r) {
    case RewardRegime::dense: return 0;
    case RewardRegime::sparse: return 1;
    case RewardRegime::sparsified: return 2;
  }
  return 0;
}

RewardRegime regime_from_code(uint8_t c, const std::string& path) {
  switch (c) {
    case 0: return RewardRegime::dense;
    case 1: return RewardRegime::sparse;
    case 2: return RewardRegime::sparsified;
  }
  throw DataError("'" + path + "' has unknown reward regime code " + std::to_string(c));
}

TrajectoryDataset load_dataset_binary(const std::string& buf, const std::string& path) {
  Reader r(buf, path);
  const std::string magic = r.get_bytes(8, "magic");
  if (std::memcmp(magic.data(), kMagic, 8) != 0)
    throw DataError("'" + path + "' is not a trajectory container (bad magic)");
  const uint32_t version = r.get<uint32_t>("version");
  if (version != kVersion)
    throw DataError("'" + path + "' has unsupported container version " +
                    std::to_string(version) + " (expected " + std::to_string(kVersion) + ")");
  TrajectoryDataset ds;
  const uint32_t env_len = r.get<uint32_t>("env name length");
  ds.meta.env_name = r.get_bytes(env_len, "env name");
  ds.meta.d_s = static_cast<int>(r.get<uint32_t>("state dim"));
  ds.meta.d_a = static_cast<int>(r.get<uint32_t>("action dim"));
  ds.meta.max_episode_length = static_cast<int>(r.get<uint32_t>("max episode length"));
  ds.meta.reward_regime = regime_from_code(r.get<uint8_t>("reward regime"), path);
  const uint64_t count = r.get<uint64_t>("trajectory count");
  ds.trajectories.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    const std::string rec = "record " + std::to_string(i + 1) + " of " + std::to_string(count);
    const uint32_t T = r.get<uint32_t>("length of " + rec);
    Trajectory traj;
    traj.transitions.resize(T);
    for (uint32_t t = 0; t < T; ++t)
      traj.transitions[t].state.resize(static_cast<size_t>(ds.meta.d_s));
    for (uint32_t t = 0; t < T; ++t)
      r.get_doubles(traj.transitions[t].state.data(), static_cast<size_t>(ds.meta.d_s),
                    "states of " + rec);
    for (uint32_t t = 0; t < T; ++t) {
      traj.transitions[t].action.resize(static_cast<size_t>(ds.meta.d_a));
      r.get_doubles(traj.transitions[t].action.data(), static_cast<size_t>(ds.meta.d_a),
                    "actions of " + rec);
    }
    for (uint32_t t = 0; t < T; ++t)
      r.get_doubles(&traj.transitions[t].reward, 1, "rewards of " + rec);
    const uint8_t flag = r.get<uint8_t>("success flag of " + rec);
    if (flag == 1)
      traj.success = false;
    else if (flag == 2)
      traj.success = true;
    else if (flag != 0)
      throw DataError("'" + path + "' has invalid success byte " + std::to_string(flag) +
                      " in " + rec);
    ds.trajectories.push_back(std::move(traj));
  }
  if (r.remaining() != 0)
    throw DataError("'" + path + "' has " + std::to_string(r.remaining()) +
                    " trailing bytes after the last record");
  ds.validate();
  return ds;
}

TrajectoryDataset load_dataset_text(const std::string& buf, const std::string& path) {
  std::istringstream in(buf);
  std::string line;
  size_t lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!trim(line).empty()) return true;
    }
    return false;
  };
  auto parse = [&](const std::string& what) {
    try {
      return nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("'" + path + "' line " + std::to_string(lineno) + " (" + what +
                      "): " + e.what());
    }
  };
  if (!next_line()) throw DataError("'" + path + "' is empty");
  TrajectoryDataset ds;
  uint64_t count = 0;
  try {
    const nlohmann::json h = parse("header");
    ds.meta.env_name = h.at("env").get<std::string>();
    ds.meta.d_s = h.at("d_s").get<int>();
    ds.meta.d_a = h.at("d_a").get<int>();
    ds.meta.max_episode_length = h.at("max_episode_length").get<int>();
    ds.meta.reward_regime = regime_from_string(h.at("regime").get<std::string>());
    count = h.at("n").get<uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path + "' header: " + e.what());
  }
  for (uint64_t i = 0; i < count; ++i) {
    if (!next_line())
      throw DataError("'" + path + "' is truncated: header promises " + std::to_string(count) +
                      " records, found " + std::to_string(i));
    const std::string rec = "record " + std::to_string(i + 1);
    const nlohmann::json j = parse(rec);
    Trajectory traj;
    try {
      const auto& states = j.at("states");
      const auto& actions = j.at("actions");
      const auto& rewards = j.at("rewards");
      if (states.size() != actions.size() || states.size() != rewards.size())
        throw DataError("'" + path + "' " + rec + ": states/actions/rewards lengths differ (" +
                        std::to_string(states.size()) + "/" + std::to_string(actions.size()) +
                        "/" + std::to_string(rewards.size()) + ")");
      traj.transitions.resize(states.size());
      for (size_t t = 0; t < states.size(); ++t) {
        traj.transitions[t].state = states[t].get<std::vector<double>>();
        traj.transitions[t].action = actions[t].get<std::vector<double>>();
        traj.transitions[t].reward = rewards[t].get<double>();
      }
      if (j.contains("success")) traj.success = j.at("success").get<bool>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError("'" + path + "' " + rec + ": " + e.what());
    }
    ds.trajectories.push_back(std::move(traj));
  }
  if (next_line())
    throw DataError("'" + path + "' has extra content at line " + std::to_string(lineno) +
                    " after the last promised record");
  ds.validate();
  return ds;
}

}  // namespace

std::string to_string(RewardRegime r) {
  switch (r) {
    case RewardRegime::dense: return "dense";
    case RewardRegime::sparse: return "sparse";
    case RewardRegime::sparsified: return "sparsified";
  }
  return "dense";
}

RewardRegime regime_from_string(const std::string& s) {
  if (s == "dense") return RewardRegime::dense;
  if (s == "sparse") return RewardRegime::sparse;
  if (s == "sparsified") return RewardRegime::sparsified;
  throw DataError("unknown reward regime '" + s + "' (expected dense, sparse or sparsified)");
}

int64_t TrajectoryDataset::total_transitions() const {
  int64_t n = 0;
  for (const Trajectory& t : trajectories) n += t.length();
  return n;
}

void TrajectoryDataset::validate() const {
  if (meta.env_name.empty()) throw DataError("dataset has an empty env name");
  if (meta.d_s <= 0 || meta.d_a <= 0)
    throw DataError("dataset has non-positive dims d_s=" + std::to_string(meta.d_s) +
                    " d_a=" + std::to_string(meta.d_a));
  if (meta.max_episode_length <= 0)
    throw DataError("dataset has non-positive max episode length " +
                    std::to_string(meta.max_episode_length));
  if (trajectories.empty()) throw DataError("dataset holds no trajectories");
  for (size_t i = 0; i < trajectories.size(); ++i) {
    const Trajectory& t = trajectories[i];
    const std::string rec = "trajectory " + std::to_string(i + 1);
    if (t.transitions.empty()) throw DataError(rec + " is empty");
    if (t.length() > meta.max_episode_length)
      throw DataError(rec + " has length " + std::to_string(t.length()) +
                      " > max episode length " + std::to_string(meta.max_episode_length));
    for (int s = 0; s < t.length(); ++s) {
      const Transition& tr = t.transitions[static_cast<size_t>(s)];
      if (static_cast<int>(tr.state.size()) != meta.d_s)
        throw DataError(rec + " step " + std::to_string(s + 1) + " has state dim " +
                        std::to_string(tr.state.size()) + ", dataset says " +
                        std::to_string(meta.d_s));
      if (static_cast<int>(tr.action.size()) != meta.d_a)
        throw DataError(rec + " step " + std::to_string(s + 1) + " has action dim " +
                        std::to_string(tr.action.size()) + ", dataset says " +
                        std::to_string(meta.d_a));
    }
    if (meta.reward_regime == RewardRegime::sparse) {
      if (!t.success.has_value())
        throw DataError(rec + " is missing a success flag in a sparse dataset");
      const double last = t.transitions.back().reward;
      const double want = *t.success ? 1.0 : 0.0;
      if (last != want)
        throw DataError(rec + " final reward " + std::to_string(last) +
                        " contradicts its success flag");
    }
    if (meta.reward_regime == RewardRegime::sparse ||
        meta.reward_regime == RewardRegime::sparsified) {
      for (int s = 0; s + 1 < t.length(); ++s)
        if (t.transitions[static_cast<size_t>(s)].reward != 0.0)
          throw DataError(rec + " has a nonzero reward at step " + std::to_string(s + 1) +
                          " but the regime is " + to_string(meta.reward_regime));
    }
  }
}

double total_return(const Trajectory& t) {
  double s = 0.0;
  for (int j = t.length() - 1; j >= 0; --j)
    s = t.transitions[static_cast<size_t>(j)].reward + s;
  return s;
}

std::vector<double> returns_to_go(const Trajectory& t) {
  std::vector<double> rtg(static_cast<size_t>(t.length()));
  double s = 0.0;
  for (int j = t.length() - 1; j >= 0; --j) {
    s = t.transitions[static_cast<size_t>(j)].reward + s;
    rtg[static_cast<size_t>(j)] = s;
  }
  return rtg;
}

void save_dataset(const TrajectoryDataset& ds, const std::string& path) {
  ds.validate();
  std::string buf;
  buf.append(kMagic, 8);
  put<uint32_t>(buf, kVersion);
  put<uint32_t>(buf, static_cast<uint32_t>(ds.meta.env_name.size()));
  buf += ds.meta.env_name;
  put<uint32_t>(buf, static_cast<uint32_t>(ds.meta.d_s));
  put<uint32_t>(buf, static_cast<uint32_t>(ds.meta.d_a));
  put<uint32_t>(buf, static_cast<uint32_t>(ds.meta.max_episode_length));
  put<uint8_t>(buf, regime_code(ds.meta.reward_regime));
  put<uint64_t>(buf, static_cast<uint64_t>(ds.n()));
  for (const Trajectory& t : ds.trajectories) {
    put<uint32_t>(buf, static_cast<uint32_t>(t.length()));
    for (const Transition& tr : t.transitions)
      for (double v : tr.state) put<double>(buf, v);
    for (const Transition& tr : t.transitions)
      for (double v : tr.action) put<double>(buf, v);
    for (const Transition& tr : t.transitions) put<double>(buf, tr.reward);
    put<uint8_t>(buf, t.success.has_value() ? (*t.success ? 2 : 1) : 0);
  }
  write_file(path, buf);
}

void save_dataset_text(const TrajectoryDataset& ds, const std::string& path) {
  ds.validate();
  std::string out;
  nlohmann::json h;
  h["format"] = "offrl-traj";
  h["version"] = kVersion;
  h["env"] = ds.meta.env_name;
  h["d_s"] = ds.meta.d_s;
  h["d_a"] = ds.meta.d_a;
  h["max_episode_length"] = ds.meta.max_episode_length;
  h["regime"] = to_string(ds.meta.reward_regime);
  h["n"] = static_cast<uint64_t>(ds.n());
  out += h.dump();
  out += '\n';
  for (const Trajectory& t : ds.trajectories) {
    nlohmann::json j;
    auto& states = j["states"] = nlohmann::json::array();
    auto& actions = j["actions"] = nlohmann::json::array();
    auto& rewards = j["rewards"] = nlohmann::json::array();
    for (const Transition& tr : t.transitions) {
      states.push_back(tr.state);
      actions.push_back(tr.action);
      rewards.push_back(tr.reward);
    }
    if (t.success.has_value()) j["success"] = *t.success;
    out += j.dump();
    out += '\n';
  }
  write_file(path, out);
}

TrajectoryDataset load_dataset(const std::string& path) {
  const std::string buf = read_file(path);
  if (buf.size() >= 8 && std::memcmp(buf.data(), kMagic, 8) == 0)
    return load_dataset_binary(buf, path);
  const std::string head = trim(buf.substr(0, 64));
  if (!head.empty() && head[0] == '{') return load_dataset_text(buf, path);
  throw DataError("'" + path + "' is neither a binary trajectory container nor a JSON-lines one");
}

}  // namespace offrl
