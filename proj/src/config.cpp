#include "dqt/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "dqt/error.hpp"

namespace dqt {

using nlohmann::json;

namespace {

// Rejects keys outside `allowed` so typos in a config file fail loudly.
void check_keys(const json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& j, const std::string& where, const char* key, T& field) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_unsigned()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_integer()) throw ConfigError("");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError("");
    }
    field = it->get<T>();
  } catch (const std::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

DateRange read_range(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_string() || !j[1].is_string()) {
    throw ConfigError(where + ": expected [\"YYYY-MM-DD\", \"YYYY-MM-DD\"]");
  }
  try {
    DateRange r{parse_date(j[0].get<std::string>()), parse_date(j[1].get<std::string>())};
    if (r.last < r.first) throw ConfigError(where + ": range ends before it starts");
    return r;
  } catch (const DataError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

json range_json(const DateRange& r) { return json::array({format_date(r.first), format_date(r.last)}); }

std::string kind_name(Normalization::Kind k) { return k == Normalization::Kind::ZScore ? "zscore" : "affine"; }

void from_json_indicators(const json& j, IndicatorParams& p) {
  const std::string w = "indicators";
  check_keys(j, w,
             {"rsi_window", "momentum_window", "ppo_fast", "ppo_slow", "stoch_window", "boll_window", "boll_k",
              "fib_window", "macd_fast", "macd_slow", "macd_signal"});
  read(j, w, "rsi_window", p.rsi_window);
  read(j, w, "momentum_window", p.momentum_window);
  read(j, w, "ppo_fast", p.ppo_fast);
  read(j, w, "ppo_slow", p.ppo_slow);
  read(j, w, "stoch_window", p.stoch_window);
  read(j, w, "boll_window", p.boll_window);
  read(j, w, "boll_k", p.boll_k);
  read(j, w, "fib_window", p.fib_window);
  read(j, w, "macd_fast", p.macd_fast);
  read(j, w, "macd_slow", p.macd_slow);
  read(j, w, "macd_signal", p.macd_signal);
}

void from_json_normalization(const json& j, NormalizationSpec& spec) {
  if (!j.is_object()) throw ConfigError("normalization: expected an object");
  for (const auto& [key, value] : j.items()) {
    std::size_t f = kNumFeatures;
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
      if (kFeatureNames[i] == key) f = i;
    }
    const std::string w = "normalization." + key;
    if (f == kNumFeatures) throw ConfigError("normalization: unknown feature '" + key + "'");
    check_keys(value, w, {"kind", "lo", "hi"});
    auto& n = spec.per_feature[f];
    std::string kind = kind_name(n.kind);
    read(value, w, "kind", kind);
    if (kind == "zscore") {
      n.kind = Normalization::Kind::ZScore;
    } else if (kind == "affine") {
      n.kind = Normalization::Kind::Affine;
    } else {
      throw ConfigError(w + ".kind: expected zscore or affine");
    }
    read(value, w, "lo", n.lo);
    read(value, w, "hi", n.hi);
    if (n.kind == Normalization::Kind::Affine && !(n.hi > n.lo)) throw ConfigError(w + ": hi must exceed lo");
  }
}

template <class T>
void read_sizes(const json& j, const std::string& where, const char* key, std::vector<T>& field) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_array()) throw ConfigError(where + "." + key + ": expected an array");
  std::vector<T> out;
  for (const auto& v : *it) {
    if (!v.is_number_unsigned()) throw ConfigError(where + "." + key + ": expected nonnegative integers");
    out.push_back(v.get<T>());
  }
  field = std::move(out);
}

void from_json_network(const json& j, NetworkConfig& n) {
  check_keys(j, "network", {"cnn", "lstm", "dqn"});
  if (auto it = j.find("cnn"); it != j.end()) {
    const std::string w = "network.cnn";
    check_keys(*it, w, {"conv_channels", "kernel", "padding", "fc_hidden", "dropout", "leaky_alpha"});
    read_sizes(*it, w, "conv_channels", n.cnn.conv_channels);
    read(*it, w, "kernel", n.cnn.kernel);
    read(*it, w, "padding", n.cnn.padding);
    read_sizes(*it, w, "fc_hidden", n.cnn.fc_hidden);
    read(*it, w, "dropout", n.cnn.dropout);
    read(*it, w, "leaky_alpha", n.cnn.leaky_alpha);
  }
  if (auto it = j.find("lstm"); it != j.end()) {
    const std::string w = "network.lstm";
    check_keys(*it, w, {"hidden", "attention_dim"});
    read(*it, w, "hidden", n.lstm.hidden);
    read(*it, w, "attention_dim", n.lstm.attention_dim);
  }
  if (auto it = j.find("dqn"); it != j.end()) {
    const std::string w = "network.dqn";
    check_keys(*it, w, {"hidden", "dropout", "leaky_alpha"});
    read_sizes(*it, w, "hidden", n.dqn.hidden);
    read(*it, w, "dropout", n.dqn.dropout);
    read(*it, w, "leaky_alpha", n.dqn.leaky_alpha);
  }
}

}  // namespace

TrainConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  TrainConfig c;
  const std::string w = "config";
  check_keys(j, w,
             {"episodes", "eval_every", "tickers", "seed", "use_splits", "splits", "indicators", "normalization",
              "env", "agent", "optimizer", "network", "output_dir", "write_step_log"});
  read(j, w, "episodes", c.episodes);
  read(j, w, "eval_every", c.eval_every);
  read(j, w, "seed", c.seed);
  read(j, w, "use_splits", c.use_splits);
  read(j, w, "write_step_log", c.write_step_log);
  if (auto it = j.find("output_dir"); it != j.end()) {
    if (!it->is_string()) throw ConfigError("config.output_dir: wrong type");
    c.output_dir = it->get<std::string>();
  }
  if (auto it = j.find("tickers"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("config.tickers: expected an array of strings");
    for (const auto& t : *it) {
      if (!t.is_string()) throw ConfigError("config.tickers: expected an array of strings");
      c.tickers.push_back({t.get<std::string>()});
    }
  }
  if (auto it = j.find("splits"); it != j.end()) {
    check_keys(*it, "splits", {"train", "test", "validation"});
    if (it->contains("train")) c.splits.train = read_range((*it)["train"], "splits.train");
    if (it->contains("test")) c.splits.test = read_range((*it)["test"], "splits.test");
    if (it->contains("validation")) c.splits.validation = read_range((*it)["validation"], "splits.validation");
  }
  if (auto it = j.find("indicators"); it != j.end()) from_json_indicators(*it, c.indicators);
  if (auto it = j.find("normalization"); it != j.end()) from_json_normalization(*it, c.normalization);
  if (auto it = j.find("env"); it != j.end()) {
    const std::string e = "env";
    check_keys(*it, e, {"initial_cash", "commission_rate", "impact_rate", "invalid_penalty"});
    read(*it, e, "initial_cash", c.env.initial_cash);
    read(*it, e, "commission_rate", c.env.commission_rate);
    read(*it, e, "impact_rate", c.env.impact_rate);
    read(*it, e, "invalid_penalty", c.env.invalid_penalty);
  }
  if (auto it = j.find("agent"); it != j.end()) {
    const std::string a = "agent";
    check_keys(*it, a, {"gamma", "epsilon_start", "epsilon_end", "epsilon_decay_episodes", "tau"});
    read(*it, a, "gamma", c.agent.gamma);
    read(*it, a, "epsilon_start", c.agent.epsilon_start);
    read(*it, a, "epsilon_end", c.agent.epsilon_end);
    read(*it, a, "epsilon_decay_episodes", c.agent.epsilon_decay_episodes);
    read(*it, a, "tau", c.agent.tau);
  }
  if (auto it = j.find("optimizer"); it != j.end()) {
    const std::string o = "optimizer";
    check_keys(*it, o,
               {"learning_rate", "beta1", "beta2", "eps", "weight_decay", "clip_max_norm", "lr_decay",
                "lr_decay_every"});
    read(*it, o, "learning_rate", c.optimizer.learning_rate);
    read(*it, o, "beta1", c.optimizer.beta1);
    read(*it, o, "beta2", c.optimizer.beta2);
    read(*it, o, "eps", c.optimizer.eps);
    read(*it, o, "weight_decay", c.optimizer.weight_decay);
    read(*it, o, "clip_max_norm", c.optimizer.clip_max_norm);
    read(*it, o, "lr_decay", c.optimizer.lr_decay);
    read(*it, o, "lr_decay_every", c.optimizer.lr_decay_every);
  }
  if (auto it = j.find("network"); it != j.end()) from_json_network(*it, c.network);
  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const TrainConfig& c) {
  json j;
  j["episodes"] = c.episodes;
  j["eval_every"] = c.eval_every;
  j["seed"] = c.seed;
  j["tickers"] = json::array();
  for (const auto& t : c.tickers) j["tickers"].push_back(t.spec);
  j["use_splits"] = c.use_splits;
  j["splits"] = {{"train", range_json(c.splits.train)},
                 {"test", range_json(c.splits.test)},
                 {"validation", range_json(c.splits.validation)}};
  const auto& p = c.indicators;
  j["indicators"] = {{"rsi_window", p.rsi_window},   {"momentum_window", p.momentum_window},
                     {"ppo_fast", p.ppo_fast},       {"ppo_slow", p.ppo_slow},
                     {"stoch_window", p.stoch_window}, {"boll_window", p.boll_window},
                     {"boll_k", p.boll_k},           {"fib_window", p.fib_window},
                     {"macd_fast", p.macd_fast},     {"macd_slow", p.macd_slow},
                     {"macd_signal", p.macd_signal}};
  json norm = json::object();
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    const auto& n = c.normalization.per_feature[f];
    json entry = {{"kind", kind_name(n.kind)}};
    if (n.kind == Normalization::Kind::Affine) {
      entry["lo"] = n.lo;
      entry["hi"] = n.hi;
    }
    norm[std::string(kFeatureNames[f])] = entry;
  }
  j["normalization"] = norm;
  j["env"] = {{"initial_cash", c.env.initial_cash},
              {"commission_rate", c.env.commission_rate},
              {"impact_rate", c.env.impact_rate},
              {"invalid_penalty", c.env.invalid_penalty}};
  j["agent"] = {{"gamma", c.agent.gamma},
                {"epsilon_start", c.agent.epsilon_start},
                {"epsilon_end", c.agent.epsilon_end},
                {"epsilon_decay_episodes", c.agent.epsilon_decay_episodes},
                {"tau", c.agent.tau}};
  const auto& o = c.optimizer;
  j["optimizer"] = {{"learning_rate", o.learning_rate}, {"beta1", o.beta1},
                    {"beta2", o.beta2},                 {"eps", o.eps},
                    {"weight_decay", o.weight_decay},   {"clip_max_norm", o.clip_max_norm},
                    {"lr_decay", o.lr_decay},           {"lr_decay_every", o.lr_decay_every}};
  const auto& n = c.network;
  j["network"] = {{"cnn",
                   {{"conv_channels", n.cnn.conv_channels},
                    {"kernel", n.cnn.kernel},
                    {"padding", n.cnn.padding},
                    {"fc_hidden", n.cnn.fc_hidden},
                    {"dropout", n.cnn.dropout},
                    {"leaky_alpha", n.cnn.leaky_alpha}}},
                  {"lstm", {{"hidden", n.lstm.hidden}, {"attention_dim", n.lstm.attention_dim}}},
                  {"dqn", {{"hidden", n.dqn.hidden}, {"dropout", n.dqn.dropout}, {"leaky_alpha", n.dqn.leaky_alpha}}}};
  j["output_dir"] = c.output_dir.string();
  j["write_step_log"] = c.write_step_log;
  return j.dump(2);
}

}  // namespace dqt
