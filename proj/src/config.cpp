// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

#include "lbforecast/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lbforecast/errors.hpp"

namespace lbf {

using json = nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

void reject_unknown(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!keys.count(k)) throw ConfigError(join(path, k), "unknown key");
  }
}

int get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError(path, "integer out of range");
  }
  return static_cast<int>(v);
}

std::uint64_t get_u64(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
  throw ConfigError(path, "expected a non-negative integer");
}

double get_real(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
  return j.get<bool>();
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

double get_epsilon(const json& j, const std::string& path) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity" || s == "Infinity") return std::numeric_limits<double>::infinity();
    throw ConfigError(path, "expected a number or \"inf\"");
  }
  const double v = get_real(j, path);
  if (!(v >= 0.0)) throw ConfigError(path, "threshold must be >= 0");
  return v;
}

ForecastMode get_mode(const json& j, const std::string& path) {
  const auto m = parse_forecast_mode(get_string(j, path));
  if (!m) throw ConfigError(path, "expected \"uniform-taylor\" or \"divided-difference\"");
  return *m;
}

NormKind get_norm(const json& j, const std::string& path) {
  const auto n = parse_norm_kind(get_string(j, path));
  if (!n) throw ConfigError(path, "expected \"relative-L2\" or \"relative-L1\"");
  return *n;
}

PolicyKind get_kind(const json& j, const std::string& path) {
  const auto k = parse_policy_kind(get_string(j, path));
  if (!k) throw ConfigError(path, "expected one of full, reuse, taylorseer_module, lastblock, pcg");
  return *k;
}

template <typename T, typename F>
std::vector<T> get_list(const json& j, const std::string& path, F&& item) {
  if (!j.is_array()) throw ConfigError(path, "expected a list");
  std::vector<T> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(item(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

void parse_model(const json& j, ToyDiTConfig& m) {
  const std::string p = "model";
  require_object(j, p);
  reject_unknown(j, p, {"B", "d", "h", "n", "mlp_ratio", "cross_attention", "m", "num_classes", "seed", "init_std",
                        "gate_scale"});
  if (j.contains("B")) m.num_blocks = get_int(j["B"], "model.B");
  if (j.contains("d")) m.model_dim = get_int(j["d"], "model.d");
  if (j.contains("h")) m.num_heads = get_int(j["h"], "model.h");
  if (j.contains("n")) m.num_tokens = get_int(j["n"], "model.n");
  if (j.contains("mlp_ratio")) m.mlp_ratio = get_int(j["mlp_ratio"], "model.mlp_ratio");
  if (j.contains("cross_attention")) m.cross_attention = get_bool(j["cross_attention"], "model.cross_attention");
  if (j.contains("m")) m.context_tokens = get_int(j["m"], "model.m");
  if (j.contains("num_classes")) m.num_classes = get_int(j["num_classes"], "model.num_classes");
  if (j.contains("seed")) m.seed = get_u64(j["seed"], "model.seed");
  if (j.contains("init_std")) m.init_std = get_real(j["init_std"], "model.init_std");
  if (j.contains("gate_scale")) m.gate_scale = get_real(j["gate_scale"], "model.gate_scale");
}

void parse_schedule(const json& j, ScheduleConfig& s) {
  require_object(j, "schedule");
  reject_unknown(j, "schedule", {"T", "S", "beta_start", "beta_end"});
  if (j.contains("T")) s.total_steps = get_int(j["T"], "schedule.T");
  if (j.contains("S")) s.sample_steps = get_int(j["S"], "schedule.S");
  if (j.contains("beta_start")) s.beta_start = get_real(j["beta_start"], "schedule.beta_start");
  if (j.contains("beta_end")) s.beta_end = get_real(j["beta_end"], "schedule.beta_end");
}

void parse_policy(const json& j, Policy& p) {
  require_object(j, "policy");
  reject_unknown(j, "policy", {"kind", "epsilon", "N", "O", "warmup", "mode", "norm"});
  if (j.contains("kind")) p.kind = get_kind(j["kind"], "policy.kind");
  if (j.contains("epsilon")) p.epsilon = get_epsilon(j["epsilon"], "policy.epsilon");
  if (j.contains("N")) p.interval = get_int(j["N"], "policy.N");
  if (j.contains("O")) p.order = get_int(j["O"], "policy.O");
  if (j.contains("warmup")) p.warmup = get_int(j["warmup"], "policy.warmup");
  if (j.contains("mode")) p.mode = get_mode(j["mode"], "policy.mode");
  if (j.contains("norm")) p.norm = get_norm(j["norm"], "policy.norm");
  if (p.kind == PolicyKind::reuse) p.order = 0;
}

void parse_sweep(const json& j, SweepConfig& s) {
  require_object(j, "sweep");
  reject_unknown(j, "sweep", {"policy", "epsilon", "N", "O", "mode"});
  if (j.contains("policy")) s.policies = get_list<PolicyKind>(j["policy"], "sweep.policy", get_kind);
  if (j.contains("epsilon")) s.epsilons = get_list<double>(j["epsilon"], "sweep.epsilon", get_epsilon);
  if (j.contains("N")) s.intervals = get_list<int>(j["N"], "sweep.N", get_int);
  if (j.contains("O")) s.orders = get_list<int>(j["O"], "sweep.O", get_int);
  if (j.contains("mode")) s.modes = get_list<ForecastMode>(j["mode"], "sweep.mode", get_mode);
  for (const char* key : {"policy", "epsilon", "N", "O", "mode"}) {
    if (j.contains(key) && j[key].empty()) throw ConfigError(std::string("sweep.") + key, "empty list makes the grid empty");
  }
  for (int n : s.intervals) {
    if (n < 1) throw ConfigError("sweep.N", "interval must be >= 1");
  }
  for (int o : s.orders) {
    if (o < 0) throw ConfigError("sweep.O", "order must be >= 0");
  }
}

void parse_analysis(const json& j, CorrelationParams& a) {
  require_object(j, "analysis");
  reject_unknown(j, "analysis", {"N", "O", "warmup", "mode", "norm"});
  if (j.contains("N")) a.interval = get_int(j["N"], "analysis.N");
  if (j.contains("O")) a.order = get_int(j["O"], "analysis.O");
  if (j.contains("warmup")) a.warmup = get_int(j["warmup"], "analysis.warmup");
  if (j.contains("mode")) a.mode = get_mode(j["mode"], "analysis.mode");
  if (j.contains("norm")) a.norm = get_norm(j["norm"], "analysis.norm");
  if (a.interval < 1) throw ConfigError("analysis.N", "interval must be >= 1");
  if (a.order < 0) throw ConfigError("analysis.O", "order must be >= 0");
  if (a.warmup && *a.warmup < 1) throw ConfigError("analysis.warmup", "warmup must be >= 1");
}

void validate(const ExperimentConfig& c) {
  try {
    c.model.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(join("model", e.key_path()), std::string(e.what()).substr(e.key_path().size() + 2));
  }
  const auto& s = c.schedule;
  if (s.total_steps < 1) throw ConfigError("schedule.T", "must be >= 1");
  if (s.sample_steps < 1 || s.sample_steps > s.total_steps) throw ConfigError("schedule.S", "need 1 <= S <= T");
  if (!(s.beta_start > 0.0 && s.beta_start < 1.0)) throw ConfigError("schedule.beta_start", "must lie in (0, 1)");
  if (!(s.beta_end >= s.beta_start && s.beta_end < 1.0)) {
    throw ConfigError("schedule.beta_end", "need beta_start <= beta_end < 1");
  }
  c.policy.validate();
  if (c.policy.kind != PolicyKind::full && c.policy.effective_warmup() > s.sample_steps) {
    throw ConfigError("policy.warmup", "warmup exceeds the number of sampling steps");
  }
  if (c.class_id < 0 || c.class_id >= c.model.num_classes) throw ConfigError("class_id", "outside 0..num_classes-1");
  if (c.threads < 0) throw ConfigError("threads", "must be >= 0");
}

json epsilon_json(double eps) {
  if (std::isinf(eps)) return "inf";
  return eps;
}

}  // namespace

std::string format_epsilon(double eps) {
  if (std::isinf(eps)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", eps);
  return buf;
}

ExperimentConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  require_object(root, "");
  reject_unknown(root, "", {"model", "schedule", "policy", "seed", "class_id", "output", "sweep", "analysis",
                            "threads"});

  ExperimentConfig c;
  if (root.contains("model")) parse_model(root["model"], c.model);
  if (root.contains("schedule")) parse_schedule(root["schedule"], c.schedule);
  if (root.contains("policy")) parse_policy(root["policy"], c.policy);
  if (root.contains("seed")) c.seed = get_u64(root["seed"], "seed");
  if (root.contains("class_id")) c.class_id = get_int(root["class_id"], "class_id");
  if (root.contains("threads")) c.threads = get_int(root["threads"], "threads");
  if (root.contains("output")) {
    const json& o = root["output"];
    require_object(o, "output");
    reject_unknown(o, "output", {"out", "record_trace"});
    if (o.contains("out")) c.out = get_string(o["out"], "output.out");
    if (o.contains("record_trace")) c.record_trace = get_string(o["record_trace"], "output.record_trace");
  }
  if (root.contains("sweep")) parse_sweep(root["sweep"], c.sweep.emplace());
  if (root.contains("analysis")) parse_analysis(root["analysis"], c.analysis);
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

json model_json(const ToyDiTConfig& m) {
  return {{"B", m.num_blocks},
          {"d", m.model_dim},
          {"h", m.num_heads},
          {"n", m.num_tokens},
          {"mlp_ratio", m.mlp_ratio},
          {"cross_attention", m.cross_attention},
          {"m", m.context_tokens},
          {"num_classes", m.num_classes},
          {"seed", m.seed},
          {"init_std", m.init_std},
          {"gate_scale", m.gate_scale}};
}

}  // namespace

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["model"] = model_json(c.model);
  j["schedule"] = {{"T", c.schedule.total_steps},
                   {"S", c.schedule.sample_steps},
                   {"beta_start", c.schedule.beta_start},
                   {"beta_end", c.schedule.beta_end}};
  j["policy"] = {{"kind", std::string(to_string(c.policy.kind))},
                 {"epsilon", epsilon_json(c.policy.epsilon)},
                 {"N", c.policy.interval},
                 {"O", c.policy.effective_order()},
                 {"warmup", c.policy.effective_warmup()},
                 {"mode", std::string(to_string(c.policy.effective_mode()))},
                 {"norm", std::string(to_string(c.policy.norm))}};
  j["seed"] = c.seed;
  j["class_id"] = c.class_id;
  j["output"] = {{"out", c.out}, {"record_trace", c.record_trace}};
  j["analysis"] = {{"N", c.analysis.interval},
                   {"O", c.analysis.order},
                   {"warmup", c.analysis.warmup.value_or(c.analysis.order + 1)},
                   {"mode", std::string(to_string(c.analysis.mode))},
                   {"norm", std::string(to_string(c.analysis.norm))}};
  j["threads"] = c.threads;
  if (c.sweep) {
    json s = json::object();
    json kinds = json::array();
    for (auto k : c.sweep->policies) kinds.push_back(std::string(to_string(k)));
    json eps = json::array();
    for (double e : c.sweep->epsilons) eps.push_back(epsilon_json(e));
    json modes = json::array();
    for (auto m : c.sweep->modes) modes.push_back(std::string(to_string(m)));
    if (!kinds.empty()) s["policy"] = kinds;
    if (!eps.empty()) s["epsilon"] = eps;
    if (!c.sweep->intervals.empty()) s["N"] = c.sweep->intervals;
    if (!c.sweep->orders.empty()) s["O"] = c.sweep->orders;
    if (!modes.empty()) s["mode"] = modes;
    j["sweep"] = s;
  }
  return j.dump();
}

std::string model_config_hash(const ToyDiTConfig& cfg) {
  const std::string text = model_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace lbf
