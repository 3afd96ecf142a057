#include "star/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "star/audit.hpp"
#include "star/json_io.hpp"

namespace star {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw std::invalid_argument("config key " + key + ": cannot read \"" +
                              value + "\" as " + expected);
}

long long parse_int(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(value, &used);
  } catch (const std::exception&) {
    bad_value(key, value, "an integer");
  }
  if (used != value.size()) bad_value(key, value, "an integer");
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(value, &used);
  } catch (const std::exception&) {
    bad_value(key, value, "a number");
  }
  if (used != value.size()) bad_value(key, value, "a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  bad_value(key, value, "true or false");
}

std::vector<std::string> parse_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_flat_config(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value, got \"" + line +
                                  "\"");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": empty key");
    if (out.count(key))
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": duplicate key " + key);
    out[key] = value;
  }
  return out;
}

void apply_config_key(EvalConfig& cfg, const std::string& key,
                      const std::string& value) {
  if (key == "router.tau") {
    cfg.repair.router.tau = parse_double(key, value);
  } else if (key == "router.epsilon") {
    cfg.repair.router.epsilon = parse_double(key, value);
  } else if (key == "repair.delta") {
    cfg.repair.delta = parse_double(key, value);
  } else if (key == "repair.max_candidates") {
    cfg.repair.max_candidates = static_cast<int>(parse_int(key, value));
  } else if (key == "repair.max_rounds") {
    cfg.repair.max_rounds = static_cast<int>(parse_int(key, value));
  } else if (key == "repair.fallback_top_k") {
    cfg.repair.fallback_top_k = static_cast<int>(parse_int(key, value));
  } else if (key == "sim.services") {
    cfg.services = static_cast<int>(parse_int(key, value));
  } else if (key == "sim.replicas") {
    cfg.replicas = static_cast<int>(parse_int(key, value));
  } else if (key == "sim.nodes") {
    cfg.nodes = static_cast<int>(parse_int(key, value));
  } else if (key == "eval.executor") {
    cfg.executor = value;
  } else if (key == "eval.topologies") {
    cfg.topologies = static_cast<int>(parse_int(key, value));
  } else if (key == "eval.repeats") {
    cfg.repeats = static_cast<int>(parse_int(key, value));
  } else if (key == "eval.seed") {
    cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
  } else if (key == "eval.jobs") {
    cfg.jobs = static_cast<int>(parse_int(key, value));
  } else if (key == "eval.inject") {
    cfg.inject = parse_bool(key, value);
  } else if (key == "eval.fault_classes") {
    cfg.fault_classes = parse_list(value);
  } else if (key == "eval.reasoning_faults") {
    cfg.reasoning_faults = parse_list(value);
  } else {
    throw std::invalid_argument("unknown config key: " + key);
  }
}

EvalConfig config_from_text(const std::string& text) {
  EvalConfig cfg;
  for (const auto& [key, value] : parse_flat_config(text))
    apply_config_key(cfg, key, value);
  return cfg;
}

EvalConfig load_config(const std::filesystem::path& file) {
  std::ifstream f(file);
  if (!f) throw std::runtime_error("cannot read config " + file.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return config_from_text(ss.str());
}

std::map<std::string, double> load_weights(const std::filesystem::path& file) {
  const json j = load_json_file(file);
  if (!j.is_object())
    throw std::invalid_argument("weights file must be a flat JSON object "
                                "mapping check ids to weights");
  std::map<std::string, double> weights;
  for (const auto& [check, w] : j.items()) {
    if (!w.is_number())
      throw std::invalid_argument("weight for " + check + " is not a number");
    weights[check] = w.get<double>();
  }
  validate_weights(weights);
  return weights;
}

}  // namespace star
