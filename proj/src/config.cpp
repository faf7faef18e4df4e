#include "funnel/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace funnel {
namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::set<std::string>& allowed,
                  const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError(path + ": unknown key '" + item.key() + "'");
    }
  }
}

double get_number(const json& obj, const char* key, double fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(path + "." + key + ": expected a number");
  return v.get<double>();
}

int get_int(const json& obj, const char* key, int fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(path + "." + key + ": expected an integer");
  return v.get<int>();
}

std::uint64_t get_u64(const json& obj, const char* key, std::uint64_t fallback,
                      const std::string& path) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_unsigned() && !v.is_number_integer()) {
    throw ConfigError(path + "." + key + ": expected an unsigned integer");
  }
  return v.get<std::uint64_t>();
}

std::string get_string(const json& obj, const char* key, const std::string& fallback,
                       const std::string& path) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(path + "." + key + ": expected a string");
  return v.get<std::string>();
}

Eigen::VectorXd get_vector(const json& obj, const char* key, const Eigen::VectorXd& fallback,
                           int expected_size, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(path + "." + key + ": expected an array");
  if (expected_size >= 0 && static_cast<int>(v.size()) != expected_size) {
    throw ConfigError(path + "." + key + ": expected " + std::to_string(expected_size) +
                      " entries");
  }
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(path + "." + key + ": entries must be numbers");
    out(i) = v[i].get<double>();
  }
  return out;
}

ArmParameters parse_arm(const json& obj, const ArmParameters& fallback, const std::string& path) {
  require_keys(obj, {"m1", "m2", "l1", "l2", "lc1", "lc2", "I1", "I2", "b1", "b2", "g"}, path);
  ArmParameters p = fallback;
  p.m1 = get_number(obj, "m1", p.m1, path);
  p.m2 = get_number(obj, "m2", p.m2, path);
  p.l1 = get_number(obj, "l1", p.l1, path);
  p.l2 = get_number(obj, "l2", p.l2, path);
  p.lc1 = get_number(obj, "lc1", p.lc1, path);
  p.lc2 = get_number(obj, "lc2", p.lc2, path);
  p.I1 = get_number(obj, "I1", p.I1, path);
  p.I2 = get_number(obj, "I2", p.I2, path);
  p.b1 = get_number(obj, "b1", p.b1, path);
  p.b2 = get_number(obj, "b2", p.b2, path);
  p.g = get_number(obj, "g", p.g, path);
  return p;
}

Box parse_box(const json& obj, const Box& fallback, int dim, const std::string& path) {
  require_keys(obj, {"lower", "upper"}, path);
  Box b = fallback;
  b.lower = get_vector(obj, "lower", b.lower, dim, path);
  b.upper = get_vector(obj, "upper", b.upper, dim, path);
  for (int i = 0; i < b.lower.size(); ++i) {
    if (!(b.lower(i) < b.upper(i))) throw ConfigError(path + ": lower must be below upper");
  }
  return b;
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  state_box.lower = (Eigen::VectorXd(4) << -5.0, -8.0, -8.0, -7.0).finished();
  state_box.upper = (Eigen::VectorXd(4) << 9.0, 8.0, 8.0, 7.0).finished();
  input_box.lower = (Eigen::VectorXd(2) << -40.0, -40.0).finished();
  input_box.upper = (Eigen::VectorXd(2) << 40.0, 40.0).finished();
  nominal_start = (Eigen::VectorXd(4) << 0.28, -0.22, 0.0, 0.0).finished();
  nominal_goal = (Eigen::VectorXd(4) << 4.0, -1.0, 0.0, 0.0).finished();
  planner_q_weights = (Eigen::VectorXd(4) << 10.0, 10.0, 1.0, 1.0).finished();
  planner_r_weights = (Eigen::VectorXd(2) << 0.1, 0.1).finished();
  initial_state = (Eigen::VectorXd(4) << 2.28, 1.78, 1.0, -1.0).finished();
  k0_q_weights = (Eigen::VectorXd(4) << 10.0, 10.0, 1.0, 1.0).finished();
  k0_r_weights = (Eigen::VectorXd(2) << 0.1, 0.1).finished();
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  require_keys(root,
               {"schema_version", "seed", "horizon_steps", "segment_steps", "window_steps", "dt",
                "alpha", "mu", "excitation_bound", "plant", "twin", "state_box", "input_box",
                "nominal", "initial_state", "initial_controller", "constants", "estimation",
                "envelope_cap", "rank_tol", "solver", "output_dir"},
               "config");

  ExperimentConfig c;
  c.schema_version = get_int(root, "schema_version", c.schema_version, "config");
  if (c.schema_version != 1) {
    throw ConfigError("config.schema_version: unsupported version " +
                      std::to_string(c.schema_version));
  }
  c.seed = get_u64(root, "seed", c.seed, "config");
  c.horizon_steps = get_int(root, "horizon_steps", c.horizon_steps, "config");
  c.segment_steps = get_int(root, "segment_steps", c.segment_steps, "config");
  c.window_steps = get_int(root, "window_steps", c.window_steps, "config");
  c.dt = get_number(root, "dt", c.dt, "config");
  c.alpha = get_number(root, "alpha", c.alpha, "config");
  c.mu = get_number(root, "mu", c.mu, "config");
  c.excitation_bound = get_number(root, "excitation_bound", c.excitation_bound, "config");

  if (root.contains("plant")) c.plant = parse_arm(root.at("plant"), c.plant, "config.plant");
  if (root.contains("twin")) c.twin = parse_arm(root.at("twin"), c.twin, "config.twin");
  if (root.contains("state_box"))
    c.state_box = parse_box(root.at("state_box"), c.state_box, 4, "config.state_box");
  if (root.contains("input_box"))
    c.input_box = parse_box(root.at("input_box"), c.input_box, 2, "config.input_box");

  if (root.contains("nominal")) {
    const json& nom = root.at("nominal");
    require_keys(nom, {"start", "goal", "q_weights", "r_weights"}, "config.nominal");
    c.nominal_start = get_vector(nom, "start", c.nominal_start, 4, "config.nominal");
    c.nominal_goal = get_vector(nom, "goal", c.nominal_goal, 4, "config.nominal");
    c.planner_q_weights = get_vector(nom, "q_weights", c.planner_q_weights, 4, "config.nominal");
    c.planner_r_weights = get_vector(nom, "r_weights", c.planner_r_weights, 2, "config.nominal");
  }
  c.initial_state = get_vector(root, "initial_state", c.initial_state, 4, "config");
  if (root.contains("initial_controller")) {
    const json& ic = root.at("initial_controller");
    require_keys(ic, {"q_weights", "r_weights"}, "config.initial_controller");
    c.k0_q_weights = get_vector(ic, "q_weights", c.k0_q_weights, 4, "config.initial_controller");
    c.k0_r_weights = get_vector(ic, "r_weights", c.k0_r_weights, 2, "config.initial_controller");
  }

  if (root.contains("constants")) {
    const json& cc = root.at("constants");
    require_keys(cc, {"source", "inflation", "gamma", "lipschitz_jacobian", "remainder",
                      "variation_rate"},
                 "config.constants");
    const std::string source = get_string(cc, "source", "estimated", "config.constants");
    if (source == "estimated") {
      c.constants.source = ConstantsSource::kEstimated;
    } else if (source == "override") {
      c.constants.source = ConstantsSource::kOverride;
    } else {
      throw ConfigError("config.constants.source: must be 'estimated' or 'override'");
    }
    c.constants.inflation = get_number(cc, "inflation", c.constants.inflation, "config.constants");
    c.constants.gamma = get_number(cc, "gamma", c.constants.gamma, "config.constants");
    c.constants.lipschitz_jacobian =
        get_number(cc, "lipschitz_jacobian", c.constants.lipschitz_jacobian, "config.constants");
    c.constants.remainder =
        get_number(cc, "remainder", c.constants.remainder, "config.constants");
    c.constants.variation_rate =
        get_number(cc, "variation_rate", c.constants.variation_rate, "config.constants");
  }
  if (root.contains("estimation")) {
    const json& est = root.at("estimation");
    require_keys(est, {"probe_radius", "samples"}, "config.estimation");
    c.estimation.probe_radius =
        get_number(est, "probe_radius", c.estimation.probe_radius, "config.estimation");
    c.estimation.samples = get_int(est, "samples", c.estimation.samples, "config.estimation");
  }
  c.envelope_cap = get_number(root, "envelope_cap", c.envelope_cap, "config");
  c.rank_tol = get_number(root, "rank_tol", c.rank_tol, "config");
  if (root.contains("solver")) {
    const json& s = root.at("solver");
    require_keys(s, {"rel_gap", "abs_gap"}, "config.solver");
    c.solver_rel_gap = get_number(s, "rel_gap", c.solver_rel_gap, "config.solver");
    c.solver_abs_gap = get_number(s, "abs_gap", c.solver_abs_gap, "config.solver");
  }
  c.output_dir = get_string(root, "output_dir", c.output_dir, "config");

  // Structural validation.
  if (c.horizon_steps < 1) throw ConfigError("config.horizon_steps must be >= 1");
  if (!(c.dt > 0.0)) throw ConfigError("config.dt must be positive");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("config.alpha must lie in (0, 1)");
  if (c.mu < 1.0) throw ConfigError("config.mu must be >= 1");
  if (c.excitation_bound < 0.0) throw ConfigError("config.excitation_bound must be >= 0");
  if (c.window_steps < 1 || c.segment_steps < c.window_steps ||
      c.horizon_steps < c.segment_steps) {
    throw ConfigError("config: need horizon_steps >= segment_steps >= window_steps >= 1");
  }
  // Dwell condition (checked at load).
  if (c.mu > 1.0 &&
      static_cast<double>(c.segment_steps) <= -std::log(c.mu) / std::log(c.alpha)) {
    throw ConfigError("config: dwell condition T > -ln(mu)/ln(alpha) violated");
  }
  try {
    c.plant.validate();
    c.twin.validate();
  } catch (const NumericalError& e) {
    throw ConfigError(std::string("config: invalid arm parameters: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& c) {
  json root;
  root["schema_version"] = c.schema_version;
  root["seed"] = c.seed;
  root["horizon_steps"] = c.horizon_steps;
  root["segment_steps"] = c.segment_steps;
  root["window_steps"] = c.window_steps;
  root["dt"] = c.dt;
  root["alpha"] = c.alpha;
  root["mu"] = c.mu;
  root["excitation_bound"] = c.excitation_bound;
  auto arm_json = [](const ArmParameters& p) {
    json a;
    a["m1"] = p.m1;
    a["m2"] = p.m2;
    a["l1"] = p.l1;
    a["l2"] = p.l2;
    a["lc1"] = p.lc1;
    a["lc2"] = p.lc2;
    a["I1"] = p.I1;
    a["I2"] = p.I2;
    a["b1"] = p.b1;
    a["b2"] = p.b2;
    a["g"] = p.g;
    return a;
  };
  auto vec_json = [](const Eigen::VectorXd& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
  };
  root["plant"] = arm_json(c.plant);
  root["twin"] = arm_json(c.twin);
  root["state_box"] = {{"lower", vec_json(c.state_box.lower)},
                       {"upper", vec_json(c.state_box.upper)}};
  root["input_box"] = {{"lower", vec_json(c.input_box.lower)},
                       {"upper", vec_json(c.input_box.upper)}};
  root["nominal"] = {{"start", vec_json(c.nominal_start)},
                     {"goal", vec_json(c.nominal_goal)},
                     {"q_weights", vec_json(c.planner_q_weights)},
                     {"r_weights", vec_json(c.planner_r_weights)}};
  root["initial_state"] = vec_json(c.initial_state);
  root["initial_controller"] = {{"q_weights", vec_json(c.k0_q_weights)},
                                {"r_weights", vec_json(c.k0_r_weights)}};
  root["constants"] = {
      {"source", c.constants.source == ConstantsSource::kEstimated ? "estimated" : "override"},
      {"inflation", c.constants.inflation},
      {"gamma", c.constants.gamma},
      {"lipschitz_jacobian", c.constants.lipschitz_jacobian},
      {"remainder", c.constants.remainder},
      {"variation_rate", c.constants.variation_rate}};
  root["estimation"] = {{"probe_radius", c.estimation.probe_radius},
                        {"samples", c.estimation.samples}};
  root["envelope_cap"] = c.envelope_cap;
  root["rank_tol"] = c.rank_tol;
  root["solver"] = {{"rel_gap", c.solver_rel_gap}, {"abs_gap", c.solver_abs_gap}};
  root["output_dir"] = c.output_dir;
  return root.dump(2) + "\n";
}

void apply_paper_constants(ExperimentConfig* config) {
  config->horizon_steps = 600;
  config->segment_steps = 100;
  config->window_steps = 60;
  config->dt = 0.01;
  config->alpha = 0.98;
  config->mu = 1.02;
  config->excitation_bound = 0.15;
  config->constants.source = ConstantsSource::kOverride;
  config->constants.inflation = 1.0;
  config->constants.gamma = 0.034;
  config->constants.lipschitz_jacobian = 16.94;
  config->constants.remainder = 0.074;
  config->constants.variation_rate = 3.64;
}

}  // namespace funnel
