#include "ski/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "ski/errors.hpp"

namespace ski {

using nlohmann::json;
using scenarios::Method;
using scenarios::ScenarioKind;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const std::string& key, T& out, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + (where.empty() ? key : where + "." + key) +
                      "' has the wrong type");
  }
}

void read_optional(const json& obj, const std::string& key, std::optional<double>& out,
                   const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  if (it->is_null()) {
    out.reset();
    return;
  }
  double v = 0.0;
  read(obj, key, v, where);
  out = v;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string gradient_name(ard::GradientForm g) {
  return g == ard::GradientForm::Exact ? "exact" : "as-printed";
}

ard::GradientForm parse_gradient(const std::string& name) {
  if (name == "exact") return ard::GradientForm::Exact;
  if (name == "as-printed") return ard::GradientForm::AsPrinted;
  throw ConfigError("ard.gradient must be 'exact' or 'as-printed'");
}

void validate(const RunConfig& c) {
  const auto& s = c.scenario;
  require(s.duration_s > 0.0, "duration_s must be positive");
  require(s.rate_hz > 0.0, "rate_hz must be positive");
  require(s.duration_s * s.rate_hz >= 3.0, "duration_s * rate_hz must cover at least 3 samples");
  require(!s.meas_noise_std || *s.meas_noise_std >= 0.0, "meas_noise_std must be >= 0");
  require(s.excitation_std >= 0.0, "excitation_std must be >= 0");
  require(s.pid.clamp > 0.0, "pid.clamp must be positive");
  require(s.pid.derivative_tau >= 0.0, "pid.derivative_tau must be >= 0");
  require(s.wingrock.hold_s > 0.0, "wingrock.hold_s must be positive");
  require(s.delay.window >= 1, "delay.window must be >= 1");
  require(s.delay.true_delay_steps >= 0 && s.delay.true_delay_steps < s.delay.window,
          "delay.true_delay_steps must lie in [0, window)");
  require(s.quad.pwm_min < s.quad.pwm_max, "quad.pwm_min must be below quad.pwm_max");
  const auto& f = c.identification.filter;
  require(f.alpha > 0.0 && f.alpha <= 1.0, "filter.alpha must lie in (0, 1]");
  require(f.q_scale >= 0.0, "filter.q_scale must be >= 0");
  require(!f.r_std || *f.r_std > 0.0, "filter.r_std must be positive");
  require(f.p0 > 0.0 && f.s0 > 0.0, "filter.p0 and filter.s0 must be positive");
  const auto& a = c.identification.ard;
  require(a.eta_hp >= 0.0, "ard.eta_hp must be >= 0");
  require(a.n_hp >= 0, "ard.n_hp must be >= 0");
  require(a.variance_floor > 0.0, "ard.variance_floor must be positive");
  require(a.report_threshold >= 0.0 && a.report_threshold <= 1.0,
          "ard.report_threshold must lie in [0, 1]");
  require(c.identification.sindy.lambda >= 0.0, "sindy.lambda must be >= 0");
  require(!c.seeds.empty(), "seeds must not be empty");
  require(!c.methods.empty(), "methods must not be empty");
  require(c.workers >= 1, "workers must be >= 1");
}

}  // namespace

RunConfig default_config(ScenarioKind kind) {
  RunConfig c;
  c.scenario.kind = kind;
  // Roll-loop gains that hold the square wave within the actuator clamp.
  scenarios::PidController roll;
  roll.kp = 4.0;
  roll.ki = 3.0;
  roll.kd = 1.0;
  roll.derivative_tau = 0.1;
  switch (kind) {
    case ScenarioKind::WingRock:
      c.scenario.duration_s = 15.0;
      c.scenario.pid = roll;
      c.identification.ard.eta_hp = 0.1;
      break;
    case ScenarioKind::Delay:
      c.scenario.duration_s = 15.0;
      c.scenario.pid = roll;
      c.scenario.excitation_std = 5.0;
      c.scenario.matched_integrator = true;
      c.identification.ard.eta_hp = 0.1;
      break;
    case ScenarioKind::Quadrotor:
      c.scenario.duration_s = 60.0;
      c.scenario.excitation_std = 20.0;
      break;
    case ScenarioKind::QuadZ:
      c.scenario.duration_s = 30.0;
      c.scenario.excitation_std = 20.0;
      break;
  }
  return c;
}

RunConfig config_from_json(const json& j) {
  reject_unknown(j,
                 {"scenario", "method", "methods", "seed", "seeds", "duration_s", "rate_hz",
                  "meas_noise_std", "excitation_std", "matched_integrator", "pid", "filter", "ard",
                  "sindy", "wingrock", "delay", "quad", "output_dir", "trace", "workers"},
                 "");
  if (!j.contains("scenario")) throw ConfigError("missing required key 'scenario'");
  std::string kind_name;
  read(j, "scenario", kind_name, "");
  RunConfig c = default_config(scenarios::parse_scenario(kind_name));
  auto& s = c.scenario;

  if (j.contains("method")) {
    std::string m;
    read(j, "method", m, "");
    c.method = scenarios::parse_method(m);
  }
  if (j.contains("methods")) {
    std::vector<std::string> names;
    read(j, "methods", names, "");
    c.methods.clear();
    for (const auto& n : names) c.methods.push_back(scenarios::parse_method(n));
  }
  if (j.contains("seed") && j.contains("seeds")) {
    throw ConfigError("give either 'seed' or 'seeds', not both");
  }
  if (j.contains("seed")) {
    std::uint64_t seed = 0;
    read(j, "seed", seed, "");
    c.seeds = {seed};
  }
  read(j, "seeds", c.seeds, "");
  read(j, "duration_s", s.duration_s, "");
  read(j, "rate_hz", s.rate_hz, "");
  read_optional(j, "meas_noise_std", s.meas_noise_std, "");
  read(j, "excitation_std", s.excitation_std, "");
  read(j, "matched_integrator", s.matched_integrator, "");
  read(j, "output_dir", c.output_dir, "");
  read(j, "workers", c.workers, "");

  if (auto it = j.find("pid"); it != j.end()) {
    reject_unknown(*it, {"kp", "ki", "kd", "clamp", "derivative_tau"}, "pid");
    read(*it, "kp", s.pid.kp, "pid");
    read(*it, "ki", s.pid.ki, "pid");
    read(*it, "kd", s.pid.kd, "pid");
    read(*it, "clamp", s.pid.clamp, "pid");
    read(*it, "derivative_tau", s.pid.derivative_tau, "pid");
  }
  if (auto it = j.find("filter"); it != j.end()) {
    auto& f = c.identification.filter;
    reject_unknown(*it, {"alpha", "beta", "q_scale", "r_std", "p0", "s0"}, "filter");
    read(*it, "alpha", f.alpha, "filter");
    read(*it, "beta", f.beta, "filter");
    read(*it, "q_scale", f.q_scale, "filter");
    read_optional(*it, "r_std", f.r_std, "filter");
    read(*it, "p0", f.p0, "filter");
    read(*it, "s0", f.s0, "filter");
  }
  if (auto it = j.find("ard"); it != j.end()) {
    auto& a = c.identification.ard;
    reject_unknown(*it, {"eta_hp", "n_hp", "variance_floor", "report_threshold", "gradient"},
                   "ard");
    read(*it, "eta_hp", a.eta_hp, "ard");
    read(*it, "n_hp", a.n_hp, "ard");
    read(*it, "variance_floor", a.variance_floor, "ard");
    read(*it, "report_threshold", a.report_threshold, "ard");
    if (it->contains("gradient")) {
      std::string g;
      read(*it, "gradient", g, "ard");
      a.gradient = parse_gradient(g);
    }
  }
  if (auto it = j.find("sindy"); it != j.end()) {
    reject_unknown(*it, {"lambda"}, "sindy");
    read(*it, "lambda", c.identification.sindy.lambda, "sindy");
  }
  if (auto it = j.find("wingrock"); it != j.end()) {
    reject_unknown(*it, {"l_gain", "w", "meas_noise_std", "reference_levels", "hold_s"},
                   "wingrock");
    read(*it, "l_gain", s.wingrock.l_gain, "wingrock");
    read(*it, "w", s.wingrock.w, "wingrock");
    read(*it, "meas_noise_std", s.wingrock.meas_noise_std, "wingrock");
    read(*it, "reference_levels", s.wingrock.reference_levels, "wingrock");
    read(*it, "hold_s", s.wingrock.hold_s, "wingrock");
  }
  if (auto it = j.find("delay"); it != j.end()) {
    reject_unknown(*it, {"window", "true_delay_steps", "gain"}, "delay");
    read(*it, "window", s.delay.window, "delay");
    read(*it, "true_delay_steps", s.delay.true_delay_steps, "delay");
    read(*it, "gain", s.delay.gain, "delay");
  }
  if (auto it = j.find("quad"); it != j.end()) {
    auto& q = s.quad;
    reject_unknown(*it,
                   {"gravity", "pwm_hover", "pwm_min", "pwm_max", "thrust_per_pwm", "drag_linear",
                    "drag_quadratic", "meas_noise_std", "radius0", "radius_rate", "period",
                    "climb_rate"},
                   "quad");
    read(*it, "gravity", q.gravity, "quad");
    read(*it, "pwm_hover", q.pwm_hover, "quad");
    read(*it, "pwm_min", q.pwm_min, "quad");
    read(*it, "pwm_max", q.pwm_max, "quad");
    read(*it, "thrust_per_pwm", q.thrust_per_pwm, "quad");
    read(*it, "drag_linear", q.drag_linear, "quad");
    read(*it, "drag_quadratic", q.drag_quadratic, "quad");
    read(*it, "meas_noise_std", q.meas_noise_std, "quad");
    read(*it, "radius0", q.radius0, "quad");
    read(*it, "radius_rate", q.radius_rate, "quad");
    read(*it, "period", q.period, "quad");
    read(*it, "climb_rate", q.climb_rate, "quad");
  }
  if (auto it = j.find("trace"); it != j.end()) {
    reject_unknown(*it, {"include_step_ms"}, "trace");
    read(*it, "include_step_ms", c.trace_step_ms, "trace");
  }
  validate(c);
  return c;
}

json config_to_json(const RunConfig& c) {
  const auto& s = c.scenario;
  const auto& f = c.identification.filter;
  const auto& a = c.identification.ard;
  const auto& q = s.quad;
  json methods = json::array();
  for (Method m : c.methods) methods.push_back(scenarios::to_string(m));
  return json{
      {"scenario", scenarios::to_string(s.kind)},
      {"method", scenarios::to_string(c.method)},
      {"methods", methods},
      {"seeds", c.seeds},
      {"duration_s", s.duration_s},
      {"rate_hz", s.rate_hz},
      {"meas_noise_std", optional_json(s.meas_noise_std)},
      {"excitation_std", s.excitation_std},
      {"matched_integrator", s.matched_integrator},
      {"pid", {{"kp", s.pid.kp}, {"ki", s.pid.ki}, {"kd", s.pid.kd}, {"clamp", s.pid.clamp},
              {"derivative_tau", s.pid.derivative_tau}}},
      {"filter",
       {{"alpha", f.alpha},
        {"beta", f.beta},
        {"q_scale", f.q_scale},
        {"r_std", optional_json(f.r_std)},
        {"p0", f.p0},
        {"s0", f.s0}}},
      {"ard",
       {{"eta_hp", a.eta_hp},
        {"n_hp", a.n_hp},
        {"variance_floor", a.variance_floor},
        {"report_threshold", a.report_threshold},
        {"gradient", gradient_name(a.gradient)}}},
      {"sindy", {{"lambda", c.identification.sindy.lambda}}},
      {"wingrock",
       {{"l_gain", s.wingrock.l_gain},
        {"w", s.wingrock.w},
        {"meas_noise_std", s.wingrock.meas_noise_std},
        {"reference_levels", s.wingrock.reference_levels},
        {"hold_s", s.wingrock.hold_s}}},
      {"delay",
       {{"window", s.delay.window},
        {"true_delay_steps", s.delay.true_delay_steps},
        {"gain", s.delay.gain}}},
      {"quad",
       {{"gravity", q.gravity},
        {"pwm_hover", q.pwm_hover},
        {"pwm_min", q.pwm_min},
        {"pwm_max", q.pwm_max},
        {"thrust_per_pwm", q.thrust_per_pwm},
        {"drag_linear", q.drag_linear},
        {"drag_quadratic", q.drag_quadratic},
        {"meas_noise_std", q.meas_noise_std},
        {"radius0", q.radius0},
        {"radius_rate", q.radius_rate},
        {"period", q.period},
        {"climb_rate", q.climb_rate}}},
      {"output_dir", c.output_dir},
      {"trace", {{"include_step_ms", c.trace_step_ms}}},
      {"workers", c.workers},
  };
}

json load_config_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  return config_from_json(load_config_json(path));
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' must look like key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' is malformed");
    if (!node->is_object()) {
      throw ConfigError("override key '" + key + "' descends into a non-object value");
    }
    if (dot == std::string::npos) {
      // A command-line seed choice replaces whichever seed key the file used.
      if (node == &j && (part == "seed" || part == "seeds")) {
        node->erase(part == "seed" ? "seeds" : "seed");
      }
      (*node)[part] = value;
      break;
    }
    if (!node->contains(part)) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  return config_to_json(a) == config_to_json(b);
}

std::filesystem::path resolve_output_dir(const RunConfig& config, const std::string& explicit_dir) {
  if (!explicit_dir.empty()) return explicit_dir;
  if (!config.output_dir.empty()) return config.output_dir;
  if (const char* env = std::getenv("SKI_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return "out";
}

}  // namespace ski
