#include "ski/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "ski/errors.hpp"

namespace ski::scenarios {

namespace {

constexpr double kDivergenceLimit = 1e4;

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

Index sample_count(const ScenarioSettings& s) {
  if (!(s.rate_hz > 0.0) || !(s.duration_s > 0.0)) {
    throw ConfigError("scenario: rate_hz and duration_s must be positive");
  }
  return static_cast<Index>(std::llround(s.duration_s * s.rate_hz)) + 1;
}

Eigen::VectorXd rk4_step(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& rhs,
                         const Eigen::VectorXd& x, double h, Integrator integrator) {
  if (integrator == Integrator::Euler) return x + h * rhs(x);
  const Eigen::VectorXd k1 = rhs(x);
  const Eigen::VectorXd k2 = rhs(x + 0.5 * h * k1);
  const Eigen::VectorXd k3 = rhs(x + 0.5 * h * k2);
  const Eigen::VectorXd k4 = rhs(x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double wingrock_uncertainty(const WingRockTruth& truth, double theta, double p) {
  const auto& w = truth.w;
  return w[0] + w[1] * theta + w[2] * p + w[3] * std::abs(theta) * p + w[4] * std::abs(p) * p +
         w[5] * theta * theta * theta;
}

double roll_reference(const WingRockTruth& truth, double t) {
  if (truth.reference_levels.empty()) return 0.0;
  const auto slot = static_cast<std::size_t>(std::floor(t / truth.hold_s));
  return truth.reference_levels[slot % truth.reference_levels.size()];
}

// Roll plant with the control applied after `delay` steps. u rows hold the
// input history [dd_k, dd_{k-1}, ..., dd_{k-window+1}].
Trajectory simulate_roll(const ScenarioSettings& s, std::uint64_t seed, int window, int delay,
                         double gain) {
  if (window < 1 || delay < 0 || delay >= window) {
    throw ConfigError("delay scenario: need window >= 1 and 0 <= delay < window");
  }
  const Index n = sample_count(s);
  const double dt = 1.0 / s.rate_hz;
  const double noise_std = s.meas_noise_std.value_or(s.wingrock.meas_noise_std);
  auto meas_rng = make_rng(seed, 1);
  auto dither_rng = make_rng(seed, 2);
  std::normal_distribution<double> unit(0.0, 1.0);

  Trajectory traj;
  traj.t.resize(n);
  traj.x.resize(n, 2);
  traj.u.resize(n, window);
  traj.y.resize(n, 1);
  traj.reference.resize(n);

  PidController pid = s.pid;
  pid.reset();
  Eigen::VectorXd history = Eigen::VectorXd::Zero(window);
  Eigen::Vector2d x = Eigen::Vector2d::Zero();
  for (Index k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (!x.allFinite() || std::abs(x(0)) > kDivergenceLimit) {
      throw Diverged("roll plant diverged at t=" + std::to_string(t));
    }
    const double y = x(0) + noise_std * unit(meas_rng);
    const double ref = roll_reference(s.wingrock, t);
    double cmd = pid.update(ref, y, dt);
    if (s.excitation_std > 0.0) {
      cmd = std::clamp(cmd + s.excitation_std * unit(dither_rng), -pid.clamp, pid.clamp);
    }
    for (Index j = window - 1; j > 0; --j) history(j) = history(j - 1);
    history(0) = cmd;

    traj.t(k) = t;
    traj.x.row(k) = x.transpose();
    traj.y(k, 0) = y;
    traj.u.row(k) = history.transpose();
    traj.reference(k) = ref;

    const double applied = history(delay);
    auto rhs = [&](const Eigen::VectorXd& st) {
      Eigen::VectorXd d(2);
      d << st(1), gain * applied + wingrock_uncertainty(s.wingrock, st(0), st(1));
      return d;
    };
    x = rk4_step(rhs, x, dt, s.plant_integrator);
  }
  return traj;
}

Eigen::Vector3d thrust_axis(double qw, double qx, double qy, double qz) {
  return {2.0 * (qx * qz + qw * qy), 2.0 * (qy * qz - qw * qx), 1.0 - 2.0 * (qx * qx + qy * qy)};
}

// Zero-yaw attitude whose body z axis is `axis` (unit vector).
Eigen::Vector4d attitude_from_axis(const Eigen::Vector3d& axis) {
  Eigen::Vector4d q(1.0 + axis.z(), -axis.y(), axis.x(), 0.0);
  return q / q.norm();
}

Eigen::VectorXd lift_observation(const Eigen::VectorXd& y0, Index state_dim) {
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(state_dim);
  mu.head(y0.size()) = y0;
  return mu;
}

}  // namespace

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::WingRock: return "wingrock";
    case ScenarioKind::Delay: return "delay";
    case ScenarioKind::Quadrotor: return "quadrotor";
    case ScenarioKind::QuadZ: return "quad-z";
  }
  return "unknown";
}

std::string to_string(Method method) {
  switch (method) {
    case Method::Ski: return "ski";
    case Method::Ukf: return "ukf";
    case Method::Ekf: return "ekf";
    case Method::Sindy: return "sindy";
  }
  return "unknown";
}

ScenarioKind parse_scenario(const std::string& name) {
  if (name == "wingrock") return ScenarioKind::WingRock;
  if (name == "delay") return ScenarioKind::Delay;
  if (name == "quadrotor") return ScenarioKind::Quadrotor;
  if (name == "quad-z") return ScenarioKind::QuadZ;
  throw ConfigError("unknown scenario '" + name + "' (expected wingrock|delay|quadrotor|quad-z)");
}

Method parse_method(const std::string& name) {
  if (name == "ski") return Method::Ski;
  if (name == "ukf") return Method::Ukf;
  if (name == "ekf") return Method::Ekf;
  if (name == "sindy") return Method::Sindy;
  throw ConfigError("unknown method '" + name + "' (expected ski|ukf|ekf|sindy)");
}

double PidController::update(double setpoint, double measured, double dt) {
  const double error = setpoint - measured;
  const double raw_derivative = primed_ ? -(measured - previous_) / dt : 0.0;
  const double blend = derivative_tau > 0.0 ? dt / (derivative_tau + dt) : 1.0;
  derivative_ += blend * (raw_derivative - derivative_);
  const double derivative = derivative_;
  previous_ = measured;
  primed_ = true;
  const double trial_integral = integral_ + error * dt;
  const double raw = kp * error + ki * trial_integral + kd * derivative;
  const double out = std::clamp(raw, -clamp, clamp);
  // Conditional integration: freeze the integrator while saturated.
  if (out == raw) integral_ = trial_integral;
  return out;
}

void PidController::reset() {
  integral_ = 0.0;
  previous_ = 0.0;
  derivative_ = 0.0;
  primed_ = false;
}

Trajectory simulate_wingrock(const ScenarioSettings& settings, std::uint64_t seed) {
  return simulate_roll(settings, seed, 1, 0, settings.wingrock.l_gain);
}

Trajectory simulate_delay_scenario(const ScenarioSettings& settings, std::uint64_t seed) {
  return simulate_roll(settings, seed, settings.delay.window, settings.delay.true_delay_steps,
                       settings.delay.gain);
}

Trajectory simulate_quadrotor(const ScenarioSettings& s, std::uint64_t seed, double* pwm_scale) {
  const QuadTruth& q = s.quad;
  const Index n = sample_count(s);
  const double dt = 1.0 / s.rate_hz;
  const double noise_std = s.meas_noise_std.value_or(q.meas_noise_std);
  auto meas_rng = make_rng(seed, 1);
  auto dither_rng = make_rng(seed, 2);
  std::normal_distribution<double> unit(0.0, 1.0);
  const double omega = 2.0 * M_PI / q.period;
  const Eigen::Vector3d gravity(0.0, 0.0, -q.gravity);
  constexpr double kp = 4.0;
  constexpr double kd = 3.0;

  auto reference = [&](double t, Eigen::Vector3d& p, Eigen::Vector3d& v, Eigen::Vector3d& a) {
    const double r = q.radius0 + q.radius_rate * t;
    const double c = std::cos(omega * t);
    const double sn = std::sin(omega * t);
    p << r * c, r * sn, 1.0 + q.climb_rate * t;
    v << q.radius_rate * c - r * omega * sn, q.radius_rate * sn + r * omega * c, q.climb_rate;
    a << -2.0 * q.radius_rate * omega * sn - r * omega * omega * c,
        2.0 * q.radius_rate * omega * c - r * omega * omega * sn, 0.0;
  };
  auto drag = [&](const Eigen::Vector3d& v) -> Eigen::Vector3d {
    return -q.drag_linear * v - q.drag_quadratic * v.norm() * v;
  };

  Trajectory traj;
  traj.t.resize(n);
  traj.x.resize(n, 6);
  traj.u.resize(n, 5);
  traj.y.resize(n, 3);
  traj.reference.resize(n);
  Eigen::VectorXd raw_pwm(n);

  Eigen::Vector3d p_ref, v_ref, a_ref;
  reference(0.0, p_ref, v_ref, a_ref);
  Eigen::VectorXd x(6);
  x << p_ref, v_ref;
  for (Index k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kDivergenceLimit) {
      throw Diverged("quadrotor diverged at t=" + std::to_string(t));
    }
    reference(t, p_ref, v_ref, a_ref);
    const Eigen::Vector3d pos = x.head<3>();
    const Eigen::Vector3d vel = x.tail<3>();
    const Eigen::Vector3d a_cmd = a_ref + kp * (p_ref - pos) + kd * (v_ref - vel);
    const Eigen::Vector3d thrust = a_cmd - gravity - drag(vel);
    const double magnitude = std::max(thrust.norm(), 1e-3);
    const Eigen::Vector3d axis = thrust / magnitude;
    const Eigen::Vector4d att = attitude_from_axis(axis);
    double pwm = q.pwm_min + magnitude / q.thrust_per_pwm;
    pwm += s.excitation_std * unit(dither_rng);
    pwm = std::clamp(pwm, q.pwm_min, q.pwm_max);
    const double accel = q.thrust_per_pwm * (pwm - q.pwm_min);

    traj.t(k) = t;
    traj.x.row(k) = x.transpose();
    traj.y.row(k) = (pos + noise_std * Eigen::Vector3d(unit(meas_rng), unit(meas_rng),
                                                       unit(meas_rng)))
                        .transpose();
    raw_pwm(k) = pwm;
    traj.u(k, 1) = att(0);
    traj.u(k, 2) = att(1);
    traj.u(k, 3) = att(2);
    traj.u(k, 4) = att(3);
    traj.reference(k) = p_ref.z();

    const Eigen::Vector3d body_axis = thrust_axis(att(0), att(1), att(2), att(3));
    auto rhs = [&](const Eigen::VectorXd& st) {
      Eigen::VectorXd d(6);
      const Eigen::Vector3d v = st.tail<3>();
      d << v, body_axis * accel + drag(v) + gravity;
      return d;
    };
    x = rk4_step(rhs, x, dt, s.plant_integrator);
  }
  const Eigen::VectorXd centered = raw_pwm.array() - q.pwm_hover;
  const double mean = centered.mean();
  double scale = std::sqrt((centered.array() - mean).square().mean());
  if (!(scale > 0.0)) scale = 1.0;
  traj.u.col(0) = centered / scale;
  if (pwm_scale != nullptr) *pwm_scale = scale;
  return traj;
}

Trajectory simulate_quad_z(const ScenarioSettings& s, std::uint64_t seed, double* pwm_scale) {
  const QuadTruth& q = s.quad;
  const Index n = sample_count(s);
  const double dt = 1.0 / s.rate_hz;
  const double noise_std = s.meas_noise_std.value_or(q.meas_noise_std);
  auto meas_rng = make_rng(seed, 1);
  auto dither_rng = make_rng(seed, 2);
  std::normal_distribution<double> unit(0.0, 1.0);
  // Vertical sinusoid about 1 m, amplitude 0.5 m, period 4 s.
  const double omega = 2.0 * M_PI / 4.0;
  constexpr double kp = 6.0;
  constexpr double kd = 4.0;

  Trajectory traj;
  traj.t.resize(n);
  traj.x.resize(n, 2);
  traj.u.resize(n, 1);
  traj.y.resize(n, 1);
  traj.reference.resize(n);
  Eigen::VectorXd raw_pwm(n);
  Eigen::VectorXd x(2);
  x << 1.0, 0.5 * omega;
  for (Index k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kDivergenceLimit) {
      throw Diverged("quad-z diverged at t=" + std::to_string(t));
    }
    const double z_ref = 1.0 + 0.5 * std::sin(omega * t);
    const double v_ref = 0.5 * omega * std::cos(omega * t);
    const double a_ref = -0.5 * omega * omega * std::sin(omega * t);
    const double a_cmd = a_ref + kp * (z_ref - x(0)) + kd * (v_ref - x(1));
    double pwm = q.pwm_min + (a_cmd + q.gravity) / q.thrust_per_pwm +
                 s.excitation_std * unit(dither_rng);
    pwm = std::clamp(pwm, q.pwm_min, q.pwm_max);
    const double accel = q.thrust_per_pwm * (pwm - q.pwm_min);

    traj.t(k) = t;
    traj.x.row(k) = x.transpose();
    traj.y(k, 0) = x(0) + noise_std * unit(meas_rng);
    raw_pwm(k) = pwm;
    traj.reference(k) = z_ref;

    auto rhs = [&](const Eigen::VectorXd& st) {
      Eigen::VectorXd d(2);
      d << st(1), accel - q.gravity;
      return d;
    };
    x = rk4_step(rhs, x, dt, s.plant_integrator);
  }
  const Eigen::VectorXd centered = raw_pwm.array() - q.pwm_hover;
  const double mean = centered.mean();
  double scale = std::sqrt((centered.array() - mean).square().mean());
  if (!(scale > 0.0)) scale = 1.0;
  traj.u.col(0) = centered / scale;
  if (pwm_scale != nullptr) *pwm_scale = scale;
  return traj;
}

BasisLibrary wingrock_basis() {
  return BasisLibrary({"1", "theta", "p", "|theta|p", "|p|p", "theta^3"}, 1,
                      [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
                        const double th = x(0);
                        const double p = x(1);
                        Eigen::MatrixXd phi(1, 6);
                        phi << 1.0, th, p, std::abs(th) * p, std::abs(p) * p, th * th * th;
                        return phi;
                      });
}

BasisLibrary delay_basis(int window) {
  std::vector<std::string> names;
  for (int j = 0; j < window; ++j) names.push_back("delay" + std::to_string(j));
  return BasisLibrary(std::move(names), 1,
                      [window](const Eigen::VectorXd&, const Eigen::VectorXd& u) {
                        return Eigen::MatrixXd(u.head(window).transpose());
                      });
}

BasisLibrary quadrotor_basis() {
  return BasisLibrary({"1", "pwm", "pwm^2", "pwm^3", "pwm^4", "pwm^5", "|v|", "|v|^2"}, 3,
                      [](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
                        const Eigen::Vector3d axis = thrust_axis(u(1), u(2), u(3), u(4));
                        const Eigen::Vector3d v = x.tail<3>();
                        Eigen::MatrixXd phi(3, 8);
                        double power = 1.0;
                        for (int i = 0; i < 6; ++i) {
                          phi.col(i) = axis * power;
                          power *= u(0);
                        }
                        phi.col(6) = -v;
                        phi.col(7) = -v.norm() * v;
                        return phi;
                      });
}

BasisLibrary quad_z_basis() {
  return BasisLibrary({"1", "pwm", "pwm^2", "pwm^3", "pwm^4", "pwm^5"}, 1,
                      [](const Eigen::VectorXd&, const Eigen::VectorXd& u) {
                        Eigen::MatrixXd phi(1, 6);
                        double power = 1.0;
                        for (int i = 0; i < 6; ++i) {
                          phi(0, i) = power;
                          power *= u(0);
                        }
                        return phi;
                      });
}

ParametricModel identification_model(const ScenarioSettings& s, const FilterSettings& filter) {
  ParametricModel::Spec spec;
  spec.dt = 1.0 / s.rate_hz;
  spec.integrator = s.matched_integrator ? s.plant_integrator : Integrator::Euler;
  double sensor_std = 0.0;
  switch (s.kind) {
    case ScenarioKind::WingRock: {
      const double gain = s.wingrock.l_gain;
      spec.dims = Dims{2, 1, 1, 6, 1};
      spec.basis = wingrock_basis();
      spec.dynamics = [gain](const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& f) {
        Eigen::VectorXd d(2);
        d << x(1), gain * u(0) + f(0);
        return d;
      };
      spec.observe = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(x.head(1)); };
      sensor_std = s.meas_noise_std.value_or(s.wingrock.meas_noise_std);
      break;
    }
    case ScenarioKind::Delay: {
      const WingRockTruth truth = s.wingrock;
      const int window = s.delay.window;
      spec.dims = Dims{2, window, 1, window, 1};
      spec.basis = delay_basis(window);
      spec.dynamics = [truth](const Eigen::VectorXd& x, const Eigen::VectorXd&,
                              const Eigen::VectorXd& f) {
        Eigen::VectorXd d(2);
        d << x(1), wingrock_uncertainty(truth, x(0), x(1)) + f(0);
        return d;
      };
      spec.observe = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(x.head(1)); };
      sensor_std = s.meas_noise_std.value_or(s.wingrock.meas_noise_std);
      break;
    }
    case ScenarioKind::Quadrotor: {
      const Eigen::Vector3d gravity(0.0, 0.0, -s.quad.gravity);
      spec.dims = Dims{6, 5, 3, 8, 3};
      spec.basis = quadrotor_basis();
      spec.dynamics = [gravity](const Eigen::VectorXd& x, const Eigen::VectorXd&,
                                const Eigen::VectorXd& f) {
        Eigen::VectorXd d(6);
        d << x.tail(3), f + gravity;
        return d;
      };
      spec.observe = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(x.head(3)); };
      sensor_std = s.meas_noise_std.value_or(s.quad.meas_noise_std);
      break;
    }
    case ScenarioKind::QuadZ: {
      const double g = s.quad.gravity;
      spec.dims = Dims{2, 1, 1, 6, 1};
      spec.basis = quad_z_basis();
      spec.dynamics = [g](const Eigen::VectorXd& x, const Eigen::VectorXd&,
                          const Eigen::VectorXd& f) {
        Eigen::VectorXd d(2);
        d << x(1), f(0) - g;
        return d;
      };
      spec.observe = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(x.head(1)); };
      sensor_std = s.meas_noise_std.value_or(s.quad.meas_noise_std);
      break;
    }
  }
  const double r_std = filter.r_std.value_or(sensor_std);
  spec.q = filter.q_scale * Eigen::MatrixXd::Identity(spec.dims.state, spec.dims.state);
  spec.r = r_std * r_std * Eigen::MatrixXd::Identity(spec.dims.obs, spec.dims.obs);
  return ParametricModel(std::move(spec));
}

Prepared prepare(const ScenarioSettings& s, const FilterSettings& filter, std::uint64_t seed) {
  Prepared out;
  out.kind = s.kind;
  out.model.emplace(identification_model(s, filter));
  const Dims& d = out.model->dims();
  switch (s.kind) {
    case ScenarioKind::WingRock: {
      out.traj = simulate_wingrock(s, seed);
      out.true_weights = Eigen::Map<const Eigen::VectorXd>(s.wingrock.w.data(), 6);
      out.y_names = {"theta"};
      out.u_names = {"dd"};
      break;
    }
    case ScenarioKind::Delay: {
      out.traj = simulate_delay_scenario(s, seed);
      out.true_weights = Eigen::VectorXd::Zero(s.delay.window);
      out.true_weights(s.delay.true_delay_steps) = s.delay.gain;
      out.active_gain = s.delay.true_delay_steps;
      out.y_names = {"theta"};
      for (int j = 0; j < s.delay.window; ++j) out.u_names.push_back("dd_lag" + std::to_string(j));
      break;
    }
    case ScenarioKind::Quadrotor: {
      double scale = 1.0;
      out.traj = simulate_quadrotor(s, seed, &scale);
      const QuadTruth& q = s.quad;
      out.true_weights = Eigen::VectorXd::Zero(8);
      out.true_weights(0) = q.thrust_per_pwm * (q.pwm_hover - q.pwm_min);
      out.true_weights(1) = q.thrust_per_pwm * scale;
      out.true_weights(6) = q.drag_linear;
      out.true_weights(7) = q.drag_quadratic;
      out.y_names = {"px", "py", "pz"};
      out.u_names = {"pwm", "qw", "qx", "qy", "qz"};
      break;
    }
    case ScenarioKind::QuadZ: {
      double scale = 1.0;
      out.traj = simulate_quad_z(s, seed, &scale);
      const QuadTruth& q = s.quad;
      out.true_weights = Eigen::VectorXd::Zero(6);
      out.true_weights(0) = q.thrust_per_pwm * (q.pwm_hover - q.pwm_min);
      out.true_weights(1) = q.thrust_per_pwm * scale;
      out.y_names = {"z"};
      out.u_names = {"pwm"};
      break;
    }
  }
  out.labels = out.model->basis().names();
  out.mu0 = lift_observation(out.traj.y.row(0).transpose(), d.state);
  out.p0 = filter.p0 * Eigen::MatrixXd::Identity(d.state, d.state);
  out.m0 = Eigen::VectorXd::Zero(d.params);
  out.s0 = Eigen::VectorXd::Constant(d.params, filter.s0);
  return out;
}

}  // namespace ski::scenarios
