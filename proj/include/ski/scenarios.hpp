#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ski/ard.hpp"
#include "ski/filters.hpp"
#include "ski/model.hpp"

namespace ski::scenarios {

enum class ScenarioKind { WingRock, Delay, Quadrotor, QuadZ };
enum class Method { Ski, Ukf, Ekf, Sindy };

std::string to_string(ScenarioKind kind);
std::string to_string(Method method);
// Throw ConfigError on unknown names.
ScenarioKind parse_scenario(const std::string& name);
Method parse_method(const std::string& name);

// PID on a measured signal; derivative acts on the measurement so setpoint
// steps do not kick the actuator. Output clamped to +/- clamp.
struct PidController {
  double kp = 0.8;
  double ki = 0.1;
  double kd = 0.3;
  double clamp = 25.0;
  double derivative_tau = 0.0;  // first-order filter on the derivative term, s

  double update(double setpoint, double measured, double dt);
  void reset();

 private:
  double integral_ = 0.0;
  double previous_ = 0.0;
  double derivative_ = 0.0;
  bool primed_ = false;
};

struct WingRockTruth {
  double l_gain = 3.0;  // 1/s^2
  std::array<double, 6> w = {0.8, 0.2314, 0.6918, -0.6245, 0.0095, 0.0214};
  double meas_noise_std = 0.1;  // deg
  // Square-wave roll reference (deg), each level held for hold_s, cycling.
  std::vector<double> reference_levels = {5.0, -5.0, 4.0, -4.0};
  double hold_s = 2.5;
};

struct DelayTruth {
  int window = 8;
  int true_delay_steps = 6;
  double gain = 3.0;
};

struct QuadTruth {
  double gravity = 9.81;
  double pwm_hover = 1500.0;
  double pwm_min = 1000.0;
  double pwm_max = 2000.0;
  double thrust_per_pwm = 9.81 / 500.0;  // m/s^2 per PWM unit above pwm_min
  double drag_linear = 0.25;             // d1, 1/s
  double drag_quadratic = 0.0;           // d2, 1/m
  double meas_noise_std = 0.02;          // m
  // Spiral: radius r0 + radius_rate * t, constant period, steady climb.
  double radius0 = 0.5;
  double radius_rate = 0.08;
  double period = 8.0;
  double climb_rate = 0.1;
};

// Everything the scenario needs besides the seed.
struct ScenarioSettings {
  ScenarioKind kind = ScenarioKind::WingRock;
  double duration_s = 15.0;
  double rate_hz = 50.0;
  Integrator plant_integrator = Integrator::Rk4;
  bool matched_integrator = false;  // filter model uses the plant integrator
  std::optional<double> meas_noise_std;
  PidController pid;
  double excitation_std = 0.0;  // white dither added to the control input
  WingRockTruth wingrock;
  DelayTruth delay;
  QuadTruth quad;
};

// Filter tuning shared by SKI, UKF and EKF.
struct FilterSettings {
  double alpha = 1e-3;
  double beta = 2.0;
  double q_scale = 1e-4;      // Q = q_scale * I on the dynamic states
  std::optional<double> r_std;  // defaults to the scenario's sensor std
  double p0 = 1.0;            // P0 = p0 * I
  double s0 = 10.0;           // S0 = s0 * I
};

struct SindySettings {
  double lambda = 0.1;
};

// Rows are samples. u(k) is held from t(k) to t(k+1); y(k) observes x(k).
struct Trajectory {
  Eigen::VectorXd t;
  Eigen::MatrixXd x;
  Eigen::MatrixXd u;
  Eigen::MatrixXd y;
  Eigen::VectorXd reference;  // tracked setpoint (first channel), for reports
};

// A simulated run plus the identification problem posed on it.
struct Prepared {
  ScenarioKind kind;
  Trajectory traj;
  std::optional<ParametricModel> model;
  Eigen::VectorXd true_weights;
  std::vector<std::string> labels;
  std::vector<std::string> y_names;
  std::vector<std::string> u_names;
  Eigen::VectorXd mu0;
  Eigen::MatrixXd p0;
  Eigen::VectorXd m0;
  Eigen::VectorXd s0;
  std::optional<Index> active_gain;  // delay task: index of the true delay basis
};

Trajectory simulate_wingrock(const ScenarioSettings& settings, std::uint64_t seed);
Trajectory simulate_delay_scenario(const ScenarioSettings& settings, std::uint64_t seed);
// Quadrotor trajectories carry the standardized PWM in u(:,0); the scale used
// is returned through `pwm_scale` so the true weights can be expressed in the
// same units.
Trajectory simulate_quadrotor(const ScenarioSettings& settings, std::uint64_t seed,
                              double* pwm_scale = nullptr);
// Vertical-only variant: thrust along z, no drag, same PWM standardization.
Trajectory simulate_quad_z(const ScenarioSettings& settings, std::uint64_t seed,
                           double* pwm_scale = nullptr);

// Basis libraries (labels are CSV-safe).
BasisLibrary wingrock_basis();
BasisLibrary delay_basis(int window);
BasisLibrary quadrotor_basis();
BasisLibrary quad_z_basis();

// Identification model for a scenario (filter side, Euler unless matched).
ParametricModel identification_model(const ScenarioSettings& settings,
                                     const FilterSettings& filter);

Prepared prepare(const ScenarioSettings& settings, const FilterSettings& filter,
                 std::uint64_t seed);

// Per-step record of an identification run.
struct RunTrace {
  std::vector<std::string> y_names;
  std::vector<std::string> u_names;
  std::vector<std::string> labels;
  Eigen::VectorXd t;
  Eigen::MatrixXd y;
  Eigen::MatrixXd u;
  Eigen::MatrixXd estimate;    // rows = steps
  Eigen::MatrixXd half_width;  // 1.96 sigma
  Eigen::MatrixXd prior_var;
  std::vector<double> step_ms;

  Index steps() const { return t.size(); }
};

struct RunMetrics {
  double mean_l1_error = 0.0;
  std::optional<double> l1_relative_error_L;
  std::optional<double> active_gain_relative_error;
  double per_step_ms = 0.0;
  std::vector<Index> selected_basis;
  bool failed = false;
  std::string failure;
  Eigen::VectorXd final_estimate;
  Eigen::VectorXd final_prior;
  long center_fallbacks = 0;
  long refresh_repairs = 0;
  long ard_rejections = 0;
};

struct RunResult {
  RunTrace trace;
  RunMetrics metrics;
};

struct IdentificationSettings {
  FilterSettings filter;
  ard::Settings ard;
  SindySettings sindy;
};

RunResult run_identification(const Prepared& prepared, Method method,
                             const IdentificationSettings& settings);

// Mean absolute weight error, l1 relative error, and selection summary.
RunMetrics compute_metrics(const Prepared& prepared, const Eigen::VectorXd& estimate,
                           const Eigen::VectorXd& prior, Method method, double report_threshold);

}  // namespace ski::scenarios
