#include <chrono>
#include <cmath>
#include <limits>

#include "ski/errors.hpp"
#include "ski/scenarios.hpp"
#include "ski/sindy.hpp"

namespace ski::scenarios {

namespace {

using Clock = std::chrono::steady_clock;

constexpr Index kWarmupTicks = 10;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

RunTrace empty_trace(const Prepared& prep) {
  const Index n = prep.traj.t.size();
  const Index p = static_cast<Index>(prep.labels.size());
  RunTrace trace;
  trace.y_names = prep.y_names;
  trace.u_names = prep.u_names;
  trace.labels = prep.labels;
  trace.t = prep.traj.t;
  trace.y = prep.traj.y;
  trace.u = prep.traj.u;
  trace.estimate = Eigen::MatrixXd::Zero(n, p);
  trace.half_width = Eigen::MatrixXd::Zero(n, p);
  trace.prior_var = Eigen::MatrixXd::Zero(n, p);
  trace.step_ms.assign(static_cast<std::size_t>(n), 0.0);
  return trace;
}

void truncate(RunTrace& trace, Index rows) {
  trace.t.conservativeResize(rows);
  trace.y.conservativeResize(rows, Eigen::NoChange);
  trace.u.conservativeResize(rows, Eigen::NoChange);
  trace.estimate.conservativeResize(rows, Eigen::NoChange);
  trace.half_width.conservativeResize(rows, Eigen::NoChange);
  trace.prior_var.conservativeResize(rows, Eigen::NoChange);
  trace.step_ms.resize(static_cast<std::size_t>(rows));
}

double steady_state_mean(const std::vector<double>& step_ms) {
  // Tick 0 carries no filter work; ticks 1..kWarmupTicks are warm-up.
  const std::size_t first = static_cast<std::size_t>(kWarmupTicks) + 1;
  std::size_t begin = step_ms.size() > first ? first : std::min<std::size_t>(1, step_ms.size());
  if (begin >= step_ms.size()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = begin; i < step_ms.size(); ++i) sum += step_ms[i];
  return sum / static_cast<double>(step_ms.size() - begin);
}

void record_sr(RunTrace& trace, Index k, const GaussianBelief& b, Index nx,
               const Eigen::VectorXd& prior) {
  const Index p = prior.size();
  trace.estimate.row(k) = b.mean.tail(p).transpose();
  const Eigen::MatrixXd& u = b.factor.matrix();
  for (Index i = 0; i < p; ++i) {
    trace.half_width(k, i) = 1.96 * u.row(nx + i).norm();
  }
  trace.prior_var.row(k) = prior.transpose();
}

void record_dense(RunTrace& trace, Index k, const DenseBelief& b, Index nx,
                  const Eigen::VectorXd& prior) {
  const Index p = prior.size();
  trace.estimate.row(k) = b.mean.tail(p).transpose();
  for (Index i = 0; i < p; ++i) {
    trace.half_width(k, i) = 1.96 * std::sqrt(std::max(0.0, b.cov(nx + i, nx + i)));
  }
  trace.prior_var.row(k) = prior.transpose();
}

RunResult run_filter(const Prepared& prep, Method method, const IdentificationSettings& s) {
  const ParametricModel& model = *prep.model;
  const Dims& dims = model.dims();
  const Index n = prep.traj.t.size();
  RunResult out{empty_trace(prep), {}};
  RunTrace& trace = out.trace;

  GaussianBelief belief = initial_belief(prep.mu0, prep.p0, prep.m0, prep.s0);
  DenseBelief dense = to_dense(belief);
  const UtWeights w = ut_weights(dims.augmented(), s.filter.alpha, s.filter.beta);
  ard::Engine engine(prep.s0, s.ard);
  FilterStats fstats;
  ard::RefreshStats rstats;
  long rejections = 0;

  if (method == Method::Ekf) {
    record_dense(trace, 0, dense, dims.state, engine.variances());
  } else {
    record_sr(trace, 0, belief, dims.state, engine.variances());
  }

  Index done = n;
  std::string failure;
  for (Index k = 1; k < n; ++k) {
    const Eigen::VectorXd u = prep.traj.u.row(k - 1).transpose();
    const Eigen::VectorXd y = prep.traj.y.row(k).transpose();
    try {
      const auto start = Clock::now();
      if (method == Method::Ekf) {
        dense = ekf_predict(dense, u, model);
        dense = ekf_correct(dense, y, model);
      } else {
        belief = srukf_predict(belief, u, model, w, &fstats);
        belief = srukf_correct(belief, y, model, w, &fstats);
        if (method == Method::Ski) {
          const BeliefBlocks blocks = belief_blocks(belief, dims);
          ard::StepResult step = ard::ard_step(engine, blocks.m, blocks.s);
          if (step.rejected) {
            ++rejections;
          } else {
            belief = ard::posterior_refresh(belief, dims.state, engine.frozen_prior(),
                                            step.engine.variances(), &rstats);
            engine = step.engine;
            engine.freeze();
          }
        }
      }
      trace.step_ms[static_cast<std::size_t>(k)] = elapsed_ms(start);
      const bool finite = method == Method::Ekf ? dense.mean.allFinite() : belief.mean.allFinite();
      if (!finite) throw NonFinite("filter produced a non-finite mean");
    } catch (const Error& e) {
      failure = "step " + std::to_string(k) + ": " + e.what();
      done = k;
      break;
    }
    if (method == Method::Ekf) {
      record_dense(trace, k, dense, dims.state, engine.variances());
    } else {
      record_sr(trace, k, belief, dims.state, engine.variances());
    }
  }

  if (done < n) truncate(trace, done);
  const Index last = trace.steps() - 1;
  out.metrics = compute_metrics(prep, trace.estimate.row(last).transpose(),
                                trace.prior_var.row(last).transpose(), method,
                                s.ard.report_threshold);
  out.metrics.per_step_ms = steady_state_mean(trace.step_ms);
  out.metrics.center_fallbacks = fstats.negative_center_fallbacks;
  out.metrics.refresh_repairs = rstats.repairs;
  out.metrics.ard_rejections = rejections;
  if (done < n) {
    out.metrics.failed = true;
    out.metrics.failure = failure;
  }
  return out;
}

// Regression targets and library rows for the batch baseline. Velocities and
// accelerations come from repeated numerical differentiation of y.
sindy::Problem sindy_problem(const Prepared& prep, double lambda) {
  const ParametricModel& model = *prep.model;
  const Dims& dims = model.dims();
  const Trajectory& tr = prep.traj;
  const double dt = model.dt();
  const Index n = tr.t.size();
  const Index p = dims.params;
  const Eigen::MatrixXd vel = sindy::numeric_derivative(tr.y, dt);
  const Eigen::MatrixXd acc = sindy::numeric_derivative(vel, dt);
  const Index m = dims.unknown;

  sindy::Problem problem;
  problem.psi.resize(n * m, p);
  problem.xdot.resize(n * m, 1);
  problem.lambda = Eigen::VectorXd::Constant(1, lambda);
  const Eigen::VectorXd zero_theta = Eigen::VectorXd::Zero(p);
  for (Index k = 0; k < n; ++k) {
    Eigen::VectorXd x(dims.state);
    x << tr.y.row(k).transpose(), vel.row(k).transpose();
    const Eigen::VectorXd u = tr.u.row(k).transpose();
    problem.psi.middleRows(k * m, m) = model.basis().evaluate(x, u);
    // Known part of the acceleration: the dynamics with the weights at zero.
    const Eigen::VectorXd known = model.derivative(x, u, zero_theta);
    problem.xdot.middleRows(k * m, m) = acc.row(k).transpose() - known.tail(m);
  }
  return problem;
}

RunResult run_sindy(const Prepared& prep, const IdentificationSettings& s) {
  RunResult out{empty_trace(prep), {}};
  const auto start = Clock::now();
  const sindy::Problem problem = sindy_problem(prep, s.sindy.lambda);
  const sindy::Identification fit = sindy::sindy_identify(problem);
  const double total = elapsed_ms(start);
  const Eigen::VectorXd coef = fit.xi.col(0);
  const Index n = out.trace.steps();
  for (Index k = 0; k < n; ++k) {
    out.trace.estimate.row(k) = coef.transpose();
    out.trace.prior_var.row(k) = prep.s0.transpose();
  }
  const double amortized = n > 0 ? total / static_cast<double>(n) : 0.0;
  std::fill(out.trace.step_ms.begin(), out.trace.step_ms.end(), amortized);
  out.metrics = compute_metrics(prep, coef, prep.s0, Method::Sindy, s.ard.report_threshold);
  out.metrics.per_step_ms = amortized;
  return out;
}

}  // namespace

RunMetrics compute_metrics(const Prepared& prep, const Eigen::VectorXd& estimate,
                           const Eigen::VectorXd& prior, Method method, double report_threshold) {
  if (estimate.size() != prep.true_weights.size() || prior.size() != estimate.size()) {
    throw DimensionMismatch("compute_metrics: estimate and truth sizes differ");
  }
  RunMetrics m;
  m.final_estimate = estimate;
  m.final_prior = prior;
  const Eigen::VectorXd err = estimate - prep.true_weights;
  m.mean_l1_error = err.cwiseAbs().mean();
  if (prep.kind == ScenarioKind::Delay) {
    m.l1_relative_error_L = err.lpNorm<1>() / prep.true_weights.lpNorm<1>();
  }
  if (prep.active_gain) {
    const Index a = *prep.active_gain;
    m.active_gain_relative_error = std::abs(err(a)) / std::abs(prep.true_weights(a));
  }
  switch (method) {
    case Method::Ski:
      m.selected_basis = ard::selected_basis(prior, report_threshold);
      break;
    case Method::Sindy:
      for (Index i = 0; i < estimate.size(); ++i) {
        if (estimate(i) != 0.0) m.selected_basis.push_back(i);
      }
      break;
    case Method::Ukf:
    case Method::Ekf:
      for (Index i = 0; i < estimate.size(); ++i) m.selected_basis.push_back(i);
      break;
  }
  if (!estimate.allFinite()) m.mean_l1_error = std::numeric_limits<double>::infinity();
  return m;
}

RunResult run_identification(const Prepared& prepared, Method method,
                             const IdentificationSettings& settings) {
  if (!prepared.model) throw ConfigError("run_identification: scenario has no model");
  if (method == Method::Sindy) return run_sindy(prepared, settings);
  return run_filter(prepared, method, settings);
}

}  // namespace ski::scenarios
