#include "pidcert/planar_pi.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>

#include "pidcert/equilibrium.hpp"
#include "pidcert/errors.hpp"
#include "pidcert/simulator.hpp"

namespace pidcert {

namespace {

Vec scalar(double v) { return Vec::Constant(1, v); }

void require_planar(const PlantModel& p, const GainVector& g) {
  if (p.n() != 1 || p.order() != PlantOrder::first_order) {
    throw UsageError("planar analysis needs a scalar first-order plant");
  }
  if (g.kind != ControllerKind::PI) throw UsageError("planar analysis needs PI gains");
}

}  // namespace

PlanarField::PlanarField(PlantModel plant, GainVector gains, double y_star)
    : plant_(std::move(plant)), gains_(gains), y_star_(y_star), u_star_(0.0) {
  require_planar(plant_, gains_);
  u_star_ = solve_equilibrium(plant_, scalar(y_star_)).u_star(0);
}

std::pair<double, double> PlanarField::physical(double z0, double z1) const {
  return {y_star_ - z1, gains_.ki * z0 + gains_.kp * z1 + u_star_};
}

Eigen::Vector2d PlanarField::G(double z0, double z1) const {
  const auto [x, u] = physical(z0, z1);
  return {z1, -plant_.eval(scalar(x), scalar(u))(0)};
}

Eigen::Matrix2d PlanarField::DG(double z0, double z1) const {
  const auto [x, u] = physical(z0, z1);
  const Vec zero = plant_.zero();
  const double g_x = plant_.jac_x1(scalar(x), zero, scalar(u))(0, 0);
  const double g_u = -plant_.jac_u(scalar(x), zero, scalar(u))(0, 0);
  Eigen::Matrix2d J;
  J << 0.0, 1.0, gains_.ki * g_u, g_x + gains_.kp * g_u;
  return J;
}

ConditionReport jacobian_conditions(const PlanarField& field, GridSpec grid) {
  if (grid.points < 2 || !(grid.half_width > 0.0)) throw UsageError("jacobian_conditions: bad grid");
  const UncertaintyBounds& ub = field.plant().declared_bounds();
  const GainVector& g = field.gains();
  ConditionReport r;
  r.analytic_trace_bound = ub.L() - g.kp * ub.b_lower;
  r.analytic_pass = r.analytic_trace_bound < 0.0 && g.ki > 0.0;
  r.max_trace = -std::numeric_limits<double>::infinity();
  r.min_det = std::numeric_limits<double>::infinity();
  const double step = 2.0 * grid.half_width / (grid.points - 1);
  for (int i = 0; i < grid.points; ++i) {
    for (int j = 0; j < grid.points; ++j) {
      const Eigen::Matrix2d J = field.DG(-grid.half_width + i * step, -grid.half_width + j * step);
      r.max_trace = std::max(r.max_trace, J.trace());
      r.min_det = std::min(r.min_det, J.determinant());
      ++r.grid_points;
    }
  }
  r.grid_pass = r.max_trace < 0.0 && r.min_det > 0.0;
  r.bound_respected = r.max_trace <= r.analytic_trace_bound + 1e-8;
  r.sufficient = r.analytic_pass && r.grid_pass && r.bound_respected;
  return r;
}

std::string_view to_string(CounterexampleCase c) {
  return c == CounterexampleCase::ki_zero ? "ki_zero" : "unstable_linear";
}

CounterexampleCase parse_counterexample_case(std::string_view s) {
  if (s == "ki_zero") return CounterexampleCase::ki_zero;
  if (s == "unstable_linear") return CounterexampleCase::unstable_linear;
  throw UsageError("unknown counterexample case '" + std::string(s) + "'");
}

double convergence_horizon(const GainVector& g, const UncertaintyBounds& ub) {
  const double gap = g.kp * ub.b_lower - ub.L();
  if (!(gap > 0.0)) throw UsageError("convergence_horizon: needs kp*b > L");
  if (!(g.ki > 0.0)) throw UsageError("convergence_horizon: needs ki > 0");
  // Where f_u = b̄ the slow root is about det/|trace| ≥ ki·b̄/(kp·b̄ + L), which
  // shrinks as the trace margin grows.
  const double slow = g.ki * ub.b_lower / (g.kp * ub.b_lower + ub.L());
  return std::min(std::max(200.0 / gap, 40.0 / slow), 1e4);
}

CounterexampleReport necessity_counterexample(CounterexampleCase which, const UncertaintyBounds& ub,
                                              const GainVector& g, double y_star, CounterexampleOptions opts) {
  ub.validate();
  if (g.kind != ControllerKind::PI) throw UsageError("necessity_counterexample: needs PI gains");
  const double L = ub.L(), b = ub.b_lower;
  const double trace = L - g.kp * b;

  CounterexampleReport r;
  r.which = which;
  if (which == CounterexampleCase::ki_zero) {
    if (g.ki != 0.0) throw UsageError("ki_zero: ki must be 0");
    if (y_star == 0.0) throw UsageError("ki_zero: y* must be nonzero");
    if (trace == 0.0) throw UsageError("ki_zero: b*kp = L leaves no steady state");
    r.e_inf = L * y_star / trace;
    r.eig1 = r.eig2 = trace;
    r.max_real_eig = trace;
  } else {
    if (g.ki == 0.0) throw UsageError("unstable_linear: ki must be nonzero");
    if (omega_pi_prime_membership(g, ub).member) throw UsageError("unstable_linear: gains lie in the stable set");
    const std::complex<double> disc = std::sqrt(std::complex<double>(trace * trace - 4.0 * g.ki * b));
    r.eig1 = 0.5 * (trace + disc);
    r.eig2 = 0.5 * (trace - disc);
    r.max_real_eig = std::max(r.eig1.real(), r.eig2.real());
  }

  r.t_final = opts.t_final;
  if (!(r.t_final > 0.0)) {
    const double re = r.max_real_eig;
    if (re > 1e-12) {
      r.t_final = std::min(40.0, 20.0 / re);  // growth by e^20 at most
    } else if (re < -1e-12) {
      r.t_final = std::clamp(20.0 / -re, 1.0, 1e4);
    } else {
      const double w = std::max(std::abs(r.eig1.imag()), 1e-3);
      r.t_final = std::max(40.0, 8.0 * M_PI / w);
    }
  }
  const double x0 = opts.x0.value_or(y_star == 0.0 ? 1.0 : 0.0);

  const SimConfig cfg{
      .plant = linear_matrix_plant(Mat::Constant(1, 1, L), Mat::Zero(1, 1), Mat::Constant(1, 1, b),
                                   PlantOrder::first_order),
      .gains = g,
      .y_star = Vec::Constant(1, y_star),
      .x0 = Vec::Constant(1, x0),
      .t_final = r.t_final,
      .dt_max = std::min(0.05, r.t_final / 1000.0),
  };
  const Trajectory tr = simulate(cfg);

  for (std::size_t i = 0; i < tr.size(); ++i) {
    const double e = std::abs(tr.e[i](0));
    if (tr.times[i] <= 0.25 * r.t_final) r.early_peak = std::max(r.early_peak, e);
    if (tr.times[i] >= 0.75 * r.t_final) r.late_peak = std::max(r.late_peak, e);
  }
  r.e_final = tr.e.back()(0);
  if (which == CounterexampleCase::ki_zero) {
    // Stable offset or divergence; either way e does not reach 0.
    r.non_convergent = std::abs(r.e_final) > 1e-4;
  } else {
    r.non_convergent = r.late_peak >= 0.5 * r.early_peak;
  }
  return r;
}

}  // namespace pidcert
