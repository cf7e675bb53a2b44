#pragma once

// Scalar (n = 1) first-order PI loops as planar systems.
//
// In z = (∫e − u*/ki, e) the loop reads ż = G(z) with
//   G(z₀, z₁) = (z₁, g(z₁, ki·z₀ + kp·z₁)),   g(x, u) = −f(y* − x, u + u*),
// whose Jacobian is [[0, 1], [ki·g_u, g_x + kp·g_u]]. Since g_x = f_x and
// g_u = −f_u, trace DG ≤ L − kp·b̄ and det DG = ki·f_u ≥ ki·b̄ everywhere, so
// kp·b̄ > L and ki > 0 give a Jacobian that is Hurwitz at every point.

#include <Eigen/Core>

#include <complex>
#include <optional>

#include "pidcert/gain_sets.hpp"
#include "pidcert/plant_models.hpp"

namespace pidcert {

class PlanarField {
 public:
  /// Solves for u* and shifts the origin to the equilibrium. Throws
  /// UsageError unless the plant is first order with n = 1 and g is PI.
  PlanarField(PlantModel plant, GainVector gains, double y_star);

  Eigen::Vector2d G(double z0, double z1) const;
  Eigen::Matrix2d DG(double z0, double z1) const;

  double u_star() const { return u_star_; }
  double y_star() const { return y_star_; }
  const GainVector& gains() const { return gains_; }
  const PlantModel& plant() const { return plant_; }

 private:
  // Physical (x, u) at the planar point.
  std::pair<double, double> physical(double z0, double z1) const;

  PlantModel plant_;
  GainVector gains_;
  double y_star_;
  double u_star_;
};

struct GridSpec {
  double half_width = 20.0;
  int points = 41;
};

struct ConditionReport {
  int grid_points = 0;
  double max_trace = 0.0;
  double min_det = 0.0;
  /// L − kp·b̄ from the declared bounds.
  double analytic_trace_bound = 0.0;
  bool analytic_pass = false;   // L − kp·b̄ < 0 and ki > 0
  bool grid_pass = false;       // max trace < 0 and min det > 0 on the grid
  bool bound_respected = false; // max trace ≤ L − kp·b̄ + 1e-8
  /// analytic_pass ∧ grid_pass ∧ bound_respected. The grid is an audit of
  /// the analytic argument, not a proof of it.
  bool sufficient = false;
};

ConditionReport jacobian_conditions(const PlanarField& field, GridSpec grid = {});

enum class CounterexampleCase { ki_zero, unstable_linear };

std::string_view to_string(CounterexampleCase c);
CounterexampleCase parse_counterexample_case(std::string_view s);

struct CounterexampleOptions {
  /// 0 picks a horizon from the gains.
  double t_final = 0.0;
  /// Initial x; defaults to 0, or 1 when y* = 0.
  std::optional<double> x0;
};

struct CounterexampleReport {
  CounterexampleCase which = CounterexampleCase::ki_zero;
  double t_final = 0.0;
  /// ki_zero: analytic steady-state error L·y*/(L − b̄·kp).
  double e_inf = 0.0;
  /// unstable_linear: roots of s² − (L − kp·b̄)s + ki·b̄.
  std::complex<double> eig1, eig2;
  double max_real_eig = 0.0;
  double e_final = 0.0;
  double early_peak = 0.0;  // max |e| on the first quarter of the run
  double late_peak = 0.0;   // max |e| on the last quarter
  /// e(t) fails to approach 0: for ki_zero it settles at e_inf ≠ 0, for
  /// unstable_linear late_peak ≥ 0.5·early_peak.
  bool non_convergent = false;
};

/// Simulates f(x, u) = L·x + b̄·u under the given PI gains.
///   ki_zero: requires ki = 0, y* ≠ 0 and b̄·kp ≠ L.
///   unstable_linear: requires ki ≠ 0 and (kp, ki) ∉ Ω'_pi.
CounterexampleReport necessity_counterexample(CounterexampleCase which, const UncertaintyBounds& ub,
                                              const GainVector& g, double y_star, CounterexampleOptions opts = {});

/// max{200/(kp·b̄ − L), 40(kp·b̄ + L)/(ki·b̄)} capped at 1e4; the convergence
/// cutoff for Ω'_pi gains, for which no rate is known. The second term covers
/// the slow root of loops whose trace margin is large but whose ki is small.
double convergence_horizon(const GainVector& g, const UncertaintyBounds& ub);

}  // namespace pidcert
