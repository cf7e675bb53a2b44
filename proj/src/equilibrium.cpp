#include "pidcert/equilibrium.hpp"

#include <Eigen/LU>

#include <cmath>
#include <random>

#include "pidcert/errors.hpp"

namespace pidcert {

Vec equilibrium_map(const PlantModel& p, const Vec& y_star, const Vec& u) {
  return p.eval(y_star, p.zero(), u);
}

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kMinStep = 1e-12;

// Φ is strictly increasing for scalar in-class plants, so a sign change can
// always be bracketed and bisected.
EquilibriumSolution bisect_scalar(const PlantModel& p, const Vec& y_star, Vec u, int iterations,
                                  const EquilibriumOptions& opts) {
  auto phi = [&](double v) {
    Vec w(1);
    w(0) = v;
    return equilibrium_map(p, y_star, w)(0);
  };
  double lo = u(0) - 1.0, hi = u(0) + 1.0;
  double flo = phi(lo), fhi = phi(hi);
  for (double width = 2.0; (flo > 0.0 || fhi < 0.0) && iterations < opts.max_iterations; ++iterations) {
    width *= 2.0;
    if (flo > 0.0) flo = phi(lo -= width);
    if (fhi < 0.0) fhi = phi(hi += width);
  }
  if (flo > 0.0 || fhi < 0.0) {
    throw NumericalError("solve_equilibrium: could not bracket a root (plant not monotone in u?)");
  }
  double mid = 0.5 * (lo + hi), fmid = phi(mid);
  while (std::abs(fmid) > opts.tol && iterations < opts.max_iterations) {
    ++iterations;
    (fmid < 0.0 ? lo : hi) = mid;
    const double next = 0.5 * (lo + hi);
    if (next == mid) break;
    mid = next;
    fmid = phi(mid);
  }
  if (std::abs(fmid) > opts.tol) {
    throw NumericalError("solve_equilibrium: bisection stalled with residual " + std::to_string(std::abs(fmid)));
  }
  u(0) = mid;
  return {u, std::abs(fmid), iterations, y_star};
}

}  // namespace

EquilibriumSolution solve_equilibrium(const PlantModel& p, const Vec& y_star, EquilibriumOptions opts) {
  if (y_star.size() != p.n()) throw DimensionError("solve_equilibrium: setpoint dimension mismatch");
  if (!(opts.tol > 0.0)) throw UsageError("solve_equilibrium: tol must be > 0");

  const double b = p.declared_bounds().b_lower;
  Vec u = opts.initial_guess ? *opts.initial_guess : p.zero();
  if (u.size() != p.n()) throw DimensionError("solve_equilibrium: initial guess dimension mismatch");

  Vec r = equilibrium_map(p, y_star, u);
  double rn = r.norm();
  int it = 0;
  for (; it < opts.max_iterations && rn > opts.tol; ++it) {
    const Mat J = p.jac_u(y_star, p.zero(), u);
    const Vec d = J.partialPivLu().solve(-r);

    bool accepted = false;
    if (d.allFinite()) {
      for (double t = 1.0; t >= kMinStep; t *= 0.5) {
        const Vec trial = u + t * d;
        const Vec rt = equilibrium_map(p, y_star, trial);
        const double rtn = rt.norm();
        if (rtn <= (1.0 - kArmijo * t) * rn) {
          u = trial;
          r = rt;
          rn = rtn;
          accepted = true;
          break;
        }
      }
    }
    if (accepted) continue;

    if (p.n() == 1) return bisect_scalar(p, y_star, u, it, opts);

    const double jn = operator_norm(J);
    const double eta = b / (jn * jn + b * b);
    u -= eta * r;
    r = equilibrium_map(p, y_star, u);
    rn = r.norm();
  }
  if (rn > opts.tol) {
    throw NumericalError("solve_equilibrium: iteration cap " + std::to_string(opts.max_iterations) +
                         " reached with residual " + std::to_string(rn));
  }
  return {u, rn, it, y_star};
}

double monotonicity_probe(const PlantModel& p, const Vec& y_star, int pairs, std::uint64_t seed, double radius) {
  if (pairs < 1) throw UsageError("monotonicity_probe: pairs must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(-radius, radius);
  auto draw = [&] {
    Vec v(p.n());
    for (Index i = 0; i < v.size(); ++i) v(i) = box(rng);
    return v;
  };
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < pairs; ++k) {
    const Vec u1 = draw();
    Vec u2 = draw();
    while ((u1 - u2).norm() < 1e-6 * radius) u2 = draw();
    const Vec du = u1 - u2;
    const Vec dphi = equilibrium_map(p, y_star, u1) - equilibrium_map(p, y_star, u2);
    worst = std::min(worst, du.dot(dphi) / du.squaredNorm());
  }
  return worst;
}

}  // namespace pidcert
