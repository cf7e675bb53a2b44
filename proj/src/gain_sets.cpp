#include "pidcert/gain_sets.hpp"

#include <cmath>

#include "pidcert/errors.hpp"

namespace pidcert {

std::string_view to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::PID: return "PID";
    case ControllerKind::PD: return "PD";
    case ControllerKind::PI: return "PI";
  }
  return "?";
}

std::string_view to_string(PlantOrder order) {
  return order == PlantOrder::second_order ? "second_order" : "first_order";
}

ControllerKind parse_controller_kind(std::string_view s) {
  if (s == "PID" || s == "pid") return ControllerKind::PID;
  if (s == "PD" || s == "pd") return ControllerKind::PD;
  if (s == "PI" || s == "pi") return ControllerKind::PI;
  throw UsageError("unknown controller kind '" + std::string(s) + "'");
}

PlantOrder parse_plant_order(std::string_view s) {
  if (s == "second_order") return PlantOrder::second_order;
  if (s == "first_order") return PlantOrder::first_order;
  throw UsageError("unknown plant order '" + std::string(s) + "'");
}

UncertaintyBounds UncertaintyBounds::second_order(double L1, double L2, double b_lower) {
  UncertaintyBounds ub{L1, L2, b_lower, PlantOrder::second_order};
  ub.validate();
  return ub;
}

UncertaintyBounds UncertaintyBounds::first_order(double L, double b_lower) {
  UncertaintyBounds ub{L, 0.0, b_lower, PlantOrder::first_order};
  ub.validate();
  return ub;
}

void UncertaintyBounds::validate() const {
  if (!std::isfinite(L1) || !std::isfinite(L2) || !std::isfinite(b_lower)) {
    throw UsageError("uncertainty bounds must be finite");
  }
  if (!(b_lower > 0.0)) throw UsageError("uncertainty bounds: b_lower must be > 0");
  if (L1 < 0.0 || L2 < 0.0) throw UsageError("uncertainty bounds: L1, L2 must be >= 0");
  if (order == PlantOrder::first_order && L2 != 0.0) {
    throw UsageError("uncertainty bounds: first-order class has no L2");
  }
}

GainVector GainVector::pid(double kp, double ki, double kd) { return {ControllerKind::PID, kp, ki, kd}; }
GainVector GainVector::pd(double kp, double kd) { return {ControllerKind::PD, kp, 0.0, kd}; }
GainVector GainVector::pi(double kp, double ki) { return {ControllerKind::PI, kp, ki, 0.0}; }

GainVector GainVector::scaled(double alpha) const { return {kind, alpha * kp, alpha * ki, alpha * kd}; }

double MembershipReport::slack(std::string_view name) const {
  for (const auto& m : margins)
    if (m.name == name) return m.slack;
  throw UsageError("membership report has no margin named '" + std::string(name) + "'");
}

double coupling_kbar(double kp, double kd, const UncertaintyBounds& ub) {
  return (ub.L1 + ub.L2) * (kp + kd) / ub.b_lower;
}

namespace {

MembershipReport finish(std::vector<Margin> margins, double kbar) {
  MembershipReport r;
  r.margins = std::move(margins);
  r.kbar = kbar;
  r.member = true;
  for (const auto& m : r.margins) r.member = r.member && (m.slack > 0.0);
  return r;
}

void require_kind(const GainVector& g, ControllerKind kind, const char* op) {
  if (g.kind != kind) {
    throw UsageError(std::string(op) + ": expected " + std::string(to_string(kind)) +
                     " gains, got " + std::string(to_string(g.kind)));
  }
}

void require_order(const UncertaintyBounds& ub, PlantOrder order, const char* op) {
  ub.validate();
  if (ub.order != order) {
    throw UsageError(std::string(op) + ": bounds must describe a " + std::string(to_string(order)) +
                     " class");
  }
}

}  // namespace

MembershipReport omega_pid_membership(const GainVector& g, const UncertaintyBounds& ub) {
  require_kind(g, ControllerKind::PID, "omega_pid_membership");
  require_order(ub, PlantOrder::second_order, "omega_pid_membership");
  const double kbar = coupling_kbar(g.kp, g.kd, ub);
  return finish({{"kp", g.kp},
                 {"ki", g.ki},
                 {"kd", g.kd},
                 {"kp^2-2ki*kd-kbar", g.kp * g.kp - 2.0 * g.ki * g.kd - kbar},
                 {"kd^2-kp/b-kbar", g.kd * g.kd - g.kp / ub.b_lower - kbar}},
                kbar);
}

MembershipReport omega_pd_membership(const GainVector& g, const UncertaintyBounds& ub) {
  require_kind(g, ControllerKind::PD, "omega_pd_membership");
  require_order(ub, PlantOrder::second_order, "omega_pd_membership");
  const double kbar = coupling_kbar(g.kp, g.kd, ub);
  return finish({{"kp", g.kp},
                 {"kd", g.kd},
                 {"kp^2-kbar", g.kp * g.kp - kbar},
                 {"kd^2-kp/b-kbar", g.kd * g.kd - g.kp / ub.b_lower - kbar}},
                kbar);
}

MembershipReport omega_pi_membership(const GainVector& g, const UncertaintyBounds& ub) {
  require_kind(g, ControllerKind::PI, "omega_pi_membership");
  require_order(ub, PlantOrder::first_order, "omega_pi_membership");
  const double L = ub.L();
  const double b = ub.b_lower;
  return finish({{"kp", g.kp},
                 {"ki", g.ki},
                 {"kp^2*b-kp*L-ki-L^2/(4b)", g.kp * g.kp * b - g.kp * L - g.ki - L * L / (4.0 * b)}},
                0.0);
}

MembershipReport omega_pi_prime_membership(const GainVector& g, const UncertaintyBounds& ub) {
  require_kind(g, ControllerKind::PI, "omega_pi_prime_membership");
  require_order(ub, PlantOrder::first_order, "omega_pi_prime_membership");
  return finish({{"kp*b-L", g.kp * ub.b_lower - ub.L()}, {"ki", g.ki}}, 0.0);
}

MembershipReport membership(const GainVector& g, const UncertaintyBounds& ub) {
  switch (g.kind) {
    case ControllerKind::PID: return omega_pid_membership(g, ub);
    case ControllerKind::PD: return omega_pd_membership(g, ub);
    case ControllerKind::PI: return omega_pi_membership(g, ub);
  }
  throw InternalError("membership: bad controller kind");
}

GainVector suggest_gains(ControllerKind kind, const UncertaintyBounds& ub, SuggestOptions opts) {
  ub.validate();
  if (!(opts.margin >= 0.0) || !std::isfinite(opts.margin)) {
    throw UsageError("suggest_gains: margin must be finite and >= 0");
  }
  if (kind != ControllerKind::PD && !(opts.ki > 0.0 && std::isfinite(opts.ki))) {
    throw UsageError("suggest_gains: requested ki must be > 0");
  }
  const double b = ub.b_lower;
  const double scale = 1.0 + opts.margin;
  GainVector g;
  switch (kind) {
    case ControllerKind::PID: {
      const double k = (2.0 * opts.ki + (2.0 * (ub.L1 + ub.L2) + 1.0) / b) * scale;
      g = GainVector::pid(k, opts.ki, k);
      break;
    }
    case ControllerKind::PD: {
      const double k = (2.0 * (ub.L1 + ub.L2) + 1.0) / b * scale;
      g = GainVector::pd(k, k);
      break;
    }
    case ControllerKind::PI: {
      const double L = ub.L();
      if (L > 0.0) {
        g = GainVector::pi((2.0 * L / b + opts.ki / L) * scale, opts.ki);
      } else {
        // kp ≥ 2L/b̄ + ki/L is undefined at L = 0; there the set is kp²b̄ > ki,
        // which needs a strictly positive margin to leave the boundary.
        const double m = opts.margin > 0.0 ? opts.margin : SuggestOptions{}.margin;
        g = GainVector::pi(std::sqrt(opts.ki / b) * (1.0 + m) + m, opts.ki);
      }
      break;
    }
  }
  const auto report = membership(g, ub);
  if (!report.member) {
    throw InternalError("suggest_gains: constructed " + std::string(to_string(kind)) +
                        " gains failed their own membership test");
  }
  return g;
}

bool semi_cone_check(const GainVector& g, const UncertaintyBounds& ub, std::span<const double> alphas) {
  if (!omega_pid_membership(g, ub).member) {
    throw PreconditionError("semi_cone_check: base gains are not in the PID set");
  }
  for (double a : alphas) {
    if (!(a >= 1.0)) throw UsageError("semi_cone_check: scale factors must be >= 1");
    if (!omega_pid_membership(g.scaled(a), ub).member) return false;
  }
  return true;
}

}  // namespace pidcert
