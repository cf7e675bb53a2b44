#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pidcert {

enum class ControllerKind { PID, PD, PI };
enum class PlantOrder { second_order, first_order };

std::string_view to_string(ControllerKind kind);
std::string_view to_string(PlantOrder order);
ControllerKind parse_controller_kind(std::string_view s);
PlantOrder parse_plant_order(std::string_view s);

/// Uncertainty class parameters. Second-order plants use (L1, L2, b_lower);
/// first-order plants use (L, b_lower) with L stored in L1 and L2 = 0.
struct UncertaintyBounds {
  double L1 = 0.0;
  double L2 = 0.0;
  double b_lower = 1.0;
  PlantOrder order = PlantOrder::second_order;

  static UncertaintyBounds second_order(double L1, double L2, double b_lower);
  static UncertaintyBounds first_order(double L, double b_lower);

  double L() const { return L1; }
  /// Throws UsageError unless b_lower > 0 and L1, L2 >= 0 (all finite).
  void validate() const;
};

struct GainVector {
  ControllerKind kind = ControllerKind::PID;
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;

  static GainVector pid(double kp, double ki, double kd);
  static GainVector pd(double kp, double kd);
  static GainVector pi(double kp, double ki);

  GainVector scaled(double alpha) const;
  bool operator==(const GainVector&) const = default;
};

struct Margin {
  std::string name;
  double slack;
};

/// Outcome of a set-membership test. `member` is true exactly when every
/// slack is strictly positive.
struct MembershipReport {
  bool member = false;
  std::vector<Margin> margins;
  double kbar = 0.0;

  double slack(std::string_view name) const;
};

/// k̄ = (L1 + L2)(kp + kd)/b̄.
double coupling_kbar(double kp, double kd, const UncertaintyBounds& ub);

/// kp, ki, kd > 0; kp² > 2·ki·kd + k̄; kd² > kp/b̄ + k̄.
MembershipReport omega_pid_membership(const GainVector& g, const UncertaintyBounds& ub);
/// kp, kd > 0; kp² > k̄; kd² > kp/b̄ + k̄.
MembershipReport omega_pd_membership(const GainVector& g, const UncertaintyBounds& ub);
/// kp, ki > 0; kp²·b̄ > kp·L + ki + L²/(4b̄).
MembershipReport omega_pi_membership(const GainVector& g, const UncertaintyBounds& ub);
/// kp·b̄ > L and ki > 0. Necessary and sufficient for scalar first-order plants.
MembershipReport omega_pi_prime_membership(const GainVector& g, const UncertaintyBounds& ub);

/// Dispatches on g.kind (Ω_pid, Ω_pd or Ω_pi).
MembershipReport membership(const GainVector& g, const UncertaintyBounds& ub);

struct SuggestOptions {
  double ki = 1.0;
  double margin = 0.1;
};

/// Closed-form interior point of the admissible set for `kind`:
///   PID  kp = kd = (2ki + (2(L1+L2)+1)/b̄)(1+margin)
///   PD   kp = kd = (2(L1+L2)+1)/b̄ · (1+margin)
///   PI   kp = (2L/b̄ + ki/L)(1+margin), or sqrt(ki/b̄)(1+m)+m when L = 0
/// The result is checked against the membership predicate before returning.
GainVector suggest_gains(ControllerKind kind, const UncertaintyBounds& ub, SuggestOptions opts = {});

/// True iff α·g stays in Ω_pid for every α in `alphas` (each α >= 1).
/// Throws PreconditionError if g itself is not a member.
bool semi_cone_check(const GainVector& g, const UncertaintyBounds& ub, std::span<const double> alphas);

}  // namespace pidcert
