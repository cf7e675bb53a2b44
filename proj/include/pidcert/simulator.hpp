#pragma once

// Closed-loop simulation of the PID, PD and PI loops and audits of the
// resulting trajectories against a certificate.
//
// State layouts:
//   PID  [x₁, x₂, I]   I = ∫e, u = kp·e + ki·I − kd·x₂
//   PD   [x₁, x₂]      u = kp·e − kd·x₂
//   PI   [x, I]        u = kp·e + ki·I
// with e = y* − x₁ and ė = −x₂ taken from the state.

#include <optional>
#include <span>
#include <vector>

#include "pidcert/certificates.hpp"
#include "pidcert/plant_models.hpp"

namespace pidcert {

enum class Integrator { rk4_fixed, rk45_adaptive };

std::string_view to_string(Integrator i);
Integrator parse_integrator(std::string_view s);

struct SimConfig {
  PlantModel plant;
  GainVector gains;
  Vec y_star;
  /// (x₁(0), x₂(0)) stacked for second-order plants, x(0) for first order.
  Vec x0;
  double t_final = 20.0;
  double dt_max = 0.01;
  Integrator integrator = Integrator::rk45_adaptive;
  double rtol = 1e-8;
  double atol = 1e-10;
  /// Initial integral state; zero unless overridden.
  std::optional<Vec> integral0;
};

struct Envelope {
  double M = 0.0;
  double lambda = 0.0;
  /// ‖e(0)‖ + ‖ė(0)‖ + ‖u*‖ (PID), ‖e(0)‖ + ‖ė(0)‖ (PD), ‖x(0) − y*‖ + ‖u*‖ (PI).
  double c0 = 0.0;
  /// Safety deflation applied to a sampled margin; 0 for exact ones.
  double safety = 0.0;

  double bound(double t) const;
};

struct Trajectory {
  ControllerKind kind = ControllerKind::PID;
  Index n = 1;
  Vec u_star;
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> e;
  /// −x₂ for second-order loops; −f(x, u) for PI.
  std::vector<Vec> edot;
  std::vector<Vec> u;
  std::vector<Vec> z;
  /// ‖e‖ + ‖ė‖ (PID, PD) or ‖e‖ (PI): the quantity under the envelope.
  std::vector<double> signal;
  /// zᵀPz; filled only when a certificate was supplied.
  std::vector<double> V;
  std::vector<double> envelope_margin;
  std::optional<Envelope> envelope;
  int rejected_steps = 0;

  std::size_t size() const { return times.size(); }
};

/// Integrates the closed loop from t = 0 to cfg.t_final.
///
/// The adaptive integrator is Dormand–Prince 5(4) with steps capped at
/// dt_max; every accepted step is recorded. A step below 1e-14·max(1, t)
/// raises IntegrationError. With a certificate, u* comes from the
/// equilibrium solver and V and envelope_margin are filled in; the
/// certificate must match the gains and its bounds must cover the plant's.
Trajectory simulate(const SimConfig& cfg, const LyapunovCertificate* cert = nullptr);

struct DecayFit {
  double lambda_emp = 0.0;
  double M_emp = 0.0;
  std::size_t points = 0;
};

/// Least-squares fit of log(signal) = log(M_emp) − lambda_emp·t over the
/// samples with t in [t_lo, t_hi]. The window ends at the first sample whose
/// signal drops below 1e-14.
DecayFit fit_decay(std::span<const double> times, std::span<const double> signal, double t_lo, double t_hi);
DecayFit fit_decay(const Trajectory& traj, double t_lo, double t_hi);

struct AuditReport {
  std::size_t samples = 0;
  double min_margin = 0.0;
  double atol = 0.0;
  std::optional<double> first_violation_time;
  /// Samples that pass with the deflated rate but would fail with the
  /// undeflated sampled rate λ/(1 − safety). Reported, not failed.
  std::size_t near_violations = 0;
  bool pass = false;
};

/// pass ⇔ min margin ≥ −rel_atol·(initial envelope value).
AuditReport envelope_audit(const Trajectory& traj, double rel_atol = 1e-7);

struct MonitorReport {
  double V0 = 0.0;
  /// Largest rise of V above its running minimum.
  double max_increase = 0.0;
  bool non_increasing = false;
  /// Largest ΔV + α∫‖z‖² − slack over consecutive samples (≤ 0 when ok).
  double worst_dissipation_excess = 0.0;
  bool dissipation_ok = false;
};

/// Checks V(z(t)) along the trajectory: non-increasing within rel_tol·V(0),
/// and V(t_{k+1}) − V(t_k) ≤ −α∫‖z‖²dt + slack_rel·V(t_k) with the integral
/// by the trapezoidal rule.
MonitorReport lyapunov_monitor(const Trajectory& traj, const LyapunovCertificate& cert, double rel_tol = 1e-6,
                               double slack_rel = 1e-5);

/// V = zᵀPz.
double lyapunov_value(const LyapunovCertificate& cert, const Vec& z);

}  // namespace pidcert
