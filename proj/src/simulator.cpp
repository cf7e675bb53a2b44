#include "pidcert/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "pidcert/equilibrium.hpp"
#include "pidcert/errors.hpp"

namespace pidcert {

std::string_view to_string(Integrator i) {
  return i == Integrator::rk4_fixed ? "rk4_fixed" : "rk45_adaptive";
}

Integrator parse_integrator(std::string_view s) {
  if (s == "rk4_fixed") return Integrator::rk4_fixed;
  if (s == "rk45_adaptive") return Integrator::rk45_adaptive;
  throw UsageError("unknown integrator '" + std::string(s) + "'");
}

double Envelope::bound(double t) const { return M * std::exp(-lambda * t) * c0; }

namespace {

class ClosedLoop {
 public:
  ClosedLoop(const SimConfig& cfg) : cfg_(cfg), n_(cfg.plant.n()), kind_(cfg.gains.kind) {}

  Index n() const { return n_; }
  Index state_dim() const { return kind_ == ControllerKind::PID ? 3 * n_ : 2 * n_; }

  Vec error(const Vec& s) const { return cfg_.y_star - s.head(n_); }

  Vec control(const Vec& s) const {
    const GainVector& g = cfg_.gains;
    const Vec e = error(s);
    switch (kind_) {
      case ControllerKind::PID: return g.kp * e + g.ki * s.segment(2 * n_, n_) - g.kd * s.segment(n_, n_);
      case ControllerKind::PD: return g.kp * e - g.kd * s.segment(n_, n_);
      case ControllerKind::PI: return g.kp * e + g.ki * s.segment(n_, n_);
    }
    throw InternalError("control: bad kind");
  }

  Vec plant_rate(const Vec& s, const Vec& u) const {
    if (kind_ == ControllerKind::PI) return cfg_.plant.eval(s.head(n_), u);
    return cfg_.plant.eval(s.head(n_), s.segment(n_, n_), u);
  }

  Vec rhs(const Vec& s) const {
    const Vec u = control(s);
    Vec ds(state_dim());
    switch (kind_) {
      case ControllerKind::PID:
        ds << s.segment(n_, n_), plant_rate(s, u), error(s);
        break;
      case ControllerKind::PD:
        ds << s.segment(n_, n_), plant_rate(s, u);
        break;
      case ControllerKind::PI:
        ds << plant_rate(s, u), error(s);
        break;
    }
    return ds;
  }

  Vec edot(const Vec& s, const Vec& u) const {
    if (kind_ == ControllerKind::PI) return -plant_rate(s, u);
    return -s.segment(n_, n_);
  }

 private:
  const SimConfig& cfg_;
  Index n_;
  ControllerKind kind_;
};

void check_config(const SimConfig& cfg) {
  const Index n = cfg.plant.n();
  const ControllerKind kind = cfg.gains.kind;
  const bool first = cfg.plant.order() == PlantOrder::first_order;
  if ((kind == ControllerKind::PI) != first) {
    throw UsageError(std::string("simulate: ") + std::string(to_string(kind)) + " control needs a " +
                     (kind == ControllerKind::PI ? "first" : "second") + "-order plant");
  }
  if (cfg.y_star.size() != n) throw DimensionError("simulate: y_star must have length " + std::to_string(n));
  const Index x_dim = first ? n : 2 * n;
  if (cfg.x0.size() != x_dim) throw DimensionError("simulate: x0 must have length " + std::to_string(x_dim));
  if (cfg.integral0 && cfg.integral0->size() != n) throw DimensionError("simulate: integral0 has wrong length");
  if (cfg.integral0 && kind == ControllerKind::PD) throw UsageError("simulate: PD loops have no integral state");
  if (!(cfg.t_final > 0.0) || !std::isfinite(cfg.t_final)) throw UsageError("simulate: t_final must be > 0");
  if (!(cfg.dt_max > 0.0)) throw UsageError("simulate: dt_max must be > 0");
  if (!(cfg.rtol > 0.0) || !(cfg.atol > 0.0)) throw UsageError("simulate: rtol and atol must be > 0");
  if (!cfg.y_star.allFinite() || !cfg.x0.allFinite()) throw UsageError("simulate: non-finite initial data");
}

void check_certificate(const SimConfig& cfg, const LyapunovCertificate& cert) {
  if (cert.kind != cfg.gains.kind || !(cert.gains == cfg.gains)) {
    throw PreconditionError("simulate: certificate was issued for different gains");
  }
  if (cert.n != cfg.plant.n()) throw PreconditionError("simulate: certificate dimension differs from the plant");
  const UncertaintyBounds& pb = cfg.plant.declared_bounds();
  const UncertaintyBounds& cb = cert.bounds;
  if (pb.order != cb.order || pb.L1 > cb.L1 || pb.L2 > cb.L2 || pb.b_lower < cb.b_lower) {
    throw PreconditionError("simulate: plant bounds are not covered by the certificate bounds");
  }
  if (cert.kind == ControllerKind::PD && !equilibrium_shift_check(cfg.plant, cfg.y_star)) {
    throw PreconditionError("simulate: the PD envelope needs f(y*, 0, 0) = 0");
  }
}

std::string at_time(double t) {
  std::ostringstream os;
  os.precision(10);
  os << " at t=" << t;
  return os.str();
}

// Dormand–Prince 5(4) tableau. The closed loop is autonomous, so the nodes c_i are not needed.
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
constexpr std::array<double, 7> kB5{35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0.0};
constexpr std::array<double, 7> kB4{5179.0 / 57600, 0.0,          7571.0 / 16695, 393.0 / 640,
                                    -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

}  // namespace

Trajectory simulate(const SimConfig& cfg, const LyapunovCertificate* cert) {
  check_config(cfg);
  if (cert) check_certificate(cfg, *cert);

  const ClosedLoop loop(cfg);
  const Index n = loop.n();
  const GainVector& g = cfg.gains;

  Trajectory tr;
  tr.kind = g.kind;
  tr.n = n;
  tr.u_star = solve_equilibrium(cfg.plant, cfg.y_star).u_star;

  Vec s(loop.state_dim());
  if (g.kind == ControllerKind::PD) {
    s = cfg.x0;
  } else {
    s << cfg.x0, cfg.integral0.value_or(Vec::Zero(n));
  }

  // ki = 0 only arises in counterexample runs; z₀ is then left unshifted.
  const Vec shift = g.kind != ControllerKind::PD && g.ki != 0.0 ? Vec(tr.u_star / g.ki) : Vec(Vec::Zero(n));
  auto record = [&](double t, const Vec& state) {
    if (!state.allFinite()) throw PlantError("simulate: non-finite state" + at_time(t));
    const Vec e = loop.error(state);
    const Vec u = loop.control(state);
    const Vec ed = loop.edot(state, u);
    Vec z(g.kind == ControllerKind::PID ? 3 * n : 2 * n);
    switch (g.kind) {
      case ControllerKind::PID: z << state.segment(2 * n, n) - shift, e, ed; break;
      case ControllerKind::PD: z << e, ed; break;
      case ControllerKind::PI: z << state.segment(n, n) - shift, e; break;
    }
    tr.times.push_back(t);
    tr.states.push_back(state);
    tr.signal.push_back(g.kind == ControllerKind::PI ? e.norm() : e.norm() + ed.norm());
    tr.e.push_back(e);
    tr.edot.push_back(ed);
    tr.u.push_back(u);
    tr.z.push_back(std::move(z));
  };

  record(0.0, s);
  double t = 0.0;
  const double T = cfg.t_final;

  if (cfg.integrator == Integrator::rk4_fixed) {
    const auto steps = static_cast<long long>(std::ceil(T / cfg.dt_max - 1e-9));
    const double h = T / static_cast<double>(steps);
    for (long long k = 1; k <= steps; ++k) {
      const Vec k1 = loop.rhs(s);
      const Vec k2 = loop.rhs(s + 0.5 * h * k1);
      const Vec k3 = loop.rhs(s + 0.5 * h * k2);
      const Vec k4 = loop.rhs(s + h * k3);
      s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t = k == steps ? T : static_cast<double>(k) * h;
      record(t, s);
    }
  } else {
    double h = std::min(cfg.dt_max, 1e-3 * std::max(1.0, T));
    std::array<Vec, 7> k;
    k[0] = loop.rhs(s);
    std::string last_stage_error;
    while (t < T) {
      const bool last = h >= T - t;
      if (last) h = T - t;
      if (h < 1e-14 * std::max(1.0, std::abs(t))) {
        if (!last_stage_error.empty()) throw PlantError(last_stage_error);
        throw IntegrationError(t, "simulate: step size underflow");
      }
      // A stage that leaves the plant's finite range is an oversized step on
      // a stiff stretch, so it is rejected rather than reported.
      bool stages_finite = true;
      for (int i = 1; i < 7 && stages_finite; ++i) {
        Vec acc = s;
        for (int j = 0; j < i; ++j)
          if (kA[i][j] != 0.0) acc += h * kA[i][j] * k[j];
        try {
          k[i] = loop.rhs(acc);
        } catch (const PlantError& e) {
          stages_finite = false;
          last_stage_error = e.what();
        }
      }
      Vec s5 = s;
      double ratio = 0.0;
      if (stages_finite) {
        Vec err = Vec::Zero(s.size());
        for (int i = 0; i < 7; ++i) {
          if (kB5[i] != 0.0) s5 += h * kB5[i] * k[i];
          err += h * (kB5[i] - kB4[i]) * k[i];
        }
        for (Index i = 0; i < s.size(); ++i) {
          const double scale = cfg.atol + cfg.rtol * std::max(std::abs(s(i)), std::abs(s5(i)));
          ratio = std::max(ratio, std::abs(err(i)) / scale);
        }
      }
      if (!stages_finite || !std::isfinite(ratio)) ratio = 1e10;
      const double factor = ratio == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(ratio, -0.2), 0.2, 5.0);
      if (ratio <= 1.0) {
        t = last ? T : t + h;
        s = std::move(s5);
        k[0] = k[6];  // first-same-as-last
        record(t, s);
      } else {
        ++tr.rejected_steps;
      }
      h = std::min(cfg.dt_max, h * factor);
    }
  }

  if (cert) {
    const Vec& e0 = tr.e.front();
    const Vec& ed0 = tr.edot.front();
    Envelope env;
    env.M = cert->M;
    env.lambda = cert->lambda_decay;
    env.safety = cert->alpha_is_estimate() ? cert->safety : 0.0;
    switch (g.kind) {
      case ControllerKind::PID: env.c0 = e0.norm() + ed0.norm() + tr.u_star.norm(); break;
      case ControllerKind::PD: env.c0 = e0.norm() + ed0.norm(); break;
      case ControllerKind::PI: env.c0 = e0.norm() + tr.u_star.norm(); break;
    }
    tr.envelope = env;
    tr.V.reserve(tr.size());
    tr.envelope_margin.reserve(tr.size());
    for (std::size_t i = 0; i < tr.size(); ++i) {
      tr.V.push_back(lyapunov_value(*cert, tr.z[i]));
      tr.envelope_margin.push_back(env.bound(tr.times[i]) - tr.signal[i]);
    }
  }
  return tr;
}

double lyapunov_value(const LyapunovCertificate& cert, const Vec& z) {
  if (z.size() != cert.P.dim()) throw DimensionError("lyapunov_value: z has wrong length");
  return z.dot(cert.P.matrix() * z);
}

DecayFit fit_decay(std::span<const double> times, std::span<const double> signal, double t_lo, double t_hi) {
  if (times.size() != signal.size()) throw DimensionError("fit_decay: times and signal differ in length");
  if (!(t_lo <= t_hi)) throw UsageError("fit_decay: empty window");
  constexpr double kFloor = 1e-14;
  double st = 0, sy = 0, stt = 0, sty = 0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < t_lo) continue;
    if (times[i] > t_hi || signal[i] < kFloor) break;
    const double y = std::log(signal[i]);
    st += times[i];
    sy += y;
    stt += times[i] * times[i];
    sty += times[i] * y;
    ++m;
  }
  const double md = static_cast<double>(m);
  const double denom = md * stt - st * st;
  if (m < 2 || !(denom > 0.0)) throw UsageError("fit_decay: fewer than two usable samples in window");
  const double slope = (md * sty - st * sy) / denom;
  const double intercept = (sy - slope * st) / md;
  return {-slope, std::exp(intercept), m};
}

DecayFit fit_decay(const Trajectory& traj, double t_lo, double t_hi) {
  return fit_decay(traj.times, traj.signal, t_lo, t_hi);
}

AuditReport envelope_audit(const Trajectory& traj, double rel_atol) {
  if (!traj.envelope || traj.envelope_margin.size() != traj.size()) {
    throw UsageError("envelope_audit: trajectory has no envelope (simulate without certificate?)");
  }
  const Envelope& env = *traj.envelope;
  AuditReport r;
  r.samples = traj.size();
  r.atol = rel_atol * env.bound(0.0);
  r.min_margin = std::numeric_limits<double>::infinity();
  const double raw_lambda = env.lambda / (1.0 - env.safety);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double m = traj.envelope_margin[i];
    r.min_margin = std::min(r.min_margin, m);
    if (m < -r.atol) {
      if (!r.first_violation_time) r.first_violation_time = traj.times[i];
    } else if (env.safety > 0.0) {
      const double raw = env.M * std::exp(-raw_lambda * traj.times[i]) * env.c0 - traj.signal[i];
      if (raw < -r.atol) ++r.near_violations;
    }
  }
  r.pass = !r.first_violation_time.has_value();
  return r;
}

MonitorReport lyapunov_monitor(const Trajectory& traj, const LyapunovCertificate& cert, double rel_tol,
                               double slack_rel) {
  if (cert.kind != traj.kind || cert.n != traj.n) throw UsageError("lyapunov_monitor: certificate kind mismatch");
  MonitorReport r;
  if (traj.size() == 0) return r;
  std::vector<double> V(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) V[i] = lyapunov_value(cert, traj.z[i]);
  r.V0 = V.front();
  // Roundoff floor: z₀ = I − u*/ki is formed by cancellation.
  const double floor = 1e-14 * r.V0;
  double running_min = V.front();
  r.worst_dissipation_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < V.size(); ++i) {
    r.max_increase = std::max(r.max_increase, V[i] - running_min);
    running_min = std::min(running_min, V[i]);
    const double dt = traj.times[i] - traj.times[i - 1];
    const double zz = 0.5 * dt * (traj.z[i - 1].squaredNorm() + traj.z[i].squaredNorm());
    const double excess = (V[i] - V[i - 1]) + cert.alpha * zz - slack_rel * V[i - 1] - floor;
    r.worst_dissipation_excess = std::max(r.worst_dissipation_excess, excess);
  }
  if (V.size() == 1) r.worst_dissipation_excess = 0.0;
  r.non_increasing = r.max_increase <= rel_tol * r.V0;
  r.dissipation_ok = r.worst_dissipation_excess <= 0.0;
  return r;
}

}  // namespace pidcert
