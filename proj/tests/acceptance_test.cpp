// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pidcert/certificates.hpp"
#include "pidcert/equilibrium.hpp"
#include "pidcert/gain_sets.hpp"
#include "pidcert/harness.hpp"
#include "pidcert/planar_pi.hpp"
#include "pidcert/simulator.hpp"

using namespace pidcert;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const char* id, const char* title, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("[%s] %s %s: %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1 -----------------------------------------------------------------------
Outcome gain_set_algebra() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(0.0, 10.0);
  auto draw = [&] {
    double v;
    do v = U(rng);
    while (v == 0.0);
    return v;
  };
  int misses = 0, total = 0;
  for (int t = 0; t < 1000; ++t) {
    const double L1 = draw(), L2 = draw(), b = draw(), ki = draw();
    const auto ub = UncertaintyBounds::second_order(L1, L2, b);
    const double kpid = 2 * ki + (2 * (L1 + L2) + 1) / b;
    misses += !membership(GainVector::pid(kpid, ki, kpid), ub).member;
    // The PD bound is strict; step just past it.
    const double kpd = (2 * (L1 + L2) + 1) / b * (1 + 1e-9);
    misses += !membership(GainVector::pd(kpd, kpd), ub).member;
    const auto ub1 = UncertaintyBounds::first_order(L1, b);
    misses += !membership(GainVector::pi(2 * L1 / b + ki / L1, ki), ub1).member;
    total += 3;
  }
  const double dt = seconds_since(t0);
  return {misses == 0 && dt < 1.0, fmt("%d/%d members, %.3fs", total - misses, total, dt)};
}

// 2 -----------------------------------------------------------------------
Outcome p_matrix() {
  const auto ub = UncertaintyBounds::second_order(1, 1, 1);
  const auto g = GainVector::pid(7, 1, 7);
  const Mat P0 = pid_P0(g, ub);
  Mat expect(3, 3);
  expect << 14, 14, 1, 14, 97, 7, 1, 7, 7;
  const bool exact = P0 == expect;
  const double closed = pid_minor_chain(g, ub).det;
  const double cofactor = P0(0, 0) * (P0(1, 1) * P0(2, 2) - P0(1, 2) * P0(2, 1)) -
                          P0(0, 1) * (P0(1, 0) * P0(2, 2) - P0(1, 2) * P0(2, 0)) +
                          P0(0, 2) * (P0(1, 0) * P0(2, 1) - P0(1, 1) * P0(2, 0));
  const double generic = P0.determinant();
  const bool dets = std::abs(closed - 7547) <= 1e-9 * 7547 && std::abs(cofactor - 7547) <= 1e-9 * 7547 &&
                    std::abs(generic - 7547) <= 1e-9 * 7547;
  return {exact && dets, fmt("P0 exact=%d det closed=%.12g cofactor=%.12g generic=%.12g", exact, closed, cofactor,
                             generic)};
}

// 3 -----------------------------------------------------------------------
Outcome certificate_ordering() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> L(0.0, 2.0), B(0.5, 2.0), K(0.2, 3.0);
  int order_viol = 0, alpha_viol = 0;
  double worst_order = -INFINITY, worst_alpha = -INFINITY;
  for (int t = 0; t < 1000; ++t) {
    const Index n = 1 + t % 3;
    const auto ub = UncertaintyBounds::second_order(L(rng), L(rng), B(rng));
    const auto g = suggest_gains(ControllerKind::PID, ub, {.ki = K(rng), .margin = 0.1});
    const auto cert = certify_margin(g, ub, n, {.samples = 2000, .seed = rng()});
    const auto fu = sample_frozen(ControllerKind::PID, ub, n, rng());
    const auto rep = q_report(g, ub, fu, n);
    const double d = rep.lambda_min_Q0 - 1e-9 - rep.lambda_min_Q;
    worst_order = std::max(worst_order, d);
    order_viol += d > 0;
    const Mat A = assemble_A(g, fu, n);
    const Mat S = cert.P.matrix() * A + A.transpose() * cert.P.matrix() +
                  cert.alpha * Mat::Identity(3 * n, 3 * n);
    const double top = Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (S + S.transpose())).eigenvalues().maxCoeff();
    worst_alpha = std::max(worst_alpha, top);
    alpha_viol += top > 1e-9;
  }
  return {order_viol == 0 && alpha_viol == 0,
          fmt("ordering violations %d (worst %.3g), alpha violations %d (worst lambda_max %.3g)", order_viol,
              worst_order, alpha_viol, worst_alpha)};
}

// 4 -----------------------------------------------------------------------
Outcome exact_margins() {
  const double gamma = pi_exact_margin(GainVector::pi(3, 1), UncertaintyBounds::first_order(1, 1));
  Eigen::Matrix2d Q1;
  Q1 << 2, -1, -1, 10;
  const double oracle = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(Q1).eigenvalues().minCoeff();
  const double beta = pd_exact_margin(GainVector::pd(6, 6), UncertaintyBounds::second_order(1, 1, 1));
  const bool ok = std::abs(gamma - (6 - std::sqrt(17.0))) <= 1e-12 && std::abs(gamma - oracle) <= 1e-12 &&
                  beta == 12.0;
  return {ok, fmt("gamma=%.15f (6-sqrt17=%.15f) beta=%.17g", gamma, 6 - std::sqrt(17.0), beta)};
}

// 5 and 6 share the grid --------------------------------------------------
struct GridResult {
  int cells = 0;
  int envelope_fail = 0;
  int decay_fail = 0;
  int monotone_fail = 0;
  double worst_margin_rel = INFINITY;
  double worst_decay_ratio = INFINITY;
  double worst_increase_rel = 0.0;
  double seconds = 0.0;
};

GridResult run_grid() {
  const auto t0 = Clock::now();
  const std::vector<PlantModel> plants = {
      sinusoidal_scalar_plant(1.0, 1.0, 1.0),
      nonaffine_cubic_u_plant(1.0, 0.5, 1.0),
      tanh_coupled_plant(2, 0.5, 0.5, 1.0, 0.5, 2.0),
  };
  const SuggestOptions gain_choices[] = {{.ki = 1.0, .margin = 0.1}, {.ki = 0.5, .margin = 0.5},
                                         {.ki = 2.0, .margin = 0.2}};
  const double setpoints[] = {0.5, -1.0, 2.0};
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N;
  std::uniform_real_distribution<double> U(0.0, 1.0);
  GridResult r;
  for (const auto& p : plants) {
    const Index n = p.n();
    for (const auto& so : gain_choices) {
      const auto g = suggest_gains(ControllerKind::PID, p.declared_bounds(), so);
      const auto cert = certify_margin(g, p.declared_bounds(), n, {.seed = rng()});
      for (double y : setpoints) {
        Vec x0(2 * n);
        for (Index i = 0; i < 2 * n; ++i) x0(i) = N(rng);
        x0 *= 10.0 * U(rng) / x0.norm();
        SimConfig sc{.plant = p, .gains = g, .y_star = Vec::Constant(n, y), .x0 = x0, .t_final = 20.0};
        const Trajectory tr = simulate(sc, &cert);
        const AuditReport audit = envelope_audit(tr);
        const MonitorReport mon = lyapunov_monitor(tr, cert);
        const DecayFit fit = fit_decay(tr, 0.0, sc.t_final);
        ++r.cells;
        r.envelope_fail += !audit.pass;
        r.decay_fail += !(fit.lambda_emp >= 0.9 * cert.lambda_decay);
        r.monotone_fail += !mon.non_increasing;
        r.worst_margin_rel = std::min(r.worst_margin_rel, audit.min_margin / tr.envelope->bound(0.0));
        r.worst_decay_ratio = std::min(r.worst_decay_ratio, fit.lambda_emp / cert.lambda_decay);
        r.worst_increase_rel = std::max(r.worst_increase_rel, mon.max_increase / mon.V0);
      }
    }
  }
  r.seconds = seconds_since(t0);
  return r;
}

// 7 -----------------------------------------------------------------------
Outcome necessity() {
  const auto ub = UncertaintyBounds::first_order(1, 1);
  const auto kz = necessity_counterexample(CounterexampleCase::ki_zero, ub, GainVector::pi(2, 0), 1.0);
  const auto g = GainVector::pi(0.5, 1);
  const auto ul = necessity_counterexample(CounterexampleCase::unstable_linear, ub, g, 1.0);
  Eigen::Matrix2d A;
  A << 0, 1, -g.ki * ub.b_lower, ub.L() - g.kp * ub.b_lower;
  const double oracle = Eigen::EigenSolver<Eigen::Matrix2d>(A).eigenvalues().real().maxCoeff();
  const bool ok = std::abs(kz.e_final + 1.0) <= 1e-4 && kz.e_inf == -1.0 && kz.non_convergent &&
                  std::abs(ul.max_real_eig - 0.25) <= 1e-9 && std::abs(oracle - 0.25) <= 1e-9 && ul.non_convergent;
  return {ok, fmt("ki_zero e_final=%.8f e_inf=%g; unstable max Re=%.12f (oracle %.12f) early=%.3g late=%.3g",
                  kz.e_final, kz.e_inf, ul.max_real_eig, oracle, ul.early_peak, ul.late_peak)};
}

// 8 -----------------------------------------------------------------------
Outcome semi_cone() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int fails = 0, trials = 0;
  while (trials < 10000) {
    const auto ub = UncertaintyBounds::second_order(5 * U(rng), 5 * U(rng), 0.1 + 5 * U(rng));
    const auto g = GainVector::pid(50 * U(rng), 10 * U(rng), 50 * U(rng));
    if (!omega_pid_membership(g, ub).member) continue;
    const double alpha = 1.0 + 999.0 * U(rng);
    fails += !semi_cone_check(g, ub, std::span<const double>(&alpha, 1));
    ++trials;
  }
  return {fails == 0, fmt("%d/%d scaled members", trials - fails, trials)};
}

// 9 -----------------------------------------------------------------------
Outcome equilibria() {
  std::vector<PlantModel> plants;
  for (auto order : {PlantOrder::second_order, PlantOrder::first_order}) {
    Mat A1(2, 2), A2(2, 2), Th(2, 2);
    A1 << 0.5, -1, 0.3, 0.2;
    A2 << -0.4, 0.1, 0.0, 0.7;
    Th << 2, 3, -3, 1.5;
    plants.push_back(linear_matrix_plant(A1, A2, Th, order));
    plants.push_back(sinusoidal_scalar_plant(1.0, 1.0, 1.0, order));
    plants.push_back(tanh_coupled_plant(3, 1.0, 0.5, 1.0, 0.5, 2.0, order));
    plants.push_back(nonaffine_cubic_u_plant(1.0, 0.5, 1.0, order));
    plants.push_back(rotation_gain_plant(1.0, 10.0, 1.0, 1.0, order));
  }
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> Y(-5.0, 5.0), S(-10.0, 10.0);
  double worst_res = 0.0, worst_spread = 0.0, worst_probe = INFINITY;
  int bad = 0;
  for (const auto& p : plants) {
    const Index n = p.n();
    const double b = p.declared_bounds().b_lower;
    for (int k = 0; k < 50; ++k) {
      Vec y(n);
      for (Index i = 0; i < n; ++i) y(i) = Y(rng);
      const auto base = solve_equilibrium(p, y);
      double spread = 0.0;
      for (int s = 0; s < 20; ++s) {
        Vec guess(n);
        for (Index i = 0; i < n; ++i) guess(i) = S(rng);
        spread = std::max(spread, (solve_equilibrium(p, y, {.initial_guess = guess}).u_star - base.u_star).norm());
      }
      const double probe = monotonicity_probe(p, y, 200, rng());
      worst_res = std::max(worst_res, base.residual_norm);
      worst_spread = std::max(worst_spread, spread);
      worst_probe = std::min(worst_probe, probe - b);
      bad += !(base.residual_norm <= 1e-10 && spread <= 1e-8 && probe >= b - 1e-8);
    }
  }
  return {bad == 0, fmt("%zu plants x 50 setpoints: worst residual %.3g, spread %.3g, probe - b %.3g", plants.size(),
                        worst_res, worst_spread, worst_probe)};
}

// 10 ----------------------------------------------------------------------
Outcome determinism() {
  const Json cfg = load_json_file(std::string(PIDCERT_CONFIGS) + "/sweep_pid.json");
  const ConfigNode node(cfg);
  const auto a = run_sweep(node, 11, 1);
  const auto b = run_sweep(node, 11, 1);
  const auto c = run_sweep(node, 11, 4);
  const auto d = run_sweep(node, 12, 1);
  const bool ok = a.csv == b.csv && a.csv == c.csv && a.csv != d.csv;
  return {ok, fmt("%zu cells, identical reruns=%d, identical across workers=%d, seed-sensitive=%d", a.cells,
                  a.csv == b.csv, a.csv == c.csv, a.csv != d.csv)};
}

}  // namespace

int main() {
  report("AC1", "gain-set algebra", gain_set_algebra);
  report("AC2", "P-matrix reproduction", p_matrix);
  report("AC3", "certificate ordering", certificate_ordering);
  report("AC4", "exact PI/PD margins", exact_margins);

  GridResult grid;
  std::string grid_error;
  try {
    grid = run_grid();
  } catch (const std::exception& e) {
    grid_error = e.what();
  }
  report("AC5", "envelope audit", [&]() -> Outcome {
    if (!grid_error.empty()) return {false, "exception: " + grid_error};
    return {grid.cells == 27 && grid.envelope_fail == 0 && grid.decay_fail == 0 && grid.seconds < 60.0,
            fmt("%d cells, envelope failures %d, decay failures %d, worst margin/envelope0 %.3g, worst "
                "lambda_emp/lambda_cert %.3g, %.1fs",
                grid.cells, grid.envelope_fail, grid.decay_fail, grid.worst_margin_rel, grid.worst_decay_ratio,
                grid.seconds)};
  });
  report("AC6", "Lyapunov monotonicity", [&]() -> Outcome {
    if (!grid_error.empty()) return {false, "exception: " + grid_error};
    return {grid.cells == 27 && grid.monotone_fail == 0,
            fmt("%d cells, violations %d, worst rise/V0 %.3g", grid.cells, grid.monotone_fail,
                grid.worst_increase_rel)};
  });

  report("AC7", "necessity counterexamples", necessity);
  report("AC8", "semi-cone scaling", semi_cone);
  report("AC9", "equilibrium solver", equilibria);
  report("AC10", "sweep determinism", determinism);

  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
