#include "pidcert/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "pidcert/equilibrium.hpp"
#include "pidcert/planar_pi.hpp"

namespace pidcert {

namespace fs = std::filesystem;

namespace {

constexpr double kDecayRatio = 0.9;

struct Context {
  const ConfigNode& cfg;
  const RunOptions& opts;
  std::uint64_t seed;
  std::ostream& out;
  std::ostream& err;
};

ControllerKind parse_kind(const ConfigNode& node) {
  try {
    return parse_controller_kind(node.str());
  } catch (const UsageError& e) {
    node.fail(e.what());
  }
}

PlantOrder order_for(ControllerKind kind) {
  return kind == ControllerKind::PI ? PlantOrder::first_order : PlantOrder::second_order;
}

GainVector gains_from(const ConfigNode& node, ControllerKind kind, const UncertaintyBounds& ub) {
  if (auto s = node.find("suggest")) {
    s->only({"ki", "margin"});
    SuggestOptions so;
    so.ki = s->number_or("ki", so.ki);
    so.margin = s->number_or("margin", so.margin);
    return suggest_gains(kind, ub, so);
  }
  return parse_gains(node, kind);
}

// Top-level "gains" object, or "suggest" when absent.
GainVector top_level_gains(const ConfigNode& cfg, ControllerKind kind, const UncertaintyBounds& ub) {
  if (auto g = cfg.find("gains")) return gains_from(*g, kind, ub);
  if (auto s = cfg.find("suggest")) {
    Json wrapped;
    wrapped["suggest"] = s->raw();
    return gains_from(ConfigNode(wrapped, cfg.path()), kind, ub);
  }
  cfg.fail("needs 'gains' or 'suggest'");
}

CertifyOptions certify_options(const ConfigNode& cfg, std::uint64_t seed, int workers) {
  CertifyOptions co;
  co.seed = seed;
  co.workers = workers;
  if (auto c = cfg.find("certify"); c && c->is_object()) {
    c->only({"strategy", "samples", "safety"});
    if (auto s = c->find("strategy")) co.strategy = parse_certificate_method(s->str());
    if (auto s = c->find("samples")) {
      const auto v = s->integer();
      if (v < 1) s->fail("must be >= 1");
      co.samples = static_cast<int>(v);
    }
    if (auto s = c->find("safety")) {
      co.safety = s->non_negative();
      if (co.safety >= 1.0) s->fail("must be < 1");
    }
  }
  return co;
}

void apply_simulation(const ConfigNode& cfg, SimConfig& sc) {
  auto s = cfg.find("simulation");
  if (!s) return;
  s->only({"t_final", "dt_max", "integrator", "rtol", "atol"});
  if (auto v = s->find("t_final")) sc.t_final = v->positive();
  if (auto v = s->find("dt_max")) sc.dt_max = v->positive();
  if (auto v = s->find("rtol")) sc.rtol = v->positive();
  if (auto v = s->find("atol")) sc.atol = v->positive();
  if (auto v = s->find("integrator")) sc.integrator = parse_integrator(v->str());
}

// A bare number is broadcast to all n entries.
Vec sized_vector(const ConfigNode& node, Index n) {
  if (node.is_number()) return Vec::Constant(n, node.number());
  const Vec v = node.vector();
  if (v.size() != n) node.fail("expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
  return v;
}

void write_file(const Context& ctx, const std::string& name, const std::string& content) {
  if (!ctx.opts.out_dir) return;
  fs::create_directories(*ctx.opts.out_dir);
  const fs::path path = fs::path(*ctx.opts.out_dir) / name;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write " + path.string());
  f << content;
}

ExitCode emit(const Context& ctx, const Json& report, bool ok) {
  const std::string text = report.dump(2) + "\n";
  ctx.out << text;
  write_file(ctx, ctx.opts.mode + ".json", text);
  return ok ? ExitCode::ok : ExitCode::check_failed;
}

UncertaintyBounds bounds_for(const ConfigNode& cfg, ControllerKind kind) {
  const ConfigNode b = cfg.at("bounds");
  const PlantOrder order = b.has("order") ? parse_plant_order(b.at("order").str()) : order_for(kind);
  return parse_bounds(b, order);
}

ExitCode mode_gains(const Context& ctx) {
  const ControllerKind kind = parse_kind(ctx.cfg.at("kind"));
  const UncertaintyBounds ub = bounds_for(ctx.cfg, kind);
  const GainVector g = top_level_gains(ctx.cfg, kind, ub);
  const MembershipReport m = membership(g, ub);
  Json r;
  r["mode"] = "gains";
  r["gains"] = to_json(g);
  r["bounds"] = to_json(ub);
  r["membership"] = to_json(m);
  if (kind == ControllerKind::PI) r["membership_pi_prime"] = to_json(omega_pi_prime_membership(g, ub));
  return emit(ctx, r, m.member);
}

ExitCode mode_certify(const Context& ctx) {
  const ControllerKind kind = parse_kind(ctx.cfg.at("kind"));
  const UncertaintyBounds ub = bounds_for(ctx.cfg, kind);
  const GainVector g = top_level_gains(ctx.cfg, kind, ub);
  const auto n_node = ctx.cfg.find("n");
  const std::int64_t n = n_node ? n_node->integer() : 1;
  if (n < 1 || n > 16) (n_node ? *n_node : ctx.cfg).fail("n must be in [1, 16]");

  Json r;
  r["mode"] = "certify";
  const MembershipReport m = membership(g, ub);
  r["membership"] = to_json(m);
  bool ok = m.member;
  if (kind == ControllerKind::PID) {
    const SchurChainBounds sb = schur_chain_bounds(g, ub);
    r["schur_chain_bounds"] = {{"d1_lower", sb.d1_lower}, {"e1_lower", sb.e1_lower}, {"b1_upper", sb.b1_upper},
                               {"pass", sb.pass}};
  }
  if (m.member) {
    try {
      const auto cert = certify_margin(g, ub, n, certify_options(ctx.cfg, ctx.seed, ctx.opts.workers));
      r["certificate"] = to_json(cert);
      write_file(ctx, "certificate.json", r["certificate"].dump(2) + "\n");
    } catch (const CertificateError& e) {
      r["certificate"] = nullptr;
      r["error"] = e.what();
      ok = false;
    }
  } else {
    r["certificate"] = nullptr;
    r["error"] = "gains are outside the admissible set";
  }
  return emit(ctx, r, ok);
}

ExitCode mode_simulate(const Context& ctx) {
  const ConfigNode& cfg = ctx.cfg;
  const PlantModel plant = parse_plant(cfg.at("plant"));
  const ControllerKind kind = parse_kind(cfg.at("kind"));
  const UncertaintyBounds ub = cfg.has("bounds") ? bounds_for(cfg, kind) : plant.declared_bounds();
  const GainVector g = top_level_gains(cfg, kind, ub);
  const Index n = plant.n();

  SimConfig sc{plant, g, sized_vector(cfg.at("y_star"), n),
               sized_vector(cfg.at("x0"), plant.order() == PlantOrder::first_order ? n : 2 * n)};
  if (auto i0 = cfg.find("integral0")) sc.integral0 = sized_vector(*i0, n);
  apply_simulation(cfg, sc);

  std::optional<LyapunovCertificate> cert;
  Json r;
  r["mode"] = "simulate";
  r["plant"] = plant.name();
  r["gains"] = to_json(g);
  if (auto path = cfg.find("certificate")) {
    const Json cj = load_json_file(path->str());
    cert = certificate_from_json(ConfigNode(cj, path->str()));
  } else if (const auto c = cfg.find("certify"); !c || c->is_object() || c->boolean()) {
    try {
      cert = certify_margin(g, ub, n, certify_options(cfg, ctx.seed, ctx.opts.workers));
    } catch (const PreconditionError& e) {
      r["error"] = e.what();
      return emit(ctx, r, false);
    } catch (const CertificateError& e) {
      r["error"] = e.what();
      return emit(ctx, r, false);
    }
  }

  const Trajectory tr = simulate(sc, cert ? &*cert : nullptr);
  std::ostringstream csv;
  write_trajectory_csv(csv, tr);
  write_file(ctx, "trajectory.csv", csv.str());

  r["u_star"] = vector_json(tr.u_star);
  r["samples"] = tr.size();
  r["e_final"] = vector_json(tr.e.back());
  bool ok = true;
  if (cert) {
    const AuditReport audit = envelope_audit(tr);
    const MonitorReport mon = lyapunov_monitor(tr, *cert);
    r["certificate"] = to_json(*cert);
    r["audit"] = to_json(audit);
    r["monitor"] = to_json(mon);
    try {
      const DecayFit fit = fit_decay(tr, 0.0, sc.t_final);
      r["fit"] = to_json(fit);
      r["decay_ok"] = fit.lambda_emp >= kDecayRatio * cert->lambda_decay;
      ok = ok && fit.lambda_emp >= kDecayRatio * cert->lambda_decay;
    } catch (const UsageError&) {
      // The error reached zero immediately; there is nothing to fit.
      r["fit"] = nullptr;
    }
    ok = ok && audit.pass && mon.non_increasing;
  }
  return emit(ctx, r, ok);
}

ExitCode mode_planar(const Context& ctx) {
  const ConfigNode& cfg = ctx.cfg;
  Json r;
  r["mode"] = "planar";
  bool ok = true;
  if (cfg.has("plant")) {
    const PlantModel plant = parse_plant(cfg.at("plant"));
    const GainVector g = top_level_gains(cfg, ControllerKind::PI, plant.declared_bounds());
    const ConfigNode ys = cfg.at("y_star");
    const PlanarField field(plant, g, ys.number());
    GridSpec grid;
    if (auto gn = cfg.find("grid")) {
      gn->only({"half_width", "points"});
      grid.half_width = gn->number_or("half_width", grid.half_width);
      grid.points = static_cast<int>(gn->integer_or("points", grid.points));
    }
    const ConditionReport c = jacobian_conditions(field, grid);
    const UncertaintyBounds& ub = plant.declared_bounds();
    r["gains"] = to_json(g);
    r["u_star"] = field.u_star();
    r["in_omega_pi"] = omega_pi_membership(g, ub).member;
    r["in_omega_pi_prime"] = omega_pi_prime_membership(g, ub).member;
    r["conditions"] = {{"grid_points", c.grid_points},
                       {"max_trace", c.max_trace},
                       {"min_det", c.min_det},
                       {"analytic_trace_bound", c.analytic_trace_bound},
                       {"analytic_pass", c.analytic_pass},
                       {"grid_pass", c.grid_pass},
                       {"bound_respected", c.bound_respected},
                       {"sufficient", c.sufficient},
                       {"rate", "none claimed"}};
    ok = c.sufficient;
  }
  Json cases = Json::array();
  if (auto list = cfg.find("counterexamples")) {
    for (const auto& item : list->items()) {
      item.only({"case", "bounds", "gains", "y_star", "t_final"});
      const auto which = parse_counterexample_case(item.at("case").str());
      const UncertaintyBounds ub = parse_bounds(item.at("bounds"), PlantOrder::first_order);
      const GainVector g = parse_gains(item.at("gains"), ControllerKind::PI);
      CounterexampleOptions co;
      co.t_final = item.number_or("t_final", 0.0);
      const auto rep = necessity_counterexample(which, ub, g, item.at("y_star").number(), co);
      Json cj;
      cj["case"] = std::string(to_string(which));
      cj["gains"] = to_json(g);
      cj["t_final"] = rep.t_final;
      if (which == CounterexampleCase::ki_zero) cj["e_inf"] = rep.e_inf;
      cj["max_real_eig"] = rep.max_real_eig;
      cj["e_final"] = rep.e_final;
      cj["early_peak"] = rep.early_peak;
      cj["late_peak"] = rep.late_peak;
      cj["non_convergent"] = rep.non_convergent;
      ok = ok && rep.non_convergent;
      cases.push_back(std::move(cj));
    }
  }
  r["counterexamples"] = std::move(cases);
  return emit(ctx, r, ok);
}

ExitCode mode_verify_class(const Context& ctx) {
  const ConfigNode& cfg = ctx.cfg;
  const PlantModel plant = parse_plant(cfg.at("plant"));
  ValidationOptions vo;
  vo.seed = ctx.seed;
  if (auto v = cfg.find("validation")) {
    v->only({"samples", "box_radius"});
    vo.samples = static_cast<int>(v->integer_or("samples", vo.samples));
    vo.box_radius = v->number_or("box_radius", vo.box_radius);
  }
  const ValidationReport vr = validate_class_membership(plant, vo);
  Json r;
  r["mode"] = "verify-class";
  r["plant"] = plant.name();
  r["declared_bounds"] = to_json(plant.declared_bounds());
  r["validation"] = {{"samples", vr.samples},
                     {"max_norm_jac_x1", vr.max_norm_jac_x1},
                     {"max_norm_jac_x2", vr.max_norm_jac_x2},
                     {"min_sym_jac_u", vr.min_sym_jac_u},
                     {"max_jacobian_discrepancy", vr.max_jacobian_discrepancy},
                     {"bounds_ok", vr.bounds_ok},
                     {"jacobians_ok", vr.jacobians_ok},
                     {"pass", vr.pass}};
  bool ok = vr.pass;

  const Index n = plant.n();
  const double b = plant.declared_bounds().b_lower;
  const int starts = static_cast<int>(cfg.integer_or("starts", 20));
  std::mt19937_64 rng(ctx.seed);
  std::uniform_real_distribution<double> box(-10.0, 10.0);
  Json eq = Json::array();
  if (auto sps = cfg.find("setpoints")) {
    for (const auto& sp : sps->items()) {
      const Vec y = sized_vector(sp, n);
      const EquilibriumSolution base = solve_equilibrium(plant, y);
      double spread = 0.0;
      for (int s = 0; s < starts; ++s) {
        Vec guess(n);
        for (Index i = 0; i < n; ++i) guess(i) = box(rng);
        EquilibriumOptions eo;
        eo.initial_guess = guess;
        spread = std::max(spread, (solve_equilibrium(plant, y, eo).u_star - base.u_star).norm());
      }
      const double probe = monotonicity_probe(plant, y, 200, rng());
      const bool pass = base.residual_norm <= 1e-10 && spread <= 1e-8 && probe >= b - 1e-8;
      ok = ok && pass;
      eq.push_back({{"y_star", vector_json(y)},
                    {"u_star", vector_json(base.u_star)},
                    {"residual", base.residual_norm},
                    {"start_spread", spread},
                    {"monotonicity", probe},
                    {"pass", pass}});
    }
  }
  r["equilibria"] = std::move(eq);
  return emit(ctx, r, ok);
}

ExitCode mode_sweep(const Context& ctx) {
  const SweepOutput s = run_sweep(ctx.cfg, ctx.seed, ctx.opts.workers);
  if (ctx.opts.out_dir) {
    write_file(ctx, "sweep.csv", s.csv);
  } else {
    ctx.out << s.csv;
  }
  Json r;
  r["mode"] = "sweep";
  r["cells"] = s.cells;
  r["passed"] = s.passed;
  r["non_members"] = s.non_members;
  r["failures"] = s.failures;
  r["pass_fraction"] = s.pass_fraction;
  const std::string text = r.dump(2) + "\n";
  (ctx.opts.out_dir ? ctx.out : ctx.err) << text;
  write_file(ctx, "sweep.json", text);
  return s.failures == 0 ? ExitCode::ok : ExitCode::check_failed;
}

// Sweep cells -------------------------------------------------------------

struct SweepSpec {
  ControllerKind kind;
  std::vector<PlantModel> plants;
  std::vector<ConfigNode> gains;
  std::vector<ConfigNode> setpoints;
  std::vector<ConfigNode> initial_states;
  int random_states = 0;
  double random_radius = 10.0;
  CertifyOptions certify;
  const ConfigNode* root;
};

std::string csv_field(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::string joined(const Vec& v) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) s += (i ? " " : "") + format_double(v(i));
  return s;
}

constexpr const char* kSweepHeader =
    "cell,plant,kind,kp,ki,kd,y_star,x0,member,alpha,alpha_is_estimate,lambda_cert,M,envelope_pass,min_margin,"
    "near_violations,v_non_increasing,lambda_emp,pass,status\n";

struct CellResult {
  std::string row;
  bool member = false;
  bool pass = false;
};

CellResult run_cell(const SweepSpec& spec, std::size_t index, std::uint64_t seed) {
  const std::size_t ns = spec.setpoints.size();
  const std::size_t nx = spec.random_states > 0 ? static_cast<std::size_t>(spec.random_states)
                                                 : spec.initial_states.size();
  const std::size_t ix = index % nx;
  const std::size_t is = (index / nx) % ns;
  const std::size_t ig = (index / (nx * ns)) % spec.gains.size();
  const std::size_t ip = index / (nx * ns * spec.gains.size());
  const PlantModel& plant = spec.plants[ip];
  const UncertaintyBounds& ub = plant.declared_bounds();
  const Index n = plant.n();
  const std::uint64_t cs = cell_seed(seed, index);

  std::ostringstream row;
  row << index << ',' << csv_field(plant.name()) << ',' << to_string(spec.kind) << ',';
  CellResult res;
  std::string tail;
  try {
    const GainVector g = gains_from(spec.gains[ig], spec.kind, ub);
    row << format_double(g.kp) << ',' << format_double(g.ki) << ',' << format_double(g.kd) << ',';
    const Vec y = sized_vector(spec.setpoints[is], n);
    const Index xd = plant.order() == PlantOrder::first_order ? n : 2 * n;
    Vec x0;
    if (spec.random_states > 0) {
      std::mt19937_64 rng(cs ^ 0xa0761d6478bd642fULL);
      std::normal_distribution<double> normal;
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      x0.resize(xd);
      for (Index i = 0; i < xd; ++i) x0(i) = normal(rng);
      x0 *= spec.random_radius * unit(rng) / std::max(x0.norm(), 1e-300);
    } else {
      x0 = sized_vector(spec.initial_states[ix], xd);
    }
    row << joined(y) << ',' << joined(x0) << ',';
    res.member = membership(g, ub).member;
    if (!res.member) {
      row << "0,,,,,,,,,,0,non_member";
      res.row = row.str();
      return res;
    }
    CertifyOptions co = spec.certify;
    co.seed = cs;
    co.workers = 1;
    const LyapunovCertificate cert = certify_margin(g, ub, n, co);
    SimConfig sc{plant, g, y, x0};
    apply_simulation(*spec.root, sc);
    const Trajectory tr = simulate(sc, &cert);
    const AuditReport audit = envelope_audit(tr);
    const MonitorReport mon = lyapunov_monitor(tr, cert);
    const DecayFit fit = fit_decay(tr, 0.0, sc.t_final);
    res.pass = audit.pass && mon.non_increasing && fit.lambda_emp >= kDecayRatio * cert.lambda_decay;
    row << "1," << format_double(cert.alpha) << ',' << (cert.alpha_is_estimate() ? 1 : 0) << ','
        << format_double(cert.lambda_decay) << ',' << format_double(cert.M) << ',' << (audit.pass ? 1 : 0) << ','
        << format_double(audit.min_margin) << ',' << audit.near_violations << ',' << (mon.non_increasing ? 1 : 0)
        << ',' << format_double(fit.lambda_emp) << ',' << (res.pass ? 1 : 0) << ',' << (res.pass ? "ok" : "check_failed");
    res.row = row.str();
  } catch (const std::exception& e) {
    // Pad whatever columns were written so every row has the same width.
    std::string partial = row.str();
    const auto commas = static_cast<int>(std::count(partial.begin(), partial.end(), ','));
    for (int c = commas; c < 18; ++c) partial += ',';
    partial += "0,error: " + csv_field(e.what());
    res.row = partial;
    res.member = true;
    res.pass = false;
  }
  return res;
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

PlantModel parse_plant(const ConfigNode& node) {
  node.only({"family", "order", "params"});
  FamilyParams fp;
  if (auto o = node.find("order")) {
    try {
      fp.order = parse_plant_order(o->str());
    } catch (const UsageError& e) {
      o->fail(e.what());
    }
  }
  if (auto p = node.find("params")) {
    for (const auto& key : p->keys()) {
      const ConfigNode v = p->at(key);
      if (v.is_number()) {
        fp.scalars[key] = v.number();
      } else {
        fp.matrices[key] = v.matrix();
      }
    }
  }
  const ConfigNode fam = node.at("family");
  try {
    return build_family(fam.str(), fp);
  } catch (const UsageError& e) {
    fam.fail(e.what());
  } catch (const DimensionError& e) {
    fam.fail(e.what());
  }
}

SweepOutput run_sweep(const ConfigNode& config, std::uint64_t seed, int workers) {
  const ConfigNode sw = config.at("sweep");
  sw.only({"kind", "plants", "gains", "setpoints", "initial_states"});
  SweepSpec spec{parse_kind(sw.at("kind")), {}, {}, {}, {}, 0, 10.0, certify_options(config, seed, 1), &config};
  for (const auto& p : sw.at("plants").items()) spec.plants.push_back(parse_plant(p));
  spec.gains = sw.at("gains").items();
  spec.setpoints = sw.at("setpoints").items();
  const ConfigNode xs = sw.at("initial_states");
  if (xs.is_object()) {
    xs.only({"random", "radius"});
    const auto k = xs.at("random").integer();
    if (k < 1) xs.at("random").fail("must be >= 1");
    spec.random_states = static_cast<int>(k);
    spec.random_radius = xs.number_or("radius", 10.0);
  } else {
    spec.initial_states = xs.items();
  }
  for (const auto* list : {&spec.gains, &spec.setpoints}) {
    if (list->empty()) sw.fail("gains and setpoints must be non-empty");
  }
  if (spec.plants.empty()) sw.at("plants").fail("must be non-empty");
  if (spec.random_states == 0 && spec.initial_states.empty()) xs.fail("must be non-empty");

  const std::size_t nx = spec.random_states > 0 ? static_cast<std::size_t>(spec.random_states)
                                                 : spec.initial_states.size();
  const std::size_t cells = spec.plants.size() * spec.gains.size() * spec.setpoints.size() * nx;
  std::vector<CellResult> results(cells);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells; i = next++) results[i] = run_cell(spec, i, seed);
  };
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), cells);
  if (w <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < w; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SweepOutput out;
  out.cells = cells;
  std::string csv = kSweepHeader;
  for (const auto& r : results) {
    csv += r.row + '\n';
    out.passed += r.pass ? 1 : 0;
    out.non_members += r.member ? 0 : 1;
    out.failures += (r.member && !r.pass) ? 1 : 0;
  }
  out.pass_fraction = cells ? static_cast<double>(out.passed) / static_cast<double>(cells) : 0.0;
  csv += "summary,,,,,,,,,,,,,,,,,," + format_double(out.pass_fraction) + ",cells=" + std::to_string(cells) +
         " passed=" + std::to_string(out.passed) + " non_members=" + std::to_string(out.non_members) +
         " failures=" + std::to_string(out.failures) + '\n';
  out.csv = std::move(csv);
  return out;
}

ExitCode run_config(const std::string& mode, const Json& config, const RunOptions& opts, std::ostream& out,
                    std::ostream& err) {
  try {
    const ConfigNode cfg(config);
    if (!cfg.is_object()) cfg.fail("config must be a JSON object");
    if (auto m = cfg.find("mode"); m && m->str() != mode) {
      m->fail("config is for mode '" + m->str() + "', not '" + mode + "'");
    }
    const std::uint64_t seed = opts.seed ? *opts.seed : (cfg.has("seed") ? cfg.at("seed").seed() : 0);
    RunOptions o = opts;
    o.mode = mode;
    const Context ctx{cfg, o, seed, out, err};
    if (mode == "gains") return mode_gains(ctx);
    if (mode == "certify") return mode_certify(ctx);
    if (mode == "simulate") return mode_simulate(ctx);
    if (mode == "sweep") return mode_sweep(ctx);
    if (mode == "planar") return mode_planar(ctx);
    if (mode == "verify-class") return mode_verify_class(ctx);
    throw UsageError("unknown mode '" + mode + "'");
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::usage;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::usage;
  } catch (const Error& e) {
    err << "check failed: " << e.what() << '\n';
    return ExitCode::check_failed;
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::usage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::usage;
  }
}

ExitCode run(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  Json config;
  try {
    config = load_json_file(opts.config_path);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::usage;
  }
  return run_config(opts.mode, config, opts, out, err);
}

}  // namespace pidcert
