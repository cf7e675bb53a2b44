#include "pidcert/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace pidcert {

Json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    // Recover line/column from the byte offset; e.what() carries the detail.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col), e.what());
  }
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_json_text(buf.str(), path);
}

void ConfigNode::fail(const std::string& what) const { throw ConfigError(path_, what); }

bool ConfigNode::has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

ConfigNode ConfigNode::at(const std::string& key) const {
  if (!j_->is_object()) fail("expected an object");
  auto it = j_->find(key);
  if (it == j_->end()) fail("missing required field '" + key + "'");
  return ConfigNode(*it, path_ + "." + key);
}

std::optional<ConfigNode> ConfigNode::find(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return at(key);
}

std::vector<ConfigNode> ConfigNode::items() const {
  if (!j_->is_array()) fail("expected an array");
  std::vector<ConfigNode> out;
  for (std::size_t i = 0; i < j_->size(); ++i) out.emplace_back((*j_)[i], path_ + "[" + std::to_string(i) + "]");
  return out;
}

std::vector<std::string> ConfigNode::keys() const {
  if (!j_->is_object()) fail("expected an object");
  std::vector<std::string> out;
  for (auto it = j_->begin(); it != j_->end(); ++it) out.push_back(it.key());
  return out;
}

void ConfigNode::only(std::initializer_list<const char*> allowed) const {
  for (const auto& k : keys()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError(path_ + "." + k, "unknown field");
  }
}

double ConfigNode::number() const {
  if (!j_->is_number()) fail("expected a number");
  const double v = j_->get<double>();
  if (!std::isfinite(v)) fail("expected a finite number");
  return v;
}

double ConfigNode::positive() const {
  const double v = number();
  if (!(v > 0.0)) fail("must be > 0");
  return v;
}

double ConfigNode::non_negative() const {
  const double v = number();
  if (!(v >= 0.0)) fail("must be >= 0");
  return v;
}

std::int64_t ConfigNode::integer() const {
  if (!j_->is_number_integer()) fail("expected an integer");
  return j_->get<std::int64_t>();
}

std::uint64_t ConfigNode::seed() const {
  if (j_->is_number_unsigned()) return j_->get<std::uint64_t>();
  if (j_->is_number_integer() && j_->get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j_->get<std::int64_t>());
  fail("expected a non-negative 64-bit integer");
}

bool ConfigNode::boolean() const {
  if (!j_->is_boolean()) fail("expected true or false");
  return j_->get<bool>();
}

std::string ConfigNode::str() const {
  if (!j_->is_string()) fail("expected a string");
  return j_->get<std::string>();
}

Vec ConfigNode::vector() const {
  if (j_->is_number()) return Vec::Constant(1, number());
  const auto xs = items();
  if (xs.empty()) fail("expected a non-empty array of numbers");
  Vec v(static_cast<Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) v(static_cast<Index>(i)) = xs[i].number();
  return v;
}

Mat ConfigNode::matrix() const {
  if (j_->is_number()) return Mat::Constant(1, 1, number());
  const auto rows = items();
  if (rows.empty()) fail("expected a non-empty array of rows");
  const Vec first = rows[0].vector();
  Mat m(static_cast<Index>(rows.size()), first.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Vec r = rows[i].vector();
    if (r.size() != first.size()) rows[i].fail("row length differs from row 0");
    m.row(static_cast<Index>(i)) = r.transpose();
  }
  return m;
}

double ConfigNode::number_or(const std::string& key, double fallback) const {
  auto n = find(key);
  return n ? n->number() : fallback;
}

std::int64_t ConfigNode::integer_or(const std::string& key, std::int64_t fallback) const {
  auto n = find(key);
  return n ? n->integer() : fallback;
}

bool ConfigNode::boolean_or(const std::string& key, bool fallback) const {
  auto n = find(key);
  return n ? n->boolean() : fallback;
}

std::string ConfigNode::str_or(const std::string& key, const std::string& fallback) const {
  auto n = find(key);
  return n ? n->str() : fallback;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json to_json(const GainVector& g) {
  Json j;
  j["kind"] = std::string(to_string(g.kind));
  j["kp"] = g.kp;
  j["ki"] = g.ki;
  j["kd"] = g.kd;
  return j;
}

Json to_json(const UncertaintyBounds& ub) {
  Json j;
  j["order"] = std::string(to_string(ub.order));
  if (ub.order == PlantOrder::first_order) {
    j["L"] = ub.L1;
  } else {
    j["L1"] = ub.L1;
    j["L2"] = ub.L2;
  }
  j["b"] = ub.b_lower;
  return j;
}

Json to_json(const MembershipReport& r) {
  Json j;
  j["member"] = r.member;
  j["kbar"] = r.kbar;
  Json m = Json::object();
  for (const auto& mg : r.margins) m[mg.name] = mg.slack;
  j["margins"] = std::move(m);
  return j;
}

Json to_json(const LyapunovCertificate& c) {
  Json j;
  j["kind"] = std::string(to_string(c.kind));
  j["n"] = c.n;
  j["gains"] = to_json(c.gains);
  j["bounds"] = to_json(c.bounds);
  j["alpha"] = c.alpha;
  j["alpha_raw"] = c.alpha_raw;
  j["alpha_is_estimate"] = c.alpha_is_estimate();
  j["lambda_min_P"] = c.lambda_min_P;
  j["lambda_max_P"] = c.lambda_max_P;
  j["M"] = c.M;
  j["lambda"] = c.lambda_decay;
  j["method"] = std::string(to_string(c.method));
  j["seed"] = c.seed;
  j["samples"] = c.samples;
  j["safety"] = c.safety;
  return j;
}

Json to_json(const AuditReport& r) {
  Json j;
  j["pass"] = r.pass;
  j["samples"] = r.samples;
  j["min_margin"] = r.min_margin;
  j["atol"] = r.atol;
  j["first_violation_time"] = r.first_violation_time ? Json(*r.first_violation_time) : Json(nullptr);
  j["near_violations"] = r.near_violations;
  return j;
}

Json to_json(const MonitorReport& r) {
  Json j;
  j["V0"] = r.V0;
  j["non_increasing"] = r.non_increasing;
  j["max_increase"] = r.max_increase;
  j["dissipation_ok"] = r.dissipation_ok;
  j["worst_dissipation_excess"] = r.worst_dissipation_excess;
  return j;
}

Json to_json(const DecayFit& f) {
  Json j;
  j["lambda_emp"] = f.lambda_emp;
  j["M_emp"] = f.M_emp;
  j["points"] = f.points;
  return j;
}

Json vector_json(const Vec& v) {
  Json j = Json::array();
  for (Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

GainVector parse_gains(const ConfigNode& node, ControllerKind kind) {
  node.only({"kind", "kp", "ki", "kd"});
  if (auto k = node.find("kind"); k && parse_controller_kind(k->str()) != kind) {
    k->fail("gain kind does not match the controller kind");
  }
  const double kp = node.at("kp").number();
  switch (kind) {
    case ControllerKind::PID: return GainVector::pid(kp, node.at("ki").number(), node.at("kd").number());
    case ControllerKind::PD: return GainVector::pd(kp, node.at("kd").number());
    case ControllerKind::PI: return GainVector::pi(kp, node.at("ki").number());
  }
  node.fail("bad kind");
}

UncertaintyBounds parse_bounds(const ConfigNode& node, PlantOrder order) {
  node.only({"order", "L", "L1", "L2", "b", "b_lower"});
  if (auto o = node.find("order"); o && parse_plant_order(o->str()) != order) o->fail("bounds order mismatch");
  const double b = node.has("b") ? node.at("b").positive() : node.at("b_lower").positive();
  if (order == PlantOrder::first_order) {
    return UncertaintyBounds::first_order(node.has("L") ? node.at("L").non_negative() : node.at("L1").non_negative(),
                                          b);
  }
  return UncertaintyBounds::second_order(node.at("L1").non_negative(), node.at("L2").non_negative(), b);
}

LyapunovCertificate certificate_from_json(const ConfigNode& node) {
  const ControllerKind kind = parse_controller_kind(node.at("kind").str());
  const auto nn = node.at("n");
  const std::int64_t n = nn.integer();
  if (n < 1) nn.fail("must be >= 1");
  const ConfigNode bn = node.at("bounds");
  const PlantOrder order = parse_plant_order(bn.str_or("order", kind == ControllerKind::PI ? "first_order" : "second_order"));
  const UncertaintyBounds ub = parse_bounds(bn, order);
  const GainVector g = parse_gains(node.at("gains"), kind);
  const CertificateMethod method = parse_certificate_method(node.at("method").str());
  const double alpha = node.at("alpha").positive();

  LyapunovCertificate c = make_certificate(g, ub, static_cast<Index>(n), alpha, method);
  c.alpha_raw = node.number_or("alpha_raw", alpha);
  c.M = node.at("M").positive();
  c.lambda_decay = node.at("lambda").positive();
  if (auto s = node.find("seed")) c.seed = s->seed();
  c.samples = static_cast<int>(node.integer_or("samples", 0));
  c.safety = node.number_or("safety", 0.0);
  return c;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const Index n = traj.n;
  const Index x_dim = traj.kind == ControllerKind::PI ? n : 2 * n;
  os << 't';
  for (Index i = 0; i < x_dim; ++i) os << ",x_" << i;
  for (const char* name : {"e", "edot", "u"})
    for (Index i = 0; i < n; ++i) os << ',' << name << '_' << i;
  os << ",V,envelope_margin\n";
  const bool certified = traj.V.size() == traj.size();
  for (std::size_t k = 0; k < traj.size(); ++k) {
    os << format_double(traj.times[k]);
    for (Index i = 0; i < x_dim; ++i) os << ',' << format_double(traj.states[k](i));
    for (const auto* v : {&traj.e[k], &traj.edot[k], &traj.u[k]})
      for (Index i = 0; i < n; ++i) os << ',' << format_double((*v)(i));
    if (certified) {
      os << ',' << format_double(traj.V[k]) << ',' << format_double(traj.envelope_margin[k]) << '\n';
    } else {
      os << ",,\n";
    }
  }
}

}  // namespace pidcert
