#include "pidcert/plant_models.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "pidcert/errors.hpp"
#include "pidcert/matrix_kernel.hpp"

namespace pidcert {

namespace {

std::string format_point(const Vec& x1, const Vec& x2, const Vec& u) {
  std::ostringstream os;
  os.precision(17);
  os << "x1=[" << x1.transpose() << "] x2=[" << x2.transpose() << "] u=[" << u.transpose() << "]";
  return os.str();
}

}  // namespace

PlantModel::PlantModel(Definition def) : def_(std::move(def)) {
  if (def_.n < 1) throw UsageError("plant '" + def_.name + "': dimension must be >= 1");
  if (!def_.f) throw UsageError("plant '" + def_.name + "': missing dynamics function");
  def_.declared_bounds.validate();
  if (def_.declared_bounds.order != def_.order) {
    throw UsageError("plant '" + def_.name + "': declared bounds are for a different plant order");
  }
}

bool PlantModel::has_analytic_jacobians() const {
  const bool x2_ok = def_.order == PlantOrder::first_order || static_cast<bool>(def_.jac_x2);
  return def_.jac_x1 && x2_ok && def_.jac_u;
}

void PlantModel::check_sizes(const Vec& x1, const Vec& x2, const Vec& u) const {
  if (x1.size() != def_.n || u.size() != def_.n ||
      (def_.order == PlantOrder::second_order && x2.size() != def_.n)) {
    throw DimensionError("plant '" + def_.name + "': argument dimension mismatch (n = " +
                         std::to_string(def_.n) + ")");
  }
}

Vec PlantModel::eval(const Vec& x1, const Vec& x2, const Vec& u) const {
  check_sizes(x1, x2, u);
  Vec out = def_.f(x1, x2, u);
  if (out.size() != def_.n) throw DimensionError("plant '" + def_.name + "': f returned wrong size");
  if (!out.allFinite()) {
    throw PlantError("plant '" + def_.name + "': non-finite value at " + format_point(x1, x2, u));
  }
  return out;
}

Vec PlantModel::eval(const Vec& x, const Vec& u) const { return eval(x, zero(), u); }

Mat PlantModel::jac_x1(const Vec& x1, const Vec& x2, const Vec& u) const {
  check_sizes(x1, x2, u);
  return def_.jac_x1 ? def_.jac_x1(x1, x2, u) : finite_difference_jacobian(Argument::x1, x1, x2, u);
}

Mat PlantModel::jac_x2(const Vec& x1, const Vec& x2, const Vec& u) const {
  check_sizes(x1, x2, u);
  if (def_.order == PlantOrder::first_order) return Mat::Zero(def_.n, def_.n);
  return def_.jac_x2 ? def_.jac_x2(x1, x2, u) : finite_difference_jacobian(Argument::x2, x1, x2, u);
}

Mat PlantModel::jac_u(const Vec& x1, const Vec& x2, const Vec& u) const {
  check_sizes(x1, x2, u);
  return def_.jac_u ? def_.jac_u(x1, x2, u) : finite_difference_jacobian(Argument::u, x1, x2, u);
}

Mat PlantModel::finite_difference_jacobian(Argument wrt, const Vec& x1, const Vec& x2,
                                           const Vec& u) const {
  check_sizes(x1, x2, u);
  const Index n = def_.n;
  if (wrt == Argument::x2 && def_.order == PlantOrder::first_order) return Mat::Zero(n, n);
  const double point_norm =
      std::sqrt(x1.squaredNorm() + (x2.size() == n ? x2.squaredNorm() : 0.0) + u.squaredNorm());
  const double h = 1e-6 * (1.0 + point_norm);
  const Vec x2v = x2.size() == n ? x2 : zero();
  Mat J(n, n);
  for (Index j = 0; j < n; ++j) {
    Vec a1 = x1, a2 = x2v, au = u;
    Vec b1 = x1, b2 = x2v, bu = u;
    switch (wrt) {
      case Argument::x1: a1(j) += h; b1(j) -= h; break;
      case Argument::x2: a2(j) += h; b2(j) -= h; break;
      case Argument::u: au(j) += h; bu(j) -= h; break;
    }
    J.col(j) = (eval(a1, a2, au) - eval(b1, b2, bu)) / (2.0 * h);
  }
  return J;
}

ValidationReport validate_class_membership(const PlantModel& p, ValidationOptions opts) {
  if (opts.samples < 1) throw UsageError("validate_class_membership: samples must be >= 1");
  if (!(opts.box_radius > 0.0)) throw UsageError("validate_class_membership: box_radius must be > 0");

  const Index n = p.n();
  const bool second = p.order() == PlantOrder::second_order;
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> box(-opts.box_radius, opts.box_radius);
  auto draw = [&] {
    Vec v(n);
    for (Index i = 0; i < n; ++i) v(i) = box(rng);
    return v;
  };

  ValidationReport r;
  r.samples = opts.samples;
  r.min_sym_jac_u = std::numeric_limits<double>::infinity();
  for (int s = 0; s < opts.samples; ++s) {
    const Vec x1 = draw();
    const Vec x2 = second ? draw() : p.zero();
    const Vec u = draw();
    p.eval(x1, x2, u);  // surfaces NaN with the offending point

    const Mat j1 = p.jac_x1(x1, x2, u);
    const Mat j2 = p.jac_x2(x1, x2, u);
    const Mat ju = p.jac_u(x1, x2, u);
    r.max_norm_jac_x1 = std::max(r.max_norm_jac_x1, operator_norm(j1));
    r.max_norm_jac_x2 = std::max(r.max_norm_jac_x2, operator_norm(j2));
    r.min_sym_jac_u = std::min(r.min_sym_jac_u, lambda_min(symmetrize(ju)));

    if (p.has_analytic_jacobians()) {
      using A = PlantModel::Argument;
      const std::pair<A, const Mat*> pairs[] = {{A::x1, &j1}, {A::x2, &j2}, {A::u, &ju}};
      for (const auto& [arg, analytic] : pairs) {
        const Mat fd = p.finite_difference_jacobian(arg, x1, x2, u);
        const double scale = std::max(1.0, analytic->cwiseAbs().maxCoeff());
        r.max_jacobian_discrepancy =
            std::max(r.max_jacobian_discrepancy, (fd - *analytic).cwiseAbs().maxCoeff() / scale);
      }
    }
  }

  const auto& ub = p.declared_bounds();
  r.bounds_ok = r.max_norm_jac_x1 <= ub.L1 + opts.bound_tol &&
                r.max_norm_jac_x2 <= ub.L2 + opts.bound_tol &&
                r.min_sym_jac_u >= ub.b_lower - opts.bound_tol;
  r.jacobians_ok = r.max_jacobian_discrepancy <= opts.jacobian_rel_tol;
  r.pass = r.bounds_ok && r.jacobians_ok;
  return r;
}

double FamilyParams::scalar(const std::string& key, double fallback) const {
  const auto it = scalars.find(key);
  return it == scalars.end() ? fallback : it->second;
}

bool FamilyParams::has(const std::string& key) const {
  return scalars.count(key) != 0 || matrices.count(key) != 0;
}

namespace {

UncertaintyBounds bounds_for(PlantOrder order, double L1, double L2, double b) {
  return order == PlantOrder::second_order ? UncertaintyBounds::second_order(L1, L2, b)
                                           : UncertaintyBounds::first_order(L1, b);
}

Mat diag(const Vec& v) { return v.asDiagonal(); }

Vec sech2(const Vec& v) {
  return v.unaryExpr([](double x) {
    const double c = std::cosh(x);
    return 1.0 / (c * c);
  });
}

}  // namespace

PlantModel linear_matrix_plant(const Mat& A1, const Mat& A2, const Mat& Theta, PlantOrder order) {
  const Index n = Theta.rows();
  const bool second = order == PlantOrder::second_order;
  if (Theta.cols() != n || A1.rows() != n || A1.cols() != n ||
      (second && (A2.rows() != n || A2.cols() != n))) {
    throw UsageError("linear_matrix: A1, A2 and Theta must be square of the same size");
  }
  const double b = lambda_min(symmetrize(Theta));
  if (!(b > 0.0)) throw UsageError("linear_matrix: Sym[Theta] must be positive definite");
  const Mat B = second ? A2 : Mat::Zero(n, n);

  PlantModel::Definition d;
  d.name = "linear_matrix";
  d.n = n;
  d.order = order;
  d.f = [A1, B, Theta](const Vec& x1, const Vec& x2, const Vec& u) -> Vec {
    Vec out = A1 * x1 + Theta * u;
    if (x2.size() == out.size()) out += B * x2;
    return out;
  };
  d.jac_x1 = [A1](const Vec&, const Vec&, const Vec&) -> Mat { return A1; };
  d.jac_x2 = [B](const Vec&, const Vec&, const Vec&) -> Mat { return B; };
  d.jac_u = [Theta](const Vec&, const Vec&, const Vec&) -> Mat { return Theta; };
  d.declared_bounds = bounds_for(order, operator_norm(A1), second ? operator_norm(B) : 0.0, b);
  return PlantModel(std::move(d));
}

PlantModel sinusoidal_scalar_plant(double c1, double c2, double b, PlantOrder order) {
  if (!(b > 0.0)) throw UsageError("sinusoidal_scalar: b must be > 0");
  const bool second = order == PlantOrder::second_order;
  const double c2e = second ? c2 : 0.0;
  PlantModel::Definition d;
  d.name = "sinusoidal_scalar";
  d.n = 1;
  d.order = order;
  d.f = [=](const Vec& x1, const Vec& x2, const Vec& u) -> Vec {
    Vec out(1);
    out(0) = c1 * std::sin(x1(0)) + b * u(0);
    if (second) out(0) -= c2e * x2(0);
    return out;
  };
  d.jac_x1 = [=](const Vec& x1, const Vec&, const Vec&) -> Mat { return Mat::Constant(1, 1, c1 * std::cos(x1(0))); };
  d.jac_x2 = [=](const Vec&, const Vec&, const Vec&) -> Mat { return Mat::Constant(1, 1, -c2e); };
  d.jac_u = [=](const Vec&, const Vec&, const Vec&) -> Mat { return Mat::Constant(1, 1, b); };
  d.declared_bounds = bounds_for(order, std::abs(c1), std::abs(c2e), b);
  return PlantModel(std::move(d));
}

PlantModel tanh_coupled_plant(Index n, double c1, double c2, double b_lower, double delta, double skew,
                              PlantOrder order) {
  if (n < 2) throw UsageError("tanh_coupled: n must be >= 2");
  if (!(b_lower > 0.0) || c1 < 0.0 || c2 < 0.0 || delta < 0.0) {
    throw UsageError("tanh_coupled: need b_lower > 0 and c1, c2, delta >= 0");
  }
  const bool second = order == PlantOrder::second_order;
  const double c2e = second ? c2 : 0.0;
  // Householder reflection through the all-ones direction: orthogonal and
  // couples every component.
  const Mat Q = Mat::Identity(n, n) - (2.0 / double(n)) * Mat::Ones(n, n);
  Mat J = Mat::Zero(n, n);
  for (Index i = 0; i + 1 < n; ++i) {
    J(i, i + 1) = 1.0;
    J(i + 1, i) = -1.0;
  }

  PlantModel::Definition d;
  d.name = "tanh_coupled";
  d.n = n;
  d.order = order;
  d.f = [=](const Vec& x1, const Vec& x2, const Vec& u) -> Vec {
    const Vec gate = (1.0 + x1.array().sin()).matrix();
    Vec out = c1 * Q * x1.array().tanh().matrix() + b_lower * u +
              delta * gate.cwiseProduct(u.array().tanh().matrix()) + skew * J * u;
    if (second) out += c2e * Q * x2.array().tanh().matrix();
    return out;
  };
  d.jac_x1 = [=](const Vec& x1, const Vec&, const Vec& u) -> Mat {
    const Vec cross = (x1.array().cos() * u.array().tanh()).matrix();
    return c1 * Q * diag(sech2(x1)) + delta * diag(cross);
  };
  d.jac_x2 = [=](const Vec&, const Vec& x2, const Vec&) -> Mat {
    if (!second) return Mat::Zero(n, n);
    return c2e * Q * diag(sech2(x2));
  };
  d.jac_u = [=](const Vec& x1, const Vec&, const Vec& u) -> Mat {
    const Vec gate = (1.0 + x1.array().sin()).matrix();
    return b_lower * Mat::Identity(n, n) + delta * diag(gate.cwiseProduct(sech2(u))) + skew * J;
  };
  d.declared_bounds = bounds_for(order, c1 + delta, c2e, b_lower);
  return PlantModel(std::move(d));
}

PlantModel nonaffine_cubic_u_plant(double c1, double c2, double b_lower, PlantOrder order) {
  if (!(b_lower > 0.0)) throw UsageError("nonaffine_cubic_u: b_lower must be > 0");
  const bool second = order == PlantOrder::second_order;
  const double c2e = second ? c2 : 0.0;
  PlantModel::Definition d;
  d.name = "nonaffine_cubic_u";
  d.n = 1;
  d.order = order;
  d.f = [=](const Vec& x1, const Vec& x2, const Vec& u) -> Vec {
    const double v = u(0);
    Vec out(1);
    out(0) = c1 * std::sin(x1(0)) + b_lower * v + v * v * v / 3.0;
    if (second) out(0) += c2e * std::sin(x2(0));
    return out;
  };
  d.jac_x1 = [=](const Vec& x1, const Vec&, const Vec&) -> Mat { return Mat::Constant(1, 1, c1 * std::cos(x1(0))); };
  d.jac_x2 = [=](const Vec&, const Vec& x2, const Vec&) -> Mat {
    return Mat::Constant(1, 1, second ? c2e * std::cos(x2(0)) : 0.0);
  };
  d.jac_u = [=](const Vec&, const Vec&, const Vec& u) -> Mat { return Mat::Constant(1, 1, b_lower + u(0) * u(0)); };
  d.declared_bounds = bounds_for(order, std::abs(c1), std::abs(c2e), b_lower);
  return PlantModel(std::move(d));
}

PlantModel rotation_gain_plant(double b_lower, double s, double c1, double c2, PlantOrder order) {
  if (!(b_lower > 0.0)) throw UsageError("rotation_gain: b_lower must be > 0");
  const bool second = order == PlantOrder::second_order;
  const double c2e = second ? c2 : 0.0;
  Mat Theta(2, 2);
  Theta << b_lower, s, -s, b_lower;
  PlantModel::Definition d;
  d.name = "rotation_gain";
  d.n = 2;
  d.order = order;
  d.f = [=](const Vec& x1, const Vec& x2, const Vec& u) -> Vec {
    Vec out = c1 * x1.array().sin().matrix() + Theta * u;
    if (second) out -= c2e * x2;
    return out;
  };
  d.jac_x1 = [=](const Vec& x1, const Vec&, const Vec&) -> Mat { return c1 * diag(x1.array().cos().matrix()); };
  d.jac_x2 = [=](const Vec&, const Vec&, const Vec&) -> Mat { return -c2e * Mat::Identity(2, 2); };
  d.jac_u = [=](const Vec&, const Vec&, const Vec&) -> Mat { return Theta; };
  d.declared_bounds = bounds_for(order, std::abs(c1), std::abs(c2e), b_lower);
  return PlantModel(std::move(d));
}

PlantModel build_family(std::string_view id, const FamilyParams& params) {
  const PlantOrder order = params.order;
  const double b_lower = params.has("b_lower") ? params.scalar("b_lower", 1.0) : params.scalar("b", 1.0);
  if (id == "linear_matrix") {
    auto get = [&](const std::string& key, Index n, const Mat& fallback) -> Mat {
      const auto it = params.matrices.find(key);
      if (it != params.matrices.end()) return it->second;
      if (params.scalars.count(key)) return params.scalars.at(key) * Mat::Identity(n, n);
      return fallback;
    };
    Index n = static_cast<Index>(params.scalar("n", 0));
    for (const char* key : {"Theta", "A1", "A2"}) {
      const auto it = params.matrices.find(key);
      if (n == 0 && it != params.matrices.end()) n = it->second.rows();
    }
    if (n == 0) n = 1;
    const Mat Theta = get("Theta", n, b_lower * Mat::Identity(n, n));
    const Mat A1 = get("A1", n, Mat::Zero(n, n));
    const Mat A2 = get("A2", n, Mat::Zero(n, n));
    return linear_matrix_plant(A1, A2, Theta, order);
  }
  if (id == "sinusoidal_scalar") {
    return sinusoidal_scalar_plant(params.scalar("c1", 1.0), params.scalar("c2", 1.0),
                                   b_lower, order);
  }
  if (id == "tanh_coupled") {
    return tanh_coupled_plant(static_cast<Index>(params.scalar("n", 2)), params.scalar("c1", 1.0),
                              params.scalar("c2", 1.0), b_lower,
                              params.scalar("delta", 0.5), params.scalar("skew", 0.0), order);
  }
  if (id == "nonaffine_cubic_u") {
    return nonaffine_cubic_u_plant(params.scalar("c1", 1.0), params.scalar("c2", 1.0),
                                   b_lower, order);
  }
  if (id == "rotation_gain") {
    return rotation_gain_plant(b_lower, params.scalar("s", 10.0),
                               params.scalar("c1", 1.0), params.scalar("c2", 1.0), order);
  }
  throw UsageError("unknown plant family '" + std::string(id) + "'");
}

bool equilibrium_shift_check(const PlantModel& p, const Vec& y_star) {
  if (p.order() != PlantOrder::second_order) {
    throw UsageError("equilibrium_shift_check: requires a second-order plant");
  }
  if (y_star.size() != p.n()) throw DimensionError("equilibrium_shift_check: setpoint dimension mismatch");
  const Vec f0 = p.eval(y_star, p.zero(), p.zero());
  return f0.norm() <= 1e-10 * (1.0 + y_star.norm());
}

}  // namespace pidcert
