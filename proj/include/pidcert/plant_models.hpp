#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>

#include "pidcert/gain_sets.hpp"
#include "pidcert/matrix_kernel.hpp"

namespace pidcert {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// An uncertain plant ẋ₂ = f(x₁, x₂, u) (second order) or ẋ = f(x, u)
/// (first order) with Jacobian oracles and the class bounds it claims.
///
/// First-order plants use the same three-argument signature; their x₂
/// argument is ignored and ∂f/∂x₂ is identically zero.
///
/// Jacobian callbacks are optional. A plant without them falls back to
/// central differences, which are accurate to roughly 1e-6 relative for
/// smooth f and carry no guarantee beyond that.
class PlantModel {
 public:
  using Eval = std::function<Vec(const Vec& x1, const Vec& x2, const Vec& u)>;
  using Jacobian = std::function<Mat(const Vec& x1, const Vec& x2, const Vec& u)>;

  struct Definition {
    std::string name;
    Index n = 1;
    PlantOrder order = PlantOrder::second_order;
    Eval f;
    Jacobian jac_x1;
    Jacobian jac_x2;
    Jacobian jac_u;
    UncertaintyBounds declared_bounds;
  };

  explicit PlantModel(Definition def);

  const std::string& name() const { return def_.name; }
  Index n() const { return def_.n; }
  PlantOrder order() const { return def_.order; }
  const UncertaintyBounds& declared_bounds() const { return def_.declared_bounds; }
  bool has_analytic_jacobians() const;

  /// f(x₁, x₂, u). Throws PlantError on a non-finite result.
  Vec eval(const Vec& x1, const Vec& x2, const Vec& u) const;
  /// f(x, u) for first-order plants.
  Vec eval(const Vec& x, const Vec& u) const;

  Mat jac_x1(const Vec& x1, const Vec& x2, const Vec& u) const;
  Mat jac_x2(const Vec& x1, const Vec& x2, const Vec& u) const;
  Mat jac_u(const Vec& x1, const Vec& x2, const Vec& u) const;

  enum class Argument { x1, x2, u };
  /// Central-difference Jacobian with step 1e-6·(1 + ‖(x₁,x₂,u)‖).
  Mat finite_difference_jacobian(Argument wrt, const Vec& x1, const Vec& x2, const Vec& u) const;

  Vec zero() const { return Vec::Zero(def_.n); }

 private:
  void check_sizes(const Vec& x1, const Vec& x2, const Vec& u) const;

  Definition def_;
};

struct ValidationOptions {
  int samples = 1000;
  double box_radius = 10.0;
  std::uint64_t seed = 0;
  double bound_tol = 1e-8;
  double jacobian_rel_tol = 1e-5;
};

struct ValidationReport {
  int samples = 0;
  double max_norm_jac_x1 = 0.0;
  double max_norm_jac_x2 = 0.0;
  double min_sym_jac_u = 0.0;
  double max_jacobian_discrepancy = 0.0;
  bool bounds_ok = false;
  bool jacobians_ok = false;
  bool pass = false;
};

/// Samples (x₁, x₂, u) uniformly from [-r, r]^{3n} and compares the worst
/// Jacobian norms against the declared bounds.
ValidationReport validate_class_membership(const PlantModel& p, ValidationOptions opts = {});

/// Family parameters: named scalars plus named matrices.
struct FamilyParams {
  PlantOrder order = PlantOrder::second_order;
  std::map<std::string, double> scalars;
  std::map<std::string, Mat> matrices;

  double scalar(const std::string& key, double fallback) const;
  bool has(const std::string& key) const;
};

/// f = A1·x₁ + A2·x₂ + Θ·u; bounds (‖A1‖, ‖A2‖, λ_min(Sym Θ)).
PlantModel linear_matrix_plant(const Mat& A1, const Mat& A2, const Mat& Theta,
                               PlantOrder order = PlantOrder::second_order);
/// f = c1·sin(x₁) − c2·x₂ + b·u (n = 1); bounds (|c1|, |c2|, b).
PlantModel sinusoidal_scalar_plant(double c1, double c2, double b = 1.0,
                                   PlantOrder order = PlantOrder::second_order);
/// f = c1·Q·tanh(x₁) + c2·Q·tanh(x₂) + b̄u + δ(1+sin x₁)∘tanh(u) + s·J·u with Q
/// the Householder reflection through (1,…,1) and J the unit superdiagonal
/// skew matrix; bounds (c1+δ, c2, b̄).
PlantModel tanh_coupled_plant(Index n, double c1, double c2, double b_lower, double delta = 0.5,
                              double skew = 0.0, PlantOrder order = PlantOrder::second_order);
/// f = c1·sin(x₁) + c2·sin(x₂) + b̄u + u³/3 (n = 1); bounds (|c1|, |c2|, b̄).
PlantModel nonaffine_cubic_u_plant(double c1, double c2, double b_lower,
                                   PlantOrder order = PlantOrder::second_order);
/// f = c1·sin(x₁) − c2·x₂ + (b̄I + s·[[0,1],[-1,0]])u (n = 2); bounds (|c1|, |c2|, b̄).
PlantModel rotation_gain_plant(double b_lower, double s, double c1 = 1.0, double c2 = 1.0,
                               PlantOrder order = PlantOrder::second_order);

/// Builds one of: linear_matrix, sinusoidal_scalar, tanh_coupled,
/// nonaffine_cubic_u, rotation_gain. `params.order == first_order` selects
/// the first-order variant of the family (x₂ terms dropped).
PlantModel build_family(std::string_view id, const FamilyParams& params = {});

/// ‖f(y*, 0, 0)‖ ≤ 1e-10·(1 + ‖y*‖): the setpoint is an open-loop equilibrium.
bool equilibrium_shift_check(const PlantModel& p, const Vec& y_star);

}  // namespace pidcert
