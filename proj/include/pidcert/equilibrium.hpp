#pragma once

#include <cstdint>
#include <optional>

#include "pidcert/plant_models.hpp"

namespace pidcert {

struct EquilibriumOptions {
  double tol = 1e-10;
  int max_iterations = 10000;
  std::optional<Vec> initial_guess;
};

struct EquilibriumSolution {
  Vec u_star;
  double residual_norm = 0.0;
  int iterations = 0;
  Vec y_star;
};

/// Φ(u) = f(y*, 0, u) (second order) or f(y*, u) (first order).
Vec equilibrium_map(const PlantModel& p, const Vec& y_star, const Vec& u);

/// Finds the unique u* with Φ(u*) = 0.
///
/// Damped Newton with residual-decrease backtracking (factor 0.5, minimum
/// step 1e-12). A rejected Newton direction falls back to bracketing and
/// bisection for scalar plants and to the monotone step u ← u − ηΦ(u),
/// η = b̄/(‖∂Φ/∂u‖² + b̄²), otherwise. Uniqueness and convergence rest on
/// Sym[∂Φ/∂u] ≥ b̄I; a plant violating that can exhaust the iteration cap,
/// which raises NumericalError carrying the last residual.
EquilibriumSolution solve_equilibrium(const PlantModel& p, const Vec& y_star, EquilibriumOptions opts = {});

/// min over random pairs (u₁, u₂) in [-radius, radius]^n of
/// ⟨u₁−u₂, Φ(u₁)−Φ(u₂)⟩ / ‖u₁−u₂‖². At least b̄ for in-class plants.
double monotonicity_probe(const PlantModel& p, const Vec& y_star, int pairs, std::uint64_t seed = 0,
                          double radius = 10.0);

}  // namespace pidcert
