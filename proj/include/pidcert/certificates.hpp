#pragma once

// Quadratic Lyapunov certificates V(z) = zᵀPz for the PID, PD and PI closed
// loops written in error coordinates ż = A(z)z.
//
// A(z) is not known (it depends on the plant through mean-value matrices
// a, b, θ), but it always lies in the set
//     { A(a, b, θ) : ‖a‖ ≤ L1, ‖b‖ ≤ L2, Sym[θ] ≥ b̄I }.
// The matrices P below are fixed functions of the gains; a certificate states
// that Q = −(PA + AᵀP) ≥ αI over that whole set.
//
// Q depends on θ only through Sym[θ], and replacing Sym[θ] by b̄I lowers Q by
// a Kronecker product of two PSD factors. The resulting Q₀(a, b) is affine in
// (a, b), so λ_min(Q₀) is concave there and its minimum over the norm balls
// sits on their extreme points, the scaled orthogonal matrices.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "pidcert/gain_sets.hpp"
#include "pidcert/matrix_kernel.hpp"
#include "pidcert/plant_models.hpp"

namespace pidcert {

using SymMat = SymmetricMatrix<double>;

enum class CertificateMethod { exact_gamma, sampled, schur_chain };

std::string_view to_string(CertificateMethod m);
CertificateMethod parse_certificate_method(std::string_view s);

/// One frozen instance of the state-dependent matrices in A(z). For PI
/// loops `b` is unused and may be empty.
struct FrozenUncertainty {
  Mat a;
  Mat b;
  Mat theta;
};

/// Throws PreconditionError if fu leaves the uncertainty ball of `ub`.
void validate_frozen(const FrozenUncertainty& fu, ControllerKind kind, const UncertaintyBounds& ub, Index n);

/// The 3×3 scalar core of the PID matrix; P = P₀ ⊗ Iₙ.
Mat pid_P0(const GainVector& g, const UncertaintyBounds& ub);

/// Leading principal minors of P₀ from their closed forms.
struct PidMinorChain {
  double leading = 0.0;  // 2·ki·kp·b̄
  double minor2 = 0.0;   // 2ki·kp·b̄(2kp·kd·b̄ − ki) − (2ki·kd·b̄)²
  double det = 0.0;      // ki(4kp²kd²b̄² + ki² − 2kp³b̄ − 4ki·kd³b̄²)
  bool pass() const { return leading > 0.0 && minor2 > 0.0 && det > 0.0; }
};
PidMinorChain pid_minor_chain(const GainVector& g, const UncertaintyBounds& ub);

/// [[2ki·kp·b̄, 2ki·kd·b̄, ki], [2ki·kd·b̄, 2kp·kd·b̄ − ki, kp], [ki, kp, kd]] ⊗ Iₙ.
SymMat build_P_pid(const GainVector& g, const UncertaintyBounds& ub, Index n);
/// [[2kp·kd·b̄, kp], [kp, kd]] ⊗ Iₙ.
SymMat build_P_pd(const GainVector& g, const UncertaintyBounds& ub, Index n);
/// [[2kp·ki·b̄, ki], [ki, kp]] ⊗ Iₙ.
SymMat build_P_pi(const GainVector& g, const UncertaintyBounds& ub, Index n);
SymMat build_P(const GainVector& g, const UncertaintyBounds& ub, Index n);

/// Companion-form closed-loop matrix for the frozen (a, b, θ); θ enters as is.
///   PID: [[0, I, 0], [0, 0, I], [−ki·θ, a − kp·θ, b − kd·θ]]
///   PD:  [[0, I], [a − kp·θ, b − kd·θ]]
///   PI:  [[0, I], [−ki·θ, a − kp·θ]]
Mat assemble_A(const GainVector& g, const FrozenUncertainty& fu, Index n);

/// Q = −(PA + AᵀP).
SymMat lyapunov_q(const SymMat& P, const Mat& A);

/// Q₀: Q evaluated with Sym[θ] replaced by b̄I.
SymMat build_Q0(const GainVector& g, const UncertaintyBounds& ub, const Mat& a, const Mat& b, Index n);

/// (2·k·kᵀ) ⊗ (Sym[θ] − b̄I) with k = (ki, kp, kd), (kp, kd) or (ki, kp).
Mat kronecker_gap(const GainVector& g, const UncertaintyBounds& ub, const Mat& theta);

/// Second Schur reduction of the PID Q₀: after eliminating the z₀ block,
/// Q₀ > 0 reduces to [[D1, B1], [B1ᵀ, E1]] > 0 with
///   D1 = 2k1·I − 2kp·Sym[a] − aᵀa/(2b̄)
///   B1 = −(kp·b + kd·aᵀ + aᵀb/(2b̄))
///   E1 = 2k2·I − 2kd·Sym[b] − bᵀb/(2b̄)
/// and k1 = (kp² − 2ki·kd)b̄, k2 = kd²b̄ − kp.
struct SchurChain {
  SymMat D1;
  Mat B1;
  SymMat E1;
  /// Max entrywise gap between the numeric E − BᵀD⁻¹B and the closed form,
  /// relative to 1 + its largest entry.
  double closed_form_mismatch = 0.0;
  bool gap_pass = false;  // λ_min(D1)·λ_min(E1) > ‖B1‖²
};
SchurChain pid_schur_chain(const GainVector& g, const UncertaintyBounds& ub, const Mat& a, const Mat& b, Index n);

struct QReport {
  SymMat Q;
  SymMat Q0;
  double lambda_min_Q = 0.0;
  double lambda_min_Q0 = 0.0;
  double lambda_min_gap = 0.0;  // λ_min(Q − Q₀)
  bool schur_chain_pass = true;
  std::optional<SchurChain> schur_chain;  // PID only
};

/// Builds Q and Q₀ for the frozen instance and checks Q − Q₀ ≥ 0 (within
/// 1e-9·(1 + max|Q|)) and, for PID, the Schur chain. A failed step raises
/// CertificateError naming the step.
QReport q_report(const GainVector& g, const UncertaintyBounds& ub, const FrozenUncertainty& fu, Index n);

/// Sampling-free PID test: the lower bounds on λ_min(D1), λ_min(E1) and the
/// upper bound on ‖B1‖ that hold over the whole ball, and whether
/// min(D1) · min(E1) > max(B1)².
struct SchurChainBounds {
  double d1_lower = 0.0;
  double e1_lower = 0.0;
  double b1_upper = 0.0;
  bool pass = false;
};
SchurChainBounds schur_chain_bounds(const GainVector& g, const UncertaintyBounds& ub);

struct CertifyOptions {
  /// Unset: exact_gamma for PD and PI, sampled for PID.
  std::optional<CertificateMethod> strategy;
  int samples = 20000;
  double safety = 0.2;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct LyapunovCertificate {
  ControllerKind kind = ControllerKind::PID;
  Index n = 1;
  GainVector gains;
  UncertaintyBounds bounds;
  SymMat P;
  /// Certified margin: Q ≥ alpha·I over the uncertainty ball.
  double alpha = 0.0;
  /// For sampled certificates, the sampled minimum before the safety
  /// deflation; equal to alpha otherwise.
  double alpha_raw = 0.0;
  double lambda_min_P = 0.0;
  double lambda_max_P = 0.0;
  double M = 0.0;
  double lambda_decay = 0.0;
  CertificateMethod method = CertificateMethod::exact_gamma;
  std::uint64_t seed = 0;
  int samples = 0;
  double safety = 0.0;

  /// Sampled margins are estimates of an infimum, not exact values.
  bool alpha_is_estimate() const { return method == CertificateMethod::sampled; }
};

/// PD: β = 2·min{(kp² − k̄)b̄, kd²b̄ − kp − k̄b̄}.
double pd_exact_margin(const GainVector& g, const UncertaintyBounds& ub);
/// PI: λ_min([[2ki²b̄, −ki·L], [−ki·L, 2(kp²b̄ − kp·L − ki)]]).
double pi_exact_margin(const GainVector& g, const UncertaintyBounds& ub);

/// Envelope constants from P and alpha:
///   M₁ = sqrt(c·λ_max(P)/λ_min(P)) with c = 2 (PID, PD) or 1 (PI),
///   M = max(M₁, M₁/ki) for loops with an integrator and M₁ for PD,
///   λ = alpha / (2λ_max(P)).
LyapunovCertificate make_certificate(const GainVector& g, const UncertaintyBounds& ub, Index n, double alpha,
                                     CertificateMethod method);

/// Computes alpha with the selected strategy and assembles the certificate.
/// Throws CertificateError if the margin is not positive.
LyapunovCertificate certify_margin(const GainVector& g, const UncertaintyBounds& ub, Index n,
                                   CertifyOptions opts = {});

/// Random frozen instance in the uncertainty ball (boundary-biased).
FrozenUncertainty sample_frozen(ControllerKind kind, const UncertaintyBounds& ub, Index n, std::uint64_t seed);

}  // namespace pidcert
