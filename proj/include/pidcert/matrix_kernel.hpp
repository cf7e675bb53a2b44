#pragma once

// Dense symmetric linear algebra used by the certificate checks.
//
// Everything here is templated on the scalar type and accepts arbitrary Eigen
// expressions. Eigenvalues are computed with a cyclic Jacobi sweep; the
// matrices involved are small (at most a few dozen rows) and symmetric.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "pidcert/errors.hpp"

namespace pidcert {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Eigen::Index;

namespace internal {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) {
    throw NumericalError(std::string(what) + ": matrix has non-finite entries");
  }
}

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw DimensionError(std::string(what) + ": expected a non-empty square matrix, got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

}  // namespace internal

/// A dense matrix with entries[i][j] == entries[j][i] bitwise.
///
/// The only ways to obtain one are symmetrize() and the block helpers below,
/// so the invariant holds by construction.
template <typename Scalar_>
class SymmetricMatrix {
 public:
  using Scalar = Scalar_;

  SymmetricMatrix() = default;

  const MatrixX<Scalar>& matrix() const { return m_; }
  Index dim() const { return m_.rows(); }
  Scalar operator()(Index i, Index j) const { return m_(i, j); }

  SymmetricMatrix operator+(const SymmetricMatrix& o) const { return SymmetricMatrix(m_ + o.m_); }
  SymmetricMatrix operator-(const SymmetricMatrix& o) const { return SymmetricMatrix(m_ - o.m_); }
  SymmetricMatrix operator*(Scalar s) const { return SymmetricMatrix(m_ * s); }

  bool operator==(const SymmetricMatrix& o) const { return m_ == o.m_; }

 private:
  explicit SymmetricMatrix(MatrixX<Scalar> m) : m_(std::move(m)) {}

  template <typename Derived>
  friend SymmetricMatrix<typename Derived::Scalar> symmetrize(const Eigen::MatrixBase<Derived>& m);

  MatrixX<Scalar> m_;
};

/// Sym[m] = (m + mᵀ)/2.
template <typename Derived>
SymmetricMatrix<typename Derived::Scalar> symmetrize(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  internal::require_square(m, "symmetrize");
  internal::require_finite(m, "symmetrize");
  const Index n = m.rows();
  MatrixX<Scalar> r(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      // a+b == b+a in IEEE arithmetic, so r(i,j) and r(j,i) agree bitwise.
      r(i, j) = (m(i, j) + m(j, i)) / Scalar(2);
    }
  }
  return SymmetricMatrix<Scalar>(std::move(r));
}

struct JacobiOptions {
  int max_sweeps = 64;
};

/// All eigenvalues of `s`, ascending, by cyclic Jacobi rotations.
template <typename Scalar>
VectorX<Scalar> jacobi_eigenvalues(const SymmetricMatrix<Scalar>& s, JacobiOptions opts = {}) {
  MatrixX<Scalar> a = s.matrix();
  const Index n = a.rows();
  if (n == 1) return a.diagonal();

  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar fro2 = a.squaredNorm();
  int sweep = 0;
  for (;; ++sweep) {
    Scalar off2 = 0;
    for (Index q = 1; q < n; ++q)
      for (Index p = 0; p < q; ++p) off2 += a(p, q) * a(p, q);
    if (off2 <= eps * eps * fro2 / Scalar(4) || off2 == Scalar(0)) break;
    if (sweep >= opts.max_sweeps) {
      throw NumericalError("jacobi_eigenvalues: no convergence after " + std::to_string(sweep) +
                           " sweeps (off-diagonal mass " + std::to_string(double(off2)) + ")");
    }
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
        Scalar t;
        if (std::abs(theta) > Scalar(1) / eps) {
          t = Scalar(1) / (Scalar(2) * theta);
        } else {
          t = Scalar(1) / (std::abs(theta) + std::sqrt(theta * theta + Scalar(1)));
          if (theta < 0) t = -t;
        }
        const Scalar c = Scalar(1) / std::sqrt(t * t + Scalar(1));
        const Scalar sn = t * c;
        const Scalar tau = sn / (Scalar(1) + c);
        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = a(q, p) = Scalar(0);
        for (Index r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const Scalar arp = a(r, p);
          const Scalar arq = a(r, q);
          a(r, p) = a(p, r) = arp - sn * (arq + tau * arp);
          a(r, q) = a(q, r) = arq + sn * (arp - tau * arq);
        }
      }
    }
  }
  VectorX<Scalar> ev = a.diagonal();
  std::sort(ev.data(), ev.data() + n);
  return ev;
}

template <typename Scalar>
struct EigenExtrema {
  Scalar min;
  Scalar max;
};

template <typename Scalar>
EigenExtrema<Scalar> eig_extrema(const SymmetricMatrix<Scalar>& s, JacobiOptions opts = {}) {
  const VectorX<Scalar> ev = jacobi_eigenvalues(s, opts);
  return {ev(0), ev(ev.size() - 1)};
}

template <typename Scalar>
Scalar lambda_min(const SymmetricMatrix<Scalar>& s) {
  return eig_extrema(s).min;
}

template <typename Scalar>
Scalar lambda_max(const SymmetricMatrix<Scalar>& s) {
  return eig_extrema(s).max;
}

/// Spectral norm σ_max(m) = sqrt(λ_max(mᵀm)). Rectangular input allowed.
template <typename Derived>
typename Derived::Scalar operator_norm(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  internal::require_finite(m, "operator_norm");
  if (m.size() == 0) return Scalar(0);
  const MatrixX<Scalar> gram = m.cols() <= m.rows() ? MatrixX<Scalar>(m.transpose() * m)
                                                    : MatrixX<Scalar>(m * m.transpose());
  const Scalar top = lambda_max(symmetrize(gram));
  return std::sqrt(std::max(top, Scalar(0)));
}

/// Threshold for numerically strict positive definiteness:
/// λ_min > relative·(1 + ‖S‖).
struct PdTolerance {
  double relative = 1e-9;

  template <typename Scalar>
  Scalar threshold(Scalar spectral_radius) const {
    return Scalar(relative) * (Scalar(1) + spectral_radius);
  }
};

template <typename Scalar>
bool is_positive_definite(const SymmetricMatrix<Scalar>& s, PdTolerance tol = {}) {
  const auto ext = eig_extrema(s);
  const Scalar radius = std::max(std::abs(ext.min), std::abs(ext.max));
  return ext.min > tol.threshold(radius);
}

/// [[d, b], [bᵀ, e]]
template <typename Scalar, typename DerivedB>
SymmetricMatrix<Scalar> assemble_symmetric(const SymmetricMatrix<Scalar>& d,
                                           const Eigen::MatrixBase<DerivedB>& b,
                                           const SymmetricMatrix<Scalar>& e) {
  const Index m = d.dim();
  const Index n = e.dim();
  if (b.rows() != m || b.cols() != n) {
    throw DimensionError("assemble_symmetric: coupling block is " + std::to_string(b.rows()) +
                         "x" + std::to_string(b.cols()) + ", expected " + std::to_string(m) +
                         "x" + std::to_string(n));
  }
  MatrixX<Scalar> full(m + n, m + n);
  full.topLeftCorner(m, m) = d.matrix();
  full.topRightCorner(m, n) = b;
  full.bottomLeftCorner(n, m) = b.transpose();
  full.bottomRightCorner(n, n) = e.matrix();
  return symmetrize(full);
}

/// Dense block matrix from a row-major grid of equally-shaped blocks per
/// row/column.
template <typename Scalar>
MatrixX<Scalar> assemble_blocks(const std::vector<std::vector<MatrixX<Scalar>>>& grid) {
  if (grid.empty() || grid.front().empty()) throw DimensionError("assemble_blocks: empty grid");
  const std::size_t cols = grid.front().size();
  std::vector<Index> heights, widths;
  for (const auto& row : grid) {
    if (row.size() != cols) throw DimensionError("assemble_blocks: ragged grid");
    heights.push_back(row.front().rows());
  }
  for (const auto& blk : grid.front()) widths.push_back(blk.cols());
  Index total_h = 0, total_w = 0;
  for (Index h : heights) total_h += h;
  for (Index w : widths) total_w += w;
  MatrixX<Scalar> out(total_h, total_w);
  Index r0 = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Index c0 = 0;
    for (std::size_t j = 0; j < cols; ++j) {
      const auto& blk = grid[i][j];
      if (blk.rows() != heights[i] || blk.cols() != widths[j]) {
        throw DimensionError("assemble_blocks: block (" + std::to_string(i) + "," +
                             std::to_string(j) + ") has inconsistent shape");
      }
      out.block(r0, c0, blk.rows(), blk.cols()) = blk;
      c0 += widths[j];
    }
    r0 += heights[i];
  }
  return out;
}

/// Block positivity by Schur complement: d > 0 and e - bᵀd⁻¹b > 0.
///
/// d⁻¹ is applied through a Cholesky factor; a failed factorisation (or
/// λ_min(d) at or below the threshold) means the block matrix is not
/// positive definite and no inversion is attempted.
template <typename Scalar, typename DerivedB>
bool schur_positive(const SymmetricMatrix<Scalar>& d, const Eigen::MatrixBase<DerivedB>& b,
                    const SymmetricMatrix<Scalar>& e, PdTolerance tol = {}) {
  if (b.rows() != d.dim() || b.cols() != e.dim()) {
    throw DimensionError("schur_positive: coupling block has shape " + std::to_string(b.rows()) +
                         "x" + std::to_string(b.cols()) + ", expected " +
                         std::to_string(d.dim()) + "x" + std::to_string(e.dim()));
  }
  if (!is_positive_definite(d, tol)) return false;
  const Eigen::LLT<MatrixX<Scalar>> llt(d.matrix());
  if (llt.info() != Eigen::Success) return false;
  const MatrixX<Scalar> w = llt.matrixL().solve(MatrixX<Scalar>(b));
  const MatrixX<Scalar> complement = e.matrix() - w.transpose() * w;
  return is_positive_definite(symmetrize(complement), tol);
}

/// Sufficient block-positivity test λ_min(d)·λ_min(e) > ‖b‖² (strict, no
/// tolerance). d and e must themselves be positive definite.
template <typename Scalar, typename DerivedB>
bool eigen_gap_sufficient(const SymmetricMatrix<Scalar>& d, const Eigen::MatrixBase<DerivedB>& b,
                          const SymmetricMatrix<Scalar>& e) {
  if (b.rows() != d.dim() || b.cols() != e.dim()) {
    throw DimensionError("eigen_gap_sufficient: coupling block shape mismatch");
  }
  const Scalar dmin = lambda_min(d);
  const Scalar emin = lambda_min(e);
  if (!(dmin > 0) || !(emin > 0)) return false;
  const Scalar bn = operator_norm(b);
  return dmin * emin > bn * bn;
}

template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> kronecker(const Eigen::MatrixBase<DerivedA>& a,
                                             const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  MatrixX<Scalar> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace pidcert
