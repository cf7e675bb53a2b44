#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "pidcert/certificates.hpp"
#include "pidcert/errors.hpp"

using namespace pidcert;

namespace {

const UncertaintyBounds kUnit = UncertaintyBounds::second_order(1, 1, 1);

double eig_min(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()));
  return es.eigenvalues().minCoeff();
}

// Scalar (n = 1) closed loop written out by hand, θ = b̄.
double scalar_q0_min(const GainVector& g, const UncertaintyBounds& ub, double a, double b) {
  const double B = ub.b_lower;
  Mat P, A;
  if (g.kind == ControllerKind::PID) {
    P.resize(3, 3);
    P << 2 * g.ki * g.kp * B, 2 * g.ki * g.kd * B, g.ki, 2 * g.ki * g.kd * B, 2 * g.kp * g.kd * B - g.ki, g.kp,
        g.ki, g.kp, g.kd;
    A.resize(3, 3);
    A << 0, 1, 0, 0, 0, 1, -g.ki * B, a - g.kp * B, b - g.kd * B;
  } else if (g.kind == ControllerKind::PD) {
    P.resize(2, 2);
    P << 2 * g.kp * g.kd * B, g.kp, g.kp, g.kd;
    A.resize(2, 2);
    A << 0, 1, a - g.kp * B, b - g.kd * B;
  } else {
    P.resize(2, 2);
    P << 2 * g.kp * g.ki * B, g.ki, g.ki, g.kp;
    A.resize(2, 2);
    A << 0, 1, -g.ki * B, a - g.kp * B;
  }
  return eig_min(-(P * A + A.transpose() * P));
}

double corner_min(const GainVector& g, const UncertaintyBounds& ub) {
  double m = INFINITY;
  for (double sa : {-1.0, 1.0})
    for (double sb : {-1.0, 1.0}) m = std::min(m, scalar_q0_min(g, ub, sa * ub.L1, sb * ub.L2));
  return m;
}

Mat random_theta(std::mt19937_64& rng, Index n, double b) {
  std::normal_distribution<double> N;
  Mat S(n, n), K(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      S(i, j) = N(rng);
      K(i, j) = N(rng);
    }
  return b * Mat::Identity(n, n) + S * S.transpose() + 3.0 * (K - K.transpose());
}

Mat random_contraction(std::mt19937_64& rng, Index n, double L) {
  std::normal_distribution<double> N;
  Mat M(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) M(i, j) = N(rng);
  std::uniform_real_distribution<double> U(0, 1);
  return M * (L * U(rng) / std::max(1e-12, operator_norm(M)));
}

}  // namespace

TEST(PMatrix, PidCoreExample) {
  const auto g = GainVector::pid(7, 1, 7);
  Mat expect(3, 3);
  expect << 14, 14, 1, 14, 97, 7, 1, 7, 7;
  EXPECT_EQ(pid_P0(g, kUnit), expect);
  EXPECT_NEAR(expect.determinant(), 7547.0, 1e-9);
  const auto chain = pid_minor_chain(g, kUnit);
  EXPECT_DOUBLE_EQ(chain.leading, 14.0);
  EXPECT_DOUBLE_EQ(chain.minor2, 14.0 * 97 - 196);
  EXPECT_DOUBLE_EQ(chain.det, 7547.0);
  EXPECT_TRUE(chain.pass());
}

TEST(PMatrix, KroneckerStructure) {
  const auto g = GainVector::pid(7, 1, 7);
  const SymMat P = build_P_pid(g, kUnit, 3);
  EXPECT_EQ(P.dim(), 9);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j)
      for (Index r = 0; r < 3; ++r)
        for (Index c = 0; c < 3; ++c)
          EXPECT_EQ(P(3 * i + r, 3 * j + c), r == c ? pid_P0(g, kUnit)(i, j) : 0.0);
}

TEST(PMatrix, PositiveDefiniteOnRandomMembers) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(0, 3);
  int members = 0;
  for (int t = 0; t < 3000; ++t) {
    const UncertaintyBounds ub = UncertaintyBounds::second_order(U(rng), U(rng), 0.2 + U(rng));
    const GainVector g = GainVector::pid(20 * U(rng), 5 * U(rng), 20 * U(rng));
    if (!membership(g, ub).member) continue;
    ++members;
    const Mat P0 = pid_P0(g, ub);
    EXPECT_GT(eig_min(P0), 0.0);
    EXPECT_NEAR(pid_minor_chain(g, ub).det, P0.determinant(), 1e-8 * std::abs(P0.determinant()) + 1e-9);
  }
  EXPECT_GT(members, 100);
}

TEST(PMatrix, Errors) {
  EXPECT_THROW(build_P_pid(GainVector::pid(1, 1, 1), kUnit, 1), PreconditionError);
  EXPECT_THROW(build_P_pid(GainVector::pid(7, 1, 7), kUnit, 0), UsageError);
  EXPECT_THROW(build_P_pid(GainVector::pid(7, 1, 7), kUnit, 17), UsageError);
  EXPECT_THROW(build_P_pd(GainVector::pid(7, 1, 7), kUnit, 1), UsageError);
}

TEST(ExactMargin, PdExample) {
  const auto g = GainVector::pd(6, 6);
  EXPECT_DOUBLE_EQ(pd_exact_margin(g, kUnit), 12.0);
  EXPECT_GE(corner_min(g, kUnit), 12.0 - 1e-9);
}

TEST(ExactMargin, PiExampleIsAttained) {
  const auto ub = UncertaintyBounds::first_order(1, 1);
  const auto g = GainVector::pi(3, 1);
  EXPECT_NEAR(pi_exact_margin(g, ub), 6.0 - std::sqrt(17.0), 1e-12);
  EXPECT_NEAR(corner_min(g, ub), 6.0 - std::sqrt(17.0), 1e-12);
}

TEST(ExactMargin, RandomMembersAreLowerBounds) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> U(0, 3);
  for (int t = 0; t < 2000; ++t) {
    const auto ub2 = UncertaintyBounds::second_order(U(rng), U(rng), 0.2 + U(rng));
    const auto pd = GainVector::pd(15 * U(rng), 15 * U(rng));
    if (membership(pd, ub2).member) {
      const double beta = pd_exact_margin(pd, ub2);
      EXPECT_GT(beta, 0.0);
      EXPECT_GE(corner_min(pd, ub2), beta - 1e-9 * (1 + beta));
    }
    const auto ub1 = UncertaintyBounds::first_order(U(rng), 0.2 + U(rng));
    const auto pi = GainVector::pi(10 * U(rng), 5 * U(rng));
    if (membership(pi, ub1).member) {
      const double gamma = pi_exact_margin(pi, ub1);
      EXPECT_GT(gamma, 0.0);
      EXPECT_NEAR(corner_min(pi, ub1), gamma, 1e-9 * (1 + gamma));
    }
  }
}

TEST(QMatrix, GapIsKroneckerAndPsd) {
  std::mt19937_64 rng(29);
  const auto g = GainVector::pid(7, 1, 7);
  for (Index n : {1, 2, 4}) {
    for (int t = 0; t < 50; ++t) {
      FrozenUncertainty fu{random_contraction(rng, n, 1), random_contraction(rng, n, 1), random_theta(rng, n, 1)};
      const SymMat P = build_P(g, kUnit, n);
      const SymMat Q = lyapunov_q(P, assemble_A(g, fu, n));
      const SymMat Q0 = build_Q0(g, kUnit, fu.a, fu.b, n);
      const Mat gap = Q.matrix() - Q0.matrix();
      EXPECT_LE((gap - kronecker_gap(g, kUnit, fu.theta)).cwiseAbs().maxCoeff(), 1e-9 * (1 + Q.matrix().norm()));
      EXPECT_GE(eig_min(gap), -1e-9 * (1 + Q.matrix().norm()));
      const auto rep = q_report(g, kUnit, fu, n);
      EXPECT_GE(rep.lambda_min_Q, rep.lambda_min_Q0 - 1e-9);
      ASSERT_TRUE(rep.schur_chain.has_value());
      EXPECT_LE(rep.schur_chain->closed_form_mismatch, 1e-9);
    }
  }
}

TEST(QMatrix, SchurChainClosedForm) {
  std::mt19937_64 rng(31);
  const auto g = GainVector::pid(9, 2, 8);
  const auto ub = UncertaintyBounds::second_order(1.5, 0.5, 1.2);
  const Index n = 3;
  const Mat a = random_contraction(rng, n, ub.L1), b = random_contraction(rng, n, ub.L2);
  const auto sc = pid_schur_chain(g, ub, a, b, n);
  const double B = ub.b_lower, k1 = (g.kp * g.kp - 2 * g.ki * g.kd) * B, k2 = g.kd * g.kd * B - g.kp;
  const Mat I = Mat::Identity(n, n);
  const Mat D1 = 2 * k1 * I - g.kp * (a + a.transpose()) - a.transpose() * a / (2 * B);
  const Mat B1 = -(g.kp * b + g.kd * a.transpose() + a.transpose() * b / (2 * B));
  const Mat E1 = 2 * k2 * I - g.kd * (b + b.transpose()) - b.transpose() * b / (2 * B);
  EXPECT_LE((sc.D1.matrix() - D1).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((sc.B1 - B1).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((sc.E1.matrix() - E1).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE(sc.closed_form_mismatch, 1e-9);
}

TEST(QMatrix, FrozenValidation) {
  FrozenUncertainty fu{2.0 * Mat::Identity(1, 1), Mat::Zero(1, 1), Mat::Identity(1, 1)};
  EXPECT_THROW(validate_frozen(fu, ControllerKind::PID, kUnit, 1), PreconditionError);
  fu.a = Mat::Zero(1, 1);
  fu.theta = 0.5 * Mat::Identity(1, 1);
  EXPECT_THROW(validate_frozen(fu, ControllerKind::PID, kUnit, 1), PreconditionError);
  EXPECT_THROW(validate_frozen(fu, ControllerKind::PID, kUnit, 2), DimensionError);
}

TEST(QMatrix, SampledFrozenStaysInBall) {
  for (auto kind : {ControllerKind::PID, ControllerKind::PD, ControllerKind::PI}) {
    const auto ub = kind == ControllerKind::PI ? UncertaintyBounds::first_order(1.3, 0.7)
                                               : UncertaintyBounds::second_order(1.3, 0.4, 0.7);
    for (std::uint64_t s = 0; s < 200; ++s) EXPECT_NO_THROW(validate_frozen(sample_frozen(kind, ub, 3, s), kind, ub, 3));
  }
}

TEST(Certify, SampledPidMatchesCornerOracleForScalar) {
  const auto g = GainVector::pid(7, 1, 7);
  const auto cert = certify_margin(g, kUnit, 1, {.samples = 2000, .seed = 42});
  const double oracle = corner_min(g, kUnit);
  EXPECT_NEAR(cert.alpha_raw, oracle, 1e-9 * (1 + oracle));
  EXPECT_NEAR(cert.alpha, 0.8 * cert.alpha_raw, 1e-12);
  EXPECT_TRUE(cert.alpha_is_estimate());
  EXPECT_EQ(cert.method, CertificateMethod::sampled);
}

TEST(Certify, SampledAlphaBelowFreshSamples) {
  std::mt19937_64 rng(37);
  const auto g = GainVector::pid(7, 1, 7);
  const Index n = 3;
  const auto cert = certify_margin(g, kUnit, n, {.seed = 42});
  for (int t = 0; t < 2000; ++t) {
    FrozenUncertainty fu{random_contraction(rng, n, 1), random_contraction(rng, n, 1), random_theta(rng, n, 1)};
    EXPECT_GE(eig_min(lyapunov_q(cert.P, assemble_A(g, fu, n)).matrix()), cert.alpha);
  }
}

TEST(Certify, EnvelopeConstants) {
  const auto g = GainVector::pid(7, 1, 7);
  const auto cert = certify_margin(g, kUnit, 2, {.seed = 1});
  Eigen::SelfAdjointEigenSolver<Mat> es(cert.P.matrix());
  const double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
  EXPECT_NEAR(cert.lambda_min_P, lmin, 1e-9 * lmax);
  EXPECT_NEAR(cert.lambda_max_P, lmax, 1e-9 * lmax);
  EXPECT_NEAR(cert.lambda_decay * 2 * lmax, cert.alpha, 1e-12 * cert.alpha);
  const double M1 = std::sqrt(2 * lmax / lmin);
  EXPECT_NEAR(cert.M, std::max(M1, M1 / g.ki), 1e-9 * cert.M);

  const auto pd = certify_margin(GainVector::pd(6, 6), kUnit, 1);
  EXPECT_DOUBLE_EQ(pd.alpha, 12.0);
  EXPECT_FALSE(pd.alpha_is_estimate());
  EXPECT_NEAR(pd.M, std::sqrt(2 * pd.lambda_max_P / pd.lambda_min_P), 1e-12);

  const auto ub1 = UncertaintyBounds::first_order(1, 1);
  const auto pi = certify_margin(GainVector::pi(3, 0.5), ub1, 1);
  const double m1 = std::sqrt(pi.lambda_max_P / pi.lambda_min_P);
  EXPECT_NEAR(pi.M, std::max(m1, m1 / 0.5), 1e-12);
}

TEST(Certify, WorkerPartitionDoesNotChangeResult) {
  const auto g = GainVector::pid(8, 1.5, 9);
  const auto ub = UncertaintyBounds::second_order(1, 0.5, 1);
  const auto one = certify_margin(g, ub, 3, {.samples = 5000, .seed = 9, .workers = 1});
  for (int w : {2, 3, 7}) {
    const auto many = certify_margin(g, ub, 3, {.samples = 5000, .seed = 9, .workers = w});
    EXPECT_EQ(one.alpha, many.alpha) << w;
  }
  const auto other = certify_margin(g, ub, 3, {.samples = 5000, .seed = 10});
  EXPECT_GT(other.alpha, 0.0);
}

TEST(Certify, Errors) {
  EXPECT_THROW(certify_margin(GainVector::pid(1, 1, 1), kUnit, 1), PreconditionError);
  EXPECT_THROW(certify_margin(GainVector::pid(7, 1, 7), kUnit, 1, {.strategy = CertificateMethod::exact_gamma}),
               UsageError);
  EXPECT_THROW(certify_margin(GainVector::pid(7, 1, 7), kUnit, 1, {.strategy = CertificateMethod::schur_chain}),
               UsageError);
  EXPECT_THROW(certify_margin(GainVector::pid(7, 1, 7), kUnit, 1, {.samples = 0}), UsageError);
  EXPECT_THROW(certify_margin(GainVector::pid(7, 1, 7), kUnit, 1, {.safety = 1.0}), UsageError);
  EXPECT_THROW(parse_certificate_method("guess"), UsageError);
  EXPECT_EQ(parse_certificate_method(to_string(CertificateMethod::sampled)), CertificateMethod::sampled);
}

TEST(SchurBounds, SufficientBoundsImplyEverySampleGap) {
  const auto g = GainVector::pid(12, 1, 12);
  const auto sb = schur_chain_bounds(g, kUnit);
  EXPECT_GT(sb.d1_lower, 0.0);
  EXPECT_GT(sb.e1_lower, 0.0);
  if (!sb.pass) GTEST_SKIP() << "bounds inconclusive for these gains";
  std::mt19937_64 rng(41);
  for (int t = 0; t < 500; ++t) {
    const Mat a = random_contraction(rng, 2, 1), b = random_contraction(rng, 2, 1);
    const auto sc = pid_schur_chain(g, kUnit, a, b, 2);
    EXPECT_GE(lambda_min(sc.D1), sb.d1_lower - 1e-9);
    EXPECT_GE(lambda_min(sc.E1), sb.e1_lower - 1e-9);
    EXPECT_LE(operator_norm(sc.B1), sb.b1_upper + 1e-9);
    EXPECT_TRUE(sc.gap_pass);
  }
}
