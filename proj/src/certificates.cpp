#include "pidcert/certificates.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>
#include <vector>

#include "pidcert/errors.hpp"

namespace pidcert {

std::string_view to_string(CertificateMethod m) {
  switch (m) {
    case CertificateMethod::exact_gamma: return "exact_gamma";
    case CertificateMethod::sampled: return "sampled";
    case CertificateMethod::schur_chain: return "schur_chain";
  }
  return "?";
}

CertificateMethod parse_certificate_method(std::string_view s) {
  if (s == "exact_gamma") return CertificateMethod::exact_gamma;
  if (s == "sampled") return CertificateMethod::sampled;
  if (s == "schur_chain") return CertificateMethod::schur_chain;
  throw UsageError("unknown certificate strategy '" + std::string(s) + "'");
}

namespace {

constexpr Index kMaxBlockDim = 16;

void require_dim(Index n, const char* op) {
  if (n < 1 || n > kMaxBlockDim) {
    throw UsageError(std::string(op) + ": block dimension must be in [1, 16], got " + std::to_string(n));
  }
}

void require_member(const GainVector& g, const UncertaintyBounds& ub, const char* op) {
  if (!membership(g, ub).member) {
    throw PreconditionError(std::string(op) + ": " + std::string(to_string(g.kind)) +
                            " gains are outside the admissible set for these bounds");
  }
}

Mat identity(Index n) { return Mat::Identity(n, n); }

SymMat checked_P(const Mat& core, Index n, const char* op) {
  const SymMat P = symmetrize(kronecker(core, identity(n)));
  if (!(lambda_min(P) > 0.0)) {
    throw InternalError(std::string(op) + ": P is not positive definite for admissible gains");
  }
  return P;
}

// Gain vector multiplying θ in the last block row of A, ordered like z.
Vec theta_gains(const GainVector& g) {
  switch (g.kind) {
    case ControllerKind::PID: return Eigen::Vector3d(g.ki, g.kp, g.kd);
    case ControllerKind::PD: return Eigen::Vector2d(g.kp, g.kd);
    case ControllerKind::PI: return Eigen::Vector2d(g.ki, g.kp);
  }
  throw InternalError("theta_gains: bad kind");
}

}  // namespace

void validate_frozen(const FrozenUncertainty& fu, ControllerKind kind, const UncertaintyBounds& ub, Index n) {
  auto square = [n](const Mat& m) { return m.rows() == n && m.cols() == n; };
  const bool uses_b = kind != ControllerKind::PI;
  if (!square(fu.a) || !square(fu.theta) || (uses_b && !square(fu.b))) {
    throw DimensionError("frozen uncertainty: a, b, theta must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  auto over = [](double norm, double bound) { return norm > bound * (1.0 + 1e-12) + 1e-14; };
  if (over(operator_norm(fu.a), ub.L1)) throw PreconditionError("frozen uncertainty: ||a|| exceeds L1");
  if (uses_b && over(operator_norm(fu.b), ub.L2)) throw PreconditionError("frozen uncertainty: ||b|| exceeds L2");
  const double sym_min = lambda_min(symmetrize(fu.theta));
  if (sym_min < ub.b_lower * (1.0 - 1e-12) - 1e-14) {
    throw PreconditionError("frozen uncertainty: Sym[theta] is not >= b_lower*I");
  }
}

Mat pid_P0(const GainVector& g, const UncertaintyBounds& ub) {
  const double kp = g.kp, ki = g.ki, kd = g.kd, b = ub.b_lower;
  Mat P0(3, 3);
  P0 << 2 * ki * kp * b, 2 * ki * kd * b, ki,
        2 * ki * kd * b, 2 * kp * kd * b - ki, kp,
        ki, kp, kd;
  return P0;
}

PidMinorChain pid_minor_chain(const GainVector& g, const UncertaintyBounds& ub) {
  const double kp = g.kp, ki = g.ki, kd = g.kd, b = ub.b_lower;
  PidMinorChain c;
  c.leading = 2 * ki * kp * b;
  c.minor2 = c.leading * (2 * kp * kd * b - ki) - std::pow(2 * ki * kd * b, 2);
  c.det = ki * (4 * kp * kp * kd * kd * b * b + ki * ki - 2 * kp * kp * kp * b - 4 * ki * kd * kd * kd * b * b);
  return c;
}

SymMat build_P_pid(const GainVector& g, const UncertaintyBounds& ub, Index n) {
  require_dim(n, "build_P_pid");
  if (g.kind != ControllerKind::PID) throw UsageError("build_P_pid: expected PID gains");
  require_member(g, ub, "build_P_pid");
  if (!pid_minor_chain(g, ub).pass()) {
    throw InternalError("build_P_pid: leading-minor chain failed for admissible gains");
  }
  return checked_P(pid_P0(g, ub), n, "build_P_pid");
}

SymMat build_P_pd(const GainVector& g, const UncertaintyBounds& ub, Index n) {
  require_dim(n, "build_P_pd");
  if (g.kind != ControllerKind::PD) throw UsageError("build_P_pd: expected PD gains");
  require_member(g, ub, "build_P_pd");
  if (!(g.kp * (2 * g.kd * g.kd * ub.b_lower - g.kp) > 0.0)) {
    throw InternalError("build_P_pd: determinant check failed for admissible gains");
  }
  Mat core(2, 2);
  core << 2 * g.kp * g.kd * ub.b_lower, g.kp, g.kp, g.kd;
  return checked_P(core, n, "build_P_pd");
}

SymMat build_P_pi(const GainVector& g, const UncertaintyBounds& ub, Index n) {
  require_dim(n, "build_P_pi");
  if (g.kind != ControllerKind::PI) throw UsageError("build_P_pi: expected PI gains");
  require_member(g, ub, "build_P_pi");
  if (!(g.ki * (2 * g.kp * g.kp * ub.b_lower - g.ki) > 0.0)) {
    throw InternalError("build_P_pi: determinant check failed for admissible gains");
  }
  Mat core(2, 2);
  core << 2 * g.kp * g.ki * ub.b_lower, g.ki, g.ki, g.kp;
  return checked_P(core, n, "build_P_pi");
}

SymMat build_P(const GainVector& g, const UncertaintyBounds& ub, Index n) {
  switch (g.kind) {
    case ControllerKind::PID: return build_P_pid(g, ub, n);
    case ControllerKind::PD: return build_P_pd(g, ub, n);
    case ControllerKind::PI: return build_P_pi(g, ub, n);
  }
  throw InternalError("build_P: bad kind");
}

Mat assemble_A(const GainVector& g, const FrozenUncertainty& fu, Index n) {
  const Mat I = identity(n);
  const Mat Z = Mat::Zero(n, n);
  const Mat& th = fu.theta;
  switch (g.kind) {
    case ControllerKind::PID:
      return assemble_blocks<double>({{Z, I, Z}, {Z, Z, I}, {-g.ki * th, fu.a - g.kp * th, fu.b - g.kd * th}});
    case ControllerKind::PD:
      return assemble_blocks<double>({{Z, I}, {fu.a - g.kp * th, fu.b - g.kd * th}});
    case ControllerKind::PI:
      return assemble_blocks<double>({{Z, I}, {-g.ki * th, fu.a - g.kp * th}});
  }
  throw InternalError("assemble_A: bad kind");
}

SymMat lyapunov_q(const SymMat& P, const Mat& A) {
  if (A.rows() != P.dim() || A.cols() != P.dim()) throw DimensionError("lyapunov_q: P and A sizes differ");
  const Mat PA = P.matrix() * A;
  return symmetrize(Mat(-(PA + PA.transpose())));
}

SymMat build_Q0(const GainVector& g, const UncertaintyBounds& ub, const Mat& a, const Mat& b, Index n) {
  const SymMat P = build_P(g, ub, n);
  const FrozenUncertainty base{a, g.kind == ControllerKind::PI ? Mat() : b, ub.b_lower * identity(n)};
  return lyapunov_q(P, assemble_A(g, base, n));
}

Mat kronecker_gap(const GainVector& g, const UncertaintyBounds& ub, const Mat& theta) {
  const Vec k = theta_gains(g);
  const Mat outer = 2.0 * k * k.transpose();
  const Index n = theta.rows();
  return kronecker(outer, Mat(symmetrize(theta).matrix() - ub.b_lower * identity(n)));
}

SchurChain pid_schur_chain(const GainVector& g, const UncertaintyBounds& ub, const Mat& a, const Mat& b, Index n) {
  if (g.kind != ControllerKind::PID) throw UsageError("pid_schur_chain: expected PID gains");
  const SymMat Q0 = build_Q0(g, ub, a, b, n);
  const Mat& q = Q0.matrix();
  const Mat D = q.topLeftCorner(n, n);
  const Mat B = q.topRightCorner(n, 2 * n);
  const Mat E = q.bottomRightCorner(2 * n, 2 * n);
  const Eigen::LLT<Mat> llt(D);
  if (llt.info() != Eigen::Success) throw CertificateError("schur_chain", "leading block D is not positive definite");
  const Mat complement = E - B.transpose() * llt.solve(B);

  const double kp = g.kp, ki = g.ki, kd = g.kd, bl = ub.b_lower;
  const double k1 = (kp * kp - 2 * ki * kd) * bl;
  const double k2 = kd * kd * bl - kp;
  const Mat I = identity(n);
  const Mat a_sym = symmetrize(a).matrix();
  const Mat b_sym = symmetrize(b).matrix();
  SchurChain sc;
  sc.D1 = symmetrize(Mat(2 * k1 * I - 2 * kp * a_sym - a.transpose() * a / (2 * bl)));
  sc.B1 = -(kp * b + kd * a.transpose() + a.transpose() * b / (2 * bl));
  sc.E1 = symmetrize(Mat(2 * k2 * I - 2 * kd * b_sym - b.transpose() * b / (2 * bl)));

  const Mat closed = assemble_symmetric(sc.D1, sc.B1, sc.E1).matrix();
  sc.closed_form_mismatch = (complement - closed).cwiseAbs().maxCoeff() / (1.0 + closed.cwiseAbs().maxCoeff());
  sc.gap_pass = eigen_gap_sufficient(sc.D1, sc.B1, sc.E1);
  return sc;
}

QReport q_report(const GainVector& g, const UncertaintyBounds& ub, const FrozenUncertainty& fu, Index n) {
  require_dim(n, "q_report");
  require_member(g, ub, "q_report");
  validate_frozen(fu, g.kind, ub, n);
  const SymMat P = build_P(g, ub, n);
  const Mat empty_b = g.kind == ControllerKind::PI ? Mat() : fu.b;

  QReport r;
  r.Q = lyapunov_q(P, assemble_A(g, fu, n));
  r.Q0 = lyapunov_q(P, assemble_A(g, {fu.a, empty_b, ub.b_lower * identity(n)}, n));
  r.lambda_min_Q = lambda_min(r.Q);
  r.lambda_min_Q0 = lambda_min(r.Q0);
  r.lambda_min_gap = lambda_min(r.Q - r.Q0);
  const double scale = 1.0 + r.Q.matrix().cwiseAbs().maxCoeff();
  if (r.lambda_min_gap < -1e-9 * scale) {
    throw CertificateError("kronecker_gap", "Q - Q0 has eigenvalue " + std::to_string(r.lambda_min_gap));
  }
  if (g.kind == ControllerKind::PID) {
    r.schur_chain = pid_schur_chain(g, ub, fu.a, fu.b, n);
    if (r.schur_chain->closed_form_mismatch > 1e-9) {
      throw CertificateError("schur_chain", "complement differs from its closed form by " +
                                                std::to_string(r.schur_chain->closed_form_mismatch));
    }
    r.schur_chain_pass = r.schur_chain->gap_pass;
    if (!r.schur_chain_pass) {
      throw CertificateError("schur_chain", "lambda_min(D1)*lambda_min(E1) <= ||B1||^2");
    }
  }
  return r;
}

SchurChainBounds schur_chain_bounds(const GainVector& g, const UncertaintyBounds& ub) {
  if (g.kind != ControllerKind::PID) throw UsageError("schur_chain_bounds: expected PID gains");
  ub.validate();
  const double kp = g.kp, ki = g.ki, kd = g.kd, b = ub.b_lower, L1 = ub.L1, L2 = ub.L2;
  SchurChainBounds s;
  s.d1_lower = 2 * (kp * kp - 2 * ki * kd) * b - 2 * kp * L1 - L1 * L1 / (2 * b);
  s.e1_lower = 2 * (kd * kd * b - kp) - 2 * kd * L2 - L2 * L2 / (2 * b);
  s.b1_upper = kp * L2 + kd * L1 + L1 * L2 / (2 * b);
  s.pass = s.d1_lower > 0 && s.e1_lower > 0 && s.d1_lower * s.e1_lower > s.b1_upper * s.b1_upper;
  return s;
}

double pd_exact_margin(const GainVector& g, const UncertaintyBounds& ub) {
  require_member(g, ub, "pd_exact_margin");
  const double kbar = coupling_kbar(g.kp, g.kd, ub);
  const double b = ub.b_lower;
  return 2.0 * std::min((g.kp * g.kp - kbar) * b, g.kd * g.kd * b - g.kp - kbar * b);
}

double pi_exact_margin(const GainVector& g, const UncertaintyBounds& ub) {
  require_member(g, ub, "pi_exact_margin");
  const double L = ub.L(), b = ub.b_lower;
  Mat Q1(2, 2);
  Q1 << 2 * g.ki * g.ki * b, -g.ki * L,
        -g.ki * L, 2 * (g.kp * g.kp * b - g.kp * L - g.ki);
  return lambda_min(symmetrize(Q1));
}

LyapunovCertificate make_certificate(const GainVector& g, const UncertaintyBounds& ub, Index n, double alpha,
                                     CertificateMethod method) {
  LyapunovCertificate c;
  c.kind = g.kind;
  c.n = n;
  c.gains = g;
  c.bounds = ub;
  c.P = build_P(g, ub, n);
  c.alpha = alpha;
  c.alpha_raw = alpha;
  c.method = method;
  const auto ext = eig_extrema(c.P);
  c.lambda_min_P = ext.min;
  c.lambda_max_P = ext.max;
  const double ratio = ext.max / ext.min;
  switch (g.kind) {
    case ControllerKind::PID: {
      const double m1 = std::sqrt(2.0 * ratio);
      c.M = std::max(m1, m1 / g.ki);
      break;
    }
    case ControllerKind::PD: c.M = std::sqrt(2.0 * ratio); break;
    case ControllerKind::PI: {
      // ‖z(0)‖ ≤ ‖x(0) − y*‖ + ‖u*‖/ki, hence the 1/ki factor.
      const double m1 = std::sqrt(ratio);
      c.M = std::max(m1, m1 / g.ki);
      break;
    }
  }
  c.lambda_decay = alpha / (2.0 * ext.max);
  return c;
}

namespace {

Mat random_orthogonal(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> normal;
  Mat G(n, n);
  for (Index i = 0; i < G.size(); ++i) G.data()[i] = normal(rng);
  Eigen::HouseholderQR<Mat> qr(G);
  Mat Q = qr.householderQ();
  const Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j)
    if (R(j, j) < 0) Q.col(j) = -Q.col(j);
  return Q;
}

// Direction: a random orthogonal matrix (an extreme point of the unit
// spectral ball) or a Gaussian matrix scaled to unit norm, equally likely.
// Radius: L or L·U(0,1), equally likely.
Mat random_ball_matrix(std::mt19937_64& rng, Index n, double L) {
  if (L == 0.0) return Mat::Zero(n, n);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Mat dir;
  if (coin(rng)) {
    dir = random_orthogonal(rng, n);
  } else {
    std::normal_distribution<double> normal;
    dir.resize(n, n);
    for (Index i = 0; i < dir.size(); ++i) dir.data()[i] = normal(rng);
    dir /= operator_norm(dir);
  }
  const double radius = coin(rng) ? L : L * unit(rng);
  return radius * dir;
}

struct BallSample {
  Mat a;
  Mat b;
};

std::vector<BallSample> margin_samples(const GainVector& g, const UncertaintyBounds& ub, Index n, int count,
                                       std::uint64_t seed) {
  const bool uses_b = g.kind != ControllerKind::PI;
  const double L2 = uses_b ? ub.L2 : 0.0;
  std::vector<BallSample> out;
  out.reserve(static_cast<std::size_t>(count) + 4);
  for (double sa : {1.0, -1.0})
    for (double sb : {1.0, -1.0}) out.push_back({sa * ub.L1 * identity(n), sb * L2 * identity(n)});
  std::mt19937_64 rng(seed);
  for (int i = 0; i < count; ++i) {
    Mat a = random_ball_matrix(rng, n, ub.L1);
    Mat b = random_ball_matrix(rng, n, L2);
    out.push_back({std::move(a), std::move(b)});
  }
  return out;
}

double sampled_min_lambda_q0(const GainVector& g, const UncertaintyBounds& ub, Index n,
                             const std::vector<BallSample>& samples, int workers) {
  const SymMat P = build_P(g, ub, n);
  const Mat theta0 = ub.b_lower * identity(n);
  const bool uses_b = g.kind != ControllerKind::PI;
  auto eval_range = [&](std::size_t lo, std::size_t hi) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = lo; i < hi; ++i) {
      const FrozenUncertainty fu{samples[i].a, uses_b ? samples[i].b : Mat(), theta0};
      m = std::min(m, lambda_min(lyapunov_q(P, assemble_A(g, fu, n))));
    }
    return m;
  };
  const std::size_t total = samples.size();
  const std::size_t w = static_cast<std::size_t>(std::clamp(workers, 1, 64));
  if (w == 1 || total < 2 * w) return eval_range(0, total);
  // min is exact and order-independent, so the partition does not affect the result.
  std::vector<double> partial(w, std::numeric_limits<double>::infinity());
  std::vector<std::thread> pool;
  const std::size_t chunk = (total + w - 1) / w;
  for (std::size_t t = 0; t < w; ++t) {
    const std::size_t lo = t * chunk, hi = std::min(total, lo + chunk);
    pool.emplace_back([&, t, lo, hi] { partial[t] = eval_range(lo, hi); });
  }
  for (auto& th : pool) th.join();
  return *std::min_element(partial.begin(), partial.end());
}

}  // namespace

LyapunovCertificate certify_margin(const GainVector& g, const UncertaintyBounds& ub, Index n, CertifyOptions opts) {
  require_dim(n, "certify_margin");
  require_member(g, ub, "certify_margin");
  const CertificateMethod method =
      opts.strategy.value_or(g.kind == ControllerKind::PID ? CertificateMethod::sampled : CertificateMethod::exact_gamma);

  switch (method) {
    case CertificateMethod::exact_gamma: {
      if (g.kind == ControllerKind::PID) {
        throw UsageError("certify_margin: no closed-form margin exists for PID; use sampled");
      }
      const double alpha = g.kind == ControllerKind::PD ? pd_exact_margin(g, ub) : pi_exact_margin(g, ub);
      if (!(alpha > 0.0)) throw CertificateError("exact_margin", "closed-form margin is not positive");
      return make_certificate(g, ub, n, alpha, method);
    }
    case CertificateMethod::sampled: {
      if (opts.samples < 1) throw UsageError("certify_margin: samples must be >= 1");
      if (!(opts.safety >= 0.0 && opts.safety < 1.0)) throw UsageError("certify_margin: safety must be in [0, 1)");
      const auto samples = margin_samples(g, ub, n, opts.samples, opts.seed);
      const double raw = sampled_min_lambda_q0(g, ub, n, samples, opts.workers);
      if (!(raw > 0.0)) {
        throw CertificateError("sampled_margin", "sampled minimum of lambda_min(Q0) is " + std::to_string(raw) +
                                                     "; gains too close to the set boundary");
      }
      auto c = make_certificate(g, ub, n, (1.0 - opts.safety) * raw, method);
      c.alpha_raw = raw;
      c.seed = opts.seed;
      c.samples = opts.samples;
      c.safety = opts.safety;
      return c;
    }
    case CertificateMethod::schur_chain:
      throw UsageError("certify_margin: schur_chain yields a yes/no verdict only; call schur_chain_bounds");
  }
  throw InternalError("certify_margin: bad strategy");
}

FrozenUncertainty sample_frozen(ControllerKind kind, const UncertaintyBounds& ub, Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  FrozenUncertainty fu;
  fu.a = random_ball_matrix(rng, n, ub.L1);
  fu.b = kind == ControllerKind::PI ? Mat() : random_ball_matrix(rng, n, ub.L2);
  Mat G(n, n), H(n, n);
  for (Index i = 0; i < G.size(); ++i) {
    G.data()[i] = normal(rng);
    H.data()[i] = normal(rng);
  }
  const Mat psd = G * G.transpose();
  const double psd_scale = unit(rng) < 0.2 ? 0.0 : unit(rng) * (1.0 + 3.0 * ub.b_lower);
  const Mat skew = 0.5 * (H - H.transpose());
  const double skew_scale = unit(rng) * 5.0;
  fu.theta = ub.b_lower * identity(n) + psd_scale * psd / std::max(1e-300, operator_norm(psd)) + skew_scale * skew;
  return fu;
}

}  // namespace pidcert
