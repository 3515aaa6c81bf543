#pragma once

#include <ovt/common.hpp>
#include <ovt/rng.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace ovt {

/// Matrix-free symmetric operator on R^dim.
struct LinearOperator {
  Index dim = 0;
  std::function<Vector(const Vector&)> apply;
  double cost_hint = 0.0;  // rough flops per apply, for iteration budgeting
};

inline LinearOperator dense_operator(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("dense_operator: matrix must be square");
  return LinearOperator{a.rows(), [a](const Vector& x) -> Vector { return a * x; },
                        static_cast<double>(a.rows()) * static_cast<double>(a.cols())};
}

/// Rank-n symmetric eigenpair bundle: Q is D x n orthonormal, lambda sorted
/// nonincreasing.
struct LowRankEig {
  Matrix q;
  Vector lambda;
};

struct EigOptions {
  double rel_tol = 1e-10;
  int max_iters = 0;  // 0 = default budget (2000 sweeps)
  std::uint64_t seed = 0;
  int oversample = 8;
  double delta_floor = 1e-6;   // minimum admissible relative eigengap
  double iter_constant = 8.0;  // C in ceil(C log(D)/gap) iteration budgets
};

/// Fix a deterministic sign per column: first coefficient whose magnitude
/// exceeds 1e-8 of the column max is made nonnegative.
inline void apply_sign_convention(Matrix& q) {
  for (Index j = 0; j < q.cols(); ++j) {
    const double mx = q.col(j).cwiseAbs().maxCoeff();
    if (mx <= 0.0) continue;
    for (Index i = 0; i < q.rows(); ++i) {
      if (std::abs(q(i, j)) >= 1e-8 * mx) {
        if (q(i, j) < 0.0) q.col(j) = -q.col(j);
        break;
      }
    }
  }
}

/// Modified Gram-Schmidt with a second re-orthogonalization pass. Columns
/// whose remainder falls below 1e-10 of the largest input column norm are
/// dropped, so the result may have fewer columns than the input.
inline Matrix orthonormalize(const Matrix& a) {
  const Index rows = a.rows();
  double max_norm = 0.0;
  for (Index j = 0; j < a.cols(); ++j) max_norm = std::max(max_norm, a.col(j).norm());
  const double drop = 1e-10 * max_norm;
  Matrix q(rows, a.cols());
  Index kept = 0;
  for (Index j = 0; j < a.cols(); ++j) {
    Vector v = a.col(j);
    for (int pass = 0; pass < 2; ++pass)
      for (Index i = 0; i < kept; ++i) v -= q.col(i).dot(v) * q.col(i);
    const double nrm = v.norm();
    if (nrm <= drop || nrm == 0.0) continue;
    q.col(kept++) = v / nrm;
  }
  return q.leftCols(kept);
}

/// Haar-ish random orthogonal matrix (orthonormalized Gaussian ensemble).
inline Matrix random_orthogonal(Index d, Rng& rng) {
  Matrix q = orthonormalize(rng.gaussian_matrix(d, d));
  while (q.cols() < d) {  // astronomically unlikely rank loss
    Matrix extra = rng.gaussian_matrix(d, d - q.cols());
    Matrix joined(d, q.cols() + extra.cols());
    joined << q, extra;
    q = orthonormalize(joined);
  }
  return q;
}

namespace detail {

/// Raw block Rayleigh-Ritz subspace iteration without gap policing.
/// Returns the top-k Ritz pairs plus the (k+1)-th Ritz value for gap
/// diagnostics. Deterministic for a fixed seed.
struct RitzResult {
  Matrix q;          // D x k, orthonormal, Ritz order (values nonincreasing)
  Vector lambda;     // k Ritz values
  double next = std::numeric_limits<double>::quiet_NaN();  // (k+1)-th value if inspected
  Vector residuals;  // ||A q_i - lambda_i q_i||
  bool converged = false;
  int iters = 0;
};

inline RitzResult ritz_eigenpairs(const LinearOperator& op, Index k, const EigOptions& opts) {
  const Index dim = op.dim;
  if (k < 1 || k > dim) throw DimensionMismatch("ritz_eigenpairs: rank out of range");
  const Index block = std::min(dim, k + static_cast<Index>(opts.oversample));
  const int max_iters = opts.max_iters > 0 ? opts.max_iters : 2000;

  Rng rng(opts.seed, 0x5157u);
  Matrix x = orthonormalize(rng.gaussian_matrix(dim, block));
  while (x.cols() < block) {
    Matrix joined(dim, block);
    joined.leftCols(x.cols()) = x;
    joined.rightCols(block - x.cols()) = rng.gaussian_matrix(dim, block - x.cols());
    x = orthonormalize(joined);
  }

  RitzResult out;
  Matrix y(dim, block), ritz(dim, block), a_ritz(dim, block);
  Vector theta(block);
  for (int it = 1; it <= max_iters; ++it) {
    out.iters = it;
    for (Index j = 0; j < block; ++j) y.col(j) = op.apply(x.col(j));
    Matrix s = x.transpose() * y;
    s = 0.5 * (s + s.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    // ascending from Eigen; reorder to nonincreasing
    for (Index j = 0; j < block; ++j) {
      theta[j] = es.eigenvalues()[block - 1 - j];
      ritz.col(j) = x * es.eigenvectors().col(block - 1 - j);
      a_ritz.col(j) = y * es.eigenvectors().col(block - 1 - j);
    }
    Vector res(k);
    for (Index j = 0; j < k; ++j) res[j] = (a_ritz.col(j) - theta[j] * ritz.col(j)).norm();
    const double scale = std::max(std::abs(theta[0]), 1e-300);
    out.residuals = res;
    if (res.maxCoeff() <= opts.rel_tol * scale) {
      out.converged = true;
      x = ritz;
      break;
    }
    x = orthonormalize(a_ritz);
    while (x.cols() < block) {  // operator rank below block size; pad
      Matrix joined(dim, block);
      joined.leftCols(x.cols()) = x;
      joined.rightCols(block - x.cols()) = rng.gaussian_matrix(dim, block - x.cols());
      x = orthonormalize(joined);
    }
    if (it == max_iters) x = ritz;
  }
  out.q = orthonormalize(x.leftCols(k));
  apply_sign_convention(out.q);
  out.lambda = theta.head(k);
  if (block > k) out.next = theta[k];
  return out;
}

}  // namespace detail

/// Top-n eigendecomposition of a symmetric PSD operator by block subspace
/// iteration with Rayleigh-Ritz extraction. Throws GapTooSmall when the
/// relative eigengap (lambda_n - lambda_{n+1}) / lambda_n falls below
/// opts.delta_floor (or the operator has numerical rank < n), NoConvergence
/// when the iteration budget runs out on a well-gapped problem.
inline LowRankEig gapped_eigendecomposition(const LinearOperator& op, Index n,
                                            const EigOptions& opts = {},
                                            double* lambda_next_out = nullptr) {
  auto r = detail::ritz_eigenpairs(op, n, opts);
  if (lambda_next_out) *lambda_next_out = r.next;
  const double lam_n = r.lambda[n - 1];
  const double lam_top = std::max(r.lambda[0], 0.0);
  if (lam_n <= 1e-14 * std::max(lam_top, 1e-300))
    throw GapTooSmall("gapped_eigendecomposition: operator rank below requested n", 0.0,
                      opts.delta_floor);
  double delta = 1.0;
  if (std::isfinite(r.next)) delta = (lam_n - std::max(r.next, 0.0)) / lam_n;
  if (delta < opts.delta_floor)
    throw GapTooSmall("gapped_eigendecomposition: relative eigengap " + std::to_string(delta) +
                          " below floor " + std::to_string(opts.delta_floor),
                      delta, opts.delta_floor);
  if (!r.converged)
    throw NoConvergence("gapped_eigendecomposition: residual " +
                        std::to_string(r.residuals.maxCoeff()) + " after " +
                        std::to_string(r.iters) + " sweeps");
  return LowRankEig{r.q, r.lambda};
}

/// Dense matrix power on the span of an eigenpair bundle. Eigenvalues at or
/// below zero_floor * lambda_max are excluded for nonnegative powers and are
/// an error for negative ones.
inline Matrix pseudo_power_matrix(const LowRankEig& eig, double power, double zero_floor = 1e-12) {
  const Index n = eig.lambda.size();
  const double lam_max = n ? eig.lambda.maxCoeff() : 0.0;
  const double floor = zero_floor * std::max(lam_max, 1e-300);
  Vector w = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) {
    const double lam = eig.lambda[i];
    if (lam <= floor) {
      if (power < 0.0)
        throw ZeroEigenvalue("pseudo_power: eigenvalue " + std::to_string(lam) +
                             " at or below floor " + std::to_string(floor));
      continue;
    }
    w[i] = std::pow(lam, power);
  }
  return eig.q * w.asDiagonal() * eig.q.transpose();
}

/// Matrix-free variant of pseudo_power_matrix for powers +1/2, -1/2, -1.
inline LinearOperator pseudo_inverse_sqrt(const LowRankEig& eig, double power = -0.5,
                                          double zero_floor = 1e-12) {
  const Index n = eig.lambda.size();
  const double lam_max = n ? eig.lambda.maxCoeff() : 0.0;
  const double floor = zero_floor * std::max(lam_max, 1e-300);
  Vector w = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) {
    const double lam = eig.lambda[i];
    if (lam <= floor) {
      if (power < 0.0)
        throw ZeroEigenvalue("pseudo_inverse_sqrt: eigenvalue " + std::to_string(lam) +
                             " at or below floor " + std::to_string(floor));
      continue;
    }
    w[i] = std::pow(lam, power);
  }
  Matrix q = eig.q;
  return LinearOperator{q.rows(),
                        [q, w](const Vector& x) -> Vector {
                          return q * (w.asDiagonal() * (q.transpose() * x));
                        },
                        2.0 * static_cast<double>(q.rows()) * static_cast<double>(q.cols())};
}

/// Spectral norm of a symmetric matrix: exact solve at small sizes, seeded
/// power iteration on A^2 above that.
inline double spectral_norm_sym(const Matrix& a, int iters = 600) {
  if (a.rows() != a.cols()) throw DimensionMismatch("spectral_norm_sym: matrix must be square");
  const Index dim = a.rows();
  if (dim == 0) return 0.0;
  if (dim <= 600) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  Rng rng(0x5eccull, static_cast<std::uint64_t>(dim));
  Vector v = rng.unit_vector(dim);
  double est = 0.0;
  for (int t = 0; t < iters; ++t) {
    Vector w = a * (a * v).eval();
    const double nrm = w.norm();
    if (nrm <= 1e-300) return 0.0;
    w /= nrm;
    const double next = std::sqrt(nrm);
    if (t > 10 && std::abs(next - est) <= 1e-13 * std::max(next, 1e-300)) {
      est = next;
      break;
    }
    est = next;
    v = w;
  }
  return est;
}

namespace detail {
inline void check_projector(const Matrix& p, const char* who) {
  const Index dim = p.rows();
  const double scale = std::max(1.0, p.cwiseAbs().maxCoeff());
  if ((p - p.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw NotAProjector(std::string(who) + ": matrix is not symmetric");
  if (dim <= 600) {
    if ((p * p - p).cwiseAbs().maxCoeff() > 1e-8 * scale)
      throw NotAProjector(std::string(who) + ": idempotence violated");
  } else {
    // randomized idempotence audit: P(Pz) == Pz on a few seeded probes
    Rng rng(0x1de3ull, static_cast<std::uint64_t>(dim));
    for (int t = 0; t < 4; ++t) {
      Vector z = rng.unit_vector(dim);
      Vector pz = p * z;
      if ((p * pz - pz).norm() > 1e-8 * std::max(1.0, pz.norm()))
        throw NotAProjector(std::string(who) + ": idempotence violated (probe)");
    }
  }
}
}  // namespace detail

/// Largest principal angle sine between the ranges of two equal-rank
/// orthogonal projectors, computed as the spectral norm of their difference.
inline double subspace_sine_distance(const Matrix& p, const Matrix& q) {
  if (p.rows() != p.cols() || q.rows() != q.cols() || p.rows() != q.rows())
    throw DimensionMismatch("subspace_sine_distance: projectors must be square and equal size");
  detail::check_projector(p, "subspace_sine_distance");
  detail::check_projector(q, "subspace_sine_distance");
  if (std::abs(p.trace() - q.trace()) > 0.5)
    throw DimensionMismatch("subspace_sine_distance: projector ranks differ");
  return std::min(1.0, spectral_norm_sym(p - q));
}

/// Same distance from orthonormal basis factors (D x n each), avoiding the
/// D x D projectors: sin(theta_max) = sqrt(1 - sigma_min(Q1^T Q2)^2).
inline double subspace_sine_distance_factors(const Matrix& q1, const Matrix& q2) {
  if (q1.rows() != q2.rows() || q1.cols() != q2.cols())
    throw DimensionMismatch("subspace_sine_distance_factors: shapes differ");
  for (const Matrix* m : {&q1, &q2}) {
    Matrix g = m->transpose() * (*m);
    g.diagonal().array() -= 1.0;
    if (g.cwiseAbs().maxCoeff() > 1e-8)
      throw NotAProjector("subspace_sine_distance_factors: factor not orthonormal");
  }
  Eigen::JacobiSVD<Matrix> svd(q1.transpose() * q2);
  const double c = svd.singularValues().size() ? svd.singularValues().minCoeff() : 0.0;
  return std::sqrt(std::max(0.0, 1.0 - std::min(1.0, c) * std::min(1.0, c)));
}

/// Matrix-free rectangular operator (rows x cols) with transpose applies.
struct SingularOperator {
  Index rows = 0;
  Index cols = 0;
  std::function<Vector(const Vector&)> apply;    // R^cols -> R^rows
  std::function<Vector(const Vector&)> apply_t;  // R^rows -> R^cols
};

struct TopSingularPair {
  Vector u, v;
  double sigma = 0.0;
  double gap_ratio = 1.0;  // estimated sigma_1 / sigma_2, clamped to [1, 1e9]
  bool converged = false;
  int iters = 0;
};

/// Leading singular triple by alternating power iteration. The iteration
/// budget is ceil(C log(max(rows,cols)) / gap_hint) unless max_iters
/// overrides it. Never throws on stagnation: a flat spectrum comes back
/// with converged=false and gap_ratio near 1, which callers treat as a
/// rejected draw.
inline TopSingularPair top_singular_pair(const SingularOperator& op, double gap_hint,
                                         int max_iters = 0, std::uint64_t seed = 0,
                                         double iter_constant = 8.0) {
  if (op.rows < 1 || op.cols < 1) throw DimensionMismatch("top_singular_pair: empty operator");
  int budget = max_iters;
  if (budget <= 0) {
    const double dim = static_cast<double>(std::max(op.rows, op.cols));
    budget = static_cast<int>(
        std::ceil(iter_constant * std::log(std::max(dim, 2.0)) / std::max(gap_hint, 1e-4)));
    budget = std::clamp(budget, 8, 200000);
  }
  Rng rng(seed, 0x70b5ull);
  TopSingularPair out;
  Vector v = rng.unit_vector(op.cols);
  Vector u;
  double prev_sin = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> ratios;
  for (int t = 1; t <= budget; ++t) {
    out.iters = t;
    Vector w = op.apply(v);
    const double nu = w.norm();
    if (nu <= 1e-300) return out;  // zero operator: sigma 0, not converged
    u = w / nu;
    Vector z = op.apply_t(u);
    const double sigma = z.norm();
    if (sigma <= 1e-300) return out;
    Vector v_next = z / sigma;
    const double sin_step = (v_next - v.dot(v_next) * v).norm();
    out.sigma = sigma;
    if (std::isfinite(prev_sin) && prev_sin > 1e-300) {
      const double r = sin_step / prev_sin;
      if (r > 0.0 && r < 1.0) ratios.push_back(r);
      if (ratios.size() > 5) ratios.erase(ratios.begin());
    }
    v = v_next;
    if (sin_step <= 1e-13) {
      out.converged = true;
      if (!std::isfinite(prev_sin) || prev_sin <= 1e-13) {
        // Instant collapse is ambiguous: a rank-one operator and a multiple
        // of the identity both fix v in one step. Probe with an independent
        // direction; only a rank-one-consistent response earns the
        // unbounded-gap verdict.
        Vector probe = rng.unit_vector(op.cols);
        Vector w2 = op.apply(probe);
        const double nw2 = w2.norm();
        if (nw2 <= 1e-13 * std::max(sigma, 1e-300) || std::abs(u.dot(w2 / nw2)) >= 0.999)
          out.gap_ratio = 1e9;
      }
      break;
    }
    prev_sin = sin_step;
  }
  out.u = u;
  out.v = v;
  if (out.gap_ratio < 1e9 && !ratios.empty()) {
    std::vector<double> sorted = ratios;
    std::sort(sorted.begin(), sorted.end());
    const double med = sorted[sorted.size() / 2];
    out.gap_ratio = std::clamp(1.0 / std::sqrt(std::max(med, 1e-18)), 1.0, 1e9);
  }
  return out;
}

}  // namespace ovt
