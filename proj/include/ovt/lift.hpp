#pragma once

#include <ovt/common.hpp>
#include <ovt/implicit_tensor.hpp>
#include <ovt/linalg.hpp>
#include <ovt/rng.hpp>
#include <ovt/symmetry.hpp>
#include <ovt/tensor4.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace ovt {

struct LiftDiagnostics {
  double sigma_n = 0.0;             // n-th eigenvalue of the square reshaping
  double lifted_lambda_n = 0.0;     // n-th eigenvalue of the projected symmetrizer
  double lifted_lambda_next = 0.0;  // (n+1)-st; at most 1 - kappa^2 when clean
  bool delta_floor_fallback = false;  // kappa_floor = 0, generic gap floor used
};

struct LiftOutput {
  // Core sum_i b_i (x) (a_i a_i^T) (x) b_i plus lifted noise, b_i = W(a_i (x) a_i).
  // Mode 2 is deliberately left unwhitened so truncation stays available.
  ImplicitTensor3 lifted;
  // d^3 x n orthonormal; Pi_3 = B B^T projects onto the whitened span
  // span{W a_i^(x)2 (x) a_i}. Shares its columns with the lifted core.
  Matrix pi3_basis;
  LowRankEig whitener;  // top-n eigenpairs of the square reshaping; W = Q L^{-1/2} Q^T
  LiftDiagnostics diagnostics;
};

struct ConditionReport {
  double sigma_n = 0.0;
  double mu = 0.0;
  double kappa = 0.0;
  bool degenerate = false;
};

namespace detail {

using RowMajorConstMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// d^2 x d view of a d^3 vector: row (i d + i'), column j.
inline RowMajorConstMap unfold12(const double* x, Index d) { return {x, d * d, d}; }

}  // namespace detail

/// Condition number of unit components a_1..a_n: smallest singular value of
/// (1/2)(Id - P_23) applied to an orthonormalization of the span of
/// {a_i (x) a_i (x) c : c orthogonal to a_i}. Computed as the pencil
/// eigenproblem  Gp x = lambda G x  over R^{n(d-1)} with
///   G[(i,j),(k,l)]  = <a_i,a_k>^2 <c_ij, c_kl>
///   Gp[(i,j),(k,l)] = <a_i,a_k> <a_i,c_kl> <c_ij,a_k>
/// and kappa^2 = (1 - lambda_max)/2. Complement bases come from the
/// Householder reflector sending a_i to -sign(a_i[0]) e_1; the value is
/// basis-invariant. Returns 0 and sets the flag for degenerate inputs.
inline double kappa(const Matrix& components, bool* degenerate = nullptr) {
  const Index d = components.rows(), n = components.cols();
  if (degenerate) *degenerate = false;
  if (d < 2 || n < 1 || n > d * d)
    throw DimensionMismatch("kappa: need d >= 2 and 1 <= n <= d^2");
  Matrix a = components;
  for (Index i = 0; i < n; ++i) {
    const double len = a.col(i).norm();
    if (!(len > 1e-300)) {
      if (degenerate) *degenerate = true;
      return 0.0;
    }
    a.col(i) /= len;
  }
  const Index m = n * (d - 1);
  if (m > 8192) throw DimensionCapExceeded("kappa: n (d - 1) exceeds 8192");

  // Column c_ij = (column j+1 of the reflector Id - 2 u u^T / ||u||^2),
  // u = a_i + sign(a_i[0]) e_1: orthonormal and orthogonal to a_i.
  Matrix bigb(d, m);
  for (Index i = 0; i < n; ++i) {
    Vector u = a.col(i);
    const double s = u[0] >= 0.0 ? 1.0 : -1.0;
    u[0] += s;
    const double scale = 2.0 / u.squaredNorm();
    for (Index j = 1; j < d; ++j) {
      Vector col = -scale * u[j] * u;
      col[j] += 1.0;
      bigb.col(i * (d - 1) + (j - 1)) = col;
    }
  }
  const Matrix inner = a.transpose() * a;
  const Matrix bgram = bigb.transpose() * bigb;
  const Matrix c = bigb.transpose() * a;  // row (i,j), column k: <c_ij, a_k>
  Matrix g(m, m), gp(m, m);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < n; ++k) {
      const double w = inner(i, k);
      g.block(i * (d - 1), k * (d - 1), d - 1, d - 1) =
          w * w * bgram.block(i * (d - 1), k * (d - 1), d - 1, d - 1);
      gp.block(i * (d - 1), k * (d - 1), d - 1, d - 1) =
          w * c.block(i * (d - 1), k, d - 1, 1) *
          c.block(k * (d - 1), i, d - 1, 1).transpose();
    }

  // G must be positive definite for the pencil; a failed Cholesky means the
  // stacked span is numerically rank-deficient.
  Eigen::LLT<Matrix> llt(g);
  if (llt.info() != Eigen::Success) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(gp, g, Eigen::EigenvaluesOnly |
                                                                  Eigen::Ax_lBx);
  if (ges.info() != Eigen::Success) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  const double lmax = ges.eigenvalues().maxCoeff();
  if (!std::isfinite(lmax) || lmax > 1.0 + 1e-6 || lmax < -1.0 - 1e-6) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  const double k2 = std::clamp(0.5 * (1.0 - lmax), 0.0, 1.0);
  const double value = std::sqrt(k2);
  if (value < 1e-8 && degenerate) *degenerate = true;
  return value;
}

/// Desk-scale condition quantities of a component matrix: sigma_n is the
/// n-th eigenvalue of sum dyad(a_i (x) a_i), mu the top eigenvalue of
/// sum ||a_i||^-2 dyad(a_i^(x)3); both through the n x n Gram, whose nonzero
/// spectrum matches. kappa as above.
inline ConditionReport condition_quantities(const Matrix& components) {
  const Index d = components.rows(), n = components.cols();
  if (d < 2 || n < 1 || n > d * d)
    throw DimensionMismatch("condition_quantities: need d >= 2 and 1 <= n <= d^2");
  ConditionReport rep;
  const Matrix inner = components.transpose() * components;
  const Matrix gram2 = inner.array().square();
  Eigen::SelfAdjointEigenSolver<Matrix> es2(gram2);
  rep.sigma_n = std::max(0.0, es2.eigenvalues().minCoeff());
  Vector norms(n);
  for (Index i = 0; i < n; ++i) norms[i] = std::max(components.col(i).norm(), 1e-300);
  Matrix gram3(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      gram3(i, j) = inner(i, j) * inner(i, j) * inner(i, j) / (norms[i] * norms[j]);
  Eigen::SelfAdjointEigenSolver<Matrix> es3(gram3);
  rep.mu = std::max(0.0, es3.eigenvalues().maxCoeff());
  rep.kappa = kappa(components, &rep.degenerate);
  return rep;
}

/// Lifting stage: from the 4-tensor to an implicit 3-tensor over R^{d^2}.
/// (1) top-n eigenpairs of the square reshaping give the whitener
///     W = Q Lambda^{-1/2} Q^T and the projector Pi_S = Q Q^T;
/// (2) top-n eigenpairs of (Pi_S (x) Id) Pi_Sym (Pi_S (x) Id), applied
///     matrix-free in O(n d^3), give an orthonormal basis of the lifted
///     symmetric span;
/// (3) each basis column, unfolded d^2 x d, is hit by W on the left;
/// (4) the results are re-orthonormalized into B;
/// (5) the output tensor carries the core B B^T.
/// sigma_floor gates the n-th reshaping eigenvalue; kappa_floor gates the
/// stage-2 relative eigengap at kappa_floor^2 (0 falls back to the generic
/// floor and flags the diagnostics).
inline LiftOutput lift(const SymTensor4& t, Index n, double sigma_floor, double kappa_floor,
                       const EigOptions& opts = {}) {
  const Index d = t.d();
  const Index d3 = d * d * d;
  if (n < 1 || n > d * d) throw DimensionMismatch("lift: n must lie in [1, d^2]");
  if (sigma_floor < 0 || kappa_floor < 0)
    throw DimensionMismatch("lift: floors must be nonnegative");

  LiftDiagnostics diag;

  const Matrix sq = t.square_reshape();
  EigOptions o1 = opts;
  o1.rel_tol = std::min(opts.rel_tol, 1e-12);
  o1.seed = Rng::derive(opts.seed, 0x11f7u);
  LowRankEig whitener = gapped_eigendecomposition(dense_operator(sq), n, o1);
  diag.sigma_n = whitener.lambda[n - 1];
  if (diag.sigma_n < sigma_floor)
    throw GapTooSmall("lift: n-th reshaping eigenvalue below sigma floor", diag.sigma_n,
                      sigma_floor);

  const Matrix& q = whitener.q;
  auto project_s = [&](const Vector& x) -> Vector {
    detail::RowMajorConstMap xm = detail::unfold12(x.data(), d);
    const Matrix y = q * (q.transpose() * xm);
    Vector out(d3);
    detail::RowMajorMutMap(out.data(), d * d, d) = y;
    return out;
  };
  LinearOperator op2;
  op2.dim = d3;
  op2.apply = [&](const Vector& x) -> Vector {
    return project_s(apply_pi_sym(project_s(x), d));
  };
  op2.cost_hint = 4.0 * static_cast<double>(n) * d3;

  EigOptions o2 = opts;
  o2.rel_tol = std::min(opts.rel_tol, 1e-11);
  o2.seed = Rng::derive(opts.seed, 0x21f7u);
  if (kappa_floor > 0) {
    o2.delta_floor = std::max(kappa_floor * kappa_floor, 1e-12);
  } else {
    diag.delta_floor_fallback = true;
  }
  double lam_next = 0.0;
  LowRankEig s3 = gapped_eigendecomposition(op2, n, o2, &lam_next);
  diag.lifted_lambda_n = s3.lambda[n - 1];
  diag.lifted_lambda_next = lam_next;

  const FactoredMatrix w = FactoredMatrix::from_eig(whitener, -0.5);
  Matrix bprime(d3, n);
  for (Index c = 0; c < n; ++c) {
    const Matrix wx = w.apply(Matrix(detail::unfold12(s3.q.col(c).data(), d)));
    Vector col(d3);
    detail::RowMajorMutMap(col.data(), d * d, d) = wx;
    bprime.col(c) = col;
  }
  Matrix b = orthonormalize(bprime);
  if (b.cols() != n)
    throw GapTooSmall("lift: whitened basis is rank-deficient", static_cast<double>(b.cols()),
                      static_cast<double>(n));

  LiftOutput out{ImplicitTensor3::from_factors(d, b, b), std::move(b), std::move(whitener),
                 diag};
  return out;
}

}  // namespace ovt
