#pragma once

// Dense reference implementations used to validate the matrix-free library
// routes. Everything here is deliberately written the slow, literal way and
// shares no code with the production paths it checks.

#include <ovt/common.hpp>
#include <ovt/implicit_tensor.hpp>
#include <ovt/symmetry.hpp>

#include <array>
#include <cmath>
#include <vector>

namespace ovt::reference {

/// Mean of the six mode-permutation matrices on R^{d^3}.
inline Matrix dense_pi_sym(Index d) {
  const Index n = d * d * d;
  Matrix m = Matrix::Zero(n, n);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      for (Index k = 0; k < d; ++k) {
        const Index col = idx3(i, j, k, d);
        const std::array<Index, 6> rows{idx3(i, j, k, d), idx3(i, k, j, d), idx3(j, i, k, d),
                                        idx3(j, k, i, d), idx3(k, i, j, d), idx3(k, j, i, d)};
        for (Index r : rows) m(r, col) += 1.0 / 6.0;
      }
  return m;
}

inline Matrix dense_p23(Index d) {
  const Index n = d * d * d;
  Matrix m = Matrix::Zero(n, n);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      for (Index k = 0; k < d; ++k) m(idx3(i, k, j, d), idx3(i, j, k, d)) = 1.0;
  return m;
}

/// Entrywise spherical fourth moment E[a_i a_j a_k a_l] on pair indices.
inline Matrix dense_fourth_moment(Index d) {
  const double z = 1.0 / (static_cast<double>(d) * (d + 2));
  Matrix m(d * d, d * d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      for (Index k = 0; k < d; ++k)
        for (Index l = 0; l < d; ++l) {
          const double v = ((i == j && k == l) ? 1.0 : 0.0) + ((i == k && j == l) ? 1.0 : 0.0) +
                           ((i == l && j == k) ? 1.0 : 0.0);
          m(idx2(i, j, d), idx2(k, l, d)) = v * z;
        }
  return m;
}

/// Pseudo-inverse square root by full eigendecomposition.
inline Matrix dense_pseudo_power(const Matrix& a, double power, double floor = 1e-10) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
  const Vector& lam = es.eigenvalues();
  const double lam_max = lam.size() ? lam.cwiseAbs().maxCoeff() : 0.0;
  Vector w = Vector::Zero(lam.size());
  for (Index i = 0; i < lam.size(); ++i)
    if (lam[i] > floor * std::max(lam_max, 1e-300)) w[i] = std::pow(lam[i], power);
  return es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose();
}

/// Literal core expansion of an implicit tensor, before multipliers:
/// T0[(ii'), (jj'), (kk')] = sum_r U[(i d + i') d + j, r] V[(k d + k') d + j', r].
inline Tensor3Dense dense_from_core(Index d, const Matrix& u, const Matrix& v) {
  const Index d2 = d * d;
  Tensor3Dense t(d2);
  for (Index r = 0; r < u.cols(); ++r)
    for (Index i = 0; i < d; ++i)
      for (Index ip = 0; ip < d; ++ip)
        for (Index j = 0; j < d; ++j)
          for (Index k = 0; k < d; ++k)
            for (Index kp = 0; kp < d; ++kp)
              for (Index jp = 0; jp < d; ++jp)
                t.at(i * d + ip, j * d + jp, k * d + kp) +=
                    u((i * d + ip) * d + j, r) * v((k * d + kp) * d + jp, r);
  return t;
}

inline Tensor3Dense mode_multiply_dense(const Tensor3Dense& t, const Matrix& m, int mode) {
  const Index n = t.d2;
  Tensor3Dense out(n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b)
      for (Index c = 0; c < n; ++c) {
        const double x = t.at(a, b, c);
        if (x == 0.0) continue;
        for (Index e = 0; e < n; ++e) {
          if (mode == 1)
            out.at(e, b, c) += m(e, a) * x;
          else if (mode == 2)
            out.at(a, e, c) += m(e, b) * x;
          else
            out.at(a, b, e) += m(e, c) * x;
        }
      }
  return out;
}

inline Vector contract_dense(const Tensor3Dense& t, const Vector& x, const Vector& y,
                             ContractPair pair) {
  const Index n = t.d2;
  Vector out = Vector::Zero(n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b)
      for (Index c = 0; c < n; ++c) {
        const double v = t.at(a, b, c);
        if (pair == ContractPair::M12)
          out[c] += v * x[a] * y[b];
        else if (pair == ContractPair::M13)
          out[b] += v * x[a] * y[c];
        else
          out[a] += v * x[b] * y[c];
      }
  return out;
}

inline double frobenius_dense(const Tensor3Dense& t) {
  double s = 0.0;
  for (double x : t.v) s += x * x;
  return std::sqrt(s);
}

/// Unfolding of one two-vs-one reshaping as a dense matrix.
inline Matrix unfold_dense(const Tensor3Dense& t, Reshaping which) {
  const Index n = t.d2;
  Matrix m(n * n, n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b)
      for (Index c = 0; c < n; ++c) {
        if (which == Reshaping::Rows12_Cols3)
          m(a * n + b, c) = t.at(a, b, c);
        else if (which == Reshaping::Rows23_Cols1)
          m(b * n + c, a) = t.at(a, b, c);
        else
          m(a * n + c, b) = t.at(a, b, c);
      }
  return m;
}

/// Exact singular-value clip of one reshaping at 1, by full SVD.
inline Tensor3Dense truncate_dense(const Tensor3Dense& t, Reshaping which) {
  Matrix m = unfold_dense(t, which);
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector sv = svd.singularValues();
  for (Index i = 0; i < sv.size(); ++i) sv[i] = std::min(sv[i], 1.0);
  Matrix clipped = svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
  const Index n = t.d2;
  Tensor3Dense out(n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b)
      for (Index c = 0; c < n; ++c)
        out.at(a, b, c) = which == Reshaping::Rows12_Cols3
                              ? clipped(a * n + b, c)
                              : (which == Reshaping::Rows23_Cols1 ? clipped(b * n + c, a)
                                                                  : clipped(a * n + c, b));
  return out;
}

inline double reshaping_sigma_max(const Tensor3Dense& t, Reshaping which) {
  Eigen::BDCSVD<Matrix> svd(unfold_dense(t, which));
  return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
}

/// Kappa from an explicit column matrix H: orthonormalize the range with a
/// QR factorization, project onto the swap-antisymmetric subspace, take the
/// smallest singular value.
inline double kappa_from_h(const Matrix& h, Index d) {
  Eigen::HouseholderQR<Matrix> qr(h);
  Matrix q = qr.householderQ() * Matrix::Identity(h.rows(), h.cols());
  Matrix k(h.rows(), h.cols());
  for (Index c = 0; c < q.cols(); ++c) k.col(c) = apply_pi23_perp(q.col(c), d);
  Eigen::BDCSVD<Matrix> svd(k);
  return svd.singularValues().size() ? svd.singularValues().minCoeff() : 0.0;
}

}  // namespace ovt::reference
