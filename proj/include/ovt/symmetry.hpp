#pragma once

#include <ovt/common.hpp>

#include <array>
#include <cmath>

namespace ovt {

/// Flat index of (i, j, k) in R^{d^3}, last index fastest.
inline Index idx3(Index i, Index j, Index k, Index d) { return (i * d + j) * d + k; }

/// Flat index of (i, j) in R^{d^2}.
inline Index idx2(Index i, Index j, Index d) { return i * d + j; }

inline Vector kron_vec(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a[i] * b;
  return out;
}

/// Orthogonal projector onto symmetric 3-tensors: mean over the six index
/// permutations. Matrix-free, <= 6 nonzeros per row; the row weights are 1,
/// 1/3, 1/6 for patterns with 1, 2, 3 distinct values.
inline Vector apply_pi_sym(const Vector& x, Index d) {
  if (x.size() != d * d * d) throw DimensionMismatch("apply_pi_sym: vector is not d^3");
  Vector y(x.size());
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j)
      for (Index k = j; k < d; ++k) {
        std::array<Index, 6> perm{idx3(i, j, k, d), idx3(i, k, j, d), idx3(j, i, k, d),
                                  idx3(j, k, i, d), idx3(k, i, j, d), idx3(k, j, i, d)};
        Index cnt = 1;
        if (i != j || j != k) cnt = (i != j && j != k) ? 6 : 3;
        double sum = 0.0;
        // distinct members of perm are its first occurrences
        for (Index t = 0; t < 6; ++t) sum += x[perm[t]];
        double mean = sum / 6.0;
        if (g_sym_fault.load(std::memory_order_relaxed) && i == 0 && j == 0 && k == std::min<Index>(1, d - 1))
          mean = -mean;
        for (Index t = 0; t < 6; ++t) y[perm[t]] = mean;
        add_opcount(static_cast<std::uint64_t>(cnt));
      }
  return y;
}

/// Swap of tensor modes 2 and 3 on R^{d^3}.
inline Vector apply_p23(const Vector& x, Index d) {
  if (x.size() != d * d * d) throw DimensionMismatch("apply_p23: vector is not d^3");
  Vector y(x.size());
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      for (Index k = 0; k < d; ++k) y[idx3(i, j, k, d)] = x[idx3(i, k, j, d)];
  add_opcount(static_cast<std::uint64_t>(d) * d * d);
  return y;
}

/// Projector onto the P23-symmetric subspace.
inline Vector apply_pi23(const Vector& x, Index d) { return 0.5 * (x + apply_p23(x, d)); }

/// Projector onto the P23-antisymmetric subspace.
inline Vector apply_pi23_perp(const Vector& x, Index d) { return 0.5 * (x - apply_p23(x, d)); }

/// Symmetric part of a d x d matrix flattened in R^{d^2}.
inline Vector sym2_project(const Vector& x, Index d) {
  if (x.size() != d * d) throw DimensionMismatch("sym2_project: vector is not d^2");
  Vector y(x.size());
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      y[idx2(i, j, d)] = 0.5 * (x[idx2(i, j, d)] + x[idx2(j, i, d)]);
  return y;
}

/// vec(Id_d) in R^{d^2}.
inline Vector phi_vector(Index d) {
  Vector phi = Vector::Zero(d * d);
  for (Index i = 0; i < d; ++i) phi[idx2(i, i, d)] = 1.0;
  return phi;
}

/// Constants of the closed form A^{-1/2} = d1 PiSym2 - d2 Phi Phi^T for the
/// spherical fourth moment A = E[(a kron a)(a kron a)^T], a uniform on the
/// unit sphere.
inline double fourth_moment_d1(Index d) { return std::sqrt(static_cast<double>(d) * (d + 2) / 2.0); }
inline double fourth_moment_d2(Index d) {
  return (std::sqrt((static_cast<double>(d) + 2.0) / 2.0) - 1.0) / std::sqrt(static_cast<double>(d));
}

/// Apply A^{-1/2} (pseudo-inverse square root on symmetric matrices) to a
/// flattened d x d matrix.
inline Vector fourth_moment_inv_sqrt_apply(const Vector& x, Index d) {
  if (x.size() != d * d) throw DimensionMismatch("fourth_moment_inv_sqrt_apply: vector is not d^2");
  double trace = 0.0;
  for (Index i = 0; i < d; ++i) trace += x[idx2(i, i, d)];
  Vector y = fourth_moment_d1(d) * sym2_project(x, d);
  const double c = fourth_moment_d2(d) * trace;
  for (Index i = 0; i < d; ++i) y[idx2(i, i, d)] -= c;
  return y;
}

}  // namespace ovt
