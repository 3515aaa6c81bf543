#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "ovt/common.hpp"
#include "ovt/linalg.hpp"
#include "ovt/rng.hpp"
#include "ovt/symmetry.hpp"
#include "ovt/tensor4.hpp"

namespace ovt {

// ---------------------------------------------------------------------------
// Component ensembles
// ---------------------------------------------------------------------------

enum class EnsembleKind { Spherical, Sparse, Hypercube, Spiked };

struct Ensemble {
  EnsembleKind kind = EnsembleKind::Spherical;
  double spike_lambda = 0.0;        // Spiked only; <= 0 means default d/2
  double sparsity_fraction = 0.25;  // Sparse only
  // Samples are unit-normalized by default; the pipeline and kappa assume
  // unit components. Disable to get raw ensemble draws.
  bool normalize = true;
};

namespace detail {

constexpr std::uint64_t kSpikeStream = ~std::uint64_t{0};

inline Vector draw_sparse(Rng& rng, Index d, double fraction) {
  const Index m = std::max<Index>(1, static_cast<Index>(std::llround(
                                         fraction * static_cast<double>(d))));
  std::vector<Index> idx(static_cast<std::size_t>(d));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index t = 0; t < m; ++t) {
    const auto pick = t + static_cast<Index>(rng.below(
                              static_cast<std::uint64_t>(d - t)));
    std::swap(idx[static_cast<std::size_t>(t)],
              idx[static_cast<std::size_t>(pick)]);
  }
  Vector v = Vector::Zero(d);
  for (Index t = 0; t < m; ++t) v[idx[static_cast<std::size_t>(t)]] = rng.gaussian();
  return v;
}

inline Vector draw_hypercube(Rng& rng, Index d) {
  Vector v(d);
  for (Index i = 0; i < d; ++i) v[i] = static_cast<double>(rng.below(2));
  return v;
}

}  // namespace detail

// Draws n components as columns of a d x n matrix. Component i uses the
// derived stream (seed, i), so generation is order-independent and stable.
inline Matrix gen_components(const Ensemble& ens, Index d, Index n,
                             std::uint64_t seed) {
  if (n < 1) throw DimensionMismatch("gen_components: n must be >= 1");
  if (d < 2) throw DimensionMismatch("gen_components: d must be >= 2");
  Vector spike_dir;
  double spike_scale = 0.0;
  if (ens.kind == EnsembleKind::Spiked) {
    const double lambda =
        ens.spike_lambda > 0 ? ens.spike_lambda : static_cast<double>(d) / 2;
    Rng spike_rng(seed, detail::kSpikeStream);
    spike_dir = spike_rng.unit_vector(d);
    spike_scale = std::sqrt(1.0 + lambda) - 1.0;
  }
  Matrix out(d, n);
  for (Index i = 0; i < n; ++i) {
    Rng rng(seed, static_cast<std::uint64_t>(i));
    Vector v;
    bool ok = false;
    for (int attempt = 0; attempt < 100; ++attempt) {
      switch (ens.kind) {
        case EnsembleKind::Spherical:
          v = rng.gaussian_vector(d);
          break;
        case EnsembleKind::Sparse:
          v = detail::draw_sparse(rng, d, ens.sparsity_fraction);
          break;
        case EnsembleKind::Hypercube:
          v = detail::draw_hypercube(rng, d);
          break;
        case EnsembleKind::Spiked: {
          const Vector g = rng.gaussian_vector(d);
          v = g + spike_scale * spike_dir.dot(g) * spike_dir;
          break;
        }
      }
      if (v.norm() > 0) {
        ok = true;
        break;
      }
    }
    if (!ok)
      throw DegenerateSample("gen_components: zero vector after 100 resamples");
    if (ens.normalize || ens.kind == EnsembleKind::Spherical) v.normalize();
    out.col(i) = v;
  }
  return out;
}

// Dense Sum_i a_i^{x4}; exactly symmetric by construction.
inline SymTensor4 build_tensor(const Matrix& components) {
  SymTensor4 t = SymTensor4::zero(components.rows());
  for (Index i = 0; i < components.cols(); ++i)
    t.add_rank_one(components.col(i));
  return t;
}

// ---------------------------------------------------------------------------
// Noise models
// ---------------------------------------------------------------------------

enum class NoiseKind { SpectralBounded, DictionarySplit };

struct NoiseModel {
  NoiseKind kind = NoiseKind::SpectralBounded;
  double eta = 0.0;   // SpectralBounded: target spectral norm of the reshaping
  double eps1 = 0.0;  // DictionarySplit: in-span relative perturbation
  double eps2 = 0.0;  // DictionarySplit: out-of-span absolute perturbation
};

namespace detail {

// Eigendecomposition of a symmetric PSD-ish matrix, eigenvalues descending.
struct PsdDecomp {
  Matrix vectors;  // all D columns, descending eigenvalue order
  Vector lambda;   // length D, descending
  Index rank = 0;  // count of eigenvalues > rank_tol * lambda_max
};

inline PsdDecomp psd_decompose(const Matrix& a, double rank_tol = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
  PsdDecomp out;
  const Index dim = a.rows();
  out.vectors = es.eigenvectors().rowwise().reverse();
  out.lambda = es.eigenvalues().reverse();
  const double lmax = dim > 0 ? out.lambda[0] : 0.0;
  while (out.rank < dim && out.lambda[out.rank] > rank_tol * lmax) ++out.rank;
  return out;
}

// Q^power on the numerical image, zero on the kernel (Moore-Penrose).
inline Matrix psd_pseudo_power(const PsdDecomp& dec, double power) {
  const Matrix basis = dec.vectors.leftCols(dec.rank);
  Vector powered(dec.rank);
  for (Index i = 0; i < dec.rank; ++i)
    powered[i] = std::pow(dec.lambda[i], power);
  return basis * powered.asDiagonal() * basis.transpose();
}

inline double spectral_norm_dense(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return Eigen::BDCSVD<Matrix>(a).singularValues()(0);
}

// Draws a fully symmetric Gaussian order-4 direction: one value per sorted
// index orbit averaged over the orbit, written to all permutation slots.
inline SymTensor4 symmetric_gaussian_direction(Index d, Rng& rng) {
  SymTensor4 g = SymTensor4::zero(d);
  for (Index i = 0; i < d * d * d * d; ++i) g.entries()[i] = rng.gaussian();
  SymTensor4 out = SymTensor4::zero(d);
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j)
      for (Index k = j; k < d; ++k)
        for (Index l = k; l < d; ++l) {
          std::array<Index, 4> p{i, j, k, l};
          double sum = 0.0;
          int count = 0;
          do {
            sum += g.entries()[g.flat(p[0], p[1], p[2], p[3])];
            ++count;
          } while (std::next_permutation(p.begin(), p.end()));
          const double mean = sum / count;
          p = {i, j, k, l};
          do {
            out.entries()[out.flat(p[0], p[1], p[2], p[3])] = mean;
          } while (std::next_permutation(p.begin(), p.end()));
        }
  return out;
}

}  // namespace detail

// A dictionary-split perturbation pair at the square-reshaping level:
// q_tilde - q = e1 + e2 with e1 span-sandwiched and scaled so that
// |Q^{-1/2} E1 Q^{-1/2}| = eps1, and e2 realized by a small rotation of the
// image so that |Q^{-1}| |E2| = eps2 while q_tilde stays PSD of the same rank.
struct DictionarySplit {
  Matrix q;
  Matrix q_tilde;
  Matrix e1;
  Matrix e2;
};

inline DictionarySplit make_dictionary_split(const Matrix& q, double eps1,
                                             double eps2, std::uint64_t seed) {
  if (q.rows() != q.cols())
    throw DimensionMismatch("make_dictionary_split: matrix must be square");
  if (eps1 < 0 || eps2 < 0 || eps1 >= 1)
    throw HypothesisViolated("make_dictionary_split: need 0 <= eps1 < 1, eps2 >= 0");
  const Index dim = q.rows();
  const auto dec = detail::psd_decompose(q);
  if (dec.rank == 0)
    throw HypothesisViolated("make_dictionary_split: zero matrix");
  if (dec.lambda[dim - 1] < -1e-10 * dec.lambda[0])
    throw HypothesisViolated("make_dictionary_split: input not PSD");
  const Matrix basis = dec.vectors.leftCols(dec.rank);
  const Matrix pi_s = basis * basis.transpose();
  const Matrix q_inv_sqrt = detail::psd_pseudo_power(dec, -0.5);
  const double q_inv_norm = 1.0 / dec.lambda[dec.rank - 1];

  Rng rng(seed);
  DictionarySplit out;
  out.q = q;

  out.e1 = Matrix::Zero(dim, dim);
  if (eps1 > 0) {
    const Matrix g = rng.gaussian_matrix(dim, dim);
    Matrix raw = pi_s * (0.5 * (g + g.transpose())) * pi_s;
    const double s = detail::spectral_norm_dense(q_inv_sqrt * raw * q_inv_sqrt);
    if (s == 0)
      throw DegenerateSample("make_dictionary_split: degenerate e1 direction");
    out.e1 = (eps1 / s) * raw;
  }
  const Matrix m = q + out.e1;

  out.e2 = Matrix::Zero(dim, dim);
  out.q_tilde = m;
  if (eps2 > 0) {
    const Matrix g2 = rng.gaussian_matrix(dim, dim);
    Matrix skew = 0.5 * (g2 - g2.transpose());
    skew /= detail::spectral_norm_dense(skew);
    const Matrix id = Matrix::Identity(dim, dim);
    // Cayley transform: orthogonal for every t, so m rotates without leaving
    // the PSD rank-n family; bisect t to hit the e2 norm target exactly.
    const auto e2_at = [&](double t) {
      const Matrix rot =
          (id - 0.5 * t * skew).partialPivLu().solve(id + 0.5 * t * skew);
      return Matrix(rot * m * rot.transpose() - m);
    };
    const auto f = [&](double t) {
      return q_inv_norm * spectral_norm_sym(e2_at(t));
    };
    double hi = 1e-3;
    int guard = 0;
    while (f(hi) < eps2) {
      hi *= 2;
      if (++guard > 60)
        throw NoConvergence("make_dictionary_split: eps2 target unreachable");
    }
    double lo = guard == 0 ? 0.0 : hi / 2;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double val = f(mid);
      if (std::abs(val - eps2) <= 1e-13 * std::max(1.0, eps2)) {
        lo = hi = mid;
        break;
      }
      (val < eps2 ? lo : hi) = mid;
    }
    out.e2 = e2_at(0.5 * (lo + hi));
    out.q_tilde = m + out.e2;
  }
  return out;
}

// Applies a noise model to a tensor. SpectralBounded adds a symmetrized
// Gaussian direction rescaled so the square reshaping of the added error has
// spectral norm exactly eta. DictionarySplit perturbs the square reshaping
// per make_dictionary_split; the result is pair-symmetric (a symmetric
// d^2 x d^2 matrix) but not fully permutation-symmetric as a 4-tensor.
inline SymTensor4 add_noise(const SymTensor4& t, const NoiseModel& model,
                            std::uint64_t seed) {
  const Index d = t.d();
  switch (model.kind) {
    case NoiseKind::SpectralBounded: {
      if (model.eta < 0)
        throw HypothesisViolated("add_noise: eta must be nonnegative");
      if (model.eta == 0) return t;
      Rng rng(seed);
      for (int attempt = 0; attempt < 100; ++attempt) {
        SymTensor4 dir = detail::symmetric_gaussian_direction(d, rng);
        const double norm = spectral_norm_sym(dir.square_reshape());
        if (norm == 0) continue;
        SymTensor4 out = t;
        out.entries() += (model.eta / norm) * dir.entries();
        return out;
      }
      throw DegenerateSample("add_noise: zero noise direction after 100 tries");
    }
    case NoiseKind::DictionarySplit: {
      const auto split =
          make_dictionary_split(t.square_reshape(), model.eps1, model.eps2, seed);
      SymTensor4 out = SymTensor4::zero(d);
      for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j)
          for (Index k = 0; k < d; ++k)
            for (Index l = 0; l < d; ++l)
              out.at(i, j, k, l) = split.q_tilde(i * d + j, k * d + l);
      return out;
    }
  }
  throw Error("add_noise: unknown noise kind");
}

// ---------------------------------------------------------------------------
// Perturbation bound audits
// ---------------------------------------------------------------------------

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool ok = true;
};

struct DictionaryPerturbReport {
  double eps = 0.0;
  BoundCheck projector;
  std::vector<BoundCheck> sqrt_checks;
  std::vector<BoundCheck> inv_sqrt_checks;
  double min_slack = 0.0;  // min over all checks of rhs - lhs
  bool all_ok = true;
};

// Audits the three dictionary-perturbation bounds on a PSD pair of equal
// rank. probes holds test vectors as columns.
inline DictionaryPerturbReport check_dictionary_perturb(const Matrix& q,
                                                        const Matrix& qt,
                                                        double eps,
                                                        const Matrix& probes) {
  if (q.rows() != q.cols() || qt.rows() != qt.cols() || q.rows() != qt.rows())
    throw DimensionMismatch("check_dictionary_perturb: shape mismatch");
  // The lemma is valid for eps <= 1/9; the audit refuses anything above 0.1
  // so near-boundary inputs are never accepted.
  if (eps < 0 || eps > 0.1)
    throw HypothesisViolated("check_dictionary_perturb: need 0 <= eps <= 0.1");
  const auto dq = detail::psd_decompose(q);
  const auto dqt = detail::psd_decompose(qt);
  const Index dim = q.rows();
  if (dq.lambda[dim - 1] < -1e-10 * dq.lambda[0] ||
      dqt.lambda[dim - 1] < -1e-10 * std::max(dqt.lambda[0], 0.0))
    throw HypothesisViolated("check_dictionary_perturb: inputs must be PSD");
  if (dq.rank != dqt.rank)
    throw HypothesisViolated("check_dictionary_perturb: ranks differ");

  const Matrix pi_s =
      dq.vectors.leftCols(dq.rank) * dq.vectors.leftCols(dq.rank).transpose();
  const Matrix pi_st = dqt.vectors.leftCols(dqt.rank) *
                       dqt.vectors.leftCols(dqt.rank).transpose();
  const Matrix q_half = detail::psd_pseudo_power(dq, 0.5);
  const Matrix qt_half = detail::psd_pseudo_power(dqt, 0.5);
  const Matrix q_inv_half = detail::psd_pseudo_power(dq, -0.5);
  const Matrix qt_inv_half = detail::psd_pseudo_power(dqt, -0.5);
  const Matrix id = Matrix::Identity(dim, dim);

  DictionaryPerturbReport rep;
  rep.eps = eps;
  const auto judge = [](double lhs, double rhs) {
    BoundCheck c;
    c.lhs = lhs;
    c.rhs = rhs;
    c.ok = lhs <= rhs + 1e-10 * std::max(1.0, rhs);
    return c;
  };
  rep.projector = judge(spectral_norm_sym(pi_s - pi_st), 3 * eps);
  rep.min_slack = rep.projector.rhs - rep.projector.lhs;
  rep.all_ok = rep.projector.ok;
  const double root_eps = std::sqrt(eps);
  for (Index p = 0; p < probes.cols(); ++p) {
    const Vector x = probes.col(p);
    const double comp_norm = ((id - pi_s) * x).norm();
    const auto sq = judge(((q_half - qt_half) * x).norm(),
                          4 * eps * (q_half * x).norm() + root_eps * comp_norm);
    const auto inv =
        judge(((q_inv_half - qt_inv_half) * x).norm(),
              4 * eps * (q_inv_half * x).norm() + 2 * root_eps * comp_norm);
    rep.min_slack = std::min({rep.min_slack, sq.rhs - sq.lhs, inv.rhs - inv.lhs});
    rep.all_ok = rep.all_ok && sq.ok && inv.ok;
    rep.sqrt_checks.push_back(sq);
    rep.inv_sqrt_checks.push_back(inv);
  }
  return rep;
}

struct EigenPerturbReport {
  double eps = 0.0;        // measured |Q - Qt|
  double gap = 0.0;        // lambda_n - lambda_{n+1} of Q
  double sine = 0.0;       // |Pi_S - Pi_St Pi_S|
  double sine_bound = 0.0; // eps / (gap - 2 eps)
  double proj = 0.0;       // |Pi_S - Pi_St|
  double proj_bound = 0.0; // 2 eps / (gap - 2 eps)
  bool ok = true;
};

// Audits the top-eigenspace perturbation bounds for symmetric q, qt.
inline EigenPerturbReport check_eigen_perturb(const Matrix& q, const Matrix& qt,
                                              Index n) {
  if (q.rows() != q.cols() || qt.rows() != qt.cols() || q.rows() != qt.rows())
    throw DimensionMismatch("check_eigen_perturb: shape mismatch");
  if (n < 1 || n >= q.rows())
    throw DimensionMismatch("check_eigen_perturb: need 1 <= n < dim");
  EigenPerturbReport rep;
  rep.eps = spectral_norm_sym(0.5 * (q + q.transpose()) -
                              0.5 * (qt + qt.transpose()));
  const auto dq = detail::psd_decompose(q, 0.0);
  const auto dqt = detail::psd_decompose(qt, 0.0);
  rep.gap = dq.lambda[n - 1] - dq.lambda[n];
  if (rep.gap - 2 * rep.eps <= 0)
    throw HypothesisViolated(
        "check_eigen_perturb: gap must exceed twice the perturbation");
  const Matrix pi_s =
      dq.vectors.leftCols(n) * dq.vectors.leftCols(n).transpose();
  const Matrix pi_st =
      dqt.vectors.leftCols(n) * dqt.vectors.leftCols(n).transpose();
  const double denom = rep.gap - 2 * rep.eps;
  rep.sine = detail::spectral_norm_dense(pi_s - pi_st * pi_s);
  rep.sine_bound = rep.eps / denom;
  rep.proj = spectral_norm_sym(pi_s - pi_st);
  rep.proj_bound = 2 * rep.eps / denom;
  const auto fits = [](double lhs, double rhs) {
    return lhs <= rhs + 1e-10 * std::max(1.0, rhs);
  };
  rep.ok = fits(rep.sine, rep.sine_bound) && fits(rep.proj, rep.proj_bound);
  return rep;
}

// ---------------------------------------------------------------------------
// Swap matrix simulation (condition-number experiments)
// ---------------------------------------------------------------------------

// The common diagonal-block constant of R^T R: 2(d1^2 - 2 d1 d2 + d2^2 (d-1)).
inline double swap_diagonal_constant(Index d) {
  const double d1 = fourth_moment_d1(d);
  const double d2 = fourth_moment_d2(d);
  return 2 * (d1 * d1 - 2 * d1 * d2 + d2 * d2 * static_cast<double>(d - 1));
}

// Assembles the basic swap matrix R in R^{d^3 x n(d-1)}: block i holds
// [d1 (a_i x a_i) - d2 Phi] x B_i minus its mode-2/3 swap, with B_i a random
// orthonormal basis of the complement of a_i.
inline Matrix build_swap_matrix(const Matrix& components, std::uint64_t seed) {
  const Index d = components.rows();
  const Index n = components.cols();
  if (d < 2) throw DimensionMismatch("build_swap_matrix: d must be >= 2");
  const double d1 = fourth_moment_d1(d);
  const double d2 = fourth_moment_d2(d);
  const Vector phi = phi_vector(d);
  Matrix r(d * d * d, n * (d - 1));
  for (Index i = 0; i < n; ++i) {
    Vector a = components.col(i);
    if (a.norm() == 0) throw DegenerateSample("build_swap_matrix: zero component");
    a.normalize();
    Rng rng(seed, static_cast<std::uint64_t>(i));
    Matrix basis;
    for (int attempt = 0; attempt < 100; ++attempt) {
      const Matrix g = rng.gaussian_matrix(d, d - 1);
      basis = orthonormalize(g - a * (a.transpose() * g));
      if (basis.cols() == d - 1) break;
      basis.resize(d, 0);
    }
    if (basis.cols() != d - 1)
      throw DegenerateSample("build_swap_matrix: complement basis degenerate");
    const Vector head = d1 * kron_vec(a, a) - d2 * phi;
    for (Index c = 0; c < d - 1; ++c) {
      const Vector s_col = kron_vec(head, basis.col(c));
      r.col(i * (d - 1) + c) = s_col - apply_p23(s_col, d);
    }
  }
  return r;
}

// |U - Pi_img(U)| for U = Sum dyad(a_i^{x3}), computed through the
// third-power Gram spectrum (U and its image projector share eigenvectors).
inline double u_projector_deviation(const Matrix& components) {
  const Index n = components.cols();
  if (n == 0) throw EmptySet("u_projector_deviation: no components");
  Matrix gram(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const double dot = components.col(i).dot(components.col(j));
      gram(i, j) = dot * dot * dot;
    }
  const auto dec = detail::psd_decompose(gram);
  double dev = 0.0;
  for (Index i = 0; i < dec.rank; ++i)
    dev = std::max(dev, std::abs(dec.lambda[i] - 1.0));
  return dev;
}

}  // namespace ovt
