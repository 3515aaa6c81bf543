#pragma once

// Gaussian rounding of the lifted tensor. The pipeline truncates the two
// noise-carrying rectangular reshapings, contracts a Gaussian vector into
// the straddling mode to get a d^2 x d^2 flattening, power-iterates its top
// singular pair, extracts a component direction from each candidate through
// the lifted projector, and keeps only candidates that pass the membership
// test against the whitened span.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <thread>
#include <utility>
#include <vector>

#include <ovt/common.hpp>
#include <ovt/implicit_tensor.hpp>
#include <ovt/lift.hpp>
#include <ovt/linalg.hpp>
#include <ovt/rng.hpp>
#include <ovt/symmetry.hpp>

namespace ovt {

struct RoundParams {
  double beta = 0.25;    // spectral-gap acceptance parameter, in (0, 1)
  double delta = 0.1;    // allowed missing fraction, in (0, 1)
  double epsilon = 0.0;  // assumed lifted-error scale, in [0, 1)
  // Membership threshold. <= 0 derives
  //   theta = 10 ||W|| (2 eps^{1/4} + 2 (3 eps / (delta beta))^{1/8}) + 2 eps
  // clamped to [1e-4, 0.9]; an explicit value is clamped to (0, 0.9].
  double theta = 0.0;
  // < 0 derives ceil(10 n ln(n+1) n^beta); 0 is allowed and yields no work.
  Index repetitions = -1;
  std::uint64_t seed = 0;
  double iter_constant = 8.0;  // C in the ceil(C log(dim) / beta) power budget
  int threads = 0;             // <= 0: honor OVT_THREADS, default 1
};

enum class CandidateSide { Left, Right };

struct Candidate {
  Vector vector;           // unit vector in R^{d^2}
  double gap_ratio = 1.0;  // estimated sigma_1 / sigma_2 of the flattening
  CandidateSide side = CandidateSide::Left;
};

namespace detail {

inline int resolve_threads(int requested) {
  if (requested > 0) return std::min(requested, 256);
  if (const char* env = std::getenv("OVT_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return std::min(v, 256);
  }
  return 1;
}

}  // namespace detail

inline double derive_theta(const RoundParams& p, double whitener_norm) {
  if (p.theta > 0.0) return std::min(p.theta, 0.9);
  const double e = std::max(p.epsilon, 0.0);
  const double ratio = 3.0 * e / std::max(p.delta * p.beta, 1e-12);
  const double t =
      10.0 * whitener_norm * (2.0 * std::pow(e, 0.25) + 2.0 * std::pow(ratio, 0.125)) + 2.0 * e;
  return std::clamp(t, 1e-4, 0.9);
}

/// Truncates the {1,2}{3} and then the {1,3}{2} reshaping at spectral level
/// 1 and compensates the signal shrinkage with a global 1/(1-eps) rescale.
/// Both truncated reshaping norms end up <= 1/(1-eps); a noiseless tensor
/// with orthonormal components passes through unchanged.
inline ImplicitTensor3 preprocess_truncate(const ImplicitTensor3& t, double eps,
                                           TruncateInfo* info12 = nullptr,
                                           TruncateInfo* info13 = nullptr) {
  if (!(eps >= 0.0 && eps < 1.0))
    throw DimensionMismatch("preprocess_truncate: eps must lie in [0, 1)");
  ImplicitTensor3 t1 = t.spectral_truncate(Reshaping::Rows12_Cols3, 0, 0.1, info12);
  ImplicitTensor3 t2 = t1.spectral_truncate(Reshaping::Rows13_Cols2, 0, 0.1, info13);
  return eps > 0.0 ? t2.scaled(1.0 / (1.0 - eps)) : t2;
}

/// Draws g ~ N(0, Id_{d^2}) from the seeded stream, power-iterates the
/// flattening T(g)[x, z] = sum_m g_m T[x, m, z] for ceil(C log(d^2)/beta)
/// steps, and returns both singular-vector candidates with a shared gap
/// estimate. A vanishing flattening throws NoConvergence; a flat spectrum
/// comes back with gap_ratio near 1 and is discarded by the caller's
/// gap-acceptance rule.
inline std::pair<Candidate, Candidate> round_candidate(const ImplicitTensor3& t, double beta,
                                                       std::uint64_t seed,
                                                       double iter_constant = 8.0) {
  if (!(beta > 0.0 && beta < 1.0))
    throw DimensionMismatch("round_candidate: beta must lie in (0, 1)");
  Rng rng(seed, 0x40bdull);
  const Index m = t.d2();
  const Vector g = rng.gaussian_vector(m);
  SingularOperator op;
  op.rows = m;
  op.cols = m;
  op.apply = [&t, &g](const Vector& x) { return t.contract(g, x, ContractPair::M23); };
  op.apply_t = [&t, &g](const Vector& x) { return t.contract(x, g, ContractPair::M12); };
  const TopSingularPair top =
      top_singular_pair(op, beta, 0, Rng::derive(seed, 0x515ecull), iter_constant);
  if (top.sigma <= 1e-14)
    throw NoConvergence("round_candidate: the Gaussian flattening vanished");
  return {Candidate{top.u, top.gap_ratio, CandidateSide::Left},
          Candidate{top.v, top.gap_ratio, CandidateSide::Right}};
}

/// Top-left singular vector v of Pi3 (u u^T (x) Id) via the rank-n trick:
/// with B the projector basis and Uhat_c the d^2 x d unfolding of column c,
/// the left Gram is B (C^T C) B^T for C = [Uhat_1^T u ... Uhat_n^T u], so an
/// n x n eigensolve suffices. v reshapes to the d x d^2 matrix V with
/// V[j, x] = v[x d + j]; the output is normalize(V u).
inline Vector extract(const Vector& u, const Matrix& pi3_basis) {
  const Index m = u.size();
  const Index d = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(m))));
  if (d < 2 || d * d != m) throw DimensionMismatch("extract: candidate must live in R^{d^2}");
  if (pi3_basis.rows() != m * d || pi3_basis.cols() < 1)
    throw DimensionMismatch("extract: projector basis must be d^3 x n");
  const double nu = u.norm();
  if (nu < 1e-12) throw ZeroVector("extract: zero candidate");
  const Index n = pi3_basis.cols();

  Matrix c(d, n);
  for (Index r = 0; r < n; ++r) {
    detail::RowMajorConstMap uhat(pi3_basis.col(r).data(), m, d);
    c.col(r).noalias() = uhat.transpose() * u;
  }
  c /= nu;
  Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(c.transpose() * c));
  if (es.info() != Eigen::Success) throw NoConvergence("extract: candidate Gram eigensolve failed");
  const Vector z = es.eigenvectors().col(n - 1);
  const Vector v = pi3_basis * z;
  detail::RowMajorConstMap vm(v.data(), m, d);
  Vector a = vm.transpose() * (u / nu);
  add_opcount(static_cast<std::uint64_t>(n) * m * d * 2u + static_cast<std::uint64_t>(m) * d);
  const double na = a.norm();
  if (na < 1e-12) throw ZeroVector("extract: candidate collapses under the lifted projector");
  return a / na;
}

/// Membership test: rho = (W uhat^{(x)2}) (x) uhat, FALSE iff
/// ||Pi3 rho||^2 < (1 - theta) ||rho||^2.
inline bool test_membership(const Vector& candidate, double theta, const Matrix& pi3_basis,
                            const FactoredMatrix& whitener) {
  const Index d = candidate.size();
  if (d < 2) throw DimensionMismatch("test_membership: candidate must live in R^d, d >= 2");
  if (whitener.dim() != d * d)
    throw DimensionMismatch("test_membership: whitener must act on R^{d^2}");
  if (pi3_basis.rows() != d * d * d)
    throw DimensionMismatch("test_membership: projector basis must have d^3 rows");
  if (!(theta > 0.0 && theta < 1.0))
    throw DimensionMismatch("test_membership: theta must lie in (0, 1)");
  const Vector wsq = whitener.apply(kron_vec(candidate, candidate));
  const Vector rho = kron_vec(wsq, candidate);
  const double total = rho.squaredNorm();
  if (total <= 1e-300) return false;
  const double inside = (pi3_basis.transpose() * rho).squaredNorm();
  return inside >= (1.0 - theta) * total;
}

/// Full rounding driver: preprocess once, then `repetitions` independent
/// (candidate -> extract -> membership) passes on per-repetition RNG
/// streams. Candidates survive only with gap_ratio >= 1 + beta; ZeroVector
/// extractions and NoConvergence repetitions are skipped silently. The
/// result is ordered by repetition index (left before right), so the output
/// is identical for any thread count.
inline std::vector<Vector> round_all(const ImplicitTensor3& t, const Matrix& pi3_basis,
                                     const FactoredMatrix& whitener, const RoundParams& params) {
  if (!(params.beta > 0.0 && params.beta < 1.0))
    throw DimensionMismatch("round_all: beta must lie in (0, 1)");
  if (!(params.delta > 0.0 && params.delta < 1.0))
    throw DimensionMismatch("round_all: delta must lie in (0, 1)");
  if (pi3_basis.rows() != t.d() * t.d2())
    throw DimensionMismatch("round_all: projector basis must have d^3 rows");
  if (whitener.dim() != t.d2()) throw DimensionMismatch("round_all: whitener must act on R^{d^2}");

  const Index n = t.rank();
  Index reps = params.repetitions;
  if (reps < 0)
    reps = static_cast<Index>(std::ceil(10.0 * static_cast<double>(n) *
                                        std::log(static_cast<double>(n) + 1.0) *
                                        std::pow(static_cast<double>(n), params.beta)));
  if (reps == 0) return {};

  const double theta = derive_theta(params, whitener.operator_norm());
  const ImplicitTensor3 pre = preprocess_truncate(t, params.epsilon);

  std::vector<std::vector<Vector>> slots(static_cast<std::size_t>(reps));
  auto work = [&](Index lo, Index hi) {
    for (Index rep = lo; rep < hi; ++rep) {
      const std::uint64_t rs = Rng::derive(params.seed, static_cast<std::uint64_t>(rep));
      try {
        const auto [left, right] = round_candidate(pre, params.beta, rs, params.iter_constant);
        for (const Candidate* cand : {&left, &right}) {
          if (cand->gap_ratio < 1.0 + params.beta) continue;
          Vector a;
          try {
            a = extract(cand->vector, pi3_basis);
          } catch (const ZeroVector&) {
            continue;
          }
          if (test_membership(a, theta, pi3_basis, whitener))
            slots[static_cast<std::size_t>(rep)].push_back(std::move(a));
        }
      } catch (const NoConvergence&) {
        continue;
      }
    }
  };

  const int threads = std::min<Index>(detail::resolve_threads(params.threads), reps);
  if (threads <= 1) {
    work(0, reps);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    const Index chunk = (reps + threads - 1) / threads;
    for (int w = 0; w < threads; ++w) {
      const Index lo = w * chunk;
      const Index hi = std::min(reps, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(work, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  std::vector<Vector> out;
  for (auto& slot : slots)
    for (auto& a : slot) out.push_back(std::move(a));
  return out;
}

}  // namespace ovt
