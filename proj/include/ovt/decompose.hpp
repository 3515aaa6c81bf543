#pragma once
// End-to-end pipeline: lift the fourth-order input into its implicit
// third-order core, round Gaussian contractions into component candidates,
// and score the accepted set against optional ground truth.

#include <ovt/common.hpp>
#include <ovt/lift.hpp>
#include <ovt/round.hpp>
#include <ovt/tensor4.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace ovt {

struct DecomposeParams {
  Index n = 0;               // component count, in [1, d^2]
  double epsilon = 0.0;      // assumed lifted-error scale, in [0, 1)
  double beta = 0.25;        // spectral-gap acceptance parameter, in (0, 1)
  double delta = 0.1;        // tolerated missing fraction, in (0, 1)
  double sigma_floor = 0.0;  // gate on the n-th square-reshaping eigenvalue
  double kappa_floor = 0.0;  // gate on the lifted eigengap, entered as kappa
  std::uint64_t seed = 0;
  Index repetitions = -1;  // < 0 derives ceil(10 n ln(n+1) n^beta)
  int threads = 0;         // forwarded to rounding; <= 0 honors OVT_THREADS
};

struct StageTimings {
  double lift_seconds = 0.0;
  double round_seconds = 0.0;
  double report_seconds = 0.0;
};

struct RecoveryReport {
  std::vector<Vector> recovered;  // unit vectors, in repetition order
  // max_i |<b_j, a_i>| per recovered vector; empty unless ground truth given.
  std::vector<double> per_vector_best_corr;
  // Fraction of ground-truth components whose best recovered correlation
  // reaches the threshold; 0 without ground truth.
  double covered_fraction = 0.0;
  // Signed Hausdorff distance between the recovered set and the covered
  // ground-truth subset; NaN when either side is empty or truth is absent.
  double signed_hausdorff = std::numeric_limits<double>::quiet_NaN();
  StageTimings timings;
  // Measured gate quantities from the lift stage (always filled).
  LiftDiagnostics lift;
  // Component-level condition quantities; computable only from ground truth,
  // so left default-initialized on unscored runs.
  ConditionReport condition;
  bool scored = false;  // ground truth was supplied
};

/// Distance between finite sets of vectors, quotiented by sign:
///   max( max_i min_j min_{s=+-1} ||x_i - s y_j||, symmetric counterpart ).
/// Antipodal singletons are at distance zero; orthogonal unit singletons at
/// sqrt(2). Throws EmptySet when either side is empty.
inline double signed_hausdorff(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  if (a.empty() || b.empty())
    throw EmptySet("signed_hausdorff: both vector sets must be nonempty");
  const Index dim = a.front().size();
  for (const Vector& x : a)
    if (x.size() != dim)
      throw DimensionMismatch("signed_hausdorff: vectors must share a dimension");
  for (const Vector& y : b)
    if (y.size() != dim)
      throw DimensionMismatch("signed_hausdorff: vectors must share a dimension");
  auto directed = [](const std::vector<Vector>& from, const std::vector<Vector>& to) {
    double worst = 0.0;
    for (const Vector& x : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vector& y : to) {
        // min over s = +-1 of ||x - s y||^2 picks s = sign<x, y>.
        const double d2 = x.squaredNorm() + y.squaredNorm() - 2.0 * std::abs(x.dot(y));
        best = std::min(best, std::sqrt(std::max(0.0, d2)));
      }
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

/// Scores a recovered set against optional ground-truth components (columns
/// of `ground_truth`). Coverage counts truth columns whose best absolute
/// correlation with a recovered vector reaches `corr_threshold`; the report
/// distance is the signed Hausdorff between the recovered set and that
/// covered subset. Without ground truth only `recovered` is filled.
inline RecoveryReport recovery_report(const std::vector<Vector>& recovered,
                                      const Matrix* ground_truth = nullptr,
                                      double corr_threshold = 0.99) {
  if (!(corr_threshold > 0.0 && corr_threshold <= 1.0))
    throw DimensionMismatch("recovery_report: threshold must lie in (0, 1]");
  RecoveryReport rep;
  rep.recovered = recovered;
  if (ground_truth == nullptr) return rep;

  const Matrix& truth = *ground_truth;
  if (truth.cols() < 1)
    throw DimensionMismatch("recovery_report: ground truth must have at least one column");
  for (const Vector& v : recovered)
    if (v.size() != truth.rows())
      throw DimensionMismatch("recovery_report: recovered vectors must match the truth dimension");
  rep.scored = true;

  auto corr = [](const Vector& x, const Vector& y) {
    const double scale = x.norm() * y.norm();
    return scale > 0.0 ? std::abs(x.dot(y)) / scale : 0.0;
  };

  rep.per_vector_best_corr.reserve(recovered.size());
  for (const Vector& v : recovered) {
    double best = 0.0;
    for (Index i = 0; i < truth.cols(); ++i) best = std::max(best, corr(v, truth.col(i)));
    rep.per_vector_best_corr.push_back(best);
  }

  std::vector<Vector> covered;
  for (Index i = 0; i < truth.cols(); ++i) {
    double best = 0.0;
    for (const Vector& v : recovered) best = std::max(best, corr(v, truth.col(i)));
    if (best >= corr_threshold) covered.push_back(truth.col(i));
  }
  rep.covered_fraction =
      static_cast<double>(covered.size()) / static_cast<double>(truth.cols());
  if (!recovered.empty() && !covered.empty())
    rep.signed_hausdorff = signed_hausdorff(recovered, covered);
  return rep;
}

/// Full pipeline. Lifts the input with the requested gates, rounds the
/// implicit core, and assembles the report; when `ground_truth` is supplied
/// the scoring fields and the component-level condition report are filled.
/// Gate violations surface as ConditionFailure whose stage names the failed
/// quantity ("sigma", "kappa", or "round") and whose measured/floor fields
/// carry the offending values.
inline RecoveryReport decompose(const SymTensor4& t, const DecomposeParams& params,
                                const Matrix* ground_truth = nullptr,
                                double corr_threshold = 0.99) {
  const Index d = t.d();
  if (params.n < 1 || params.n > d * d)
    throw DimensionMismatch("decompose: n must lie in [1, d^2]");
  if (!(params.epsilon >= 0.0 && params.epsilon < 1.0))
    throw DimensionMismatch("decompose: epsilon must lie in [0, 1)");
  if (!(params.beta > 0.0 && params.beta < 1.0))
    throw DimensionMismatch("decompose: beta must lie in (0, 1)");
  if (!(params.delta > 0.0 && params.delta < 1.0))
    throw DimensionMismatch("decompose: delta must lie in (0, 1)");
  if (params.sigma_floor < 0.0 || params.kappa_floor < 0.0)
    throw DimensionMismatch("decompose: floors must be nonnegative");
  if (ground_truth != nullptr &&
      (ground_truth->rows() != d || ground_truth->cols() < 1))
    throw DimensionMismatch("decompose: ground truth must be d x n with n >= 1");

  using Clock = std::chrono::steady_clock;
  auto seconds_since = [](Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
  };

  EigOptions eig;
  eig.seed = Rng::derive(params.seed, 0x11f7ull);

  const auto lift_start = Clock::now();
  LiftOutput lo;
  try {
    lo = lift(t, params.n, params.sigma_floor, params.kappa_floor, eig);
  } catch (const GapTooSmall& e) {
    const std::string what = e.what();
    const bool sigma_gate = what.find("sigma floor") != std::string::npos;
    throw ConditionFailure(sigma_gate ? "sigma" : "kappa", what, e.gap, e.floor);
  }
  const double lift_seconds = seconds_since(lift_start);

  RoundParams rp;
  rp.beta = params.beta;
  rp.delta = params.delta;
  rp.epsilon = params.epsilon;
  rp.repetitions = params.repetitions;
  rp.seed = Rng::derive(params.seed, 0x4064ull);
  rp.threads = params.threads;
  const FactoredMatrix whitener = FactoredMatrix::from_eig(lo.whitener, -0.5);

  const auto round_start = Clock::now();
  std::vector<Vector> recovered;
  try {
    recovered = round_all(lo.lifted, lo.pi3_basis, whitener, rp);
  } catch (const GapTooSmall& e) {
    throw ConditionFailure("round", e.what(), e.gap, e.floor);
  }
  const double round_seconds = seconds_since(round_start);

  const auto report_start = Clock::now();
  RecoveryReport rep = recovery_report(recovered, ground_truth, corr_threshold);
  rep.lift = lo.diagnostics;
  if (ground_truth != nullptr) rep.condition = condition_quantities(*ground_truth);
  rep.timings.lift_seconds = lift_seconds;
  rep.timings.round_seconds = round_seconds;
  rep.timings.report_seconds = seconds_since(report_start);
  return rep;
}

}  // namespace ovt
