#pragma once
// Curated cross-module invariant suite behind the CLI selftest command.
// Each check exercises one oracle identity or bound at a size small enough
// to rerun anywhere; failures carry a short measured detail instead of
// aborting, so the caller can print a full table.

#include <ovt/common.hpp>
#include <ovt/decompose.hpp>
#include <ovt/instances.hpp>
#include <ovt/io.hpp>
#include <ovt/lift.hpp>
#include <ovt/linalg.hpp>
#include <ovt/oracles.hpp>
#include <ovt/rng.hpp>
#include <ovt/round.hpp>
#include <ovt/symmetry.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace ovt {

struct SelftestResult {
  std::string name;
  bool passed = false;
  std::string detail;  // failure explanation; empty when passed
  double seconds = 0.0;
};

namespace detail {

inline void expect(bool cond, const std::string& msg) {
  if (!cond) throw HypothesisViolated(msg);
}

inline std::string with_value(const std::string& msg, double v) {
  return msg + " (measured " + f64_to_string(v) + ")";
}

// Independent six-permutation average, written against the raw index maps so
// it shares nothing with apply_pi_sym's orbit walk.
inline Vector naive_symmetrize(const Vector& x, Index d) {
  Vector y(d * d * d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      for (Index k = 0; k < d; ++k) {
        const double s = x[(i * d + j) * d + k] + x[(i * d + k) * d + j] +
                         x[(j * d + i) * d + k] + x[(j * d + k) * d + i] +
                         x[(k * d + i) * d + j] + x[(k * d + j) * d + i];
        y[(i * d + j) * d + k] = s / 6.0;
      }
  return y;
}

}  // namespace detail

/// Runs every check and returns one row per check; never throws. The table
/// is deterministic apart from the timing column.
inline std::vector<SelftestResult> run_selftest() {
  using detail::expect;
  using detail::with_value;

  struct Check {
    std::string name;
    std::function<void()> fn;
  };
  std::vector<Check> checks;

  checks.push_back({"generator streams repeat per seed and stay well scaled", [] {
    Rng a(7), b(7);
    for (int i = 0; i < 64; ++i)
      expect(a.gaussian() == b.gaussian(), "identical seeds diverged");
    Rng c(7, 1);
    bool differs = false;
    Rng a2(7);
    for (int i = 0; i < 8; ++i) differs = differs || (a2.gaussian() != c.gaussian());
    expect(differs, "distinct streams repeated each other");
    Rng m(21);
    double sum = 0.0, sum2 = 0.0;
    const int trials = 20000;
    for (int i = 0; i < trials; ++i) {
      const double g = m.gaussian();
      sum += g;
      sum2 += g * g;
    }
    const double mean = sum / trials;
    const double var = sum2 / trials - mean * mean;
    expect(std::abs(mean) < 0.05, with_value("gaussian mean off center", mean));
    expect(var > 0.9 && var < 1.1, with_value("gaussian variance off unit", var));
  }});

  checks.push_back({"symmetrizer matches an independent permutation average", [] {
    const Index d = 3;
    const Vector x = Rng(31).gaussian_vector(d * d * d);
    const Vector y = apply_pi_sym(x, d);
    const Vector z = detail::naive_symmetrize(x, d);
    const double diff = (y - z).norm() / x.norm();
    expect(diff <= 1e-12, with_value("symmetrizer deviates from the average", diff));
    const double idem = (apply_pi_sym(y, d) - y).norm() / x.norm();
    expect(idem <= 1e-12, with_value("symmetrizer is not idempotent", idem));
  }});

  checks.push_back({"fault injection is detectable by the symmetrizer check", [] {
    const bool before = g_sym_fault.load();
    g_sym_fault.store(true);
    const Index d = 3;
    const Vector x = Rng(32).gaussian_vector(d * d * d);
    const double diff = (apply_pi_sym(x, d) - detail::naive_symmetrize(x, d)).norm() / x.norm();
    g_sym_fault.store(before);
    expect(diff > 1e-6, with_value("planted fault went unnoticed", diff));
  }});

  checks.push_back({"low rank eigendecomposition agrees with the dense solver", [] {
    const Index dim = 20, n = 5;
    Rng rng(101);
    const Matrix v = orthonormalize(rng.gaussian_matrix(dim, dim));
    Vector spec(dim);
    for (Index i = 0; i < dim; ++i) spec[i] = std::pow(0.7, static_cast<double>(i)) + 0.1;
    const Matrix q = v * spec.asDiagonal() * v.transpose();
    EigOptions opts;
    opts.seed = 5;
    const LowRankEig eig = gapped_eigendecomposition(dense_operator(q), n, opts);
    Eigen::SelfAdjointEigenSolver<Matrix> es(q);
    for (Index i = 0; i < n; ++i) {
      const double ref = es.eigenvalues()[dim - 1 - i];
      expect(std::abs(eig.lambda[i] - ref) <= 1e-8,
             with_value("eigenvalue drifted from the dense solver", eig.lambda[i] - ref));
    }
    const Matrix dense_top = es.eigenvectors().rightCols(n);
    const Matrix residual = eig.q - dense_top * (dense_top.transpose() * eig.q);
    expect(residual.norm() <= 1e-6, with_value("subspace sine too large", residual.norm()));
  }});

  checks.push_back({"implicit contractions match the dense kernels", [] {
    const Index d = 3, n = 4;
    Rng rng(55);
    const Matrix u = rng.gaussian_matrix(d * d * d, n);
    const Matrix v = rng.gaussian_matrix(d * d * d, n);
    const ImplicitTensor3 t = ImplicitTensor3::from_factors(d, u, v);
    const Tensor3Dense dense = reference::dense_from_core(d, u, v);
    const Vector x = rng.gaussian_vector(d * d), y = rng.gaussian_vector(d * d);
    for (ContractPair pair : {ContractPair::M12, ContractPair::M23, ContractPair::M13}) {
      const Vector got = t.contract(x, y, pair);
      const Vector want = reference::contract_dense(dense, x, y, pair);
      const double rel = (got - want).norm() / std::max(want.norm(), 1e-300);
      expect(rel <= 1e-10, with_value("contraction deviates from the dense oracle", rel));
    }
    const double fro = std::abs(t.frobenius_norm() - reference::frobenius_dense(dense)) /
                       std::max(reference::frobenius_dense(dense), 1e-300);
    expect(fro <= 1e-10, with_value("frobenius norm deviates", fro));
  }});

  checks.push_back({"spectral truncation clips reshaping norms at one", [] {
    const Index d = 3, n = 4;
    Rng rng(77);
    ImplicitTensor3 t = ImplicitTensor3::from_factors(d, rng.gaussian_matrix(d * d * d, n),
                                                      rng.gaussian_matrix(d * d * d, n));
    t = t.scaled(3.0 / t.frobenius_norm());
    t = t.spectral_truncate(Reshaping::Rows12_Cols3);
    t = t.spectral_truncate(Reshaping::Rows13_Cols2);
    const Tensor3Dense dense = t.densify();
    for (Reshaping which : {Reshaping::Rows12_Cols3, Reshaping::Rows13_Cols2}) {
      const double sigma = reference::reshaping_sigma_max(dense, which);
      expect(sigma <= 1.0 + 1e-8, with_value("truncated reshaping above one", sigma));
    }
  }});

  checks.push_back({"condition number hits the closed form and the structural cap", [] {
    Vector single = Vector::Zero(4);
    single[1] = 1.0;
    const double solo = kappa(single);
    expect(std::abs(solo - 1.0 / std::sqrt(2.0)) <= 1e-9,
           with_value("single-component value off the closed form", solo));
    bool degenerate = false;
    const double below_cap = kappa(gen_components(Ensemble{}, 4, 6, 9), &degenerate);
    expect(below_cap > 0.0 && !degenerate,
           with_value("positive regime reported degenerate", below_cap));
    const double above_cap = kappa(gen_components(Ensemble{}, 4, 7, 9), &degenerate);
    expect(above_cap == 0.0 && degenerate,
           with_value("structural cap not detected", above_cap));
  }});

  checks.push_back({"lift reproduces the factored cube on a noiseless instance", [] {
    const Index d = 5, n = 6;
    const Matrix comps = gen_components(Ensemble{}, d, n, 203);
    const SymTensor4 t = build_tensor(comps);
    const LiftOutput lo = lift(t, n, 0.0, 0.0);
    const Matrix w = reference::dense_pseudo_power(t.square_reshape(), -0.5);
    Tensor3Dense target(d * d);
    for (Index r = 0; r < n; ++r) {
      const Vector b = w * kron_vec(comps.col(r), comps.col(r));
      for (Index p = 0; p < d * d; ++p)
        for (Index j = 0; j < d; ++j)
          for (Index jp = 0; jp < d; ++jp)
            for (Index q = 0; q < d * d; ++q)
              target.at(p, j * d + jp, q) += b[p] * comps(j, r) * comps(jp, r) * b[q];
    }
    const Tensor3Dense got = lo.lifted.densify();
    double diff2 = 0.0;
    for (std::size_t i = 0; i < got.v.size(); ++i) {
      const double e = got.v[i] - target.v[i];
      diff2 += e * e;
    }
    const double diff = std::sqrt(diff2);
    expect(diff <= 1e-6 * std::sqrt(static_cast<double>(n)),
           with_value("lifted core drifted from the factored cube", diff));
  }});

  checks.push_back({"lifted spectrum separates at one minus kappa squared", [] {
    const Index d = 5, n = 6;
    const Matrix comps = gen_components(Ensemble{}, d, n, 204);
    const SymTensor4 t = build_tensor(comps);
    const LiftOutput lo = lift(t, n, 0.0, 0.0);
    const double kap = kappa(comps);
    expect(lo.diagnostics.lifted_lambda_n >= 1.0 - 1e-8,
           with_value("retained eigenvalue below one", lo.diagnostics.lifted_lambda_n));
    expect(lo.diagnostics.lifted_lambda_next <= 1.0 - kap * kap + 1e-6,
           with_value("discarded eigenvalue above the gap",
                      lo.diagnostics.lifted_lambda_next));
  }});

  checks.push_back({"top eigenspace perturbation bound holds on a planted gap", [] {
    const Index dim = 12, n = 4;
    Rng rng(701);
    const Matrix v = orthonormalize(rng.gaussian_matrix(dim, dim));
    Vector spec(dim);
    for (Index i = 0; i < n; ++i) spec[i] = 2.0 + rng.uniform01();
    for (Index i = n; i < dim; ++i) spec[i] = rng.uniform01() * 0.9;
    const Matrix q = v * spec.asDiagonal() * v.transpose();
    Matrix noise = rng.gaussian_matrix(dim, dim);
    noise = 0.5 * (noise + noise.transpose());
    noise *= 0.2 / spectral_norm_sym(noise);
    const EigenPerturbReport rep = check_eigen_perturb(q, q + noise, n);
    expect(rep.ok, with_value("sine bound violated", rep.sine - rep.sine_bound));
  }});

  checks.push_back({"dictionary perturbation audit accepts splits, rejects large eps", [] {
    const Matrix comps = gen_components(Ensemble{}, 4, 3, 29);
    const Matrix q = build_tensor(comps).square_reshape();
    const DictionarySplit split = make_dictionary_split(q, 0.05, 0.05, 31);
    Rng rng(33);
    const Matrix probes = rng.gaussian_matrix(q.rows(), 8);
    const DictionaryPerturbReport rep =
        check_dictionary_perturb(q, split.q_tilde, 0.05, probes);
    expect(rep.all_ok, with_value("a perturbation bound failed", rep.min_slack));
    bool rejected = false;
    try {
      check_dictionary_perturb(q, split.q_tilde, 0.11, probes);
    } catch (const HypothesisViolated&) {
      rejected = true;
    }
    expect(rejected, "audit accepted eps above its validity range");
  }});

  checks.push_back({"swap matrix diagonal matches the closed form", [] {
    const Matrix comps = gen_components(Ensemble{}, 6, 5, 37);
    const Matrix r = build_swap_matrix(comps, 41);
    const double want = swap_diagonal_constant(6);
    for (Index c = 0; c < r.cols(); ++c) {
      const double got = r.col(c).squaredNorm();
      expect(std::abs(got - want) <= 1e-8 * std::max(1.0, want),
             with_value("diagonal entry off the closed form", got - want));
    }
  }});

  checks.push_back({"membership separates components from strangers", [] {
    const Index d = 4, n = 4;
    const Matrix comps = Matrix::Identity(d, n);
    const LiftOutput lo = lift(build_tensor(comps), n, 0.0, 0.0);
    const FactoredMatrix w = FactoredMatrix::from_eig(lo.whitener, -0.5);
    expect(test_membership(Vector(comps.col(0)), 0.1, lo.pi3_basis, w),
           "a true component was rejected");
    const Vector stranger = orthonormalize(Rng(91).gaussian_matrix(d, d)).col(0);
    bool any_hit = false;
    for (Index i = 0; i < n; ++i)
      any_hit = any_hit || std::abs(stranger.dot(comps.col(i))) > 0.9;
    if (!any_hit)
      expect(!test_membership(stranger, 0.1, lo.pi3_basis, w),
             "an unrelated direction was accepted");
  }});

  checks.push_back({"decomposition recovers an orthonormal basis", [] {
    const Matrix truth = Matrix::Identity(3, 3);
    DecomposeParams params;
    params.n = 3;
    params.seed = 11;
    const RecoveryReport rep = decompose(build_tensor(truth), params, &truth);
    expect(rep.covered_fraction == 1.0,
           with_value("coverage below one", rep.covered_fraction));
    expect(rep.signed_hausdorff <= 1e-4,
           with_value("distance above tolerance", rep.signed_hausdorff));
  }});

  checks.push_back({"tensor and component files round trip bit exact", [] {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "ovt_selftest_io";
    fs::create_directories(dir);
    const Matrix comps = gen_components(Ensemble{}, 4, 5, 63);
    const SymTensor4 t = build_tensor(comps);
    const std::string tensor_path = (dir / "t.tnsr").string();
    const std::string csv_path = (dir / "c.csv").string();
    write_tensor4(tensor_path, t);
    const SymTensor4 back = read_tensor4(tensor_path);
    expect((back.entries().array() == t.entries().array()).all(),
           "tensor entries changed across the round trip");
    write_components_csv(csv_path, comps);
    const Matrix comps_back = read_components_csv(csv_path);
    expect(comps_back.rows() == comps.rows() && comps_back.cols() == comps.cols() &&
               (comps_back.array() == comps.array()).all(),
           "component entries changed across the round trip");
    fs::remove_all(dir);
    bool missing_throws = false;
    try {
      read_tensor4((dir / "absent.tnsr").string());
    } catch (const IoError&) {
      missing_throws = true;
    }
    expect(missing_throws, "missing file did not raise an i/o error");
  }});

  std::vector<SelftestResult> results;
  results.reserve(checks.size());
  for (const Check& check : checks) {
    SelftestResult row;
    row.name = check.name;
    const auto start = std::chrono::steady_clock::now();
    try {
      check.fn();
      row.passed = true;
    } catch (const std::exception& e) {
      row.passed = false;
      row.detail = e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    results.push_back(std::move(row));
  }
  return results;
}

}  // namespace ovt
