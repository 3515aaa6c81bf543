#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "ovt/instances.hpp"
#include "ovt/oracles.hpp"
#include "ovt/rng.hpp"

using namespace ovt;

namespace {

Matrix random_psd_rank(Index dim, Index rank, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix a = rng.gaussian_matrix(dim, rank);
  return a * a.transpose();
}

}  // namespace

TEST_CASE("generators are stationary under seed") {
  for (auto kind : {EnsembleKind::Spherical, EnsembleKind::Sparse,
                    EnsembleKind::Hypercube, EnsembleKind::Spiked}) {
    Ensemble ens;
    ens.kind = kind;
    const Matrix a = gen_components(ens, 7, 5, 42);
    const Matrix b = gen_components(ens, 7, 5, 42);
    CHECK((a.array() == b.array()).all());
    const Matrix c = gen_components(ens, 7, 5, 43);
    CHECK((a - c).cwiseAbs().maxCoeff() > 1e-6);
  }
  // Per-component substreams: prefix generation agrees with full generation.
  Ensemble ens;
  const Matrix full = gen_components(ens, 6, 8, 9);
  const Matrix prefix = gen_components(ens, 6, 3, 9);
  CHECK((full.leftCols(3).array() == prefix.array()).all());
}

TEST_CASE("spherical components are unit vectors") {
  const Matrix a = gen_components(Ensemble{}, 9, 20, 3);
  for (Index i = 0; i < a.cols(); ++i)
    CHECK(a.col(i).norm() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("sparse components have the prescribed support size") {
  Ensemble ens;
  ens.kind = EnsembleKind::Sparse;
  const Matrix a = gen_components(ens, 8, 12, 17);
  std::set<std::vector<Index>> supports;
  for (Index i = 0; i < a.cols(); ++i) {
    std::vector<Index> support;
    for (Index r = 0; r < 8; ++r)
      if (a(r, i) != 0.0) support.push_back(r);
    CHECK(support.size() == 2);  // quarter of d = 8
    CHECK(a.col(i).norm() == Catch::Approx(1.0).margin(1e-12));
    supports.insert(support);
  }
  CHECK(supports.size() > 1);  // supports vary across components

  const Matrix b = gen_components(ens, 12, 4, 17);
  for (Index i = 0; i < b.cols(); ++i)
    CHECK((b.col(i).array() != 0.0).count() == 3);
}

TEST_CASE("hypercube components come from the Boolean cube") {
  Ensemble raw;
  raw.kind = EnsembleKind::Hypercube;
  raw.normalize = false;
  const Matrix a = gen_components(raw, 10, 15, 5);
  CHECK(((a.array() == 0.0) || (a.array() == 1.0)).all());
  CHECK((a.array() == 1.0).count() > 0);

  Ensemble unit = raw;
  unit.normalize = true;
  const Matrix b = gen_components(unit, 10, 15, 5);
  for (Index i = 0; i < b.cols(); ++i)
    CHECK(b.col(i).norm() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("spiked ensemble plants a dominant covariance direction") {
  Ensemble ens;
  ens.kind = EnsembleKind::Spiked;
  ens.spike_lambda = 5.0;
  ens.normalize = false;
  const Index d = 10, n = 500;
  const Matrix a = gen_components(ens, d, n, 11);
  const Matrix cov = a * a.transpose() / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  const double top = es.eigenvalues()(d - 1);
  const double second = es.eigenvalues()(d - 2);
  CHECK(top >= 2.0 * second);
}

TEST_CASE("build_tensor assembles the symmetric moment tensor") {
  SECTION("single basis component") {
    const SymTensor4 t = build_tensor(Vector::Unit(2, 0));
    CHECK(t.at(0, 0, 0, 0) == 1.0);
    CHECK(t.entries().cwiseAbs().sum() == 1.0);
  }
  SECTION("two basis components") {
    Matrix comps(2, 2);
    comps << 1, 0, 0, 1;
    const SymTensor4 t = build_tensor(comps);
    CHECK((t.entries().array() != 0.0).count() == 2);
  }
  SECTION("reshaping spectrum matches the pair Gram oracle") {
    const Matrix comps = gen_components(Ensemble{}, 3, 3, 19);
    const SymTensor4 t = build_tensor(comps);
    CHECK(t.symmetry_max_deviation() == 0.0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(t.square_reshape());
    // Nonzero eigenvalues of sum dyad(a_i x a_i) equal the Gram spectrum of
    // the squared inner products.
    Matrix gram(3, 3);
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 3; ++j) {
        const double dot = comps.col(i).dot(comps.col(j));
        gram(i, j) = dot * dot;
      }
    Eigen::SelfAdjointEigenSolver<Matrix> gs(gram);
    for (Index i = 0; i < 3; ++i)
      CHECK(es.eigenvalues()(8 - i) ==
            Catch::Approx(gs.eigenvalues()(2 - i)).margin(1e-10));
    CHECK(es.eigenvalues().head(6).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("spectral_bounded noise hits the target norm exactly") {
  const Matrix comps = gen_components(Ensemble{}, 4, 3, 23);
  const SymTensor4 t = build_tensor(comps);

  NoiseModel none;
  none.eta = 0.0;
  const SymTensor4 same = add_noise(t, none, 7);
  CHECK((same.entries().array() == t.entries().array()).all());

  NoiseModel model;
  model.eta = 0.1;
  const SymTensor4 noisy = add_noise(t, model, 7);
  const Matrix diff = noisy.square_reshape() - t.square_reshape();
  CHECK(spectral_norm_sym(diff) == Catch::Approx(0.1).margin(1e-8));
  CHECK(noisy.symmetry_max_deviation() == 0.0);

  const SymTensor4 again = add_noise(t, model, 7);
  CHECK((again.entries().array() == noisy.entries().array()).all());
}

TEST_CASE("dictionary split satisfies both hypothesis norms") {
  const Matrix comps = gen_components(Ensemble{}, 4, 3, 29);
  const SymTensor4 t = build_tensor(comps);
  const Matrix q = t.square_reshape();
  const auto split = make_dictionary_split(q, 0.05, 0.05, 31);

  const Matrix q_inv_sqrt = reference::dense_pseudo_power(q, -0.5);
  CHECK(spectral_norm_sym(q_inv_sqrt * split.e1 * q_inv_sqrt) ==
        Catch::Approx(0.05).margin(1e-9));

  const Matrix q_inv = reference::dense_pseudo_power(q, -1.0);
  CHECK(spectral_norm_sym(q_inv) * spectral_norm_sym(split.e2) ==
        Catch::Approx(0.05).margin(1e-9));

  // e1 is span-sandwiched.
  const Matrix pi_s = reference::dense_pseudo_power(q, 0.0);
  CHECK((split.e1 - pi_s * split.e1 * pi_s).cwiseAbs().maxCoeff() < 1e-12);

  // The split reassembles the perturbation.
  CHECK((split.q_tilde - q - split.e1 - split.e2).cwiseAbs().maxCoeff() < 1e-12);

  // q_tilde stays PSD of the same rank.
  Eigen::SelfAdjointEigenSolver<Matrix> es(split.q_tilde);
  CHECK(es.eigenvalues()(0) > -1e-10);
  CHECK((es.eigenvalues().array() > 1e-8).count() == 3);

  // add_noise reproduces the reshaping.
  NoiseModel model;
  model.kind = NoiseKind::DictionarySplit;
  model.eps1 = model.eps2 = 0.05;
  const SymTensor4 noisy = add_noise(t, model, 31);
  CHECK((noisy.square_reshape() - split.q_tilde).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dictionary perturbation bounds hold on constructed instances") {
  SECTION("identical inputs give zero left sides") {
    const Matrix q = random_psd_rank(6, 2, 3);
    Rng rng(5);
    const auto rep = check_dictionary_perturb(q, q, 0.05, rng.gaussian_matrix(6, 10));
    CHECK(rep.projector.lhs < 1e-10);
    for (const auto& c : rep.sqrt_checks) CHECK(c.lhs < 1e-8);
    for (const auto& c : rep.inv_sqrt_checks) CHECK(c.lhs < 1e-8);
    CHECK(rep.all_ok);
  }
  SECTION("random rank-3 instances at eps 0.05") {
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
      const Matrix q = random_psd_rank(8, 3, 100 + trial);
      const auto split = make_dictionary_split(q, 0.05, 0.05, 200 + trial);
      Rng rng(300 + trial);
      const auto rep = check_dictionary_perturb(q, split.q_tilde, 0.05,
                                                rng.gaussian_matrix(8, 100));
      CHECK(rep.all_ok);
      CHECK(rep.min_slack > 0);
    }
  }
  SECTION("hypothesis violations are rejected") {
    const Matrix q = random_psd_rank(6, 2, 3);
    Rng rng(5);
    const Matrix probes = rng.gaussian_matrix(6, 4);
    CHECK_THROWS_AS(check_dictionary_perturb(q, q, 0.11, probes),
                    HypothesisViolated);
    const Matrix q4 = random_psd_rank(6, 4, 8);
    CHECK_THROWS_AS(check_dictionary_perturb(q, q4, 0.05, probes),
                    HypothesisViolated);
    Matrix indef = q;
    indef(0, 0) -= 10.0;
    CHECK_THROWS_AS(check_dictionary_perturb(indef, q, 0.05, probes),
                    HypothesisViolated);
  }
}

TEST_CASE("eigen perturbation bound holds on planted-gap instances") {
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    Rng rng(700 + trial);
    const Index dim = 12, n = 4;
    const Matrix v = random_orthogonal(dim, rng);
    Vector spec(dim);
    for (Index i = 0; i < n; ++i) spec[i] = 2.0 + rng.uniform01();
    for (Index i = n; i < dim; ++i) spec[i] = rng.uniform01() * 0.9;
    const Matrix q = v * spec.asDiagonal() * v.transpose();
    Matrix noise = rng.gaussian_matrix(dim, dim);
    noise = 0.5 * (noise + noise.transpose());
    noise *= 0.2 / spectral_norm_sym(noise);
    const auto rep = check_eigen_perturb(q, q + noise, n);
    CHECK(rep.eps == Catch::Approx(0.2).margin(1e-10));
    CHECK(rep.ok);
  }
  // Perturbation at half the gap violates the hypothesis.
  Vector diag(4);
  diag << 1.0, 0.9, 0.5, 0.1;
  const Matrix q = diag.asDiagonal();
  Matrix big = Matrix::Zero(4, 4);
  big(0, 3) = big(3, 0) = 0.3;
  CHECK_THROWS_AS(check_eigen_perturb(q, q + big, 2), HypothesisViolated);
}

TEST_CASE("swap matrix diagonal blocks match the closed form") {
  SECTION("single component along a basis vector") {
    const Matrix r = build_swap_matrix(Vector::Unit(2, 0), 3);
    REQUIRE(r.cols() == 1);
    CHECK(r.col(0).squaredNorm() ==
          Catch::Approx(swap_diagonal_constant(2)).margin(1e-10));
  }
  SECTION("general components") {
    const Matrix comps = gen_components(Ensemble{}, 6, 5, 37);
    const Matrix r = build_swap_matrix(comps, 41);
    const Matrix rtr = r.transpose() * r;
    const double dprime = swap_diagonal_constant(6);
    for (Index i = 0; i < 5; ++i) {
      const Matrix block = rtr.block(i * 5, i * 5, 5, 5);
      CHECK((block - dprime * Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() <
            1e-10 * dprime);
    }
  }
}

TEST_CASE("swap matrix conditioning degrades with overcompleteness") {
  const Index d = 10;
  const double dprime = swap_diagonal_constant(d);
  const auto deviation = [&](Index n, std::uint64_t seed) {
    const Matrix comps = gen_components(Ensemble{}, d, n, seed);
    const Matrix r = build_swap_matrix(comps, seed + 1);
    const Matrix rtr = r.transpose() * r / dprime;
    return spectral_norm_sym(
        Matrix(rtr - Matrix::Identity(rtr.rows(), rtr.cols())));
  };
  const double small = deviation(40, 51);
  const double large = deviation(90, 51);
  CHECK(small < large);
}

TEST_CASE("third-moment frame deviation grows with overcompleteness") {
  const Index d = 10;
  const auto mean_dev = [&](Index n) {
    double acc = 0;
    for (std::uint64_t seed = 0; seed < 3; ++seed)
      acc += u_projector_deviation(gen_components(Ensemble{}, d, n, 60 + seed));
    return acc / 3;
  };
  const double dev30 = mean_dev(30);
  const double dev60 = mean_dev(60);
  const double dev100 = mean_dev(100);
  CHECK(dev30 < dev60);
  CHECK(dev60 < dev100);
  // The deviation scales like n/d^2 up to polylog factors; the measured
  // band at d=10 sits well above 1 already at n=30 (verified against a
  // dense eigendecomposition of U), so the regression bound is relative.
  CHECK(dev100 <= 1.0 + 6.0 * 100.0 / 100.0);
}
