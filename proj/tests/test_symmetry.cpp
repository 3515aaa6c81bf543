#include <ovt/oracles.hpp>
#include <ovt/rng.hpp>
#include <ovt/symmetry.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace ovt;

namespace {
Vector tensor_cube(const Vector& x) {
  return kron_vec(kron_vec(x, x), x);
}
}  // namespace

TEST_CASE("symmetrizer matches the dense permutation-mean oracle") {
  const Index d = 3;
  Matrix oracle = reference::dense_pi_sym(d);
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    Vector v = rng.gaussian_vector(d * d * d);
    REQUIRE((apply_pi_sym(v, d) - oracle * v).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("symmetrizer entry weights follow the orbit sizes") {
  const Index d = 4;
  Matrix oracle = reference::dense_pi_sym(d);
  // all indices equal: weight 1
  REQUIRE(oracle(idx3(1, 1, 1, d), idx3(1, 1, 1, d)) == Catch::Approx(1.0));
  // two equal, one distinct: orbit has three members, weight 1/3
  REQUIRE(oracle(idx3(0, 1, 0, d), idx3(0, 0, 1, d)) == Catch::Approx(1.0 / 3.0));
  REQUIRE(oracle(idx3(0, 0, 1, d), idx3(0, 0, 1, d)) == Catch::Approx(1.0 / 3.0));
  // all distinct: weight 1/6
  REQUIRE(oracle(idx3(0, 1, 2, d), idx3(2, 1, 0, d)) == Catch::Approx(1.0 / 6.0));
  // different multisets never couple
  REQUIRE(oracle(idx3(0, 0, 1, d), idx3(0, 0, 2, d)) == Catch::Approx(0.0));
}

TEST_CASE("symmetrizer is an orthogonal projector with cube fixed points") {
  const Index d = 5;
  Rng rng(2);
  Vector v = rng.gaussian_vector(d * d * d);
  Vector pv = apply_pi_sym(v, d);
  REQUIRE((apply_pi_sym(pv, d) - pv).cwiseAbs().maxCoeff() < 1e-13);
  // residual orthogonal to the image
  REQUIRE(std::abs((v - pv).dot(pv)) < 1e-10);
  Vector x = rng.unit_vector(d);
  Vector cube = tensor_cube(x);
  REQUIRE((apply_pi_sym(cube, d) - cube).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("mode swap examples and involution") {
  const Index d = 4;
  Vector e1 = Vector::Zero(d), e2 = Vector::Zero(d), e3 = Vector::Zero(d);
  e1[0] = e2[1] = e3[2] = 1.0;
  Vector lhs = apply_p23(kron_vec(kron_vec(e1, e2), e3), d);
  REQUIRE((lhs - kron_vec(kron_vec(e1, e3), e2)).cwiseAbs().maxCoeff() == 0.0);

  Rng rng(3);
  Vector x = rng.gaussian_vector(d), y = rng.gaussian_vector(d);
  Vector xyy = kron_vec(kron_vec(x, y), y);
  REQUIRE((apply_p23(xyy, d) - xyy).cwiseAbs().maxCoeff() < 1e-15);

  Vector v = rng.gaussian_vector(d * d * d);
  REQUIRE((apply_p23(apply_p23(v, d), d) - v).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(apply_p23(v, d).norm() == Catch::Approx(v.norm()));
  Matrix oracle = reference::dense_p23(d);
  REQUIRE((apply_p23(v, d) - oracle * v).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("antisymmetric projector splits vectors orthogonally") {
  const Index d = 4;
  Rng rng(4);
  Vector x = rng.gaussian_vector(d), y = rng.gaussian_vector(d);
  REQUIRE(apply_pi23_perp(kron_vec(kron_vec(x, y), y), d).cwiseAbs().maxCoeff() < 1e-15);

  Vector e1 = Vector::Zero(d), e2 = Vector::Zero(d);
  e1[0] = e2[1] = 1.0;
  Vector w = apply_pi23_perp(kron_vec(kron_vec(e1, e1), e2), d);
  REQUIRE(w.norm() == Catch::Approx(1.0 / std::sqrt(2.0)));

  Vector v = rng.gaussian_vector(d * d * d);
  Vector sym = apply_pi23(v, d), anti = apply_pi23_perp(v, d);
  REQUIRE((sym + anti - v).cwiseAbs().maxCoeff() < 1e-14);
  REQUIRE(std::abs(sym.dot(anti)) < 1e-12);
  REQUIRE((apply_pi23_perp(anti, d) - anti).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("symmetrizer is dominated by the pair-swap projector") {
  const Index d = 5;
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    Vector v = rng.gaussian_vector(d * d * d);
    REQUIRE(apply_pi_sym(v, d).norm() <= apply_pi23(v, d).norm() + 1e-12);
  }
}

TEST_CASE("pair-swap norm of identity-times-vector inputs") {
  Rng rng(6);
  for (Index d : {3, 5, 8}) {
    Vector u = rng.unit_vector(d);
    Vector x = kron_vec(phi_vector(d), u);
    const double expect = std::sqrt(0.5 * (1.0 + 1.0 / static_cast<double>(d)));
    REQUIRE(std::abs(apply_pi23(x, d).norm() / x.norm() - expect) < 1e-10);
  }
}

TEST_CASE("fourth moment constants and rank-one action") {
  REQUIRE(fourth_moment_d1(2) == Catch::Approx(2.0));
  REQUIRE(fourth_moment_d2(2) == Catch::Approx(1.0 - 1.0 / std::sqrt(2.0)));
  const Index d = 5;
  Rng rng(7);
  Vector a = rng.unit_vector(d);
  Vector aa = kron_vec(a, a);
  Vector got = fourth_moment_inv_sqrt_apply(aa, d);
  Vector expect = fourth_moment_d1(d) * aa - fourth_moment_d2(d) * phi_vector(d);
  REQUIRE((got - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fourth moment inverse square root matches the dense moment oracle") {
  const Index d = 3;
  Matrix a = reference::dense_fourth_moment(d);
  Matrix inv_sqrt = reference::dense_pseudo_power(a, -0.5);
  Rng rng(8);
  for (int t = 0; t < 10; ++t) {
    Vector x = rng.gaussian_vector(d * d);
    Vector got = fourth_moment_inv_sqrt_apply(x, d);
    Vector oracle = inv_sqrt * x;
    REQUIRE((got - oracle).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("matrix-free costs double no faster than the cube") {
  std::uint64_t prev_sym = 0, prev_p23 = 0;
  for (Index d : {8, 16, 32}) {
    Rng rng(9);
    Vector v = rng.gaussian_vector(d * d * d);
    reset_opcount();
    apply_pi_sym(v, d);
    const auto sym_ops = opcount();
    reset_opcount();
    apply_p23(v, d);
    const auto p23_ops = opcount();
    if (prev_sym) {
      REQUIRE(static_cast<double>(sym_ops) <= 8.05 * static_cast<double>(prev_sym));
      REQUIRE(static_cast<double>(p23_ops) <= 8.05 * static_cast<double>(prev_p23));
    }
    prev_sym = sym_ops;
    prev_p23 = p23_ops;
  }
}

TEST_CASE("fault switch corrupts exactly the symmetrizer") {
  const Index d = 3;
  Rng rng(10);
  Vector v = rng.gaussian_vector(d * d * d);
  Vector clean = apply_pi_sym(v, d);
  g_sym_fault.store(true);
  Vector faulty = apply_pi_sym(v, d);
  g_sym_fault.store(false);
  REQUIRE((clean - faulty).cwiseAbs().maxCoeff() > 1e-12);
  // idempotence breaks under the fault
  g_sym_fault.store(true);
  Vector twice = apply_pi_sym(faulty, d);
  g_sym_fault.store(false);
  REQUIRE((twice - faulty).cwiseAbs().maxCoeff() > 1e-12);
  REQUIRE((apply_pi_sym(clean, d) - clean).cwiseAbs().maxCoeff() < 1e-13);
}
