// Dense-helper tests: quadrature rules against closed-form integrals, the
// polar compatible-structure construction against its defining properties,
// Pfaffian identities, and spectral gap / rank detection on synthetic spectra.
#include <catch2/catch_amalgamated.hpp>

#include <surflab/core.hpp>
#include <surflab/linalg.hpp>

#include <cmath>

using namespace surflab;

namespace {

Mat random_mat(Rng& rng, int n) {
  Mat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = rng.normal();
  return A;
}

Mat random_spd(Rng& rng, int n) {
  const Mat R = random_mat(rng, n);
  return R.transpose() * R + 0.1 * Mat::Identity(n, n);
}

Mat random_antisym(Rng& rng, int n) {
  const Mat R = random_mat(rng, n);
  return R - R.transpose();
}

// i-multiplication and the standard pairing matrices in the real layout
// (Re u0, Im u0, Re u1, Im u1), derived directly from Im(u^dag v).
Mat4 standard_W() {
  Mat4 W = Mat4::Zero();
  W(0, 1) = 1;
  W(1, 0) = -1;
  W(2, 3) = 1;
  W(3, 2) = -1;
  return W;
}

}  // namespace

TEST_CASE("Gauss-Legendre on [-1,1] integrates monomials exactly", "[linalg]") {
  for (int n : {2, 5, 12, 20}) {
    Vec x, w;
    linalg::gauss_legendre(n, x, w);
    REQUIRE(x.size() == n);
    CHECK(std::abs(w.sum() - 2.0) < 1e-14);
    for (int i = 0; i < n; ++i) {
      CHECK(x(i) > -1.0);
      CHECK(x(i) < 1.0);
      if (i > 0) CHECK(x(i) > x(i - 1));  // ascending
      CHECK(std::abs(x(i) + x(n - 1 - i)) < 1e-15);
      CHECK(w(i) > 0.0);
    }
    // exact for degree <= 2n-1
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double q = 0.0;
      for (int i = 0; i < n; ++i) q += w(i) * std::pow(x(i), k);
      const double exact = (k % 2 == 0) ? 2.0 / (k + 1) : 0.0;
      CHECK(std::abs(q - exact) < 2e-14);
    }
  }
}

TEST_CASE("Gauss-Legendre on [a,b] matches closed forms", "[linalg]") {
  Vec x, w;
  linalg::gauss_legendre_ab(8, 0.0, 1.0, x, w);
  for (int k = 0; k <= 15; ++k) {
    double q = 0.0;
    for (int i = 0; i < 8; ++i) q += w(i) * std::pow(x(i), k);
    CHECK(std::abs(q - 1.0 / (k + 1)) < 1e-14);
  }
  linalg::gauss_legendre_ab(10, 2.0, 5.0, x, w);
  for (int k = 0; k <= 10; ++k) {
    double q = 0.0;
    for (int i = 0; i < 10; ++i) q += w(i) * std::pow(x(i), k);
    const double exact = (std::pow(5.0, k + 1) - std::pow(2.0, k + 1)) / (k + 1);
    CHECK(std::abs(q - exact) < 1e-12 * exact);
  }
  // smooth non-polynomial: superalgebraic convergence reaches roundoff by n=20
  linalg::gauss_legendre_ab(20, 0.0, 1.0, x, w);
  double q = 0.0;
  for (int i = 0; i < 20; ++i) q += w(i) * std::exp(x(i));
  CHECK(std::abs(q - (std::exp(1.0) - 1.0)) < 1e-14);
}

TEST_CASE("polar construction: standard pairing gives i-multiplication", "[linalg]") {
  const Mat W = standard_W();
  const Mat J = linalg::polar_compatible_J(W, Mat4::Identity());
  CHECK((J - mult_by_i_mat()).norm() < 1e-14);
}

TEST_CASE("polar construction: defining properties on random data", "[linalg]") {
  Rng rng(42);
  for (int n : {4, 6, 8}) {
    for (int rep = 0; rep < 4; ++rep) {
      const Mat g = random_spd(rng, n);
      Mat w = random_antisym(rng, n);
      REQUIRE(std::abs(w.determinant()) > 1e-12);  // generic: nondegenerate
      const Mat J = linalg::polar_compatible_J(w, g);

      CHECK((J * J + Mat::Identity(n, n)).norm() < 1e-11);
      // w(Ju, Jv) = w(u, v)
      CHECK((J.transpose() * w * J - w).norm() < 1e-10 * w.norm());
      // w(., J.) is a symmetric positive definite metric
      const Mat m = w * J;
      CHECK((m - m.transpose()).norm() < 1e-10 * m.norm());
      Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()));
      CHECK(es.eigenvalues()(0) > 0.0);
    }
  }
}

TEST_CASE("polar construction is natural under congruence", "[linalg]") {
  // pulling both forms back along T must conjugate the result:
  //   J(T^t w T, T^t g T) = T^{-1} J(w, g) T
  Rng rng(7);
  const int n = 6;
  const Mat g = random_spd(rng, n);
  const Mat w = random_antisym(rng, n);
  const Mat J = linalg::polar_compatible_J(w, g);
  for (int rep = 0; rep < 3; ++rep) {
    const Mat T = random_mat(rng, n) + 3.0 * Mat::Identity(n, n);
    REQUIRE(std::abs(T.determinant()) > 1e-6);
    const Mat Jp = linalg::polar_compatible_J(T.transpose() * w * T, T.transpose() * g * T);
    const Mat expect = T.inverse() * J * T;
    CHECK((Jp - expect).norm() < 1e-9 * expect.norm());
  }
}

TEST_CASE("polar construction rejects bad inputs", "[linalg]") {
  const Mat4 I = Mat4::Identity();
  CHECK_THROWS_AS(linalg::polar_compatible_J(I, I), InvalidInput);  // not antisymmetric
  CHECK_THROWS_AS(linalg::polar_compatible_J(Mat::Zero(3, 3), Mat::Identity(3, 3)),
                  InvalidInput);  // odd dimension
  CHECK_THROWS_AS(linalg::polar_compatible_J(standard_W(), -I), NumericsError);  // not SPD
  CHECK_THROWS_AS(linalg::polar_compatible_J(Mat4::Zero(), I), NumericsError);   // degenerate
}

TEST_CASE("pfaffian identities", "[linalg]") {
  Rng rng(11);
  Mat A2 = Mat::Zero(2, 2);
  A2(0, 1) = 3.5;
  A2(1, 0) = -3.5;
  CHECK(linalg::pfaffian(A2) == 3.5);
  CHECK(linalg::pfaffian(standard_W()) == 1.0);
  CHECK(linalg::pfaffian(Mat::Zero(0, 0)) == 1.0);
  CHECK(linalg::pfaffian(Mat::Zero(3, 3)) == 0.0);  // odd size

  for (int n : {4, 6, 8}) {
    const Mat A = random_antisym(rng, n);
    const double pf = linalg::pfaffian(A);
    CHECK(std::abs(pf * pf - A.determinant()) < 1e-9 * std::abs(A.determinant()));
    const Mat T = random_mat(rng, n);
    const double pfc = linalg::pfaffian(T.transpose() * A * T);
    CHECK(std::abs(pfc - T.determinant() * pf) < 1e-9 * std::abs(pfc));
  }
}

TEST_CASE("largest ratio gap on synthetic spectra", "[linalg]") {
  Vec s(5);
  s << 10, 9, 8, 1e-9, 1e-10;
  const auto g = linalg::largest_ratio_gap(s);
  CHECK(g.gap_index == 2);
  CHECK(g.tail_count == 2);
  CHECK(g.ratio == Catch::Approx(8e9).epsilon(1e-12));

  // the ceiling ignores gaps whose lower side is still large
  Vec s2(3);
  s2 << 1.0, 1e-2, 5e-3;
  const auto no_tail = linalg::largest_ratio_gap(s2, 1e-3);
  CHECK(no_tail.gap_index == -1);
  CHECK(no_tail.tail_count == 0);
  const auto raw = linalg::largest_ratio_gap(s2, 1.0);
  CHECK(raw.gap_index == 0);
  CHECK(raw.tail_count == 2);
  CHECK(raw.ratio == Catch::Approx(100.0));

  // the floor keeps exact zeros in the tail from faking a second gap
  Vec s3(4);
  s3 << 1.0, 1e-8, 0.0, 0.0;
  const auto floored = linalg::largest_ratio_gap(s3, 1.0, 1e-12);
  CHECK(floored.gap_index == 0);
  CHECK(floored.tail_count == 3);
  const auto unfloored = linalg::largest_ratio_gap(s3, 1.0, 0.0);
  CHECK(unfloored.gap_index == 1);  // 1e-8 / 1e-300 wins without the floor

  Vec s1(1);
  s1 << 2.0;
  CHECK(linalg::largest_ratio_gap(s1).gap_index == -1);
}

TEST_CASE("antisymmetric rank detection", "[linalg]") {
  Rng rng(3);
  // exact rank 4 inside a 6x6 matrix
  Mat A = Mat::Zero(6, 6);
  A(0, 1) = 2.0;
  A(1, 0) = -2.0;
  A(2, 3) = 0.5;
  A(3, 2) = -0.5;
  auto [r, ratio] = linalg::antisym_rank(A);
  CHECK(r == 4);
  CHECK(ratio > 1e3);

  // tiny antisymmetric noise must not change the detected rank
  Mat noise = random_antisym(rng, 6);
  noise *= 1e-12 / noise.norm();
  auto [rn, ration] = linalg::antisym_rank(A + noise);
  CHECK(rn == 4);

  // nondegenerate: no qualifying gap, full rank reported
  Mat B = Mat::Zero(6, 6);
  for (int k = 0; k < 3; ++k) {
    const double sv = 1.0 + k;
    B(2 * k, 2 * k + 1) = sv;
    B(2 * k + 1, 2 * k) = -sv;
  }
  auto [rb, ratiob] = linalg::antisym_rank(B);
  CHECK(rb == 6);

  auto [rz, ratioz] = linalg::antisym_rank(Mat::Zero(4, 4));
  CHECK(rz == 0);
}

TEST_CASE("symmetric matrix powers", "[linalg]") {
  Rng rng(5);
  const Mat A = [&] {
    Mat R(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) R(i, j) = rng.normal();
    return Mat(R.transpose() * R + 0.5 * Mat::Identity(5, 5));
  }();
  const Mat S = linalg::sym_pow(A, 0.5);
  CHECK((S * S - A).norm() < 1e-12 * A.norm());
  const Mat Si = linalg::sym_pow(A, -0.5);
  CHECK((Si * A * Si - Mat::Identity(5, 5)).norm() < 1e-12);

  Mat neg = Mat::Identity(3, 3);
  neg(2, 2) = -0.1;
  CHECK_THROWS_AS(linalg::sym_pow(neg, 0.5, 0.0), NumericsError);
}
