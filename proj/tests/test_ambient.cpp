// Ambient geometry tests: the chart metric against a finite-difference
// Hessian of the explicit potential, form/metric/structure algebra, exact
// cross-chart transformation laws, perturbation paths, and the Nijenhuis
// tensor evaluated through finite-difference brackets.
#include <catch2/catch_amalgamated.hpp>

#include <surflab/ambient.hpp>
#include <surflab/structure_path.hpp>

#include "oracles.hpp"

#include <cmath>
#include <memory>

using namespace surflab;
using ambient::AmbientManifold;
using ambient::BumpSpec;
using ambient::JSource;
using ambient::StructurePath;

namespace {

C2 random_point(Rng& rng, double lo = 0.3, double hi = 1.8) {
  C2 z;
  for (int k = 0; k < 2; ++k) {
    const double r = lo + (hi - lo) * rng.uniform();
    const double a = 2.0 * kPi * rng.uniform();
    z(k) = std::polar(r, a);
  }
  return z;
}

Vec4 random_vec(Rng& rng) {
  Vec4 u;
  for (int i = 0; i < 4; ++i) u(i) = rng.normal();
  return u;
}

StructurePath one_bump_path(const AmbientManifold& m, int chart, const C2& center,
                            double amp = 0.05, std::uint64_t seed = 7) {
  return StructurePath(&m, {BumpSpec::random(m, chart, center, 0.7, amp, seed)});
}

}  // namespace

TEST_CASE("chart metric equals the transposed Hessian of the potential", "[ambient]") {
  Rng rng(21);
  const auto run = [&](const std::string& name, double lambda) {
    auto man = ambient::make_manifold(name, lambda);
    std::function<double(const C2&)> pot = [&](const C2& z) {
      return oracle::chart_potential(name, lambda, z);
    };
    for (int chart = 0; chart < man->num_charts(); ++chart)
      for (int rep = 0; rep < 3; ++rep) {
        const C2 z = random_point(rng);
        const Mat2c H = man->metric_H(chart, z);
        const Mat2c ref = oracle::fd_complex_hessian(pot, z, 1e-4).transpose();
        REQUIRE((H - ref).norm() < 1e-6 * H.norm());
      }
    // at the chart centre the metric is diagonal with known entries
    const Mat2c H0 = man->metric_H(0, C2::Zero());
    if (name == "CP2") {
      CHECK((H0 - Mat2c::Identity() / kPi).norm() < 1e-14);
    } else {
      Mat2c D = Mat2c::Zero();
      D(0, 0) = (1.0 + lambda) / kPi;
      D(1, 1) = 1.0 / kPi;
      CHECK((H0 - D).norm() < 1e-14);
    }
  };
  run("CP2", 0.0);
  run("S2xS2", 0.0);
  run("S2xS2", 0.3);
}

TEST_CASE("form and metric algebra at random points", "[ambient]") {
  Rng rng(22);
  for (const auto& name : {std::string("CP2"), std::string("S2xS2")}) {
    auto man = ambient::make_manifold(name, 0.3);
    for (int chart = 0; chart < man->num_charts(); ++chart) {
      const C2 z = random_point(rng);
      Mat4 G, W;
      man->GW_at(chart, z, G, W);

      CHECK((W + W.transpose()).norm() < 1e-14 * W.norm());
      CHECK((G - G.transpose()).norm() < 1e-14 * G.norm());
      Eigen::SelfAdjointEigenSolver<Mat4> es(G);
      CHECK(es.eigenvalues()(0) > 0.0);

      const Mat4 J0 = mult_by_i_mat();
      // compatibility of the integrable structure: w(Ju, Jv) = w(u, v),
      // g = w(., J.)
      CHECK((J0.transpose() * W * J0 - W).norm() < 1e-13 * W.norm());
      CHECK((W * J0 - G).norm() < 1e-13 * G.norm());

      for (int rep = 0; rep < 100; ++rep) {
        const Vec4 u = random_vec(rng);
        CHECK(std::abs(u.dot(W * u)) < 1e-14 * W.norm() * u.squaredNorm());
        CHECK(u.dot(W * (J0 * u)) > 0.0);  // tame
      }

      // product manifold: no cross-factor coupling
      if (name == "S2xS2") {
        CHECK(W.topRightCorner<2, 2>().norm() == 0.0);
        CHECK(G.topRightCorner<2, 2>().norm() == 0.0);
      }
    }
  }

  // the point/vector interface enforces matching charts
  auto man = ambient::make_manifold("CP2");
  ambient::AmbientPoint p{0, C2(cd(0.2, 0.1), cd(-0.3, 0.4))};
  ambient::AmbientVector u{p, Vec4::Ones()};
  ambient::AmbientVector v{{1, p.z}, Vec4::Ones()};
  CHECK_THROWS_AS(man->omega(p, u, v), InvalidInput);
}

TEST_CASE("tangent transport: all pulled-back tensors agree across charts", "[ambient]") {
  Rng rng(23);
  for (const auto& name : {std::string("CP2"), std::string("S2xS2")}) {
    auto man = ambient::make_manifold(name, 0.3);
    const StructurePath sp =
        one_bump_path(*man, 0, C2(cd(0.1, 0.2), cd(0.15, -0.1)), 0.05, 11);
    for (int a = 0; a < man->num_charts(); ++a)
      for (int b = 0; b < man->num_charts(); ++b) {
        if (a == b) continue;
        for (int rep = 0; rep < 2; ++rep) {
          const C2 za = random_point(rng, 0.4, 1.6);
          const C2 zb = man->transition(a, b, za);
          const Mat4 M = man->transition_jac_real(a, b, za);

          // consistency of the Jacobian with the coordinate change itself
          const double h = 1e-6;
          Mat4 Mfd;
          for (int k = 0; k < 4; ++k) {
            C2 dz = C2::Zero();
            dz(k / 2) = (k % 2 == 0) ? cd(h, 0) : cd(0, h);
            Mfd.col(k) =
                c2r(man->transition(a, b, za + dz)) - c2r(man->transition(a, b, za - dz));
          }
          Mfd /= 2.0 * h;
          CHECK((M - Mfd).norm() < 1e-7 * M.norm());

          Mat4 Ga, Wa, Gb, Wb;
          man->GW_at(a, za, Ga, Wa);
          man->GW_at(b, zb, Gb, Wb);
          CHECK((M.transpose() * Gb * M - Ga).norm() < 1e-11 * Ga.norm());
          CHECK((M.transpose() * Wb * M - Wa).norm() < 1e-11 * Wa.norm());

          // the perturbation tensor transports by the same congruence
          const Mat4 ha = sp.h_tensor(a, za);
          const Mat4 hb = sp.h_tensor(b, zb);
          CHECK((M.transpose() * hb * M - ha).norm() < 1e-9 * (1.0 + ha.norm()));

          // the integrable structure commutes with complex-linear transport
          const Mat4 J0 = mult_by_i_mat();
          CHECK((M * J0 - J0 * M).norm() < 1e-14 * M.norm());

          // a path structure conjugates: M J_a = J_b M
          const JSource js = JSource::on_path(sp, 0.5);
          const Mat4 Ja = js.J(a, za), Jb = js.J(b, zb);
          CHECK((M * Ja - Jb * M).norm() < 1e-8 * M.norm());
        }
      }
  }
}

TEST_CASE("path structures: algebra, locality, endpoint", "[ambient]") {
  Rng rng(24);
  auto man = ambient::make_manifold("CP2");
  const C2 center(cd(0.3, 0.1), cd(-0.2, 0.25));
  const StructurePath sp = one_bump_path(*man, 0, center, 0.05, 13);

  // lam = 0 is bitwise the standard structure
  CHECK((sp.J(0, center, 0.0) - mult_by_i_mat()).norm() == 0.0);

  // outside the (truncated) support the path is bitwise standard too
  const C2 faraway(cd(5.0, 0.0), cd(0.0, 0.0));
  CHECK((sp.J(0, faraway, 0.8) - mult_by_i_mat()).norm() == 0.0);
  CHECK(sp.h_tensor(0, faraway).norm() == 0.0);

  // inside the support the structure moves but keeps the algebra
  const C2 q = center + C2(cd(0.2, 0.0), cd(0.0, 0.1));
  for (double lam : {0.3, 1.0}) {
    const Mat4 J = sp.J(0, q, lam);
    CHECK((J - mult_by_i_mat()).norm() > 1e-4);
    CHECK((J * J + Mat4::Identity()).norm() < 1e-10);
    Mat4 G, W;
    man->GW_at(0, q, G, W);
    CHECK((J.transpose() * W * J - W).norm() < 1e-10 * W.norm());
    for (int rep = 0; rep < 20; ++rep) {
      const Vec4 u = random_vec(rng);
      CHECK(u.dot(W * (J * u)) > 0.0);
    }
  }

  // wrapper guards the path position
  CHECK_THROWS_AS(ambient::path_J_apply(sp, 1.5, 0, q, Vec4::Ones()), InvalidInput);
  CHECK_THROWS_AS(ambient::path_J_apply(sp, -0.1, 0, q, Vec4::Ones()), InvalidInput);
}

TEST_CASE("Nijenhuis tensor: zero for the integrable structure", "[ambient]") {
  auto man = ambient::make_manifold("CP2");
  const JSource js = JSource::standard_of(*man);
  const C2 z(cd(0.4, -0.2), cd(0.1, 0.3));

  // constant extensions: identically zero, no finite-difference residue
  Rng rng(25);
  for (int rep = 0; rep < 5; ++rep) {
    const Vec4 a = random_vec(rng), b = random_vec(rng);
    CHECK(ambient::nijenhuis_const(js, 0, z, a, b).norm() == 0.0);
  }

  // smooth varying fields: only finite-difference noise remains
  ambient::VectorFieldFn U = [](int, const C2& q) {
    return c2r(C2(q(0) * q(0) + cd(1, 0), q(1) * q(0)));
  };
  ambient::VectorFieldFn V = [](int, const C2& q) {
    return c2r(C2(std::conj(q(0)), q(1) * q(1) - q(0)));
  };
  CHECK(ambient::nijenhuis(js, 0, z, U, V).norm() < 1e-6);
}

TEST_CASE("Nijenhuis tensor: algebra and tensoriality on a perturbed structure",
          "[ambient]") {
  auto man = ambient::make_manifold("CP2");
  const C2 center(cd(0.3, 0.1), cd(-0.2, 0.25));
  const StructurePath sp = one_bump_path(*man, 0, center, 0.05, 13);
  const JSource js = JSource::on_path(sp, 0.5);
  const C2 z = center + C2(cd(0.2, 0.0), cd(0.0, 0.1));

  Rng rng(26);
  const Vec4 a = random_vec(rng), b = random_vec(rng);

  // nonzero, antisymmetric, vanishing on the diagonal
  const Vec4 n = ambient::nijenhuis_const(js, 0, z, a, b);
  CHECK(n.norm() > 1e-6);
  CHECK((n + ambient::nijenhuis_const(js, 0, z, b, a)).norm() < 1e-15 * n.norm());
  CHECK(ambient::nijenhuis_const(js, 0, z, a, a).norm() == 0.0);

  // the finite-difference step is converged: halving barely moves the value
  const Vec4 n2 = ambient::nijenhuis_const(js, 0, z, a, b, 5e-5);
  CHECK((n - n2).norm() < 1e-3 * n.norm());

  // multiplying an argument by a scalar function only rescales the value
  auto phi = [](const C2& q) {
    return 1.0 + q(0).real() - 2.0 * q(1).imag() + (q(0) * q(1)).real();
  };
  ambient::VectorFieldFn U = [&](int, const C2& q) -> Vec4 { return phi(q) * a; };
  ambient::VectorFieldFn V = [&](int, const C2& q) -> Vec4 { return Vec4(b); };
  const Vec4 nf = ambient::nijenhuis(js, 0, z, U, V);
  CHECK((nf - phi(z) * n).norm() < 1e-5 * (1.0 + n.norm()));

  CHECK_THROWS_AS(ambient::nijenhuis(js, 0, z, U, V, 1e-13), NumericsError);
}

TEST_CASE("homology class tables carry the expected integers", "[ambient]") {
  auto cp2 = ambient::make_manifold("CP2");
  const auto& L = cp2->class_info("L");
  CHECK(L.c1 == 3);
  CHECK(L.self_int == 1);
  CHECK(L.area == 1.0);
  const auto& L2 = cp2->class_info("2L");
  CHECK(L2.c1 == 6);
  CHECK(L2.self_int == 4);
  CHECK(L2.area == 2.0);
  const auto& L3 = cp2->class_info("3L");
  CHECK(L3.c1 == 9);
  CHECK(L3.self_int == 9);
  CHECK(L3.area == 3.0);

  auto s2 = ambient::make_manifold("S2xS2", 0.3);
  const auto& A = s2->class_info("S2xPT");
  CHECK(A.c1 == 2);
  CHECK(A.self_int == 0);
  CHECK(A.area == 1.3);
  const auto& B = s2->class_info("PTxS2");
  CHECK(B.c1 == 2);
  CHECK(B.self_int == 0);
  CHECK(B.area == 1.0);
  const auto& D = s2->class_info("DIAG");
  CHECK(D.c1 == 4);
  CHECK(D.self_int == 2);
  CHECK(D.area == 2.3);
  const auto& E = s2->class_info("ANTIDIAG");
  CHECK(E.c1 == 0);
  CHECK(E.self_int == -2);
  CHECK(E.area == 0.3);

  CHECK_THROWS_AS(cp2->class_info("nope"), InvalidInput);
  CHECK_THROWS_AS(ambient::make_manifold("Banana"), ConfigError);
}
