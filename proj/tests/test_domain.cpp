// Two-chart sphere grid tests: quadrature against closed-form integrals,
// spectral differentiation against exact derivatives, interpolation cardinal
// properties, the holomorphic reparametrization generators, and the overlap
// consistency measures.
#include <catch2/catch_amalgamated.hpp>

#include <surflab/core.hpp>
#include <surflab/domain.hpp>

#include <cmath>

using namespace surflab;
using domain::ChartScalar;
using domain::SphereGrid;

namespace {

// integral of x^a y^b over the unit disk (zero unless both exponents even)
double disk_monomial(int a, int b) {
  if (a % 2 != 0 || b % 2 != 0) return 0.0;
  const double lg = std::lgamma(0.5 * (a + 1)) + std::lgamma(0.5 * (b + 1)) -
                    std::lgamma(0.5 * (a + b + 2));
  return 2.0 * std::exp(lg) / (a + b + 2);
}

Mat real_weight(const CMat& A, const CMat& B, const Mat& w) {
  return ((A.array() * B.conjugate().array()).real() * w.array()).matrix();
}

}  // namespace

TEST_CASE("hemisphere quadrature: round sphere area and moments", "[domain]") {
  const SphereGrid g(12, 24, 0.08);
  const Mat rho = g.rho();

  // both owned hemispheres together cover the unit sphere: area 4 pi
  const double area = 2.0 * g.integrate(rho);
  CHECK(std::abs(area - 4.0 * kPi) < 1e-10);

  // height function cos(phi) = (1-|z|^2)/(1+|z|^2): each hemisphere weighs pi,
  // the far chart carries the opposite sign, the sphere total vanishes
  Mat c0(g.n_r_tot, g.n_t);
  for (int i = 0; i < g.n_r_tot; ++i)
    for (int j = 0; j < g.n_t; ++j) {
      const double s = std::norm(g.Z(i, j));
      c0(i, j) = (1.0 - s) / (1.0 + s);
    }
  const double hemi = g.integrate((c0.array() * rho.array()).matrix());
  CHECK(std::abs(hemi - kPi) < 1e-10);
  CHECK(std::abs(hemi + g.integrate(((-c0).array() * rho.array()).matrix())) < 1e-12);

  // quadratic zonal harmonic integrates to zero over the sphere
  Mat y20 = (3.0 * c0.array().square() - 1.0).matrix();
  CHECK(std::abs(2.0 * g.integrate((y20.array() * rho.array()).matrix())) < 1e-10);
}

TEST_CASE("disk quadrature is exact on monomials", "[domain]") {
  const SphereGrid g(12, 24, 0.08);
  for (int a = 0; a <= 10; ++a)
    for (int b = 0; a + b <= 10; ++b) {
      Mat F(g.n_r_tot, g.n_t);
      for (int i = 0; i < g.n_r_tot; ++i)
        for (int j = 0; j < g.n_t; ++j)
          F(i, j) = std::pow(g.Z(i, j).real(), a) * std::pow(g.Z(i, j).imag(), b);
      CHECK(std::abs(g.integrate(F) - disk_monomial(a, b)) < 1e-13);
    }
}

TEST_CASE("quadrature of a fixed smooth integrand is grid-independent", "[domain]") {
  auto value = [](const SphereGrid& g) {
    Mat F(g.n_r_tot, g.n_t);
    for (int i = 0; i < g.n_r_tot; ++i)
      for (int j = 0; j < g.n_t; ++j) {
        const cd z = g.Z(i, j);
        F(i, j) = std::exp(z.real()) * (1.0 + 0.3 * std::sin(2.0 * z.imag()));
      }
    return g.integrate(F);
  };
  const double coarse = value(SphereGrid(12, 24, 0.08));
  const double fine = value(SphereGrid(24, 48, 0.08));
  CHECK(std::abs(coarse - fine) < 1e-10);
}

TEST_CASE("spectral derivatives: exact on polynomials, spectral on analytic data",
          "[domain]") {
  const SphereGrid g(12, 24, 0.08);
  CMat vx, vy;

  // linear: d/dx Re+iIm layout checked against constants
  g.dx_dy(g.Z, vx, vy);
  CHECK((vx.array() - cd(1, 0)).abs().maxCoeff() < 1e-11);
  CHECK((vy.array() - cd(0, 1)).abs().maxCoeff() < 1e-11);

  // cubic: d(z^3) = 3 z^2 (dx), 3 i z^2 (dy)
  const CMat Z3 = g.Z.array().cube().matrix();
  g.dx_dy(Z3, vx, vy);
  const CMat Z2 = g.Z.array().square().matrix();
  CHECK((vx - 3.0 * Z2).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((vy - cd(0, 3) * Z2).cwiseAbs().maxCoeff() < 1e-9);

  // analytic non-polynomial: error decays spectrally under refinement
  auto max_err = [](const SphereGrid& gr) {
    CMat V(gr.n_r_tot, gr.n_t), dx, dy;
    for (int i = 0; i < gr.n_r_tot; ++i)
      for (int j = 0; j < gr.n_t; ++j) V(i, j) = 1.0 / (4.0 + gr.Z(i, j));
    gr.dx_dy(V, dx, dy);
    double worst = 0.0;
    for (int i = 0; i < gr.n_r; ++i)  // owned nodes
      for (int j = 0; j < gr.n_t; ++j) {
        const cd d = -1.0 / std::pow(4.0 + gr.Z(i, j), 2);
        worst = std::max(worst, std::abs(dx(i, j) - d));
        worst = std::max(worst, std::abs(dy(i, j) - cd(0, 1) * d));
      }
    return worst;
  };
  const double e_coarse = max_err(SphereGrid(12, 24, 0.08));
  const double e_fine = max_err(SphereGrid(24, 48, 0.08));
  CHECK(e_coarse < 1e-5);
  CHECK(e_fine < 1e-10);
  CHECK(e_fine < 1e-3 * e_coarse);
}

TEST_CASE("mode transforms round-trip and the domain rotation squares to -1", "[domain]") {
  const SphereGrid g(12, 24, 0.08);
  CMat V(g.n_r_tot, g.n_t);
  Rng rng(9);
  for (int i = 0; i < g.n_r_tot; ++i)
    for (int j = 0; j < g.n_t; ++j) V(i, j) = rng.cnormal();
  CHECK((g.from_modes(g.to_modes(V)) - V).cwiseAbs().maxCoeff() < 1e-12);

  const ChartScalar s{V, 2.0 * V};
  const ChartScalar jjs = domain::j_domain(domain::j_domain(s));
  CHECK((jjs[0] + s[0]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((jjs[1] + s[1]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("interpolation rows reproduce nodes and off-grid polynomials", "[domain]") {
  const SphereGrid g(12, 24, 0.08);
  // band-limited data: modes -1, 0, +2 with matching radial parity
  const CMat V = (g.Z.array().square() + 3.0 * g.Z.array().conjugate() + cd(1, 0)).matrix();

  const CMat Wn = g.interp_row(g.r(3), g.th(5));
  CHECK(std::abs(SphereGrid::interp_apply(Wn, V) - V(3, 5)) < 1e-12);

  auto exact = [](cd z) { return z * z + 3.0 * std::conj(z) + cd(1, 0); };
  const std::pair<double, double> probes[] = {{0.37, 1.1}, {0.83, 4.9}, {0.999, 0.01}};
  for (const auto& [rs, ts] : probes) {
    const CMat W = g.interp_row(rs, ts);
    const cd z = std::polar(rs, ts);
    CHECK(std::abs(SphereGrid::interp_apply(W, V) - exact(z)) < 1e-10);
  }

  // the centre of the chart is reachable (fold-symmetric interpolation)
  const CMat W0 = g.interp_row(0.0, 0.0);
  CHECK(std::abs(SphereGrid::interp_apply(W0, V) - cd(1, 0)) < 1e-10);
}

TEST_CASE("reparametrization generators are holomorphic and independent", "[domain]") {
  const SphereGrid g(12, 24, 0.08);
  const auto gens = domain::mobius_generators(g);
  REQUIRE(gens.size() == 6);

  // dz-components satisfy (d/dx + i d/dy) p = 0 on both charts
  for (const auto& gen : gens) {
    for (int c = 0; c < 2; ++c) {
      CMat px, py;
      g.dx_dy(gen.field[c], px, py);
      CHECK((px + cd(0, 1) * py).cwiseAbs().maxCoeff() < 1e-9);
    }
    // and they transform consistently as vector fields across the overlap
    CHECK(domain::overlap_mismatch(g, gen.field, true) < 1e-8);
  }

  // the rotation generator z d/dz vanishes at the chart centre; d/dz does not
  const CMat W0 = g.interp_row(0.0, 0.0);
  double zdz_at0 = 1e9, ddz_at0 = 0.0;
  for (const auto& gen : gens) {
    if (gen.index == 3) zdz_at0 = std::abs(SphereGrid::interp_apply(W0, gen.field[0]));
    if (gen.index == 1) ddz_at0 = std::abs(SphereGrid::interp_apply(W0, gen.field[0]));
  }
  CHECK(zdz_at0 < 1e-12);
  CHECK(std::abs(ddz_at0 - 1.0) < 1e-12);

  // round-metric L2 Gram of the six fields has full rank
  const Mat rho = g.rho();
  Mat gram(6, 6);
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) {
      double v = 0.0;
      for (int c = 0; c < 2; ++c)
        v += g.integrate(real_weight(gens[a].field[c], gens[b].field[c], rho));
      gram(a, b) = v;
    }
  Eigen::SelfAdjointEigenSolver<Mat> es(gram);
  CHECK(es.eigenvalues()(0) > 1e-3 * es.eigenvalues()(5));
}

TEST_CASE("overlap mismatch distinguishes scalars from vector components", "[domain]") {
  const SphereGrid g(12, 24, 0.08);

  // globally defined scalar: same closed form in both charts under w = 1/z
  CMat F(g.n_r_tot, g.n_t);
  for (int i = 0; i < g.n_r_tot; ++i)
    for (int j = 0; j < g.n_t; ++j) {
      const cd z = g.Z(i, j);
      F(i, j) = z.real() / (1.0 + std::norm(z));
    }
  CHECK(domain::overlap_mismatch(g, ChartScalar{F, F}) < 1e-8);

  // globally defined vector field z d/dz: far-chart component is -w
  const ChartScalar rot{g.Z, -g.Z};
  CHECK(domain::overlap_mismatch(g, rot, true) < 1e-8);
  // read as a plain scalar the same data is inconsistent
  CHECK(domain::overlap_mismatch(g, rot, false) > 0.1);
}

TEST_CASE("grid constructor validates its arguments", "[domain]") {
  CHECK_THROWS_AS(SphereGrid(2, 24), ConfigError);
  CHECK_THROWS_AS(SphereGrid(12, 10), ConfigError);
  CHECK_THROWS_AS(SphereGrid(12, 23), ConfigError);
  CHECK_THROWS_AS(SphereGrid(12, 24, 0.5), ConfigError);
  CHECK_THROWS_AS(SphereGrid(12, 24, -0.1), ConfigError);
}
