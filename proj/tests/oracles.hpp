#pragma once
// Reference implementations shared by the unit tests and the acceptance
// runner.  Each helper recomputes a quantity by a route independent of the
// library code it checks: closed forms, finite differences of explicit scalar
// potentials, dense quadrature, or plain linear algebra on point samples.

#include <surflab/ambient.hpp>
#include <surflab/domain.hpp>
#include <surflab/linalg.hpp>
#include <surflab/mapspace.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

namespace oracle {

using surflab::C2;
using surflab::cd;
using surflab::Mat;
using surflab::Mat2c;
using surflab::Mat4;
using surflab::Vec;
using surflab::Vec4;
using surflab::kPi;

// ---------------------------------------------------------------------------
// finite-difference complex Hessian of a real scalar on C^2
//
// H(a,b) = d^2 F / dz_a dzbar_b evaluated with the 4-point mixed stencil
//   d_{z} = (d_x - i d_y)/2,  d_{zbar} = (d_x + i d_y)/2
// so H(a,b) = ( F_{xa xb} + F_{ya yb} + i (F_{xa yb} - F_{ya xb}) ) / 4.

inline Mat2c fd_complex_hessian(const std::function<double(const C2&)>& F, const C2& z,
                                double h) {
  auto shift = [&](int k, double dx, double dy) {
    C2 w = z;
    w(k) += cd(dx, dy);
    return w;
  };
  // real coordinate index u in {0..3} = (x0, y0, x1, y1)
  auto at = [&](int u, int v, double hu, double hv) {
    C2 w = z;
    w(u / 2) += (u % 2 == 0) ? cd(hu, 0) : cd(0, hu);
    w(v / 2) += (v % 2 == 0) ? cd(hv, 0) : cd(0, hv);
    return F(w);
  };
  const double F0 = F(z);
  double d2[4][4];
  for (int u = 0; u < 4; ++u)
    for (int v = 0; v < 4; ++v) {
      if (u == v) {
        const C2 p = shift(u / 2, (u % 2 == 0) ? h : 0, (u % 2 == 0) ? 0 : h);
        const C2 m = shift(u / 2, (u % 2 == 0) ? -h : 0, (u % 2 == 0) ? 0 : -h);
        d2[u][v] = (F(p) - 2.0 * F0 + F(m)) / (h * h);
      } else {
        d2[u][v] = (at(u, v, h, h) - at(u, v, h, -h) - at(u, v, -h, h) + at(u, v, -h, -h)) /
                   (4.0 * h * h);
      }
    }
  Mat2c H;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const int xa = 2 * a, ya = 2 * a + 1, xb = 2 * b, yb = 2 * b + 1;
      H(a, b) = 0.25 * cd(d2[xa][xb] + d2[ya][yb], d2[xa][yb] - d2[ya][xb]);
    }
  return H;
}

// Chart potentials whose complex Hessian (over pi, transposed) must equal the
// manifold's metric matrix.  Both manifolds use the same potential in every
// chart by symmetry.
inline double chart_potential(const std::string& name, double lambda_area, const C2& z) {
  const double s0 = std::norm(z(0)), s1 = std::norm(z(1));
  if (name == "CP2") return std::log(1.0 + s0 + s1) / kPi;
  if (name == "S2xS2")
    return ((1.0 + lambda_area) * std::log(1.0 + s0) + std::log(1.0 + s1)) / kPi;
  throw surflab::InvalidInput("chart_potential: unknown manifold " + name);
}

// ---------------------------------------------------------------------------
// first Chern number by curvature integration
//
// For a Kaehler metric with chart matrix H (our convention stores the
// transpose of the potential Hessian, scaled by 1/pi), the integral of the
// first Chern form over the image of f equals
//   (1/pi) * sum_nodes quadw * Im( X^dag R^T Y ),   R = -Hess_c log det H,
// where Hess_c is the complex Hessian in the ambient chart and X, Y are the
// pushforwards of d/dx, d/dy.  Constant rescalings of H drop out of the
// log-det Hessian, so the 1/pi store factor is harmless.

inline double c1_curvature_integral(const surflab::mapspace::SurfaceMap& f, double h = 1e-3) {
  const surflab::mapspace::MapJet jt = surflab::mapspace::jet(f);
  const surflab::domain::SphereGrid& g = *f.grid;
  double total = 0.0;
  for (int c = 0; c < 2; ++c) {
    const int ch = f.refch[c];
    std::function<double(const C2&)> L = [&](const C2& p) {
      return std::log(std::abs(f.man->metric_H(ch, p).determinant()));
    };
    for (int i = 0; i < g.n_r; ++i)
      for (int j = 0; j < g.n_t; ++j) {
        const double w = g.quadw(i, j);
        if (w == 0.0) continue;
        const C2 p = f.value(c, i, j);
        const Mat2c R = -fd_complex_hessian(L, p, h * (1.0 + p.cwiseAbs().maxCoeff()));
        const C2 X(jt.fx[c][0](i, j), jt.fx[c][1](i, j));
        const C2 Y(jt.fy[c][0](i, j), jt.fy[c][1](i, j));
        total += w * (X.adjoint() * R.transpose() * Y)(0).imag() / kPi;
      }
  }
  return total;
}

// ---------------------------------------------------------------------------
// incidence defect of a map image from the best projective line
//
// Stack the normalized homogeneous coordinates of every owned node into a
// matrix; its third singular direction ell is the best-fit dual line, and
// |ell^dag v| <= defect for all unit samples v iff the image is within that
// angular distance of the line.  Returns the max incidence |ell^dag v|.

inline double max_line_incidence_defect(const surflab::mapspace::SurfaceMap& f) {
  if (f.man->name() != "CP2")
    throw surflab::InvalidInput("line incidence: needs the 3-chart projective manifold");
  const surflab::domain::SphereGrid& g = *f.grid;
  std::vector<Eigen::Vector3cd> pts;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < g.n_r; ++i)
      for (int j = 0; j < g.n_t; ++j) {
        Eigen::Vector3cd v = surflab::ambient::CP2::to_homog(f.refch[c], f.value(c, i, j));
        pts.push_back(v / v.norm());
      }
  Eigen::MatrixXcd A(pts.size(), 3);
  for (size_t k = 0; k < pts.size(); ++k) A.row(k) = pts[k].transpose();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(A, Eigen::ComputeThinV);
  const Eigen::Vector3cd ell = svd.matrixV().col(2);
  double worst = 0.0;
  for (const auto& v : pts) worst = std::max(worst, std::abs(ell.dot(v.conjugate())));
  return worst;
}

// ---------------------------------------------------------------------------
// orientation sign of a transverse intersection
//
// Both surfaces expressed in one common ambient chart at the meeting point;
// sign of det[X1 Y1 X2 Y2] relative to the symplectic orientation (which has
// Pf(W) > 0).

inline int orientation_sign(const surflab::ambient::AmbientManifold& m, int chart, const C2& p,
                            const Vec4& X1, const Vec4& Y1, const Vec4& X2, const Vec4& Y2) {
  Mat4 M;
  M.col(0) = X1;
  M.col(1) = Y1;
  M.col(2) = X2;
  M.col(3) = Y2;
  Mat4 G, W;
  m.GW_at(chart, p, G, W);
  const double s = M.determinant() * surflab::linalg::pfaffian(W);
  if (s == 0.0) throw surflab::NumericsError("orientation_sign: degenerate intersection");
  return (s > 0) ? 1 : -1;
}

// ---------------------------------------------------------------------------
// product-manifold diagonal and antidiagonal graphs
//
// diagonal:      z -> (z, z)          charts (0,0) and (1,1)
// antidiagonal:  z -> (z, -1/conj(z)) charts (0,1) and (1,0); in those charts
//                both hemispheres read (Z, -conj(Z)).

inline surflab::mapspace::SurfaceMap diag_map(std::shared_ptr<const surflab::domain::SphereGrid> g,
                                              std::shared_ptr<const surflab::ambient::AmbientManifold> m) {
  surflab::mapspace::SurfaceMap f;
  f.grid = std::move(g);
  f.man = std::move(m);
  f.refch = {surflab::ambient::S2xS2::chart_id(0, 0), surflab::ambient::S2xS2::chart_id(1, 1)};
  f.class_name = "DIAG";
  for (int c = 0; c < 2; ++c) {
    f.vals[c][0] = f.grid->Z;
    f.vals[c][1] = f.grid->Z;
  }
  return f;
}

inline surflab::mapspace::SurfaceMap antidiag_map(
    std::shared_ptr<const surflab::domain::SphereGrid> g,
    std::shared_ptr<const surflab::ambient::AmbientManifold> m) {
  surflab::mapspace::SurfaceMap f;
  f.grid = std::move(g);
  f.man = std::move(m);
  f.refch = {surflab::ambient::S2xS2::chart_id(0, 1), surflab::ambient::S2xS2::chart_id(1, 0)};
  f.class_name = "ANTIDIAG";
  for (int c = 0; c < 2; ++c) {
    f.vals[c][0] = f.grid->Z;
    f.vals[c][1] = -f.grid->Z.conjugate();
  }
  return f;
}

// ---------------------------------------------------------------------------
// relative L2 residual of a variation field against the span of others

inline double rel_l2_residual_onto_span(const surflab::mapspace::MapJet& jt,
                                        const surflab::mapspace::VariationField& t,
                                        const std::vector<surflab::mapspace::VariationField>& basis) {
  const int n = static_cast<int>(basis.size());
  Mat G(n, n);
  Vec b(n);
  for (int i = 0; i < n; ++i) {
    b(i) = surflab::mapspace::l2_inner(jt, basis[i], t);
    for (int j = i; j < n; ++j) {
      G(i, j) = surflab::mapspace::l2_inner(jt, basis[i], basis[j]);
      G(j, i) = G(i, j);
    }
  }
  const Vec coef = G.ldlt().solve(b);
  const double t2 = surflab::mapspace::l2_inner(jt, t, t);
  double r2 = t2 - 2.0 * coef.dot(b) + coef.dot(G * coef);
  r2 = std::max(r2, 0.0);
  return std::sqrt(r2) / std::max(std::sqrt(t2), 1e-300);
}

}  // namespace oracle
