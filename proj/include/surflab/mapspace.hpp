// Maps f: S^2 -> M and their variation fields (sections of f*TM), the
// area-type 2-form on map space evaluated through its closed-form integrand,
// the induced pointwise structure J~ (apply J at f(x)), and the splitting of
// a variation into a part tangent to the image and its symplectic complement.
//
// Storage: each domain chart carries one fixed reference ambient chart; map
// values and variation components are complex 2-vectors in that chart at
// every grid node.  On the overlap the two representations agree under the
// exact ambient transitions (checked by *_overlap_mismatch).
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "surflab/ambient.hpp"
#include "surflab/core.hpp"
#include "surflab/domain.hpp"
#include "surflab/structure_path.hpp"

namespace surflab::mapspace {

using ambient::AmbientManifold;
using ambient::JSource;
using domain::ChartScalar;
using domain::SphereGrid;

using ChartComps = std::array<std::array<CMat, 2>, 2>;  // [domain chart][ambient comp]

struct SurfaceMap {
  std::shared_ptr<const SphereGrid> grid;
  std::shared_ptr<const AmbientManifold> man;
  std::array<int, 2> refch{0, 0};  // reference ambient chart per domain chart
  ChartComps vals;
  std::string class_name;

  C2 value(int c, int i, int j) const { return C2(vals[c][0](i, j), vals[c][1](i, j)); }
  ambient::AmbientPoint point(int c, int i, int j) const { return {refch[c], value(c, i, j)}; }
};

struct VariationField {
  ChartComps comps;
  C2 at(int c, int i, int j) const { return C2(comps[c][0](i, j), comps[c][1](i, j)); }
};

namespace detail {
inline void check_same_shape(const SurfaceMap& f, const VariationField& t) {
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < 2; ++k)
      if (t.comps[c][k].rows() != f.vals[c][k].rows() ||
          t.comps[c][k].cols() != f.vals[c][k].cols())
        throw InvalidInput("variation/map grid mismatch");
}
inline CMat zeros_like(const SphereGrid& g) { return CMat::Zero(g.n_r_tot, g.n_t); }
}  // namespace detail

// ---------------------------------------------------------------------------
// variation arithmetic

inline VariationField zero_variation(const SurfaceMap& f) {
  VariationField t;
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < 2; ++k) t.comps[c][k] = detail::zeros_like(*f.grid);
  return t;
}

inline VariationField axpy(double a, const VariationField& x, const VariationField& y) {
  VariationField out;
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < 2; ++k) out.comps[c][k] = a * x.comps[c][k] + y.comps[c][k];
  return out;
}

inline VariationField scaled(const VariationField& x, double a) {
  VariationField out;
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < 2; ++k) out.comps[c][k] = a * x.comps[c][k];
  return out;
}

inline SurfaceMap shifted_map(const SurfaceMap& f, const VariationField& t, double s) {
  detail::check_same_shape(f, t);
  SurfaceMap out = f;
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < 2; ++k) out.vals[c][k] = f.vals[c][k] + s * t.comps[c][k];
  return out;
}

// ---------------------------------------------------------------------------
// factories

// Degree-1 map to CP^2 with homogeneous components [z : 1 : -(alpha z + beta)].
inline SurfaceMap line_map(std::shared_ptr<const SphereGrid> g,
                           std::shared_ptr<const AmbientManifold> m, cd alpha = 0.0,
                           cd beta = 0.0) {
  if (m->name() != "CP2") throw InvalidInput("line_map: manifold must be CP2");
  SurfaceMap f;
  f.grid = std::move(g);
  f.man = std::move(m);
  f.refch = {1, 0};
  f.class_name = "L";
  const CMat& Z = f.grid->Z;
  f.vals[0][0] = Z;
  f.vals[0][1] = -(alpha * Z.array() + beta).matrix();
  f.vals[1][0] = Z;
  f.vals[1][1] = -(beta * Z.array() + alpha).matrix();
  return f;
}

// z -> (z, w0) into S^2 x S^2; w0 given in second-factor chart k2.
inline SurfaceMap sphere_map(std::shared_ptr<const SphereGrid> g,
                             std::shared_ptr<const AmbientManifold> m, cd w0, int k2 = 0) {
  if (m->name() != "S2xS2") throw InvalidInput("sphere_map: manifold must be S2xS2");
  SurfaceMap f;
  f.grid = std::move(g);
  f.man = std::move(m);
  f.refch = {0 + 2 * k2, 1 + 2 * k2};
  f.class_name = "S2xPT";
  const CMat& Z = f.grid->Z;
  const CMat W0 = CMat::Constant(f.grid->n_r_tot, f.grid->n_t, w0);
  f.vals[0][0] = Z;
  f.vals[0][1] = W0;
  f.vals[1][0] = Z;
  f.vals[1][1] = W0;
  return f;
}

inline SurfaceMap constant_map(std::shared_ptr<const SphereGrid> g,
                               std::shared_ptr<const AmbientManifold> m,
                               const ambient::AmbientPoint& p) {
  SurfaceMap f;
  f.grid = std::move(g);
  f.man = std::move(m);
  f.refch = {p.chart, p.chart};
  f.class_name = "ZERO";
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < 2; ++k)
      f.vals[c][k] = CMat::Constant(f.grid->n_r_tot, f.grid->n_t, p.z(k));
  return f;
}

// z -> [z^2 : 1 : 0] (branched double cover of a line, rank drop at 0 and inf).
inline SurfaceMap double_cover_map(std::shared_ptr<const SphereGrid> g,
                                   std::shared_ptr<const AmbientManifold> m) {
  SurfaceMap f = line_map(std::move(g), std::move(m));
  f.class_name = "2L";
  f.vals[0][0] = f.grid->Z.array().square().matrix();
  f.vals[1][0] = f.vals[0][0];
  return f;
}

// z -> [conj(z) : 1 : 0]: orientation-reversing on the image line.
inline SurfaceMap conj_line_map(std::shared_ptr<const SphereGrid> g,
                                std::shared_ptr<const AmbientManifold> m) {
  SurfaceMap f = line_map(std::move(g), std::move(m));
  f.class_name = "Lbar";
  f.vals[0][0] = f.grid->Z.conjugate();
  f.vals[1][0] = f.vals[0][0];
  return f;
}

// ---------------------------------------------------------------------------
// pointwise geometric data along f, precomputed once per map

struct MapJet {
  const SurfaceMap* f = nullptr;
  ChartComps fx, fy;                            // df(d/dx), df(d/dy) per comp
  std::array<std::vector<Mat4>, 2> W;           // omega matrix at f(node), real layout
  std::array<std::vector<Mat4>, 2> G;           // metric matrix at f(node)
  std::array<std::vector<Mat2c>, 2> H;          // hermitian metric at f(node)
  Mat rho0;                                     // round domain density (shared)

  int idx(int i, int j) const { return i * f->grid->n_t + j; }
  Vec4 X(int c, int i, int j) const { return c2r(C2(fx[c][0](i, j), fx[c][1](i, j))); }
  Vec4 Y(int c, int i, int j) const { return c2r(C2(fy[c][0](i, j), fy[c][1](i, j))); }
};

inline MapJet jet(const SurfaceMap& f) {
  MapJet J;
  J.f = &f;
  const SphereGrid& g = *f.grid;
  for (int c = 0; c < 2; ++c) {
    for (int k = 0; k < 2; ++k) g.dx_dy(f.vals[c][k], J.fx[c][k], J.fy[c][k]);
    J.W[c].resize(g.n_r_tot * g.n_t);
    J.G[c].resize(g.n_r_tot * g.n_t);
    J.H[c].resize(g.n_r_tot * g.n_t);
    for (int i = 0; i < g.n_r_tot; ++i)
      for (int j = 0; j < g.n_t; ++j) {
        const C2 z = f.value(c, i, j);
        const Mat2c h = f.man->metric_H(f.refch[c], z);
        const int id = i * g.n_t + j;
        J.H[c][id] = h;
        ambient::hermitian_to_GW(h, J.G[c][id], J.W[c][id]);
      }
  }
  J.rho0 = g.rho();
  return J;
}

// ---------------------------------------------------------------------------
// pullback of the ambient 2-form and immersion test

// Per-node density of f*omega against dx^dy of each chart.
inline std::array<Mat, 2> pullback_area(const MapJet& jt) {
  const SphereGrid& g = *jt.f->grid;
  std::array<Mat, 2> out;
  for (int c = 0; c < 2; ++c) {
    out[c].resize(g.n_r_tot, g.n_t);
    for (int i = 0; i < g.n_r_tot; ++i)
      for (int j = 0; j < g.n_t; ++j) {
        const Vec4 X = jt.X(c, i, j), Y = jt.Y(c, i, j);
        out[c](i, j) = X.dot(jt.W[c][jt.idx(i, j)] * Y);
      }
  }
  return out;
}
inline std::array<Mat, 2> pullback_area(const SurfaceMap& f) { return pullback_area(jet(f)); }

// Total integral of f*omega (= area of the homology class).
inline double symplectic_area(const MapJet& jt) {
  const auto dens = pullback_area(jt);
  return jt.f->grid->integrate(dens[0]) + jt.f->grid->integrate(dens[1]);
}
inline double symplectic_area(const SurfaceMap& f) { return symplectic_area(jet(f)); }

// For S2xS2 only: the two factor areas (pairs (k,l) of a bidegree-(k,l) map).
inline std::pair<double, double> factor_areas(const MapJet& jt) {
  if (jt.f->man->name() != "S2xS2") throw InvalidInput("factor_areas: S2xS2 only");
  const SphereGrid& g = *jt.f->grid;
  double a1 = 0, a2 = 0;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < g.n_r_tot; ++i)
      for (int j = 0; j < g.n_t; ++j) {
        const Vec4 X = jt.X(c, i, j), Y = jt.Y(c, i, j);
        const Mat4& W = jt.W[c][jt.idx(i, j)];
        // product structure: block {0,1} = first factor, {2,3} = second
        const double d1 = X.head<2>().dot(W.topLeftCorner<2, 2>() * Y.head<2>());
        const double d2 = X.tail<2>().dot(W.bottomRightCorner<2, 2>() * Y.tail<2>());
        a1 += g.quadw(i, j) * d1;
        a2 += g.quadw(i, j) * d2;
      }
  return {a1, a2};
}

struct ImmersionCheck {
  bool ok = false;
  double min_density = 0.0;      // min over owned nodes of f*omega density
  double density_ratio = 0.0;    // min density / median |density|
  double min_sv_ratio = 0.0;     // min over nodes of sigma_2/sigma_1 of df
};

inline ImmersionCheck is_immersed_symplectic(const MapJet& jt) {
  const SphereGrid& g = *jt.f->grid;
  const auto dens = pullback_area(jt);
  std::vector<double> mags;
  ImmersionCheck out;
  out.min_density = std::numeric_limits<double>::infinity();
  out.min_sv_ratio = std::numeric_limits<double>::infinity();
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < g.n_r; ++i)
      for (int j = 0; j < g.n_t; ++j) {
        out.min_density = std::min(out.min_density, dens[c](i, j));
        mags.push_back(std::abs(dens[c](i, j)));
        Eigen::Matrix<double, 4, 2> df;
        df.col(0) = jt.X(c, i, j);
        df.col(1) = jt.Y(c, i, j);
        Eigen::JacobiSVD<Eigen::Matrix<double, 4, 2>> svd(df);
        const double s0 = svd.singularValues()(0), s1 = svd.singularValues()(1);
        out.min_sv_ratio = std::min(out.min_sv_ratio, (s0 > 0) ? s1 / s0 : 0.0);
      }
  std::nth_element(mags.begin(), mags.begin() + mags.size() / 2, mags.end());
  const double med = std::max(mags[mags.size() / 2], 1e-300);
  out.density_ratio = out.min_density / med;
  out.ok = (out.density_ratio > 1e-3) && (out.min_sv_ratio > 1e-3);
  return out;
}
inline ImmersionCheck is_immersed_symplectic(const SurfaceMap& f) {
  return is_immersed_symplectic(jet(f));
}

// ---------------------------------------------------------------------------
// the 2-form on map space

struct FormValue {
  double value = 0.0;
  double quad_error_est = 0.0;
};

// Quadrature of the closed-form integrand
//   2 w(t1,t2) w(X,Y) - 2 [ w(t1,X) w(t2,Y) - w(t1,Y) w(t2,X) ]
// over both owned hemispheres; error estimate from angular subsampling.
inline FormValue form_eval(const MapJet& jt, const VariationField& t1,
                           const VariationField& t2) {
  detail::check_same_shape(*jt.f, t1);
  detail::check_same_shape(*jt.f, t2);
  const SphereGrid& g = *jt.f->grid;
  double total = 0.0, total_half = 0.0;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < g.n_r; ++i)
      for (int j = 0; j < g.n_t; ++j) {
        const Mat4& W = jt.W[c][jt.idx(i, j)];
        const Vec4 X = jt.X(c, i, j), Y = jt.Y(c, i, j);
        const Vec4 a = c2r(t1.at(c, i, j)), b = c2r(t2.at(c, i, j));
        const Vec4 WX = W * X, WY = W * Y, Wb = W * b;
        const double w12 = a.dot(Wb), wXY = X.dot(WY);
        const double w1X = a.dot(WX), w1Y = a.dot(WY);
        const double w2X = b.dot(WX), w2Y = b.dot(WY);
        const double dens = 2.0 * w12 * wXY - 2.0 * (w1X * w2Y - w1Y * w2X);
        const double contrib = g.quadw(i, j) * dens;
        total += contrib;
        if (j % 2 == 0) total_half += 2.0 * contrib;
      }
  return {total, std::abs(total - total_half)};
}
inline FormValue form_eval(const SurfaceMap& f, const VariationField& t1,
                           const VariationField& t2) {
  return form_eval(jet(f), t1, t2);
}

// Round-measure L2 pairing of variations with the ambient metric at f.
inline double l2_inner(const MapJet& jt, const VariationField& a, const VariationField& b) {
  const SphereGrid& g = *jt.f->grid;
  double total = 0.0;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < g.n_r; ++i)
      for (int j = 0; j < g.n_t; ++j) {
        const C2 u = a.at(c, i, j), v = b.at(c, i, j);
        total += g.quadw(i, j) * jt.rho0(i, j) *
                 std::real(u.dot(jt.H[c][jt.idx(i, j)] * v));
      }
  return total;
}
inline double l2_norm(const MapJet& jt, const VariationField& a) {
  return std::sqrt(std::max(0.0, l2_inner(jt, a, a)));
}

// ---------------------------------------------------------------------------
// J~ : pointwise application of the ambient (possibly path-perturbed) J

inline VariationField jtilde(const MapJet& jt, const VariationField& t, const JSource& js) {
  detail::check_same_shape(*jt.f, t);
  VariationField out = t;
  if (js.standard()) {
    for (int c = 0; c < 2; ++c)
      for (int k = 0; k < 2; ++k) out.comps[c][k] = cd(0, 1) * t.comps[c][k];
    return out;
  }
  const SphereGrid& g = *jt.f->grid;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < g.n_r_tot; ++i)
      for (int j = 0; j < g.n_t; ++j) {
        const Mat4 J = js.J(jt.f->refch[c], jt.f->value(c, i, j));
        const C2 v = r2c(Vec4(J * c2r(t.at(c, i, j))));
        out.comps[c][0](i, j) = v(0);
        out.comps[c][1](i, j) = v(1);
      }
  return out;
}

// ---------------------------------------------------------------------------
// tangential / symplectically-orthogonal splitting (pointwise 2x2 solve)

struct SplitVariation {
  VariationField tangent;
  VariationField perp;
};

inline SplitVariation split_variation(const MapJet& jt, const VariationField& t) {
  detail::check_same_shape(*jt.f, t);
  const SphereGrid& g = *jt.f->grid;
  SplitVariation out{zero_variation(*jt.f), zero_variation(*jt.f)};
  // immersion guard: the pivot w(X,Y) must be bounded away from 0
  std::vector<double> pivots;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < g.n_r_tot; ++i)
      for (int j = 0; j < g.n_t; ++j) {
        const Vec4 X = jt.X(c, i, j), Y = jt.Y(c, i, j);
        pivots.push_back(std::abs(X.dot(jt.W[c][jt.idx(i, j)] * Y)));
      }
  std::vector<double> sorted = pivots;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double med = sorted[sorted.size() / 2];
  size_t pk = 0;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < g.n_r_tot; ++i)
      for (int j = 0; j < g.n_t; ++j, ++pk) {
        if (pivots[pk] <= 1e-10 * med)
          throw NumericsError("split_variation: map not immersed symplectic at a node");
        const Mat4& W = jt.W[c][jt.idx(i, j)];
        const Vec4 X = jt.X(c, i, j), Y = jt.Y(c, i, j);
        const Vec4 v = c2r(t.at(c, i, j));
        const double wXY = X.dot(W * Y);
        const double a = v.dot(W * Y) / wXY;   // w(t,Y)/w(X,Y)
        const double b = -v.dot(W * X) / wXY;  // -w(t,X)/w(X,Y)
        const Vec4 tan = a * X + b * Y;
        const C2 tc = r2c(tan), pc = r2c(Vec4(v - tan));
        out.tangent.comps[c][0](i, j) = tc(0);
        out.tangent.comps[c][1](i, j) = tc(1);
        out.perp.comps[c][0](i, j) = pc(0);
        out.perp.comps[c][1](i, j) = pc(1);
      }
  return out;
}

// ---------------------------------------------------------------------------
// variation constructors (smooth chart-consistent sections)

// Random smooth complex scalar on the sphere: q(z, conj z)/ (1+|z|^2)^d with
// q of bidegree <= (d,d); the same expression in the w chart has coefficients
// c[d-j][d-k], so chart consistency is exact.
inline ChartScalar smooth_scalar(const SphereGrid& g, Rng& rng, int d = 2) {
  std::vector<std::vector<cd>> c(d + 1, std::vector<cd>(d + 1));
  for (auto& row : c)
    for (auto& x : row) x = rng.cnormal();
  ChartScalar out;
  for (int ch = 0; ch < 2; ++ch) {
    out[ch] = CMat::Zero(g.n_r_tot, g.n_t);
    for (int i = 0; i < g.n_r_tot; ++i)
      for (int j = 0; j < g.n_t; ++j) {
        const cd z = g.Z(i, j), zb = std::conj(z);
        cd q = 0;
        for (int p = 0; p <= d; ++p)
          for (int s = 0; s <= d; ++s) {
            const cd coef = (ch == 0) ? c[p][s] : c[d - p][d - s];
            q += coef * std::pow(z, p) * std::pow(zb, s);
          }
        out[ch](i, j) = q / std::pow(1.0 + std::norm(z), d);
      }
  }
  return out;
}

// Random smooth domain vector field p(z) d/dz (chart-1 comp -w^2 p(1/w)).
inline ChartScalar smooth_domain_field(const SphereGrid& g, Rng& rng, int d = 2) {
  ChartScalar s = smooth_scalar(g, rng, d);
  s[1] = (-g.Z.array().square() * s[1].array()).matrix();
  return s;
}

// Tangential variation df(v) for a domain field with dz-component p.
inline VariationField tangential_variation(const MapJet& jt, const ChartScalar& p) {
  VariationField out = zero_variation(*jt.f);
  for (int c = 0; c < 2; ++c) {
    const Mat a = p[c].real(), b = p[c].imag();
    for (int k = 0; k < 2; ++k)
      out.comps[c][k] =
          (a.array() * jt.fx[c][k].array() + b.array() * jt.fy[c][k].array()).matrix();
  }
  return out;
}

// Variation u(x) * (), where dir is a constant ambient direction given in
// refch[0] components, transported to refch[1] by the exact chart Jacobian.
inline VariationField scalar_direction_variation(const MapJet& jt, const ChartScalar& u,
                                                 const C2& dir) {
  const SurfaceMap& f = *jt.f;
  const SphereGrid& g = *f.grid;
  VariationField out = zero_variation(f);
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < g.n_r_tot; ++i)
      for (int j = 0; j < g.n_t; ++j) {
        C2 v = dir;
        if (f.refch[c] != f.refch[0]) {
          const C2 p0 = f.man->transition(f.refch[c], f.refch[0], f.value(c, i, j));
          v = f.man->transition_jac(f.refch[0], f.refch[c], p0) * dir;
        }
        out.comps[c][0](i, j) = u[c](i, j) * v(0);
        out.comps[c][1](i, j) = u[c](i, j) * v(1);
      }
  return out;
}

// General-purpose random smooth variation: sum of two scalar-direction fields.
inline VariationField random_variation(const MapJet& jt, Rng& rng, int d = 2) {
  const SphereGrid& g = *jt.f->grid;
  VariationField out = zero_variation(*jt.f);
  for (int rep = 0; rep < 2; ++rep) {
    const ChartScalar u = smooth_scalar(g, rng, d);
    C2 dir(rng.cnormal(), rng.cnormal());
    out = axpy(1.0, scalar_direction_variation(jt, u, dir), out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// closedness check by central differences on an affine 3-parameter family

struct ExtDerivResult {
  double value = 0.0;  // d Omega (e1,e2,e3) at the family center
  double scale = 0.0;  // max |d_i Omega_jk| over the three contributing slots
};

inline ExtDerivResult exterior_derivative_check(const SurfaceMap& f,
                                                const std::array<VariationField, 3>& t,
                                                double h) {
  if (!(h > 1e-8)) throw ConfigError("exterior_derivative_check: step too small");
  auto omega_at = [&](int shift_dir, double s, int p, int q) {
    const SurfaceMap fs = shifted_map(f, t[shift_dir], s);
    return form_eval(fs, t[p], t[q]).value;
  };
  const double d1 = (omega_at(0, h, 1, 2) - omega_at(0, -h, 1, 2)) / (2 * h);
  const double d2 = (omega_at(1, h, 0, 2) - omega_at(1, -h, 0, 2)) / (2 * h);
  const double d3 = (omega_at(2, h, 0, 1) - omega_at(2, -h, 0, 1)) / (2 * h);
  ExtDerivResult out;
  out.value = d1 - d2 + d3;
  out.scale = std::max({std::abs(d1), std::abs(d2), std::abs(d3), 1e-300});
  return out;
}

// ---------------------------------------------------------------------------
// overlap-consistency diagnostics

// Max ambient distance (in refch coords) between a halo value and the
// transition of the other chart's interpolated value at the same point.
inline double map_overlap_mismatch(const SurfaceMap& f) {
  const SphereGrid& g = *f.grid;
  double worst = 0.0;
  for (int c = 0; c < 2; ++c) {
    const int co = 1 - c;
    for (int i = g.n_r; i < g.n_r_tot; ++i)
      for (int j = 0; j < g.n_t; ++j) {
        const cd w = 1.0 / g.Z(i, j);
        double ang = std::arg(w);
        if (ang < 0) ang += 2.0 * kPi;
        const CMat Wt = g.interp_row(std::abs(w), ang);
        const C2 other(SphereGrid::interp_apply(Wt, f.vals[co][0]),
                       SphereGrid::interp_apply(Wt, f.vals[co][1]));
        const C2 here = f.value(c, i, j);
        const C2 moved = f.man->transition(f.refch[co], f.refch[c], other);
        worst = std::max(worst, (here - moved).norm());
      }
  }
  return worst;
}

// Same for a variation field (components transform by the chart Jacobian).
inline double variation_overlap_mismatch(const SurfaceMap& f, const VariationField& t) {
  const SphereGrid& g = *f.grid;
  double worst = 0.0;
  for (int c = 0; c < 2; ++c) {
    const int co = 1 - c;
    for (int i = g.n_r; i < g.n_r_tot; ++i)
      for (int j = 0; j < g.n_t; ++j) {
        const cd w = 1.0 / g.Z(i, j);
        double ang = std::arg(w);
        if (ang < 0) ang += 2.0 * kPi;
        const CMat Wt = g.interp_row(std::abs(w), ang);
        const C2 vo(SphereGrid::interp_apply(Wt, t.comps[co][0]),
                    SphereGrid::interp_apply(Wt, t.comps[co][1]));
        const C2 po(SphereGrid::interp_apply(Wt, f.vals[co][0]),
                    SphereGrid::interp_apply(Wt, f.vals[co][1]));
        const Mat2c Jc = f.man->transition_jac(f.refch[co], f.refch[c], po);
        worst = std::max(worst, (t.at(c, i, j) - C2(Jc * vo)).norm());
      }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// columnar text serialization (node id, chart, coords, components)

inline void write_columnar(std::ostream& os, const SurfaceMap& f,
                           const VariationField* t = nullptr) {
  const SphereGrid& g = *f.grid;
  os << "node_id,domain_chart,row,col,z_re,z_im,ambient_chart,c0_re,c0_im,c1_re,c1_im\n";
  int id = 0;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < g.n_r_tot; ++i)
      for (int j = 0; j < g.n_t; ++j, ++id) {
        const C2 v = t ? t->at(c, i, j) : f.value(c, i, j);
        os << id << ',' << c << ',' << i << ',' << j << ',' << fmt_g17(g.Z(i, j).real())
           << ',' << fmt_g17(g.Z(i, j).imag()) << ',' << f.refch[c] << ','
           << fmt_g17(v(0).real()) << ',' << fmt_g17(v(0).imag()) << ','
           << fmt_g17(v(1).real()) << ',' << fmt_g17(v(1).imag()) << '\n';
      }
}

}  // namespace surflab::mapspace
