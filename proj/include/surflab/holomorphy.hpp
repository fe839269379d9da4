// Nonlinear Cauchy-Riemann residual dbar_J(f) = (df + J o df o j)/2, its
// least-squares discretization, a damped Gauss-Newton solver, and the
// linearization ("vertical differential") at a solution with its splitting
// into complex-linear and antilinear parts.
//
// Discretization: residual rows are dbar values at a 2x-oversampled
// quadrature grid (Gauss-Legendre radii on [0,1] x doubled angles), scaled by
// sqrt(quadrature weight x round density), so the Euclidean norm of the row
// vector is the L2 norm of the residual; overlap consistency between the two
// chart representations is enforced by additional least-squares rows at the
// halo nodes.  Unknowns are the complex node values of both charts.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "surflab/core.hpp"
#include "surflab/domain.hpp"
#include "surflab/linalg.hpp"
#include "surflab/mapspace.hpp"
#include "surflab/structure_path.hpp"

namespace surflab::holomorphy {

using ambient::JSource;
using domain::SphereGrid;
using mapspace::MapJet;
using mapspace::SurfaceMap;
using mapspace::VariationField;

// ---------------------------------------------------------------------------
// packing: map/variation node data <-> real unknown vector
// layout: [chart 0 | chart 1], within a chart [comp0 re | comp0 im |
// comp1 re | comp1 im], each block row-major over (radius, angle).

inline int nodes_per_chart(const SphereGrid& g) { return g.n_r_tot * g.n_t; }
inline int unknowns_per_chart(const SphereGrid& g) { return 4 * nodes_per_chart(g); }
inline int unknown_count(const SphereGrid& g) { return 2 * unknowns_per_chart(g); }

namespace detail {
inline void pack_chart_comps(const SphereGrid& g, const std::array<std::array<CMat, 2>, 2>& d,
                             Vec& u) {
  const int N = nodes_per_chart(g);
  u.resize(8 * N);
  int off = 0;
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < 2; ++k) {
      for (int i = 0; i < g.n_r_tot; ++i)
        for (int j = 0; j < g.n_t; ++j) {
          u(off + i * g.n_t + j) = d[c][k](i, j).real();
          u(off + N + i * g.n_t + j) = d[c][k](i, j).imag();
        }
      off += 2 * N;
    }
}
inline void unpack_chart_comps(const SphereGrid& g, const Vec& u,
                               std::array<std::array<CMat, 2>, 2>& d) {
  const int N = nodes_per_chart(g);
  int off = 0;
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < 2; ++k) {
      d[c][k].resize(g.n_r_tot, g.n_t);
      for (int i = 0; i < g.n_r_tot; ++i)
        for (int j = 0; j < g.n_t; ++j)
          d[c][k](i, j) = cd(u(off + i * g.n_t + j), u(off + N + i * g.n_t + j));
      off += 2 * N;
    }
}
}  // namespace detail

inline Vec pack_map(const SurfaceMap& f) {
  Vec u;
  detail::pack_chart_comps(*f.grid, f.vals, u);
  return u;
}
inline SurfaceMap unpack_map(const SurfaceMap& templ, const Vec& u) {
  SurfaceMap f = templ;
  detail::unpack_chart_comps(*templ.grid, u, f.vals);
  return f;
}
inline Vec pack_variation(const SurfaceMap& f, const VariationField& t) {
  Vec u;
  detail::pack_chart_comps(*f.grid, t.comps, u);
  return u;
}
inline VariationField unpack_variation(const SurfaceMap& f, const Vec& u) {
  VariationField t;
  detail::unpack_chart_comps(*f.grid, u, t.comps);
  return t;
}

// ---------------------------------------------------------------------------
// Oversample: fixed evaluation operators from node data to the residual grid.

class Oversample {
 public:
  explicit Oversample(const SphereGrid& g) : g_(&g) {
    n_q = 2 * g.n_r_tot;
    n_t2 = 2 * g.n_t;
    linalg::gauss_legendre_ab(n_q, 0.0, 1.0, rq, wrq);
    thq.resize(n_t2);
    for (int b = 0; b < n_t2; ++b) thq(b) = 2.0 * kPi * b / n_t2;

    // even/odd radial evaluation at the oversample radii
    const int n = g.n_r_tot;
    Mat Ee(n_q, n), Eo(n_q, n);
    for (int a = 0; a < n_q; ++a) {
      const Vec lfull = domain::detail::lagrange_eval_weights(g.sym_nodes, rq(a));
      for (int l = 0; l < n; ++l) {
        const double lp = lfull(n + l), ln = lfull(n - 1 - l);
        Ee(a, l) = lp + ln;
        Eo(a, l) = lp - ln;
      }
    }
    const Mat Ede = Eo * g.D_even;  // derivative of an even mode is odd
    const Mat Edo = Ee * g.D_odd;

    const int P = n_q * n_t2, N = n * g.n_t;
    EV = CMat::Zero(P, N);
    CMat EDr = CMat::Zero(P, N), EDth = CMat::Zero(P, N);
    for (int m = 0; m < g.n_t; ++m) {
      const bool even = g.even_mode[m];
      const Mat& Epar = even ? Ee : Eo;
      const Mat& Eflip = even ? Ede : Edo;
      const double k = g.kvals[m];
      // Phase(b,j) = exp(i k thq_b) * conj-dft coefficient of node angle j
      CMat Phase(n_t2, g.n_t);
      for (int b = 0; b < n_t2; ++b)
        for (int j = 0; j < g.n_t; ++j) {
          const double a1 = k * thq(b), a2 = k * g.th(j);
          Phase(b, j) = cd(std::cos(a1), std::sin(a1)) *
                        cd(std::cos(a2), -std::sin(a2)) / static_cast<double>(g.n_t);
        }
      for (int a = 0; a < n_q; ++a)
        for (int l = 0; l < n; ++l) {
          const double ev = Epar(a, l), ed = Eflip(a, l);
          if (ev == 0.0 && ed == 0.0) continue;
          for (int b = 0; b < n_t2; ++b) {
            const int row = a * n_t2 + b;
            for (int j = 0; j < g.n_t; ++j) {
              const cd ph = Phase(b, j);
              EV(row, l * g.n_t + j) += ev * ph;
              EDr(row, l * g.n_t + j) += ed * ph;
              EDth(row, l * g.n_t + j) += cd(0.0, k) * ev * ph;
            }
          }
        }
    }
    // cartesian derivative operators (rows scaled pointwise)
    EX = CMat(P, N);
    EY = CMat(P, N);
    for (int a = 0; a < n_q; ++a)
      for (int b = 0; b < n_t2; ++b) {
        const int row = a * n_t2 + b;
        const double cth = std::cos(thq(b)), sth = std::sin(thq(b));
        const double rinv = 1.0 / rq(a);
        EX.row(row) = cth * EDr.row(row) - (sth * rinv) * EDth.row(row);
        EY.row(row) = sth * EDr.row(row) + (cth * rinv) * EDth.row(row);
      }

    // least-squares weights: sqrt(w_r r dtheta * round density)
    sqrtw.resize(P);
    for (int a = 0; a < n_q; ++a) {
      const double rho = 4.0 / std::pow(1.0 + rq(a) * rq(a), 2);
      const double w = wrq(a) * rq(a) * (2.0 * kPi / n_t2) * rho;
      for (int b = 0; b < n_t2; ++b) sqrtw(a * n_t2 + b) = std::sqrt(w);
    }

    // halo interpolation rows: value of the other chart's field at 1/z
    HI = CMat::Zero(g.n_halo * g.n_t, N);
    int hr = 0;
    for (int i = g.n_r; i < g.n_r_tot; ++i)
      for (int j = 0; j < g.n_t; ++j, ++hr) {
        const cd w = 1.0 / g.Z(i, j);
        double ang = std::arg(w);
        if (ang < 0) ang += 2.0 * kPi;
        const CMat Wm = g.interp_row(std::abs(w), ang);
        for (int l = 0; l < g.n_r_tot; ++l)
          for (int jj = 0; jj < g.n_t; ++jj) HI(hr, l * g.n_t + jj) = Wm(l, jj);
      }
  }

  const SphereGrid& grid() const { return *g_; }
  int dbar_rows_per_chart() const { return 4 * n_q * n_t2; }
  int halo_rows_per_chart() const { return 4 * g_->n_halo * g_->n_t; }
  int total_rows() const { return 2 * (dbar_rows_per_chart() + halo_rows_per_chart()); }

  int n_q = 0, n_t2 = 0;
  Vec rq, wrq, thq, sqrtw;
  CMat EV, EX, EY;  // (n_q*n_t2) x (n_r_tot*n_t)
  CMat HI;          // (n_halo*n_t) x (n_r_tot*n_t)

 private:
  const SphereGrid* g_;
};

// ---------------------------------------------------------------------------
// residual evaluation

namespace detail {

// complex node vector of one component of one chart
inline CVec flatten(const CMat& M) {
  CVec v(M.size());
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j) v(i * M.cols() + j) = M(i, j);
  return v;
}

struct ChartEval {
  CVec v0, v1;  // values of the two components at oversample points
  CVec x0, x1;  // d/dx
  CVec y0, y1;  // d/dy
};

inline ChartEval eval_chart(const Oversample& os, const SurfaceMap& f, int c) {
  ChartEval e;
  const CVec u0 = flatten(f.vals[c][0]), u1 = flatten(f.vals[c][1]);
  e.v0 = os.EV * u0;
  e.v1 = os.EV * u1;
  e.x0 = os.EX * u0;
  e.x1 = os.EX * u1;
  e.y0 = os.EY * u0;
  e.y1 = os.EY * u1;
  return e;
}

}  // namespace detail

// Rows: [dbar chart 0 | dbar chart 1 | halo chart 0 | halo chart 1].
inline Vec residual(const Oversample& os, const SurfaceMap& f, const JSource& js) {
  const SphereGrid& g = os.grid();
  const int P = os.n_q * os.n_t2;
  Vec r(os.total_rows());
  int off = 0;
  const bool std_j = js.standard();
  for (int c = 0; c < 2; ++c) {
    const detail::ChartEval e = detail::eval_chart(os, f, c);
    for (int p = 0; p < P; ++p) {
      const double w = 0.5 * os.sqrtw(p);
      if (std_j) {
        const cd r0 = w * (e.x0(p) + cd(0, 1) * e.y0(p));
        const cd r1 = w * (e.x1(p) + cd(0, 1) * e.y1(p));
        r(off + 4 * p + 0) = r0.real();
        r(off + 4 * p + 1) = r0.imag();
        r(off + 4 * p + 2) = r1.real();
        r(off + 4 * p + 3) = r1.imag();
      } else {
        const Mat4 J = js.J(f.refch[c], C2(e.v0(p), e.v1(p)));
        const Vec4 rr = w * (c2r(C2(e.x0(p), e.x1(p))) + J * c2r(C2(e.y0(p), e.y1(p))));
        r.segment<4>(off + 4 * p) = rr;
      }
    }
    off += 4 * P;
  }
  // halo consistency rows
  for (int c = 0; c < 2; ++c) {
    const int co = 1 - c;
    const CVec po0 = os.HI * detail::flatten(f.vals[co][0]);
    const CVec po1 = os.HI * detail::flatten(f.vals[co][1]);
    int hr = 0;
    for (int i = g.n_r; i < g.n_r_tot; ++i)
      for (int j = 0; j < g.n_t; ++j, ++hr) {
        const C2 moved = f.man->transition(f.refch[co], f.refch[c], C2(po0(hr), po1(hr)));
        const C2 diff = f.value(c, i, j) - moved;
        r.segment<4>(off + 4 * hr) = c2r(diff);
      }
    off += 4 * g.n_halo * g.n_t;
  }
  return r;
}

inline double residual_norm(const Oversample& os, const SurfaceMap& f, const JSource& js) {
  return residual(os, f, js).norm();
}

// ---------------------------------------------------------------------------
// node-grid dbar residual (reported object; quadrature L2 norm)

struct DbarResidual {
  std::array<std::array<CMat, 2>, 2> comps;  // value on d/dx per node, per chart/comp
  double l2_norm = 0.0;
};

inline DbarResidual dbar(const SurfaceMap& f, const JSource& js) {
  const SphereGrid& g = *f.grid;
  DbarResidual out;
  const Mat rho = g.rho();
  double acc = 0.0;
  for (int c = 0; c < 2; ++c) {
    CMat X[2], Y[2];
    for (int k = 0; k < 2; ++k) g.dx_dy(f.vals[c][k], X[k], Y[k]);
    for (int k = 0; k < 2; ++k) out.comps[c][k].resize(g.n_r_tot, g.n_t);
    const bool std_j = js.standard();
    for (int i = 0; i < g.n_r_tot; ++i)
      for (int j = 0; j < g.n_t; ++j) {
        C2 rr;
        if (std_j) {
          rr = 0.5 * C2(X[0](i, j) + cd(0, 1) * Y[0](i, j), X[1](i, j) + cd(0, 1) * Y[1](i, j));
        } else {
          const Mat4 J = js.J(f.refch[c], f.value(c, i, j));
          rr = r2c(Vec4(0.5 * (c2r(C2(X[0](i, j), X[1](i, j))) +
                               J * c2r(C2(Y[0](i, j), Y[1](i, j))))));
        }
        out.comps[c][0](i, j) = rr(0);
        out.comps[c][1](i, j) = rr(1);
        acc += g.quadw(i, j) * rho(i, j) * rr.squaredNorm();
      }
  }
  out.l2_norm = std::sqrt(acc);
  return out;
}

// ---------------------------------------------------------------------------
// analytic Jacobian of the least-squares residual (for the inner solver loop)

struct JacBlocks {
  // dbar rows of chart c w.r.t. chart-c unknowns
  std::array<Mat, 2> B;
  // halo rows of chart c w.r.t. the *other* chart's unknowns (dense)
  std::array<Mat, 2> C;
  // halo rows w.r.t. own chart: one unit entry per row at this column index
  std::array<std::vector<int>, 2> halo_own_col;
  int rows_dbar = 0, rows_halo = 0, cols_per_chart = 0;
};

namespace detail {

// write the 4x4 real block of row-derivatives for one (point, node) pair:
// rows = (re0, im0, re1, im1) of the residual 4-vector, cols = (re0, im0,
// re1, im1) of the node unknowns; 'a' is the complex coefficient acting on
// each component (diagonal complex action).
inline void add_complex_diag_block(Mat& Bl, int row0, int col_re0, int col_im0, int col_re1,
                                   int col_im1, cd a0, cd a1) {
  // value_k = a_k * u_k: d re/d re = Re a, d re/d im = -Im a, etc.
  Bl(row0 + 0, col_re0) += a0.real();
  Bl(row0 + 0, col_im0) += -a0.imag();
  Bl(row0 + 1, col_re0) += a0.imag();
  Bl(row0 + 1, col_im0) += a0.real();
  Bl(row0 + 2, col_re1) += a1.real();
  Bl(row0 + 2, col_im1) += -a1.imag();
  Bl(row0 + 3, col_re1) += a1.imag();
  Bl(row0 + 3, col_im1) += a1.real();
}

}  // namespace detail

inline JacBlocks jacobian_blocks(const Oversample& os, const SurfaceMap& f, const JSource& js) {
  const SphereGrid& g = os.grid();
  const int P = os.n_q * os.n_t2;
  const int N = nodes_per_chart(g);
  JacBlocks jb;
  jb.rows_dbar = 4 * P;
  jb.rows_halo = 4 * g.n_halo * g.n_t;
  jb.cols_per_chart = 4 * N;
  const bool std_j = js.standard();

  for (int c = 0; c < 2; ++c) {
    jb.B[c] = Mat::Zero(4 * P, 4 * N);
    Mat& Bl = jb.B[c];
    const detail::ChartEval e = std_j ? detail::ChartEval{} : detail::eval_chart(os, f, c);
    for (int p = 0; p < P; ++p) {
      const double w = 0.5 * os.sqrtw(p);
      Mat4 J;
      std::array<Mat4, 4> dJ;
      Vec4 Y4;
      if (!std_j) {
        const C2 v(e.v0(p), e.v1(p));
        J = js.J(f.refch[c], v);
        Y4 = c2r(C2(e.y0(p), e.y1(p)));
        const double hj = 1e-6 * (1.0 + v.norm());
        for (int d = 0; d < 4; ++d) {
          Vec4 dir = Vec4::Zero();
          dir(d) = hj;
          const C2 dz = r2c(dir);
          dJ[d] = (js.J(f.refch[c], v + dz) - js.J(f.refch[c], v - dz)) / (2.0 * hj);
        }
      }
      const int row0 = 4 * p;
      for (int n = 0; n < N; ++n) {
        const cd ex = os.EX(p, n), ey = os.EY(p, n), ev = std_j ? cd(0) : os.EV(p, n);
        if (ex == cd(0) && ey == cd(0) && ev == cd(0)) continue;
        const int cr0 = n, ci0 = N + n, cr1 = 2 * N + n, ci1 = 3 * N + n;
        if (std_j) {
          const cd coef = w * (ex + cd(0, 1) * ey);
          detail::add_complex_diag_block(Bl, row0, cr0, ci0, cr1, ci1, coef, coef);
        } else {
          // rows = w * (X4 + J(v) Y4); X4/Y4/v all linear in the unknowns
          // d(X4) term: complex-diagonal action ex per component
          // d(J Y4) term: J * (complex-diagonal ey) + sum_d dJ[d] Y4 * dv_d
          for (int part = 0; part < 4; ++part) {
            // column indices per real part: (re0, im0, re1, im1)
            const int col = (part == 0) ? cr0 : (part == 1) ? ci0 : (part == 2) ? cr1 : ci1;
            // X4 differential: component k = part/2, unit re or im
            Vec4 dX = Vec4::Zero(), dY = Vec4::Zero(), dV = Vec4::Zero();
            const int k2 = 2 * (part / 2);
            const bool is_im = (part % 2) == 1;
            const cd unit = is_im ? cd(0, 1) : cd(1, 0);
            const cd dx = ex * unit, dy = ey * unit, dv = ev * unit;
            dX(k2) = dx.real();
            dX(k2 + 1) = dx.imag();
            dY(k2) = dy.real();
            dY(k2 + 1) = dy.imag();
            dV(k2) = dv.real();
            dV(k2 + 1) = dv.imag();
            Vec4 drow = dX + J * dY;
            for (int d = 0; d < 4; ++d) drow += dJ[d] * Y4 * dV(d);
            for (int rr = 0; rr < 4; ++rr) Bl(row0 + rr, col) += w * drow(rr);
          }
        }
      }
    }
  }

  // halo rows
  for (int c = 0; c < 2; ++c) {
    const int co = 1 - c;
    jb.C[c] = Mat::Zero(jb.rows_halo, 4 * N);
    jb.halo_own_col[c].assign(jb.rows_halo, -1);
    const CVec po0 = os.HI * detail::flatten(f.vals[co][0]);
    const CVec po1 = os.HI * detail::flatten(f.vals[co][1]);
    int hr = 0;
    for (int i = g.n_r; i < g.n_r_tot; ++i)
      for (int j = 0; j < g.n_t; ++j, ++hr) {
        const int node = i * g.n_t + j;
        // own-chart entries: +1 on (re0, im0, re1, im1) of this node
        jb.halo_own_col[c][4 * hr + 0] = node;          // re comp0
        jb.halo_own_col[c][4 * hr + 1] = N + node;      // im comp0
        jb.halo_own_col[c][4 * hr + 2] = 2 * N + node;  // re comp1
        jb.halo_own_col[c][4 * hr + 3] = 3 * N + node;  // im comp1
        // other-chart entries: -dT(p) * HI row (complex 2x2 times row)
        const C2 p(po0(hr), po1(hr));
        const Mat2c dT = f.man->transition_jac(f.refch[co], f.refch[c], p);
        for (int n = 0; n < N; ++n) {
          const cd hi = os.HI(hr, n);
          if (hi == cd(0)) continue;
          // moved_k = sum_m dT(k,m) * (hi * u_m); derivative blocks:
          for (int m = 0; m < 2; ++m) {
            const cd coef = -dT(0, m) * hi;
            const cd coef1 = -dT(1, m) * hi;
            const int colr = 2 * m * N + n, coli = (2 * m + 1) * N + n;
            jb.C[c](4 * hr + 0, colr) += coef.real();
            jb.C[c](4 * hr + 0, coli) += -coef.imag();
            jb.C[c](4 * hr + 1, colr) += coef.imag();
            jb.C[c](4 * hr + 1, coli) += coef.real();
            jb.C[c](4 * hr + 2, colr) += coef1.real();
            jb.C[c](4 * hr + 2, coli) += -coef1.imag();
            jb.C[c](4 * hr + 3, colr) += coef1.imag();
            jb.C[c](4 * hr + 3, coli) += coef1.real();
          }
        }
      }
  }
  return jb;
}

// Dense residual Jacobian assembled from the blocks (small grids / tests).
inline Mat materialize_jacobian(const JacBlocks& jb) {
  const int W = 2 * jb.cols_per_chart;
  Mat Jf = Mat::Zero(2 * jb.rows_dbar + 2 * jb.rows_halo, W);
  Jf.block(0, 0, jb.rows_dbar, jb.cols_per_chart) = jb.B[0];
  Jf.block(jb.rows_dbar, jb.cols_per_chart, jb.rows_dbar, jb.cols_per_chart) = jb.B[1];
  int off = 2 * jb.rows_dbar;
  for (int c = 0; c < 2; ++c) {
    const int co = 1 - c;
    for (int rr = 0; rr < jb.rows_halo; ++rr) {
      Jf(off + rr, c * jb.cols_per_chart + jb.halo_own_col[c][rr]) += 1.0;
      Jf.row(off + rr).segment(co * jb.cols_per_chart, jb.cols_per_chart) += jb.C[c].row(rr);
    }
    off += jb.rows_halo;
  }
  return Jf;
}

// Normal matrix A = J^T J and gradient g = J^T r from the blocks.
inline void normal_system(const JacBlocks& jb, const Vec& r, Mat& A, Vec& grad) {
  const int Wc = jb.cols_per_chart;
  const int W = 2 * Wc;
  A = Mat::Zero(W, W);
  grad = Vec::Zero(W);
  // dbar blocks
  for (int c = 0; c < 2; ++c) {
    A.block(c * Wc, c * Wc, Wc, Wc)
        .selfadjointView<Eigen::Lower>()
        .rankUpdate(jb.B[c].transpose());
    grad.segment(c * Wc, Wc) += jb.B[c].transpose() * r.segment(c * jb.rows_dbar, jb.rows_dbar);
  }
  // halo blocks
  int off = 2 * jb.rows_dbar;
  for (int c = 0; c < 2; ++c) {
    const int co = 1 - c;
    const auto rh = r.segment(off, jb.rows_halo);
    // dense-dense: C^T C into the co-chart diagonal block
    A.block(co * Wc, co * Wc, Wc, Wc)
        .selfadjointView<Eigen::Lower>()
        .rankUpdate(jb.C[c].transpose());
    grad.segment(co * Wc, Wc) += jb.C[c].transpose() * rh;
    // unit entries: diagonal + cross terms with the dense part
    for (int rr = 0; rr < jb.rows_halo; ++rr) {
      const int q = c * Wc + jb.halo_own_col[c][rr];
      A(q, q) += 1.0;
      grad(q) += rh(rr);
      // cross block (own unit) x (co dense): fill the lower triangle only
      for (int n = 0; n < Wc; ++n) {
        const double v = jb.C[c](rr, n);
        if (v == 0.0) continue;
        const int qc = co * Wc + n;
        if (qc >= q)
          A(qc, q) += v;
        else
          A(q, qc) += v;
      }
    }
    off += jb.rows_halo;
  }
  A = A.selfadjointView<Eigen::Lower>();
}

// ---------------------------------------------------------------------------
// Gauss-Newton with Levenberg damping

struct GNOptions {
  double tol = 1e-10;
  int max_iter = 25;
  double mu0 = 1e-2;
  int max_attempts = 12;
  bool use_tsvd = false;       // small grids only: pseudoinverse by truncated SVD
  double tsvd_cut = 1e-6;      // relative singular value cutoff
  bool throw_on_fail = true;   // divergence -> NumericsError
  double stall_rel = 1e-3;     // relative decrease counted as progress
  int stall_window = 3;
};

struct GNStep {
  int iter = 0;
  double resid = 0.0;
  double step_norm = 0.0;
  double mu = 0.0;
  bool accepted = true;
};

struct GNResult {
  SurfaceMap f;
  double final_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  bool stalled = false;
  std::vector<GNStep> trace;
};

inline GNResult gauss_newton_solve(const SurfaceMap& f0, const JSource& js,
                                   const GNOptions& opts = {},
                                   const Oversample* os_in = nullptr) {
  std::unique_ptr<Oversample> own;
  if (!os_in) own = std::make_unique<Oversample>(*f0.grid);
  const Oversample& os = os_in ? *os_in : *own;

  GNResult out;
  out.f = f0;
  Vec r = residual(os, out.f, js);
  double rn = r.norm();
  double mu = opts.mu0;
  int no_progress = 0;
  for (int it = 0; it < opts.max_iter; ++it) {
    if (rn <= opts.tol) {
      out.converged = true;
      break;
    }
    const JacBlocks jb = jacobian_blocks(os, out.f, js);
    Mat A;
    Vec grad;
    normal_system(jb, r, A, grad);
    const Vec u = pack_map(out.f);

    bool accepted = false;
    double step_norm = 0.0;
    Vec r_new;
    SurfaceMap f_new;
    for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
      Vec du;
      if (opts.use_tsvd) {
        const Mat Jf = materialize_jacobian(jb);
        Eigen::BDCSVD<Mat> svd(Jf, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Vec& s = svd.singularValues();
        const double cut = opts.tsvd_cut * s(0);
        Vec utr = svd.matrixU().transpose() * r;
        for (int k = 0; k < s.size(); ++k)
          utr(k) = (s(k) > cut) ? utr(k) * s(k) / (s(k) * s(k) + mu * mu) : 0.0;
        du = -(svd.matrixV() * utr);
      } else {
        Mat Ad = A;
        Ad.diagonal().array() += mu * mu;
        du = -Ad.ldlt().solve(grad);
      }
      f_new = unpack_map(out.f, u + du);
      r_new = residual(os, f_new, js);
      if (r_new.norm() < rn) {
        accepted = true;
        step_norm = du.norm();
        mu = std::max(mu / 3.0, 1e-14);
        break;
      }
      mu *= 10.0;
    }
    if (!accepted) {
      if (opts.throw_on_fail)
        throw NumericsError("gauss_newton_solve: no descent step found (damping exhausted)");
      out.stalled = true;
      break;
    }
    const double rel_drop = (rn - r_new.norm()) / rn;
    out.f = f_new;
    r = r_new;
    rn = r.norm();
    out.iterations = it + 1;
    out.trace.push_back({it, rn, step_norm, mu, true});
    if (rn <= opts.tol) {
      out.converged = true;
      break;
    }
    no_progress = (rel_drop < opts.stall_rel) ? no_progress + 1 : 0;
    if (no_progress >= opts.stall_window) {
      out.stalled = true;
      break;
    }
  }
  if (!out.converged && rn <= opts.tol) out.converged = true;
  out.final_residual = rn;
  if (!out.converged && !out.stalled && opts.throw_on_fail)
    throw NumericsError("gauss_newton_solve: did not converge within max_iter");
  return out;
}

// ---------------------------------------------------------------------------
// vertical differential at a solution: central-FD columns of the residual

struct VerticalOperator {
  SurfaceMap f;           // base point (a numerical zero of dbar)
  JSource js;
  double fd_step = 0.0;
  std::shared_ptr<Oversample> os;
  // FD matrix in block form (dbar rows are chart-local; halo rows are not)
  std::array<Mat, 2> B;        // dbar rows of chart c vs chart-c unknowns
  std::array<Mat, 2> Hrows;    // halo rows of chart c vs ALL unknowns
  // spectrum of the full matrix: s descending, kernel basis (right vectors)
  Vec svals;
  Mat kernel;                  // (unknowns) x kernel_dim
  int kernel_dim = 0;
  double gap_ratio = 0.0;
  int rows_dbar = 0, rows_halo = 0;

  int total_rows() const { return 2 * rows_dbar + 2 * rows_halo; }

  // apply the linearization to a packed variation vector
  Vec apply(const Vec& du) const {
    const int Wc = B[0].cols();
    Vec r(total_rows());
    r.segment(0, rows_dbar) = B[0] * du.segment(0, Wc);
    r.segment(rows_dbar, rows_dbar) = B[1] * du.segment(Wc, Wc);
    r.segment(2 * rows_dbar, rows_halo) = Hrows[0] * du;
    r.segment(2 * rows_dbar + rows_halo, rows_halo) = Hrows[1] * du;
    return r;
  }
  Vec apply(const VariationField& t) const { return apply(pack_variation(f, t)); }
};

// kernel selection utility: spectrum gap strictly below ceiling_rel * s_max;
// the floor keeps eigensolver noise in the kernel tail from faking a gap
inline linalg::SpectrumGap kernel_gap(const Vec& s_desc, double ceiling_rel = 1e-3) {
  return linalg::largest_ratio_gap(s_desc, ceiling_rel, 1e-12);
}

inline VerticalOperator vertical_differential(const SurfaceMap& f, const JSource& js,
                                              double fd_step = 0.0,
                                              std::shared_ptr<Oversample> os_in = nullptr,
                                              bool with_spectrum = true) {
  const DbarResidual base = dbar(f, js);
  if (base.l2_norm > 1e-8)
    throw NumericsError("vertical_differential: not at a zero (dbar L2 = " +
                        std::to_string(base.l2_norm) + " > 1e-8)");
  VerticalOperator op;
  op.f = f;
  op.js = js;
  op.os = os_in ? std::move(os_in) : std::make_shared<Oversample>(*f.grid);
  const Oversample& os = *op.os;
  const SphereGrid& g = *f.grid;
  const Vec u0 = pack_map(f);
  // Auto step for the pointwise derivative of J along unit value directions.
  // The fourth-order stencil has truncation ~h^4 and roundoff ~eps/h, which
  // balance near h ~ 1e-3 on O(1) values; no interpolation weights enter.
  op.fd_step = (fd_step > 0.0) ? fd_step : 1e-3 * (1.0 + u0.cwiseAbs().maxCoeff());
  const double h = op.fd_step;
  const int Wc = unknowns_per_chart(g);
  op.rows_dbar = os.dbar_rows_per_chart();
  op.rows_halo = os.halo_rows_per_chart();
  op.B[0] = Mat::Zero(op.rows_dbar, Wc);
  op.B[1] = Mat::Zero(op.rows_dbar, Wc);
  op.Hrows[0] = Mat::Zero(op.rows_halo, 2 * Wc);
  op.Hrows[1] = Mat::Zero(op.rows_halo, 2 * Wc);

  // FD columns, computed incrementally: a unit node perturbation changes the
  // oversampled values/derivatives by the corresponding column of EV/EX/EY,
  // and the halo rows by HI entries / the local unit entry.
  const int N = nodes_per_chart(g);
  const int P = os.n_q * os.n_t2;
  const bool std_j = js.standard();
  std::array<detail::ChartEval, 2> base_eval = {detail::eval_chart(os, f, 0),
                                                detail::eval_chart(os, f, 1)};
  std::array<std::array<CVec, 2>, 2> halo_base;  // [chart][comp]
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < 2; ++k)
      halo_base[c][k] = os.HI * detail::flatten(f.vals[1 - c][k]);

  for (int c = 0; c < 2; ++c) {
    const detail::ChartEval& be = base_eval[c];
    // The residual r(p) = x(p) + J(v(p)) y(p) is linear in x, y and touches the
    // unknowns only through the interpolation coefficients, so the column
    // entries are assembled exactly from J(v) and the pointwise derivative of
    // J along the four real value directions.  (Differencing along the scaled
    // directions h*coef instead amplifies the truncation error by the cube of
    // the interpolation weight, which floors the kernel spectrum.)
    std::vector<Mat4> Jp;
    std::vector<std::array<Vec4, 4>> dJy;  // (dJ/dv_kappa) * y(p)
    if (!std_j) {
      Jp.resize(P);
      dJy.resize(P);
      for (int p = 0; p < P; ++p) {
        const C2 v(be.v0(p), be.v1(p));
        const Vec4 y = c2r(C2(be.y0(p), be.y1(p)));
        Jp[p] = js.J(f.refch[c], v);
        for (int kp = 0; kp < 4; ++kp) {
          C2 e = C2::Zero();
          e(kp / 2) = (kp % 2 == 0) ? cd(1, 0) : cd(0, 1);
          // fourth-order stencil in a unit direction: truncation ~ h^4
          const Mat4 m2 = js.J(f.refch[c], v - 2.0 * h * e);
          const Mat4 m1 = js.J(f.refch[c], v - h * e);
          const Mat4 p1 = js.J(f.refch[c], v + h * e);
          const Mat4 p2 = js.J(f.refch[c], v + 2.0 * h * e);
          dJy[p][kp] = ((m2 - p2 + 8.0 * (p1 - m1)) / (12.0 * h)) * y;
        }
      }
    }
    for (int col = 0; col < Wc; ++col) {
      const int k = col / (2 * N);            // component index
      const bool is_im = ((col / N) % 2) == 1;
      const int n = col % N;
      const cd unit = is_im ? cd(0, 1) : cd(1, 0);
      // dbar rows of chart c
      for (int p = 0; p < P; ++p) {
        const cd ev = os.EV(p, n), ex = os.EX(p, n), ey = os.EY(p, n);
        if (ev == cd(0) && ex == cd(0) && ey == cd(0)) continue;
        const double w = 0.5 * os.sqrtw(p);
        Vec4 drow;
        if (std_j) {
          const cd dr = w * (ex + cd(0, 1) * ey) * unit;
          drow = Vec4::Zero();
          drow(2 * k) = dr.real();
          drow(2 * k + 1) = dr.imag();
        } else {
          const cd qx = unit * ex, qy = unit * ey, qv = unit * ev;
          drow = qy.real() * Jp[p].col(2 * k) + qy.imag() * Jp[p].col(2 * k + 1) +
                 qv.real() * dJy[p][2 * k] + qv.imag() * dJy[p][2 * k + 1];
          drow(2 * k) += qx.real();
          drow(2 * k + 1) += qx.imag();
          drow *= w;
        }
        op.B[c].block<4, 1>(4 * p, col) += drow;
      }
      // halo rows: own-chart unit entries (exact linear part)
      // handled below; other-chart coupling via HI and the transition
    }
  }

  // halo rows by the same central FD (cheap: few rows)
  for (int c = 0; c < 2; ++c) {
    const int co = 1 - c;
    int hr = 0;
    for (int i = g.n_r; i < g.n_r_tot; ++i)
      for (int j = 0; j < g.n_t; ++j, ++hr) {
        const int node = i * g.n_t + j;
        // own-chart: identity rows (the residual term f_c(node) is linear)
        op.Hrows[c](4 * hr + 0, c * Wc + node) += 1.0;
        op.Hrows[c](4 * hr + 1, c * Wc + N + node) += 1.0;
        op.Hrows[c](4 * hr + 2, c * Wc + 2 * N + node) += 1.0;
        op.Hrows[c](4 * hr + 3, c * Wc + 3 * N + node) += 1.0;
        // other-chart: exact holomorphic Jacobian of the transition at the
        // interpolated point.  (An FD step here would be scaled by the
        // interpolation weight, so its error grows with the weight cubed and
        // floors the kernel spectrum near 1e-4; the analytic Jacobian keeps
        // exact tangent directions at roundoff.)
        const C2 p0(halo_base[c][0](hr), halo_base[c][1](hr));
        const Mat2c dT = f.man->transition_jac(f.refch[co], f.refch[c], p0);
        for (int colco = 0; colco < Wc; ++colco) {
          const int k = colco / (2 * N);
          const bool is_im = ((colco / N) % 2) == 1;
          const int n = colco % N;
          const cd hi = os.HI(hr, n);
          if (hi == cd(0)) continue;
          const cd unit = is_im ? cd(0, 1) : cd(1, 0);
          const cd d0 = dT(0, k) * (unit * hi);
          const cd d1 = dT(1, k) * (unit * hi);
          op.Hrows[c](4 * hr + 0, co * Wc + colco) -= d0.real();
          op.Hrows[c](4 * hr + 1, co * Wc + colco) -= d0.imag();
          op.Hrows[c](4 * hr + 2, co * Wc + colco) -= d1.real();
          op.Hrows[c](4 * hr + 3, co * Wc + colco) -= d1.imag();
        }
      }
  }

  if (with_spectrum) {
    // spectrum via a direct SVD of the materialized matrix.  The normal-matrix
    // route (eig of A^T A) has a noise floor of eps * s_max^2: at production
    // grids s_max ~ 3e4 puts that floor near 2e-4, drowning the kernel values
    // and collapsing the true ~1e10 gap to O(1e2).  The direct SVD floors at
    // eps * s_max and keeps the gap intact.
    const int W = 2 * Wc;
    Mat A = Mat::Zero(op.total_rows(), W);
    A.block(0, 0, op.rows_dbar, Wc) = op.B[0];
    A.block(op.rows_dbar, Wc, op.rows_dbar, Wc) = op.B[1];
    A.block(2 * op.rows_dbar, 0, op.rows_halo, W) = op.Hrows[0];
    A.block(2 * op.rows_dbar + op.rows_halo, 0, op.rows_halo, W) = op.Hrows[1];
    Eigen::BDCSVD<Mat> svd(A, Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success)
      throw NumericsError("vertical_differential: SVD failed");
    op.svals = svd.singularValues();  // descending
    const linalg::SpectrumGap gap = kernel_gap(op.svals);
    op.kernel_dim = gap.tail_count;
    op.gap_ratio = gap.ratio;
    op.kernel = svd.matrixV().rightCols(op.kernel_dim);
  }
  return op;
}

// ---------------------------------------------------------------------------
// pointwise J action on residual vectors, D = D1 + D2 splitting

// J at the base map's oversample points / halo nodes, applied to the rows of
// a residual-space vector (the rows are chart components of T_M values).
inline Vec apply_J_residual(const VerticalOperator& op, const Vec& r) {
  const Oversample& os = *op.os;
  const SphereGrid& g = *op.f.grid;
  const int P = os.n_q * os.n_t2;
  Vec out(r.size());
  int off = 0;
  for (int c = 0; c < 2; ++c) {
    const detail::ChartEval e = detail::eval_chart(os, op.f, c);
    for (int p = 0; p < P; ++p) {
      const Mat4 J = op.js.J(op.f.refch[c], C2(e.v0(p), e.v1(p)));
      out.segment<4>(off + 4 * p) = J * r.segment<4>(off + 4 * p);
    }
    off += 4 * P;
  }
  for (int c = 0; c < 2; ++c) {
    int hr = 0;
    for (int i = g.n_r; i < g.n_r_tot; ++i)
      for (int j = 0; j < g.n_t; ++j, ++hr) {
        const Mat4 J = op.js.J(op.f.refch[c], op.f.value(c, i, j));
        out.segment<4>(off + 4 * hr) = J * r.segment<4>(off + 4 * hr);
      }
    off += 4 * g.n_halo * g.n_t;
  }
  return out;
}

struct SplitD {
  Vec D;   // D t
  Vec D1;  // complex-linear part, (D t - J D(J t))/2
  Vec D2;  // antilinear part,     (D t + J D(J t))/2
};

inline SplitD split_D(const VerticalOperator& op, const VariationField& t) {
  const MapJet jt = mapspace::jet(op.f);
  const VariationField Jt = mapspace::jtilde(jt, t, op.js);
  SplitD out;
  out.D = op.apply(t);
  const Vec DJt = op.apply(Jt);
  const Vec JDJt = apply_J_residual(op, DJt);
  out.D1 = 0.5 * (out.D - JDJt);
  out.D2 = 0.5 * (out.D + JDJt);
  return out;
}

// ---------------------------------------------------------------------------
// the antilinear part against the Nijenhuis tensor

struct D2Check {
  double rel_discrepancy = 0.0;  // |D2 t - N/4 rows| / ||t||_{L2}
  double fitted_constant = 0.0;  // c with D2 t ~ (c/4) N rows
  double d2_norm = 0.0;
  double n_norm = 0.0;
};

// Residual-space vector whose dbar rows are sqrtw * (1/4) N_J(t, d_J f)(d/dx)
// and whose halo rows are zero.
inline Vec quarter_nijenhuis_rows(const VerticalOperator& op, const VariationField& t,
                                  double h_fd = 1e-4) {
  const Oversample& os = *op.os;
  const int P = os.n_q * os.n_t2;
  Vec out = Vec::Zero(op.total_rows());
  for (int c = 0; c < 2; ++c) {
    const detail::ChartEval e = detail::eval_chart(os, op.f, c);
    const CVec t0 = os.EV * detail::flatten(t.comps[c][0]);
    const CVec t1 = os.EV * detail::flatten(t.comps[c][1]);
    for (int p = 0; p < P; ++p) {
      const C2 v(e.v0(p), e.v1(p));
      const Mat4 J = op.js.J(op.f.refch[c], v);
      const Vec4 X = c2r(C2(e.x0(p), e.x1(p))), Y = c2r(C2(e.y0(p), e.y1(p)));
      const Vec4 djf = 0.5 * (X - J * Y);  // (1,0)-part of df on d/dx
      const Vec4 a = c2r(C2(t0(p), t1(p)));
      const Vec4 n4 =
          ambient::nijenhuis_const(op.js, op.f.refch[c], v, a, djf, h_fd);
      out.segment<4>(c * 4 * P + 4 * p) = 0.25 * os.sqrtw(p) * n4;
    }
  }
  return out;
}

inline D2Check d2_vs_nijenhuis(const VerticalOperator& op, const VariationField& t,
                               double h_fd = 1e-4) {
  const SplitD sd = split_D(op, t);
  const Vec nrows = quarter_nijenhuis_rows(op, t, h_fd);
  // compare on the dbar blocks only (the tensor identity has no halo content)
  const int nd = 2 * op.rows_dbar;
  const Vec d2 = sd.D2.head(nd), nn = nrows.head(nd);
  D2Check out;
  out.d2_norm = d2.norm();
  out.n_norm = nn.norm();
  const double tn = mapspace::l2_norm(mapspace::jet(op.f), t);
  out.rel_discrepancy = (d2 - nn).norm() / std::max(tn, 1e-300);
  // multiple of (1/4) N_J best matching D2 t (expected 1)
  out.fitted_constant = (nn.squaredNorm() > 0) ? d2.dot(nn) / nn.squaredNorm() : 0.0;
  return out;
}

}  // namespace surflab::holomorphy
