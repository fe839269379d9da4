// The domain sphere S^2 = CP^1 in two overlapping stereographic disk charts
// (transition w = 1/z), with spectral representation of fields:
//   * radii: Gauss-Legendre on [0,1] (quadrature-exact on the owned
//     hemisphere) plus halo rings on [1, 1+delta] carrying zero quadrature
//     weight, used for overlap interpolation and consistency constraints;
//   * angles: equispaced Fourier with the natural single-sided Nyquist mode;
//   * radial differentiation/interpolation per angular mode on the symmetric
//     doubled stencil with parity (-1)^m (a disk field's mode-m radial part
//     is even/odd under r -> -r), which removes spurious 1/z-type discrete
//     modes at the chart centers.
// Also provides the Moebius vector-field generators of PSL(2,C).
#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "surflab/core.hpp"
#include "surflab/linalg.hpp"

namespace surflab::domain {

// Barycentric Lagrange machinery in long double (entry roundoff in the
// differentiation matrix otherwise exceeds the pinned derivative tolerances).
namespace detail {

inline std::vector<long double> bary_weights(const std::vector<long double>& nodes) {
  const int n = static_cast<int>(nodes.size());
  std::vector<long double> bw(n, 1.0L);
  for (int i = 0; i < n; ++i) {
    long double prod = 1.0L;
    for (int j = 0; j < n; ++j)
      if (j != i) prod *= (nodes[i] - nodes[j]);
    bw[i] = 1.0L / prod;
  }
  return bw;
}

inline Mat diff_matrix(const std::vector<long double>& nodes) {
  const int n = static_cast<int>(nodes.size());
  const auto bw = bary_weights(nodes);
  Mat D(n, n);
  for (int i = 0; i < n; ++i) {
    long double rowsum = 0.0L;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const long double v = (bw[j] / bw[i]) / (nodes[i] - nodes[j]);
      D(i, j) = static_cast<double>(v);
      rowsum += v;
    }
    D(i, i) = static_cast<double>(-rowsum);
  }
  return D;
}

inline Vec lagrange_eval_weights(const std::vector<long double>& nodes, double x) {
  const int n = static_cast<int>(nodes.size());
  Vec out = Vec::Zero(n);
  for (int i = 0; i < n; ++i)
    if (std::abs(static_cast<double>(nodes[i]) - x) < 1e-14) {
      out(i) = 1.0;
      return out;
    }
  const auto bw = bary_weights(nodes);
  long double total = 0.0L;
  std::vector<long double> t(n);
  for (int i = 0; i < n; ++i) {
    t[i] = bw[i] / (static_cast<long double>(x) - nodes[i]);
    total += t[i];
  }
  for (int i = 0; i < n; ++i) out(i) = static_cast<double>(t[i] / total);
  return out;
}

}  // namespace detail

class SphereGrid {
 public:
  SphereGrid(int n_radial, int n_angular, double delta = 0.1, int n_halo = 3)
      : n_r(n_radial), n_t(n_angular), n_halo(n_halo), delta(delta) {
    if (n_r < 8 || n_t < 16) throw ConfigError("build_grid: need n_radial >= 8, n_angular >= 16");
    if (!(delta > 0.0 && delta < 0.2)) throw ConfigError("build_grid: need 0 < delta < 0.2");
    if (n_t % 2 != 0) throw ConfigError("build_grid: n_angular must be even");
    if (n_halo < 2) throw ConfigError("build_grid: need n_halo >= 2");
    n_r_tot = n_r + n_halo;

    Vec xr, wr_in;
    linalg::gauss_legendre_ab(n_r, 0.0, 1.0, xr, wr_in);
    Vec xh, wh;
    linalg::gauss_legendre_ab(n_halo, 1.0, 1.0 + delta, xh, wh);
    r.resize(n_r_tot);
    wr.resize(n_r_tot);
    blend.resize(n_r_tot);
    for (int i = 0; i < n_r; ++i) {
      r(i) = xr(i);
      wr(i) = wr_in(i);
      blend(i) = 1.0;
    }
    for (int i = 0; i < n_halo; ++i) {
      r(n_r + i) = xh(i);
      wr(n_r + i) = 0.0;  // halo: interpolation support only
      blend(n_r + i) = 0.0;
    }

    th.resize(n_t);
    for (int j = 0; j < n_t; ++j) th(j) = 2.0 * kPi * j / n_t;
    wt = 2.0 * kPi / n_t;

    Z.resize(n_r_tot, n_t);
    quadw.resize(n_r_tot, n_t);
    for (int i = 0; i < n_r_tot; ++i)
      for (int j = 0; j < n_t; ++j) {
        Z(i, j) = r(i) * cd(std::cos(th(j)), std::sin(th(j)));
        quadw(i, j) = wr(i) * r(i) * wt;
      }

    // symmetric radial stencil and parity-folded differentiation matrices
    sym_nodes.resize(2 * n_r_tot);
    for (int i = 0; i < n_r_tot; ++i) {
      sym_nodes[i] = -static_cast<long double>(r(n_r_tot - 1 - i));
      sym_nodes[n_r_tot + i] = static_cast<long double>(r(i));
    }
    const Mat Dfull = detail::diff_matrix(sym_nodes);
    const int n = n_r_tot;
    Mat Dpos = Dfull.block(n, n, n, n);
    Mat Dneg(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) Dneg(i, j) = Dfull(n + i, n - 1 - j);
    D_even = Dpos + Dneg;
    D_odd = Dpos - Dneg;

    // Fourier bookkeeping: natural fftfreq order, Nyquist kept as mode -n_t/2
    kvals.resize(n_t);
    ik.resize(n_t);
    even_mode.resize(n_t);
    for (int j = 0; j < n_t; ++j) {
      const int k = (j <= n_t / 2 - 1) ? j : j - n_t;
      kvals[j] = k;
      ik(j) = cd(0.0, static_cast<double>(k));
      even_mode[j] = ((k % 2) == 0);
    }
    DFT.resize(n_t, n_t);
    Synth.resize(n_t, n_t);
    for (int j = 0; j < n_t; ++j)
      for (int m = 0; m < n_t; ++m) {
        const double a = kvals[m] * th(j);
        DFT(j, m) = cd(std::cos(a), -std::sin(a)) / static_cast<double>(n_t);
        Synth(m, j) = cd(std::cos(a), std::sin(a));
      }
  }

  // mode transform along the angular index: Vhat = V * DFT
  CMat to_modes(const CMat& V) const { return V * DFT; }
  CMat from_modes(const CMat& Vm) const { return Vm * Synth; }

  // radial derivative of mode data with per-mode parity
  CMat dr_modes(const CMat& Vm) const {
    CMat out(n_r_tot, n_t);
    for (int m = 0; m < n_t; ++m)
      out.col(m) = (even_mode[m] ? D_even : D_odd) * Vm.col(m);
    return out;
  }

  void dx_dy(const CMat& V, CMat& Vx, CMat& Vy) const {
    const CMat Vm = to_modes(V);
    const CMat Vr = from_modes(dr_modes(Vm));
    const CMat Vt = from_modes(Vm * ik.asDiagonal());
    Vx.resize(n_r_tot, n_t);
    Vy.resize(n_r_tot, n_t);
    for (int i = 0; i < n_r_tot; ++i) {
      const double rinv = 1.0 / r(i);
      for (int j = 0; j < n_t; ++j) {
        const double c = std::cos(th(j)), s = std::sin(th(j));
        Vx(i, j) = c * Vr(i, j) - s * rinv * Vt(i, j);
        Vy(i, j) = s * Vr(i, j) + c * rinv * Vt(i, j);
      }
    }
  }

  // Interpolation weights at (r*, theta*): value = sum_{l,j} W(l,j) V(l,j).
  CMat interp_row(double r_star, double th_star) const {
    const int n = n_r_tot;
    const Vec lfull = detail::lagrange_eval_weights(sym_nodes, r_star);
    Vec le(n), lo(n);
    for (int i = 0; i < n; ++i) {
      const double lp = lfull(n + i), ln = lfull(n - 1 - i);
      le(i) = lp + ln;
      lo(i) = lp - ln;
    }
    CMat W = CMat::Zero(n, n_t);
    for (int m = 0; m < n_t; ++m) {
      const Vec& lr = even_mode[m] ? le : lo;
      for (int j = 0; j < n_t; ++j) {
        const double a = kvals[m] * (th_star - th(j));
        const cd ph = cd(std::cos(a), std::sin(a)) / static_cast<double>(n_t);
        for (int l = 0; l < n; ++l) W(l, j) += lr(l) * ph;
      }
    }
    return W;
  }

  static cd interp_apply(const CMat& W, const CMat& V) { return (W.array() * V.array()).sum(); }

  // Quadrature over this chart's owned hemisphere of a per-node real density.
  double integrate(const Mat& F) const { return (quadw.array() * F.array()).sum(); }

  // Round-metric area density 4/(1+|z|^2)^2 at the nodes (unit-radius sphere).
  Mat rho() const {
    Mat out(n_r_tot, n_t);
    for (int i = 0; i < n_r_tot; ++i)
      for (int j = 0; j < n_t; ++j) out(i, j) = 4.0 / std::pow(1.0 + std::norm(Z(i, j)), 2);
    return out;
  }

  int n_r, n_t, n_halo;
  double delta;
  int n_r_tot;
  Vec r, wr, blend, th;
  double wt;
  CMat Z;
  Mat quadw;
  Mat D_even, D_odd;
  std::vector<int> kvals;
  CVec ik;
  std::vector<bool> even_mode;
  CMat DFT, Synth;
  std::vector<long double> sym_nodes;
};

// A complex scalar (or the dz-component of a vector field) on both charts.
using ChartScalar = std::array<CMat, 2>;

// Multiplication by i: the complex structure j of the domain.
inline ChartScalar j_domain(const ChartScalar& v) {
  return {cd(0, 1) * v[0], cd(0, 1) * v[1]};
}

struct MobiusGenerator {
  int index = 0;          // 1..6
  ChartScalar field;      // dz-component per chart
};

// Generators p(z) d/dz, p in {1, i, z, iz, z^2, iz^2}; in the w = 1/z chart
// the component is -w^2 p(1/w), polynomial again.
inline std::vector<MobiusGenerator> mobius_generators(const SphereGrid& g) {
  std::vector<MobiusGenerator> out;
  const CMat& Z = g.Z;
  const CMat one = CMat::Constant(g.n_r_tot, g.n_t, cd(1, 0));
  const std::array<CMat, 3> mono0 = {one, Z, Z.array().square().matrix()};
  for (int d = 0; d < 3; ++d) {
    // chart-1 component of z^d d/dz is -w^(2-d)
    const CMat c1 = -mono0[2 - d];
    for (int im = 0; im < 2; ++im) {
      const cd ph = (im == 0) ? cd(1, 0) : cd(0, 1);
      MobiusGenerator m;
      m.index = 2 * d + im + 1;
      m.field = {ph * mono0[d], ph * c1};
      out.push_back(std::move(m));
    }
  }
  return out;
}

// Per-chart Cartesian derivatives of a scalar (or of a dz-component).
inline std::pair<ChartScalar, ChartScalar> surface_derivative(const SphereGrid& g,
                                                              const ChartScalar& s) {
  ChartScalar sx, sy;
  for (int c = 0; c < 2; ++c) g.dx_dy(s[c], sx[c], sy[c]);
  return {sx, sy};
}

// Max mismatch of a scalar across the overlap (halo nodes vs the other
// chart's interpolant); `vector_weight=true` transforms as a dz-component.
inline double overlap_mismatch(const SphereGrid& g, const ChartScalar& s,
                               bool vector_weight = false) {
  double worst = 0.0;
  for (int c = 0; c < 2; ++c) {
    const int co = 1 - c;
    for (int i = g.n_r; i < g.n_r_tot; ++i)
      for (int j = 0; j < g.n_t; ++j) {
        const cd z = g.Z(i, j);
        const cd w = 1.0 / z;
        double ang = std::arg(w);
        if (ang < 0) ang += 2.0 * kPi;
        const CMat W = g.interp_row(std::abs(w), ang);
        cd other = SphereGrid::interp_apply(W, s[co]);
        if (vector_weight) other *= -(z * z) * 1.0;  // d(1/w)/dw = -z^2 pulled back
        const double diff = std::abs(s[c](i, j) - other);
        worst = std::max(worst, diff);
      }
  }
  return worst;
}

}  // namespace surflab::domain
