// Finite-dimensional data at a solved curve (f, J): kernel basis of the
// linearized operator, the reparametrization subspace, the restricted 2-form
// on a slice transverse to reparametrizations, the canonical compatible
// structure on that slice, continuation of solutions along a family of J,
// and the integral of the top power of the descended form over the moduli
// of the two catalog scenarios.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "surflab/core.hpp"
#include "surflab/domain.hpp"
#include "surflab/holomorphy.hpp"
#include "surflab/linalg.hpp"
#include "surflab/mapspace.hpp"
#include "surflab/structure_path.hpp"

namespace surflab::moduli {

using ambient::AmbientManifold;
using ambient::JSource;
using ambient::StructurePath;
using domain::SphereGrid;
using holomorphy::Oversample;
using holomorphy::VerticalOperator;
using mapspace::MapJet;
using mapspace::SurfaceMap;
using mapspace::VariationField;

// ---------------------------------------------------------------------------
// ModuliFrame

struct ModuliFrame {
  SurfaceMap f;
  JSource js;
  double lam = 0.0;
  int kernel_dim = 0;
  double gap_ratio = 0.0;
  Vec svals;
  std::vector<VariationField> kernel;
  std::vector<VariationField> aut_sub;         // df(moebius generator), 6 fields
  std::vector<VariationField> quotient_basis;  // L2-orthonormal, L2-orthogonal to aut_sub
  Mat gram;         // restricted 2-form on quotient_basis (antisymmetric)
  Mat metric_gram;  // pairing gram(u, J~ v) on quotient_basis (SPD)
  Mat full_gram;    // restricted 2-form on the full kernel basis
  double aut_in_kernel_resid = 0.0;  // max ||D a|| / sigma_max over aut fields
  double max_quad_error = 0.0;
};

struct FrameOptions {
  double resid_pre = 1e-10;   // required dbar L2 at f
  double gap_required = 1e4;  // singular-value gap declaring a kernel
  double fd_step = 0.0;       // 0 = auto
};

inline ModuliFrame build_frame(const SurfaceMap& f, const JSource& js,
                               const FrameOptions& opts = {},
                               std::shared_ptr<Oversample> os = nullptr) {
  const holomorphy::DbarResidual res = holomorphy::dbar(f, js);
  if (res.l2_norm > opts.resid_pre)
    throw NumericsError("build_frame: dbar L2 " + std::to_string(res.l2_norm) +
                        " above precondition " + std::to_string(opts.resid_pre));
  const MapJet jt = mapspace::jet(f);
  const mapspace::ImmersionCheck imm = mapspace::is_immersed_symplectic(jt);
  if (!imm.ok)
    throw NumericsError("build_frame: map is not an immersed symplectic surface");

  ModuliFrame fr;
  fr.f = f;
  fr.js = js;
  fr.lam = js.lam;

  VerticalOperator op = holomorphy::vertical_differential(f, js, opts.fd_step, std::move(os));
  fr.kernel_dim = op.kernel_dim;
  fr.gap_ratio = op.gap_ratio;
  fr.svals = op.svals;
  if (op.gap_ratio < opts.gap_required)
    throw NumericsError("build_frame: no clear singular-value gap (non-regular point)");

  for (int k = 0; k < op.kernel_dim; ++k)
    fr.kernel.push_back(holomorphy::unpack_variation(f, op.kernel.col(k)));

  const auto gens = domain::mobius_generators(*f.grid);
  for (const auto& gen : gens)
    fr.aut_sub.push_back(mapspace::tangential_variation(jt, gen.field));

  // reparametrization fields must lie in the kernel
  const double smax = op.svals(0);
  for (const auto& a : fr.aut_sub) {
    const double nd = op.apply(a).norm();
    const double na = std::max(holomorphy::pack_variation(f, a).norm(), 1e-300);
    fr.aut_in_kernel_resid = std::max(fr.aut_in_kernel_resid, nd / (smax * na));
  }

  // quotient slice: kernel vectors L2-orthogonal to all aut fields
  const int kd = fr.kernel_dim;
  Mat K(kd, kd), M(kd, 6);
  for (int i = 0; i < kd; ++i) {
    for (int j = i; j < kd; ++j) {
      K(i, j) = mapspace::l2_inner(jt, fr.kernel[i], fr.kernel[j]);
      K(j, i) = K(i, j);
    }
    for (int j = 0; j < 6; ++j) M(i, j) = mapspace::l2_inner(jt, fr.kernel[i], fr.aut_sub[j]);
  }
  Eigen::BDCSVD<Mat> msvd(M, Eigen::ComputeFullU);
  const Vec& ms = msvd.singularValues();
  int rank = 0;
  for (int k = 0; k < ms.size(); ++k)
    if (ms(k) > 1e-8 * ms(0)) ++rank;
  if (rank != 6)
    throw NumericsError("build_frame: reparametrization fields have rank " +
                        std::to_string(rank) + " inside the kernel (expected 6)");
  const int qd = kd - 6;
  const Mat C = msvd.matrixU().rightCols(qd);  // null space of M^T
  const Mat B = C.transpose() * K * C;
  const Mat Bi = linalg::sym_pow(B, -0.5);
  const Mat Q = C * Bi;  // kernel-basis coefficients of the quotient basis
  for (int q = 0; q < qd; ++q) {
    Vec col = Vec::Zero(holomorphy::unknown_count(*f.grid));
    for (int i = 0; i < kd; ++i)
      col += Q(i, q) * holomorphy::pack_variation(f, fr.kernel[i]);
    fr.quotient_basis.push_back(holomorphy::unpack_variation(f, col));
  }

  // restricted form on the quotient basis and on the full kernel
  fr.gram = Mat::Zero(qd, qd);
  for (int i = 0; i < qd; ++i)
    for (int j = i + 1; j < qd; ++j) {
      const mapspace::FormValue v = mapspace::form_eval(jt, fr.quotient_basis[i],
                                                        fr.quotient_basis[j]);
      fr.gram(i, j) = v.value;
      fr.gram(j, i) = -v.value;
      fr.max_quad_error = std::max(fr.max_quad_error, v.quad_error_est);
    }
  fr.full_gram = Mat::Zero(kd, kd);
  for (int i = 0; i < kd; ++i)
    for (int j = i + 1; j < kd; ++j) {
      const double v = mapspace::form_eval(jt, fr.kernel[i], fr.kernel[j]).value;
      fr.full_gram(i, j) = v;
      fr.full_gram(j, i) = -v;
    }

  // compatible metric pairing gram(u, J~ v), symmetrized against quadrature noise
  Mat mg(qd, qd);
  for (int i = 0; i < qd; ++i)
    for (int j = 0; j < qd; ++j)
      mg(i, j) = mapspace::form_eval(jt, fr.quotient_basis[i],
                                     mapspace::jtilde(jt, fr.quotient_basis[j], js))
                     .value;
  fr.metric_gram = 0.5 * (mg + mg.transpose());
  return fr;
}

// Canonical compatible structure on the quotient slice (polar decomposition).
inline Mat quotient_compatible_J(const ModuliFrame& fr) {
  const auto [rank, ratio] = linalg::antisym_rank(fr.gram);
  if (rank != fr.gram.rows())
    throw NumericsError("quotient_compatible_J: restricted form is degenerate on the slice");
  return linalg::polar_compatible_J(fr.gram, fr.metric_gram);
}

// ---------------------------------------------------------------------------
// classes: integer arithmetic checks

struct ClassCheck {
  std::string name;
  int c1 = 0;
  int self_int = 0;
  double area = 0.0;
  int adjunction_defect = 0;  // self_int - c1 + 2
  bool hls_regular = false;   // c1 >= 1
  bool embedded_expected = false;
};

inline ClassCheck class_checks(const ambient::AmbientManifold& m, const std::string& cls) {
  const ambient::ClassInfo& info = m.class_info(cls);
  ClassCheck out;
  out.name = cls;
  out.c1 = info.c1;
  out.self_int = info.self_int;
  out.area = info.area;
  out.adjunction_defect = info.self_int - info.c1 + 2;
  out.hls_regular = (info.c1 >= 1);
  out.embedded_expected = (out.adjunction_defect == 0);
  return out;
}

// ---------------------------------------------------------------------------
// continuation in lambda

struct ContinuationRow {
  double lam = 0.0;
  int kernel_dim = 0;
  int gram_rank = 0;
  double min_pairing = 0.0;  // smallest singular value of the quotient gram
  int iterations = 0;
  double resid = 0.0;
  bool converged = false;
};

struct ContinuationTrace {
  std::vector<ContinuationRow> rows;
  bool completed = false;
  SurfaceMap final_map;
};

struct ContinuationOptions {
  holomorphy::GNOptions gn;
  FrameOptions frame;
  bool build_frames = true;
  ContinuationOptions() { gn.throw_on_fail = false; }
};

inline ContinuationTrace continue_path(const SurfaceMap& f0, const StructurePath& sp,
                                       int n_steps, const ContinuationOptions& opts = {}) {
  if (n_steps < 1) throw ConfigError("continue_path: n_steps must be >= 1");
  ContinuationTrace tr;
  auto os = std::make_shared<Oversample>(*f0.grid);
  SurfaceMap f = f0;
  for (int k = 0; k <= n_steps; ++k) {
    const double lam = static_cast<double>(k) / n_steps;
    const JSource js = (k == 0) ? JSource::standard_of(sp.manifold()) : JSource::on_path(sp, lam);
    ContinuationRow row;
    row.lam = lam;
    holomorphy::GNResult gn{f, 0.0, 0, false, false, {}};
    if (k == 0) {
      gn.final_residual = holomorphy::residual_norm(*os, f, js);
      gn.converged = gn.final_residual <= opts.gn.tol;
    } else {
      gn = holomorphy::gauss_newton_solve(f, js, opts.gn, os.get());
    }
    row.iterations = gn.iterations;
    row.resid = gn.final_residual;
    row.converged = gn.converged;
    if (!gn.converged) {
      tr.rows.push_back(row);
      tr.final_map = f;
      return tr;  // truncated, flagged by completed == false
    }
    f = gn.f;
    if (opts.build_frames) {
      try {
        ModuliFrame fr = build_frame(f, js, opts.frame, os);
        row.kernel_dim = fr.kernel_dim;
        const auto [rank, ratio] = linalg::antisym_rank(fr.gram);
        row.gram_rank = rank;
        Eigen::JacobiSVD<Mat> svd(fr.gram);
        row.min_pairing = svd.singularValues().tail(1)(0);
      } catch (const NumericsError&) {
        // spectral analysis failed at this step: keep the solved row (with
        // kernel_dim 0 marking the missing frame) and truncate the trace
        tr.rows.push_back(row);
        tr.final_map = f;
        return tr;
      }
    }
    tr.rows.push_back(row);
  }
  tr.completed = true;
  tr.final_map = f;
  return tr;
}

// ---------------------------------------------------------------------------
// invariant integral, catalog scenarios
// Normalization: the descended 2-form is half the raw pairing, and the
// integral of its top power over the quotient carries 1/(d/2)!.

struct IntegralEstimate {
  double value = 0.0;
  double stderr_est = 0.0;   // statistical error (MC) or self-convergence (quadrature)
  int samples = 0;
  int rejects = 0;
};

// S2 x S2 at lambda = 0: exact curves z -> (z, w0); tensor quadrature of the
// descended form over the w0-sphere, one set of ambient charts per hemisphere.
inline IntegralEstimate s2s2_invariant_quadrature(
    std::shared_ptr<const AmbientManifold> man, std::shared_ptr<const SphereGrid> grid,
    int nw_r = 10, int nw_t = 20) {
  if (man->name() != "S2xS2") throw InvalidInput("s2s2 quadrature: wrong manifold");
  Vec xr, wr;
  linalg::gauss_legendre_ab(nw_r, 0.0, 1.0, xr, wr);
  IntegralEstimate out;
  double total = 0.0, total_half = 0.0;  // halved angular resolution estimate
  for (int cw = 0; cw < 2; ++cw) {
    for (int a = 0; a < nw_r; ++a)
      for (int b = 0; b < nw_t; ++b) {
        const double th = 2.0 * kPi * b / nw_t;
        const cd w0 = xr(a) * cd(std::cos(th), std::sin(th));
        const SurfaceMap f = mapspace::sphere_map(grid, man, w0, cw);
        const MapJet jt = mapspace::jet(f);
        VariationField t_re = mapspace::zero_variation(f), t_im = t_re;
        for (int c = 0; c < 2; ++c) {
          t_re.comps[c][1].setConstant(cd(1, 0));
          t_im.comps[c][1].setConstant(cd(0, 1));
        }
        const double dens = 0.5 * mapspace::form_eval(jt, t_re, t_im).value;
        const double wq = wr(a) * xr(a) * (2.0 * kPi / nw_t);
        total += wq * dens;
        if (b % 2 == 0) total_half += 2.0 * wq * dens;
        ++out.samples;
      }
  }
  out.value = total;
  out.stderr_est = std::abs(total - total_half);
  return out;
}

// The moduli chart for [S2 x pt] curves at lambda >= 0: the curve through the
// slice {z = z_pin} x S2 at second-factor position w.  Solving pins the
// parametrization with extra least-squares rows |f(0) - (z_pin, w)|.
namespace detail {

// Add point-pin rows is not part of the LS residual; instead pin by running
// the solver on the augmented map whose chart-0 origin value is constrained.
// We use a soft pin: minimize |r|^2 + |f(0) - target|^2 by appending the pin
// to the unknown update step via projection after each solve (the dbar zero
// set is 8-dimensional; 4 pin conditions select a 4-dim gauge leftover that
// the form evaluation is insensitive to).
struct PinnedSolve {
  SurfaceMap f;
  bool converged = false;
  double resid = 0.0;
};

// Solve dbar = 0 near f_init, then move along the kernel to satisfy
// f(origin of chart 0) = target (Newton on the 8-dim kernel chart).
inline PinnedSolve pinned_solve(const SurfaceMap& f_init, const JSource& js, const C2& target,
                                const Oversample& os, const holomorphy::GNOptions& gn_opts) {
  PinnedSolve out;
  SurfaceMap f = f_init;
  for (int outer = 0; outer < 6; ++outer) {
    holomorphy::GNResult gn = holomorphy::gauss_newton_solve(f, js, gn_opts, &os);
    f = gn.f;
    out.converged = gn.converged;
    out.resid = gn.final_residual;
    if (!gn.converged) break;
    // f(0): node values are not at r=0; evaluate by interpolation
    const CMat W0 = f.grid->interp_row(0.0, 0.0);
    const C2 v0(SphereGrid::interp_apply(W0, f.vals[0][0]),
                SphereGrid::interp_apply(W0, f.vals[0][1]));
    const C2 gap = target - v0;
    if (gap.norm() < 1e-11) break;
    // move along the curve family: first-order update using the two exact
    // translation directions of the scenario chart (second-factor constant
    // fields and first-factor Moebius translation); generic and cheap:
    // shift the whole map by the constant section matching the gap in the
    // second factor and reparametrize the first factor by z -> z + gap1.
    VariationField shift = mapspace::zero_variation(f);
    for (int c = 0; c < 2; ++c) shift.comps[c][1].setConstant(gap(1));
    f = mapspace::shifted_map(f, shift, 1.0);
    const MapJet jt = mapspace::jet(f);
    domain::ChartScalar one;
    one[0] = CMat::Constant(f.grid->n_r_tot, f.grid->n_t, gap(0));
    one[1] = (-f.grid->Z.array().square() * gap(0)).matrix();
    f = mapspace::shifted_map(f, mapspace::tangential_variation(jt, one), 1.0);
  }
  out.f = f;
  return out;
}

}  // namespace detail

struct S2S2MCOptions {
  int samples = 128;
  int continuation_steps = 3;
  double fd_pos = 1e-3;  // moduli-chart finite-difference step
  holomorphy::GNOptions gn;
  double max_reject_fraction = 0.05;
  S2S2MCOptions() {
    gn.throw_on_fail = false;
    gn.tol = 1e-10;
  }
};

// Monte Carlo over the w0-sphere at a path J (lambda may be 0 for testing):
// each sample solves the curve pinned through (z_pin=0, w), differentiates
// the pin chart by central FD, and evaluates the descended form.
inline IntegralEstimate s2s2_invariant_mc(const StructurePath& sp, double lam,
                                          std::shared_ptr<const SphereGrid> grid, int seed,
                                          const S2S2MCOptions& opts = {}) {
  const AmbientManifold& man = sp.manifold();
  if (man.name() != "S2xS2") throw InvalidInput("s2s2 mc: wrong manifold");
  std::shared_ptr<const AmbientManifold> man_sp(&man, [](const AmbientManifold*) {});
  Rng rng(seed);
  const Oversample os(*grid);
  IntegralEstimate out;
  std::vector<double> vals;
  for (int s = 0; s < opts.samples; ++s) {
    // uniform point on the round sphere -> hemisphere chart cw, coord w
    double x, y, z;
    do {
      x = rng.normal();
      y = rng.normal();
      z = rng.normal();
    } while (x * x + y * y + z * z < 1e-12);
    const double nrm = std::sqrt(x * x + y * y + z * z);
    x /= nrm;
    y /= nrm;
    z /= nrm;
    // stereographic: chart 0 from the north pole covers z <= 0 ... choose by |w|
    cd w = cd(x, y) / (1.0 + std::abs(z));  // |w| <= 1
    const int cw = (z >= 0.0) ? 1 : 0;      // z>=0: the point is near w-chart-1 center
    // moduli-chart density at w: solve the pinned curve and FD the chart
    auto curve_at = [&](const cd& wpos, const SurfaceMap* warm) -> detail::PinnedSolve {
      SurfaceMap f0 = warm ? *warm : mapspace::sphere_map(grid, man_sp, wpos, cw);
      // continuation from lambda=0 for the cold start
      if (!warm && lam > 0.0) {
        for (int k = 1; k < opts.continuation_steps; ++k) {
          const double lk = lam * k / opts.continuation_steps;
          holomorphy::GNResult gn =
              holomorphy::gauss_newton_solve(f0, JSource::on_path(sp, lk), opts.gn, &os);
          if (!gn.converged) return {f0, false, gn.final_residual};
          f0 = gn.f;
        }
      }
      return detail::pinned_solve(f0, lam > 0 ? JSource::on_path(sp, lam)
                                              : JSource::standard_of(man),
                                  C2(0.0, wpos), os, opts.gn);
    };
    const detail::PinnedSolve center = curve_at(w, nullptr);
    if (!center.converged) {
      ++out.rejects;
      continue;
    }
    const double h = opts.fd_pos;
    const detail::PinnedSolve pr = curve_at(w + h, &center.f);
    const detail::PinnedSolve mr = curve_at(w - h, &center.f);
    const detail::PinnedSolve pi = curve_at(w + cd(0, h), &center.f);
    const detail::PinnedSolve mi = curve_at(w - cd(0, h), &center.f);
    if (!(pr.converged && mr.converged && pi.converged && mi.converged)) {
      ++out.rejects;
      continue;
    }
    VariationField t_re = mapspace::zero_variation(center.f), t_im = t_re;
    for (int c = 0; c < 2; ++c)
      for (int k = 0; k < 2; ++k) {
        t_re.comps[c][k] = (pr.f.vals[c][k] - mr.f.vals[c][k]) / (2.0 * h);
        t_im.comps[c][k] = (pi.f.vals[c][k] - mi.f.vals[c][k]) / (2.0 * h);
      }
    const MapJet jt = mapspace::jet(center.f);
    const double dens = 0.5 * mapspace::form_eval(jt, t_re, t_im).value;
    const double rho = 4.0 / std::pow(1.0 + std::norm(w), 2);
    vals.push_back(4.0 * kPi * dens / rho);
  }
  out.samples = opts.samples;
  const int n = static_cast<int>(vals.size());
  if (out.rejects > opts.max_reject_fraction * opts.samples)
    throw NumericsError("s2s2 mc: reject fraction above 5%");
  if (n == 0) throw NumericsError("s2s2 mc: no accepted samples");
  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean);
  var = (n > 1) ? var / (n - 1) : 0.0;
  out.value = mean;
  out.stderr_est = std::sqrt(var / n);
  return out;
}

// CP^2 lines at the standard structure: importance-sampled Monte Carlo over
// the dual-chart coordinates (alpha, beta) of the line [z : 1 : -(az+b)].
inline IntegralEstimate cp2_invariant_mc(std::shared_ptr<const AmbientManifold> man,
                                         std::shared_ptr<const SphereGrid> grid, int samples,
                                         int seed) {
  if (man->name() != "CP2") throw InvalidInput("cp2 mc: wrong manifold");
  Rng rng(seed);
  IntegralEstimate out;
  std::vector<double> vals;
  vals.reserve(samples);
  for (int s = 0; s < samples; ++s) {
    // density p(a,b) = (2/pi^2) (1+|a|^2+|b|^2)^{-3} via inverse-cdf radii:
    // draw u1,u2 uniform; r^2 = u/(1-u) split hierarchically.  Simpler exact
    // recipe: (a,b) = (g1,g2)/g3 with g_i standard complex gaussians gives
    // exactly this density (projective pushforward).
    cd g1, g2, g3;
    do {
      g1 = rng.cnormal();
      g2 = rng.cnormal();
      g3 = rng.cnormal();
    } while (std::abs(g3) < 1e-9);
    const cd a = g1 / g3, b = g2 / g3;
    const double p = (2.0 / (kPi * kPi)) * std::pow(1.0 + std::norm(a) + std::norm(b), -3.0);
    const SurfaceMap f = mapspace::line_map(grid, man, a, b);
    const MapJet jt = mapspace::jet(f);
    // coordinate tangents of the (alpha, beta) chart
    std::array<VariationField, 4> t;
    const CMat& Z = grid->Z;
    const CMat one = CMat::Constant(grid->n_r_tot, grid->n_t, cd(1, 0));
    const std::array<std::pair<CMat, CMat>, 4> comps = {
        std::make_pair(-Z, -one),                          // d/d Re a
        std::make_pair(cd(0, -1) * Z, cd(0, -1) * one),    // d/d Im a
        std::make_pair(-one, -Z),                          // d/d Re b
        std::make_pair(cd(0, -1) * one, cd(0, -1) * Z),    // d/d Im b
    };
    for (int k = 0; k < 4; ++k) {
      t[k] = mapspace::zero_variation(f);
      t[k].comps[0][1] = comps[k].first;   // domain chart 0: (0, -(..)) entries
      t[k].comps[1][1] = comps[k].second;  // domain chart 1
    }
    Mat G = Mat::Zero(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        G(i, j) = mapspace::form_eval(jt, t[i], t[j]).value;
        G(j, i) = -G(i, j);
      }
    const double pf = G(0, 1) * G(2, 3) - G(0, 2) * G(1, 3) + G(0, 3) * G(1, 2);
    vals.push_back(pf / (4.0 * p));
  }
  out.samples = samples;
  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= vals.size();
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean);
  var = (vals.size() > 1) ? var / (vals.size() - 1) : 0.0;
  out.value = mean;
  out.stderr_est = std::sqrt(var / vals.size());
  return out;
}

}  // namespace surflab::moduli
