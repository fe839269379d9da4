// Paths of compatible almost complex structures J_lam obtained by the polar
// construction from g + lam*h, where h is a compactly supported bump multiple
// of a constant symmetric matrix expressed in one chart, plus the Nijenhuis
// tensor evaluated by central finite differences of the bracket formula.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "surflab/ambient.hpp"
#include "surflab/linalg.hpp"

namespace surflab::ambient {

// Smooth radial profile with hard truncation where the value falls below the
// double-precision rounding of the ambient metric entries: the perturbed
// metric g + lam*h is then bitwise equal to g outside the ball s < 9.5, while
// the profile itself is entire, so spectral discretizations of curves crossing
// the support converge superexponentially instead of root-exponentially (a
// classical 1/(1-s) cutoff caps the attainable solver residual far above the
// 1e-10 tolerance on practical grids).
inline double bump_profile(double s) {
  if (s >= 9.5) return 0.0;
  return std::exp(-4.0 * s);
}

struct BumpSpec {
  int chart = 0;       // chart in which S is constant
  C2 center = C2::Zero();
  double r2 = 0.5;     // squared support radius in that chart
  Mat4 S = Mat4::Zero();

  static BumpSpec random(const AmbientManifold& m, int chart, const C2& center, double r2,
                         double amplitude, std::uint64_t seed) {
    BumpSpec b;
    b.chart = chart;
    b.center = center;
    b.r2 = r2;
    Rng rng(seed);
    Mat4 A;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) A(i, j) = rng.normal();
    Mat4 sym = 0.5 * (A + A.transpose());
    // scale relative to the metric at the bump center so g + lam*h stays SPD
    Mat4 G, W;
    m.GW_at(chart, center, G, W);
    Eigen::SelfAdjointEigenSolver<Mat4> es(G);
    b.S = sym * (amplitude * es.eigenvalues().minCoeff() / sym.norm());
    return b;
  }
};

class StructurePath {
 public:
  StructurePath(const AmbientManifold* m, std::vector<BumpSpec> bumps)
      : m_(m), bumps_(std::move(bumps)) {}

  const AmbientManifold& manifold() const { return *m_; }
  bool empty() const { return bumps_.empty(); }
  const std::vector<BumpSpec>& bumps() const { return bumps_; }

  // Symmetric perturbation tensor at a point of `chart` (congruence transport
  // of the constant matrix from the bump's home chart).
  Mat4 h_tensor(int chart, const C2& z) const {
    Mat4 out = Mat4::Zero();
    for (const auto& b : bumps_) {
      if (chart == b.chart) {
        const double s = ((z - b.center).squaredNorm()) / b.r2;
        const double f = bump_profile(s);
        if (f > 0) out += f * b.S;
        continue;
      }
      // transport: h_chart(z) = f(p) * M^T S M with p the point in the home
      // chart and M the Jacobian of the transition chart -> home chart.
      C2 p;
      if (!safe_transition(chart, b.chart, z, p)) continue;  // near infinity: outside support
      const double s = ((p - b.center).squaredNorm()) / b.r2;
      const double f = bump_profile(s);
      if (f <= 0) continue;
      const Mat4 M = m_->transition_jac_real(chart, b.chart, z);
      out += f * (M.transpose() * b.S * M);
    }
    return out;
  }

  // J_lam at a point: polar_compatible_J(omega, g + lam*h); exact standard
  // structure when the perturbation vanishes.
  Mat4 J(int chart, const C2& z, double lam) const {
    if (lam == 0.0 || bumps_.empty()) return mult_by_i_mat();
    const Mat4 h = h_tensor(chart, z);
    if (h.norm() == 0.0) return mult_by_i_mat();
    Mat4 G, W;
    m_->GW_at(chart, z, G, W);
    G += lam * h;
    try {
      return linalg::polar_compatible_J(W, G);
    } catch (const NumericsError&) {
      throw NumericsError("path_J: g + lam*h not positive definite (shrink the perturbation)");
    }
  }

 private:
  bool safe_transition(int from, int to, const C2& z, C2& out) const {
    // Chart changes invert coordinates, so points near the inverted
    // coordinate's zero land near infinity of the home chart -- always
    // outside a bump's compact support.
    out = m_->transition(from, to, z);
    return out.allFinite() && out.norm() < 1e9;
  }

  const AmbientManifold* m_;
  std::vector<BumpSpec> bumps_;
};

// A source of almost complex structures: the integrable standard one
// (path == nullptr or lam == 0) or a point on a StructurePath.
struct JSource {
  const AmbientManifold* m = nullptr;
  const StructurePath* path = nullptr;
  double lam = 0.0;

  bool standard() const { return path == nullptr || lam == 0.0 || path->empty(); }

  Mat4 J(int chart, const C2& z) const {
    if (standard()) return mult_by_i_mat();
    return path->J(chart, z, lam);
  }

  static JSource standard_of(const AmbientManifold& man) { return JSource{&man, nullptr, 0.0}; }
  static JSource on_path(const StructurePath& p, double lam) {
    return JSource{&p.manifold(), &p, lam};
  }
};

// ---------------------------------------------------------------------------
// Nijenhuis tensor by the bracket formula with central finite differences.
// Fields are callables (chart, z) -> Vec4 of chart components near the point.
using VectorFieldFn = std::function<Vec4(int, const C2&)>;

namespace detail {
// Directional derivative of a Vec4-valued field along a real tangent 4-vector.
inline Vec4 dir_derivative(const VectorFieldFn& F, int chart, const C2& z, const Vec4& dir,
                           double h) {
  const C2 dz = r2c(dir);
  return (F(chart, z + h * dz) - F(chart, z - h * dz)) / (2.0 * h);
}
}  // namespace detail

// N_J(U,V) = [JU,JV] - J[JU,V] - J[U,JV] - [U,V], brackets by FD.
inline Vec4 nijenhuis(const JSource& js, int chart, const C2& z, const VectorFieldFn& U,
                      const VectorFieldFn& V, double h_fd = 1e-4) {
  if (h_fd < 1e-12) throw NumericsError("nijenhuis: FD step underflow");
  auto JU = [&](int c, const C2& q) -> Vec4 { return js.J(c, q) * U(c, q); };
  auto JV = [&](int c, const C2& q) -> Vec4 { return js.J(c, q) * V(c, q); };
  auto bracket = [&](const VectorFieldFn& A, const VectorFieldFn& B) -> Vec4 {
    const Vec4 a = A(chart, z), b = B(chart, z);
    return detail::dir_derivative(B, chart, z, a, h_fd) -
           detail::dir_derivative(A, chart, z, b, h_fd);
  };
  const Mat4 J0 = js.J(chart, z);
  const Vec4 n = bracket(JU, JV) - J0 * bracket(JU, VectorFieldFn(V)) -
                 J0 * bracket(VectorFieldFn(U), JV) - bracket(VectorFieldFn(U), VectorFieldFn(V));
  return n;
}

// Fast path for constant-extension fields (tensoriality makes this the value
// of N_J on the vectors a, b): only derivatives of the J-field survive.
inline Vec4 nijenhuis_const(const JSource& js, int chart, const C2& z, const Vec4& a,
                            const Vec4& b, double h_fd = 1e-4) {
  const Mat4 J0 = js.J(chart, z);
  const Vec4 Ja = J0 * a, Jb = J0 * b;
  auto DJ_dir = [&](const Vec4& d, const Vec4& v) -> Vec4 {
    const C2 dz = r2c(d);
    const Mat4 Jp = js.J(chart, z + h_fd * dz);
    const Mat4 Jm = js.J(chart, z - h_fd * dz);
    return ((Jp - Jm) / (2.0 * h_fd)) * v;
  };
  const Vec4 br1 = DJ_dir(Ja, b) - DJ_dir(Jb, a);   // [Ja, Jb]
  const Vec4 br2 = -DJ_dir(b, a);                   // [Ja, b]
  const Vec4 br3 = DJ_dir(a, b);                    // [a, Jb]
  return br1 - J0 * br2 - J0 * br3;
}

// Convenience wrapper taking the path and position directly.
inline Vec4 path_J_apply(const StructurePath& sp, double lam, int chart, const C2& z,
                         const Vec4& u) {
  if (lam < 0.0 || lam > 1.0) throw InvalidInput("path_J: lam must be in [0,1]");
  return sp.J(chart, z, lam) * u;
}

}  // namespace surflab::ambient
