// Target manifolds: CP^2 (three affine charts, Fubini-Study normalized so the
// line has area 1) and S^2 x S^2 (four product stereographic charts, factor
// areas 1+lambda and 1).  Provides the symplectic pairing, the standard
// complex structure, the metric, exact chart transitions with holomorphic
// Jacobians, and the homology-class metadata table.
#pragma once

#include <map>
#include <memory>
#include <string>

#include "surflab/core.hpp"

namespace surflab::ambient {

struct AmbientPoint {
  int chart = 0;
  C2 z = C2::Zero();
};

struct AmbientVector {
  AmbientPoint base;
  Vec4 comps = Vec4::Zero();
};

struct ClassInfo {
  int c1 = 0;
  int self_int = 0;
  double area = 0.0;
};

// Real 4x4 metric / symplectic matrices (layout of c2r) from the hermitian H:
// omega(u,v) = Im(u^dag H v), g(u,v) = Re(u^dag H v).
inline void hermitian_to_GW(const Mat2c& H, Mat4& G, Mat4& W) {
  // basis e_p = (comp a_p, phase alpha_p) with alpha in {1, i}
  static const int comp[4] = {0, 0, 1, 1};
  static const cd ph[4] = {cd(1, 0), cd(0, 1), cd(1, 0), cd(0, 1)};
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 4; ++q) {
      const cd val = std::conj(ph[p]) * ph[q] * H(comp[p], comp[q]);
      G(p, q) = val.real();
      W(p, q) = val.imag();
    }
}

class AmbientManifold {
 public:
  virtual ~AmbientManifold() = default;
  virtual std::string name() const = 0;
  virtual int num_charts() const = 0;
  // Exact coordinate change of a point between charts.
  virtual C2 transition(int from, int to, const C2& z) const = 0;
  // Holomorphic 2x2 Jacobian of that coordinate change.
  virtual Mat2c transition_jac(int from, int to, const C2& z) const = 0;
  // Hermitian matrix H of the Kaehler structure in chart coordinates:
  // omega(u,v) = Im(u^dag H v), g(u,v) = Re(u^dag H v).
  virtual Mat2c metric_H(int chart, const C2& z) const = 0;
  virtual const std::map<std::string, ClassInfo>& class_table() const = 0;

  // Real 4x4 metric / symplectic matrices in the layout of c2r().
  void GW_at(int chart, const C2& z, Mat4& G, Mat4& W) const {
    hermitian_to_GW(metric_H(chart, z), G, W);
  }

  double omega(const AmbientPoint& p, const AmbientVector& u, const AmbientVector& v) const {
    if (u.base.chart != p.chart || v.base.chart != p.chart)
      throw InvalidInput("omega: vectors not based at the given point/chart");
    Mat4 G, W;
    GW_at(p.chart, p.z, G, W);
    return u.comps.dot(W * v.comps);
  }

  double metric_g(const AmbientPoint& p, const AmbientVector& u, const AmbientVector& v) const {
    Mat4 G, W;
    GW_at(p.chart, p.z, G, W);
    return u.comps.dot(G * v.comps);
  }

  // The integrable structure is multiplication by i in every chart.
  AmbientVector j_apply(const AmbientPoint& p, const AmbientVector& u) const {
    AmbientVector out;
    out.base = p;
    out.comps = mult_by_i_mat() * u.comps;
    return out;
  }

  // Real 4x4 transition Jacobian (transports real tangent components).
  Mat4 transition_jac_real(int from, int to, const C2& z) const {
    return real_from_cplx(transition_jac(from, to, z));
  }

  const ClassInfo& class_info(const std::string& cls) const {
    auto it = class_table().find(cls);
    if (it == class_table().end()) throw InvalidInput("unknown homology class: " + cls);
    return it->second;
  }
};

// ---------------------------------------------------------------------------
// CP^2: chart k has coordinates (Z_{i0}/Z_k, Z_{i1}/Z_k), {i0<i1} = {0,1,2}\{k}.
class CP2 final : public AmbientManifold {
 public:
  std::string name() const override { return "CP2"; }
  int num_charts() const override { return 3; }

  static Eigen::Vector3cd to_homog(int k, const C2& z) {
    Eigen::Vector3cd Z;
    int idx[2], m = 0;
    for (int i = 0; i < 3; ++i)
      if (i != k) idx[m++] = i;
    Z(k) = 1.0;
    Z(idx[0]) = z(0);
    Z(idx[1]) = z(1);
    return Z;
  }
  static C2 from_homog(int k, const Eigen::Vector3cd& Z) {
    int idx[2], m = 0;
    for (int i = 0; i < 3; ++i)
      if (i != k) idx[m++] = i;
    return C2(Z(idx[0]) / Z(k), Z(idx[1]) / Z(k));
  }

  C2 transition(int from, int to, const C2& z) const override {
    return from_homog(to, to_homog(from, z));
  }

  Mat2c transition_jac(int from, int to, const C2& z) const override {
    // Target coordinate i is N_i(p)/D(p) with N_i, D in {1, p0, p1}:
    // slot -1 encodes the constant 1, slots 0/1 the source coordinates.
    const Eigen::Vector3cd Z = to_homog(from, z);
    int slot_of[3];  // homogeneous index -> source slot
    for (int i = 0, m = 0; i < 3; ++i)
      slot_of[i] = (i == from) ? -1 : m++;
    int idx[2], m = 0;
    for (int i = 0; i < 3; ++i)
      if (i != to) idx[m++] = i;
    const int den_slot = slot_of[to];
    const cd den = Z(to);
    Mat2c J = Mat2c::Zero();
    for (int i = 0; i < 2; ++i) {
      const int num_slot = slot_of[idx[i]];
      const cd num = Z(idx[i]);
      // d(num/den) = (dnum * den - num * dden) / den^2
      for (int s = 0; s < 2; ++s) {
        const cd dnum = (num_slot == s) ? cd(1, 0) : cd(0, 0);
        const cd dden = (den_slot == s) ? cd(1, 0) : cd(0, 0);
        J(i, s) = (dnum * den - num * dden) / (den * den);
      }
    }
    return J;
  }

  Mat2c metric_H(int /*chart*/, const C2& z) const override {
    // Index order matters globally: with the pairing u^dagger H v, the matrix
    // must pull back through chart transitions as M^dagger H M, which holds
    // for the transposed Hessian (off-diagonal -z_i conj(z_j)), not for the
    // Hessian itself.  Verified by the cross-chart congruence test; the two
    // choices agree on the diagonal and at the chart origin.
    const double a1 = std::norm(z(0)), a2 = std::norm(z(1));
    const double h = 1.0 + a1 + a2;
    Mat2c H;
    H(0, 0) = (h - a1);
    H(0, 1) = -z(0) * std::conj(z(1));
    H(1, 0) = -z(1) * std::conj(z(0));
    H(1, 1) = (h - a2);
    return H / (kPi * h * h);
  }

  const std::map<std::string, ClassInfo>& class_table() const override {
    static const std::map<std::string, ClassInfo> t = {
        {"L", {3, 1, 1.0}},    // the line
        {"2L", {6, 4, 2.0}},   // the conic class
        {"3L", {9, 9, 3.0}},   // the cubic class (defect 2 for genus-0 maps)
    };
    return t;
  }
};

// ---------------------------------------------------------------------------
// S^2 x S^2 with form (1+lambda) tau (+) tau, chart id = k1 + 2*k2 where k_i
// is the stereographic chart of factor i; both factor transitions are z -> 1/z.
class S2xS2 final : public AmbientManifold {
 public:
  explicit S2xS2(double lambda_area = 0.0) : lambda_(lambda_area) {
    if (lambda_ < 0) throw InvalidInput("S2xS2: lambda must be >= 0");
  }
  double lambda_area() const { return lambda_; }

  std::string name() const override { return "S2xS2"; }
  int num_charts() const override { return 4; }

  static int chart_id(int k1, int k2) { return k1 + 2 * k2; }
  static int factor1(int chart) { return chart & 1; }
  static int factor2(int chart) { return (chart >> 1) & 1; }

  C2 transition(int from, int to, const C2& z) const override {
    C2 out = z;
    if (factor1(from) != factor1(to)) out(0) = 1.0 / z(0);
    if (factor2(from) != factor2(to)) out(1) = 1.0 / z(1);
    return out;
  }

  Mat2c transition_jac(int from, int to, const C2& z) const override {
    Mat2c J = Mat2c::Zero();
    J(0, 0) = (factor1(from) != factor1(to)) ? -1.0 / (z(0) * z(0)) : cd(1, 0);
    J(1, 1) = (factor2(from) != factor2(to)) ? -1.0 / (z(1) * z(1)) : cd(1, 0);
    return J;
  }

  Mat2c metric_H(int /*chart*/, const C2& z) const override {
    const double h1 = 1.0 + std::norm(z(0));
    const double h2 = 1.0 + std::norm(z(1));
    Mat2c H = Mat2c::Zero();
    H(0, 0) = (1.0 + lambda_) / (kPi * h1 * h1);
    H(1, 1) = 1.0 / (kPi * h2 * h2);
    return H;
  }

  const std::map<std::string, ClassInfo>& class_table() const override {
    if (table_.empty()) {
      table_["S2xPT"] = {2, 0, 1.0 + lambda_};    // [S^2 x pt] = (1,0)
      table_["PTxS2"] = {2, 0, 1.0};              // [pt x S^2] = (0,1)
      table_["DIAG"] = {4, 2, 2.0 + lambda_};     // (1,1)
      table_["ANTIDIAG"] = {0, -2, lambda_};      // (1,-1)
    }
    return table_;
  }

 private:
  double lambda_;
  mutable std::map<std::string, ClassInfo> table_;
};

inline std::unique_ptr<AmbientManifold> make_manifold(const std::string& name,
                                                      double lambda_area = 0.0) {
  if (name == "CP2") return std::make_unique<CP2>();
  if (name == "S2xS2") return std::make_unique<S2xS2>(lambda_area);
  throw ConfigError("unknown manifold: " + name);
}

}  // namespace surflab::ambient
