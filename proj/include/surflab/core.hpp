// Core aliases and small utilities shared by every module.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace surflab {

using cd = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using C2 = Eigen::Vector2cd;
using Mat2c = Eigen::Matrix2cd;

inline constexpr double kPi = 3.14159265358979323846;

// Real 4-vector layout for a tangent vector with two complex chart components:
// (Re u0, Im u0, Re u1, Im u1).
inline Vec4 c2r(const C2& u) {
  return Vec4(u(0).real(), u(0).imag(), u(1).real(), u(1).imag());
}
inline C2 r2c(const Vec4& x) { return C2(cd(x(0), x(1)), cd(x(2), x(3))); }

// Real 4x4 matrix of a complex-linear 2x2 map in the layout above.
inline Mat4 real_from_cplx(const Mat2c& Jc) {
  Mat4 R;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const cd c = Jc(i, j);
      R(2 * i, 2 * j) = c.real();
      R(2 * i, 2 * j + 1) = -c.imag();
      R(2 * i + 1, 2 * j) = c.imag();
      R(2 * i + 1, 2 * j + 1) = c.real();
    }
  return R;
}

// Multiplication by i in the real layout.
inline Mat4 mult_by_i_mat() {
  Mat4 J = Mat4::Zero();
  J(1, 0) = 1;
  J(0, 1) = -1;
  J(3, 2) = 1;
  J(2, 3) = -1;
  return J;
}

// Deterministic RNG wrapper (fixed algorithm, explicit seeding).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform() { return unif_(eng_); }
  double normal() { return norm_(eng_); }
  cd cnormal() { return cd(normal(), normal()) / std::sqrt(2.0); }
  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fixed-format float printing so identical runs yield byte-identical files.
inline std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace surflab
