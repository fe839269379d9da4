// Dense linear-algebra helpers: symmetric matrix functions, the polar
// construction of a compatible complex structure, Gauss-Legendre rules,
// Pfaffians and spectral-gap detection.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "surflab/core.hpp"

namespace surflab::linalg {

// Symmetric eigendecomposition-based matrix power (t = 0.5 or -0.5 here).
inline Mat sym_pow(const Mat& A, double t, double floor_eig = 0.0) {
  Eigen::SelfAdjointEigenSolver<Mat> es(A);
  if (es.info() != Eigen::Success) throw NumericsError("sym_pow: eig failed");
  Vec ew = es.eigenvalues();
  for (int i = 0; i < ew.size(); ++i) {
    if (ew(i) < floor_eig) throw NumericsError("sym_pow: matrix not positive definite");
    ew(i) = std::pow(ew(i), t);
  }
  return es.eigenvectors() * ew.asDiagonal() * es.eigenvectors().transpose();
}

// Canonical compatible complex structure from an antisymmetric pairing and an
// SPD metric on the same space: the unitary factor of the polar decomposition
// of the map A with omega(u,v) = g(Au,v).  Returns J with
//   J*J = -I,  J^T W J = W (omega invariance),  u^T W J u > 0 for u != 0.
inline Mat polar_compatible_J(const Mat& omega_mat, const Mat& g_mat) {
  const int n = static_cast<int>(omega_mat.rows());
  if (omega_mat.cols() != n || g_mat.rows() != n || g_mat.cols() != n || n % 2 != 0)
    throw InvalidInput("polar_compatible_J: need square even-dimensional matrices");
  if ((omega_mat + omega_mat.transpose()).norm() > 1e-10 * (1.0 + omega_mat.norm()))
    throw InvalidInput("polar_compatible_J: omega not antisymmetric");
  Mat isq, sq;
  try {
    isq = sym_pow(g_mat, -0.5, 0.0);
    sq = sym_pow(g_mat, 0.5, 0.0);
  } catch (const NumericsError&) {
    throw NumericsError("polar_compatible_J: metric not SPD");
  }
  // Tt is antisymmetric; the sign makes omega(.,J.) positive definite.
  const Mat Tt = -(isq * omega_mat * isq);
  const Mat M2 = -(Tt * Tt);  // symmetric positive definite iff omega nondegenerate
  Eigen::SelfAdjointEigenSolver<Mat> es(M2);
  Vec ew = es.eigenvalues();
  if (ew(0) <= 0.0) throw NumericsError("polar_compatible_J: omega degenerate");
  Vec inv_s = ew.array().rsqrt();
  const Mat M2inv_sqrt = es.eigenvectors() * inv_s.asDiagonal() * es.eigenvectors().transpose();
  return isq * (Tt * M2inv_sqrt) * sq;
}

// Gauss-Legendre nodes/weights on [-1,1], Newton iteration in long double.
inline void gauss_legendre(int n, Vec& x, Vec& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    long double t = std::cos(static_cast<long double>(kPi) * (i + 0.75L) / (n + 0.5L));
    long double p0 = 0, p1 = 0;
    for (int it = 0; it < 100; ++it) {
      p0 = 1;
      p1 = 0;
      for (int k = 0; k < n; ++k) {  // Legendre recurrence
        const long double p2 = p1;
        p1 = p0;
        p0 = ((2 * k + 1) * t * p1 - k * p2) / (k + 1);
      }
      const long double dp = n * (t * p0 - p1) / (t * t - 1);
      const long double dt = p0 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-19L) break;
    }
    p0 = 1;
    p1 = 0;
    for (int k = 0; k < n; ++k) {
      const long double p2 = p1;
      p1 = p0;
      p0 = ((2 * k + 1) * t * p1 - k * p2) / (k + 1);
    }
    const long double dp = n * (t * p0 - p1) / (t * t - 1);
    x(i) = static_cast<double>(-t);  // ascending order
    x(n - 1 - i) = static_cast<double>(t);
    const double wi = static_cast<double>(2.0L / ((1 - t * t) * dp * dp));
    w(i) = wi;
    w(n - 1 - i) = wi;
  }
}

// Gauss-Legendre on [a,b].
inline void gauss_legendre_ab(int n, double a, double b, Vec& x, Vec& w) {
  gauss_legendre(n, x, w);
  x = (0.5 * (b - a) * x.array() + 0.5 * (b + a)).matrix();
  w *= 0.5 * (b - a);
}

// Pfaffian of a small antisymmetric matrix (expansion along the first row).
inline double pfaffian(const Mat& A) {
  const int n = static_cast<int>(A.rows());
  if (n % 2 != 0) return 0.0;
  if (n == 0) return 1.0;
  if (n == 2) return A(0, 1);
  double out = 0.0;
  std::vector<int> rest(n - 1);
  for (int i = 1; i < n; ++i) rest[i - 1] = i;
  for (int k = 0; k < n - 1; ++k) {
    const int j = rest[k];
    Mat sub(n - 2, n - 2);
    std::vector<int> idx;
    for (int i = 0; i < n - 1; ++i)
      if (i != k) idx.push_back(rest[i]);
    for (int a = 0; a < n - 2; ++a)
      for (int b = 0; b < n - 2; ++b) sub(a, b) = A(idx[a], idx[b]);
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    out += sign * A(0, j) * pfaffian(sub);
  }
  return out;
}

// Largest consecutive-ratio gap in a descending positive spectrum.
// Returns {count_below_gap, ratio}: the spectrum splits into
// [0..idx) large and [idx..end) small with s[idx-1]/s[idx] = ratio maximal.
struct SpectrumGap {
  int tail_count = 0;  // number of values below the gap (e.g. kernel dim)
  double ratio = 1.0;
  int gap_index = -1;  // s[gap_index]/s[gap_index+1] is the maximal ratio
};

// floor_rel guards against exact zeros in the tail: values are read as at
// least floor_rel * s_max, so ratios inside an all-noise tail stay bounded
// and cannot beat the true kernel gap.
inline SpectrumGap largest_ratio_gap(const Vec& s_desc, double ceiling_rel = 1.0,
                                     double floor_rel = 0.0) {
  SpectrumGap g;
  const int n = static_cast<int>(s_desc.size());
  if (n < 2) return g;
  const double smax = s_desc(0);
  const double floor_abs = std::max(floor_rel * smax, 1e-300);
  for (int i = 0; i + 1 < n; ++i) {
    // only consider gaps whose lower side is already below ceiling_rel * smax
    if (s_desc(i + 1) > ceiling_rel * smax) continue;
    const double r = std::max(s_desc(i), floor_abs) / std::max(s_desc(i + 1), floor_abs);
    if (r > g.ratio) {
      g.ratio = r;
      g.gap_index = i;
      g.tail_count = n - (i + 1);
    }
  }
  return g;
}

// Rank of an antisymmetric matrix by singular-value gap (paired spectrum).
inline std::pair<int, double> antisym_rank(const Mat& G, double gap_required = 1e3) {
  Eigen::JacobiSVD<Mat> svd(G);
  Vec s = svd.singularValues();
  if (s(0) <= 0) return {0, 0.0};
  SpectrumGap g = largest_ratio_gap(s, 1.0, 1e-16);
  if (g.ratio < gap_required) return {static_cast<int>(s.size()), g.ratio};
  return {g.gap_index + 1, g.ratio};
}

}  // namespace surflab::linalg
