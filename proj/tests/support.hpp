#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <functional>
#include <random>

// shared numeric oracles for the test suites; independent of the library's
// own computation paths

namespace testsupport {

inline double simpson(const std::function<double(double)>& f, double a, double b, double fa,
                      double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth, int force) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(f, a, m, fa, flm, fm);
  const double right = simpson(f, m, b, fm, frm, fb);
  // force a minimum subdivision so narrow peaks cannot hide between samples
  if (depth <= 0 || (force <= 0 && std::abs(left + right - whole) <= 15.0 * tol))
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1, force - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1, force - 1);
}

/// Adaptive Simpson quadrature of f over [a, b].
inline double integrate_1d(const std::function<double(double)>& f, double a, double b,
                           double tol = 1e-12) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = simpson(f, a, b, fa, fm, fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48, 10);
}

/// Iterated adaptive Simpson over a rectangle.
inline double integrate_2d(const std::function<double(double, double)>& f, double ax, double bx,
                           double ay, double by, double tol = 1e-10) {
  return integrate_1d(
      [&](double x) {
        return integrate_1d([&](double y) { return f(x, y); }, ay, by, tol);
      },
      ax, bx, tol);
}

inline Eigen::MatrixXd random_spd(int d, std::mt19937_64& gen, double diag_boost = 0.5) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = normal(gen);
  return a * a.transpose() + diag_boost * static_cast<double>(d) * Eigen::MatrixXd::Identity(d, d);
}

inline Eigen::VectorXd random_vec(int d, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = scale * normal(gen);
  return v;
}

inline Eigen::MatrixXd random_matrix(int r, int c, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = scale * normal(gen);
  return m;
}

}  // namespace testsupport
