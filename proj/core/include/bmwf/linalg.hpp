#pragma once

#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Dense>

namespace bmwf {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

/// Wraps an angle to (-pi, pi]; -pi maps to +pi.
inline double wrap_angle(double a) {
  constexpr double kPi = std::numbers::pi;
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

inline double db_to_power(double db) { return std::pow(10.0, db / 10.0); }
inline double power_to_db(double p) { return 10.0 * std::log10(p); }

/// Real part of a^H A b for Hermitian A when a == b; general complex otherwise.
inline cplx quad_form(const CVector& a, const CMatrix& A, const CVector& b) {
  return a.dot(A * b);  // Eigen's dot conjugates the left operand.
}

}  // namespace bmwf
