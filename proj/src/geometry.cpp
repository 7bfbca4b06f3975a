// SPDX-License-Identifier: Apache-2.0
#include "locs/geometry.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <string>

namespace locs::geometry {

Rotation Rotation::from_matrix(const Eigen::MatrixXd& q, double tol) {
  if (q.rows() != q.cols() || (q.rows() != 2 && q.rows() != 3)) {
    throw NotARotation("rotation must be 2x2 or 3x3, got " + std::to_string(q.rows()) + "x" +
                       std::to_string(q.cols()));
  }
  if (!q.allFinite()) throw NotARotation("rotation has non-finite entries");
  const double ortho = (q.transpose() * q - Eigen::MatrixXd::Identity(q.rows(), q.rows()))
                           .cwiseAbs()
                           .maxCoeff();
  if (ortho > tol) throw NotARotation("matrix is not orthonormal");
  if (std::abs(q.determinant() - 1.0) > tol) throw NotARotation("matrix determinant is not +1");
  return Rotation(q);
}

Rotation Rotation::identity(int dim) {
  if (dim != 2 && dim != 3) throw NotARotation("rotation dimension must be 2 or 3");
  return Rotation(Eigen::MatrixXd::Identity(dim, dim));
}

Eigen::MatrixXd Rotation::lift(int k) const { return block_rot(q_, k); }

Rotation rot2d(double theta) {
  Eigen::MatrixXd q(2, 2);
  const double c = std::cos(theta), s = std::sin(theta);
  q << c, -s, s, c;
  return Rotation(std::move(q));
}

Eigen::Matrix3d rot_z(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix3d m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

Eigen::Matrix3d rot_y(double phi) {
  const double c = std::cos(phi), s = std::sin(phi);
  Eigen::Matrix3d m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Eigen::Matrix3d rot_x(double psi) {
  const double c = std::cos(psi), s = std::sin(psi);
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Rotation rot3d(const Eigen::Vector3d& omega) {
  return Rotation(Eigen::MatrixXd(rot_z(omega[0]) * rot_y(omega[1]) * rot_x(omega[2])));
}

Eigen::Vector3d euler_from_matrix(const Eigen::Matrix3d& q) {
  Rotation::from_matrix(q);  // validates
  const double s = std::clamp(-q(2, 0), -1.0, 1.0);
  if (std::abs(q(2, 0)) >= kGimbalBand) {
    return {std::atan2(-q(0, 1), q(1, 1)), std::asin(s), 0.0};
  }
  return {std::atan2(q(1, 0), q(0, 0)), std::asin(s), std::atan2(q(2, 1), q(2, 2))};
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * kPi;
  double w = a - two_pi * std::floor((a + kPi) / two_pi);
  if (w >= kPi) w -= two_pi;
  if (w < -kPi) w += two_pi;
  return w;
}

double normalize_angle(double a) { return wrap_angle(a) / kPi; }

Spherical cart_to_spherical(const Eigen::Vector3d& u) {
  Spherical s;
  s.rho = u.norm();
  s.theta = std::atan2(u.y(), u.x());
  s.phi = std::acos(std::clamp(u.z() / (s.rho + kSphericalEps), -1.0, 1.0));
  return s;
}

Eigen::Vector3d spherical_to_cart(const Spherical& s) {
  return {s.rho * std::sin(s.phi) * std::cos(s.theta), s.rho * std::sin(s.phi) * std::sin(s.theta),
          s.rho * std::cos(s.phi)};
}

Polar cart_to_polar(const Eigen::Vector2d& u) { return {u.norm(), std::atan2(u.y(), u.x())}; }

Eigen::VectorXd orientation_from_velocity(const Eigen::VectorXd& u) {
  if (u.size() == 2) {
    Eigen::VectorXd w(1);
    w[0] = (u[0] == 0.0 && u[1] == 0.0) ? 0.0 : std::atan2(u[1], u[0]);
    return w;
  }
  if (u.size() == 3) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(3);
    if (u.isZero(0.0)) return w;
    const Spherical s = cart_to_spherical(Eigen::Vector3d(u));
    w[0] = s.theta;
    w[1] = s.phi;
    return w;
  }
  throw std::invalid_argument("velocity must have 2 or 3 components");
}

Rotation rotation_from_orientation(const Eigen::VectorXd& omega) {
  if (omega.size() == 1) return rot2d(omega[0]);
  if (omega.size() == 3) return rot3d(Eigen::Vector3d(omega));
  throw std::invalid_argument("orientation must have 1 or 3 components");
}

Eigen::VectorXd orientation_from_rotation(const Rotation& q) {
  const Eigen::MatrixXd& m = q.matrix();
  if (q.dim() == 2) {
    Eigen::VectorXd w(1);
    w[0] = std::atan2(m(1, 0), m(0, 0));
    return w;
  }
  return euler_from_matrix(Eigen::Matrix3d(m));
}

Eigen::MatrixXd block_rot(const Eigen::MatrixXd& q, int k) {
  if (k < 1) throw std::invalid_argument("block_rot needs k >= 1");
  if (q.rows() != q.cols()) throw std::invalid_argument("block_rot needs a square matrix");
  const Eigen::Index d = q.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d * k, d * k);
  for (int b = 0; b < k; ++b) out.block(b * d, b * d, d, d) = q;
  return out;
}

}  // namespace locs::geometry
