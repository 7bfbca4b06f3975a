// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <numbers>
#include <stdexcept>

namespace locs::geometry {

inline constexpr double kPi = std::numbers::pi;
/// Regularizer added to the radius before computing the polar angle.
inline constexpr double kSphericalEps = 1e-8;
/// |Omega_20| at or above this is treated as gimbal lock by euler_from_matrix.
inline constexpr double kGimbalBand = 1.0 - 1e-9;

class NotARotation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Orthonormal D x D matrix with determinant +1, D in {2, 3}.
class Rotation {
 public:
  Rotation() : q_(Eigen::MatrixXd::Identity(2, 2)) {}

  /// Validates orthonormality and det = 1 within `tol`.
  static Rotation from_matrix(const Eigen::MatrixXd& q, double tol = 1e-6);
  static Rotation identity(int dim);

  const Eigen::MatrixXd& matrix() const noexcept { return q_; }
  int dim() const noexcept { return static_cast<int>(q_.rows()); }

  Rotation transpose() const { return Rotation(q_.transpose()); }
  Rotation operator*(const Rotation& other) const { return Rotation(q_ * other.q_); }
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const { return q_ * v; }

  /// Block-diagonal direct sum of `k` copies (R for k = 2, R-tilde for k = 3).
  Eigen::MatrixXd lift(int k) const;

 private:
  explicit Rotation(Eigen::MatrixXd q) : q_(std::move(q)) {}
  friend Rotation rot2d(double);
  friend Rotation rot3d(const Eigen::Vector3d&);
  Eigen::MatrixXd q_;
};

/// [[cos, -sin], [sin, cos]].
Rotation rot2d(double theta);

Eigen::Matrix3d rot_z(double theta);
Eigen::Matrix3d rot_y(double phi);
Eigen::Matrix3d rot_x(double psi);

/// Q(omega) = Qz(yaw) Qy(pitch) Qx(roll), omega = (yaw, pitch, roll).
Rotation rot3d(const Eigen::Vector3d& omega);

/// ZYX angles (yaw, pitch, roll) of a rotation matrix.
///
/// Inside the gimbal band roll is fixed to 0 and yaw absorbs the coupled
/// angle, so the result still reconstructs the matrix.
Eigen::Vector3d euler_from_matrix(const Eigen::Matrix3d& q);

/// Wraps into [-pi, pi); pi itself maps to -pi.
double wrap_angle(double a);
/// wrap_angle(a) / pi, in [-1, 1). For angles used as network features.
double normalize_angle(double a);

struct Spherical {
  double rho = 0.0;    ///< radial distance
  double theta = 0.0;  ///< azimuth, atan2(y, x)
  double phi = 0.0;    ///< polar angle from +z
};

/// rho = |u|, theta = atan2(u_y, u_x), phi = acos(clamp(u_z / (rho + 1e-8), -1, 1)).
Spherical cart_to_spherical(const Eigen::Vector3d& u);
Eigen::Vector3d spherical_to_cart(const Spherical& s);

struct Polar {
  double rho = 0.0;
  double theta = 0.0;
};
Polar cart_to_polar(const Eigen::Vector2d& u);

/// Velocity direction as an orientation proxy. 2D returns (yaw); 3D returns
/// (azimuth, polar angle, 0). A zero velocity gives the zero orientation.
Eigen::VectorXd orientation_from_velocity(const Eigen::VectorXd& u);

/// Rotation for an orientation vector: size 1 -> 2D yaw, size 3 -> 3D ZYX angles.
Rotation rotation_from_orientation(const Eigen::VectorXd& omega);
/// Inverse of rotation_from_orientation (yaw via atan2 in 2D, ZYX extraction in 3D).
Eigen::VectorXd orientation_from_rotation(const Rotation& q);

/// k-fold direct sum of a square matrix.
Eigen::MatrixXd block_rot(const Eigen::MatrixXd& q, int k);

}  // namespace locs::geometry
