#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>

#include "physden/errors.hpp"

namespace physden {

/// Scalar-first Hamilton quaternion over any type with +, -, * and scaling
/// by double (plain scalars or per-timestep tape rows).
template <typename T>
struct QuaternionT {
  T w, x, y, z;
};

using Quaternion = QuaternionT<double>;

template <typename T>
QuaternionT<T> quat_mul(const QuaternionT<T>& a, const QuaternionT<T>& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

template <typename T>
QuaternionT<T> pure(const T& x, const T& y, const T& z, const T& zero) {
  return {zero, x, y, z};
}

/// Entries of the rotation matrix of a unit quaternion, row-major.
template <typename T>
std::array<T, 9> rotation_entries(const QuaternionT<T>& q) {
  const T xx = q.x * q.x, yy = q.y * q.y, zz = q.z * q.z;
  const T xy = q.x * q.y, xz = q.x * q.z, yz = q.y * q.z;
  const T wx = q.w * q.x, wy = q.w * q.y, wz = q.w * q.z;
  return {(yy + zz) * -2.0 + 1.0, (xy - wz) * 2.0,         (xz + wy) * 2.0,
          (xy + wz) * 2.0,         (xx + zz) * -2.0 + 1.0, (yz - wx) * 2.0,
          (xz - wy) * 2.0,         (yz + wx) * 2.0,         (xx + yy) * -2.0 + 1.0};
}

/// R(q)^T v: expresses a world-frame vector in the body frame.
template <typename T>
std::array<T, 3> rotate_to_body(const QuaternionT<T>& q, const std::array<T, 3>& v) {
  const auto r = rotation_entries(q);
  return {r[0] * v[0] + r[3] * v[1] + r[6] * v[2],
          r[1] * v[0] + r[4] * v[1] + r[7] * v[2],
          r[2] * v[0] + r[5] * v[1] + r[8] * v[2]};
}

inline double norm(const Quaternion& q) { return std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z); }

inline Quaternion normalized(const Quaternion& q) {
  const double n = norm(q);
  if (!(n > 0) || !std::isfinite(n)) throw DegenerateInputError("cannot normalize a zero-norm quaternion");
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

inline Eigen::Matrix3d quat_to_rotmat(const Quaternion& q) {
  const auto r = rotation_entries(normalized(q));
  Eigen::Matrix3d m;
  m << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
  return m;
}

/// exp of the pure quaternion (0, v/2): the rotation by angle |v| about v.
inline Quaternion rotation_increment(const Eigen::Vector3d& v) {
  const double angle = v.norm();
  if (angle < 1e-300) return {1, 0, 0, 0};
  const double s = std::sin(angle / 2) / angle;
  return {std::cos(angle / 2), v.x() * s, v.y() * s, v.z() * s};
}

}  // namespace physden
