#pragma once

// Forward kinematics and pose arithmetic for a 6-DOF serial arm described by
// standard Denavit-Hartenberg parameters.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>

#include "pccl/errors.hpp"

namespace pccl {

inline constexpr std::size_t kNumJoints = 6;
inline constexpr double kPi = std::numbers::pi;

// Wraps an angle into (-pi, pi].
inline double wrap_angle(double angle) {
  double r = std::remainder(angle, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

struct JointVector {
  std::array<double, kNumJoints> angles{};

  double& operator[](std::size_t i) { return angles[i]; }
  double operator[](std::size_t i) const { return angles[i]; }
  bool operator==(const JointVector&) const = default;
};

// End-effector pose: position in meters, roll-pitch-yaw in radians
// (intrinsic X-Y-Z, i.e. R = Rx(rx) * Ry(ry) * Rz(rz)).
struct Pose {
  double x = 0.0, y = 0.0, z = 0.0;
  double rx = 0.0, ry = 0.0, rz = 0.0;

  std::array<double, 6> flat() const { return {x, y, z, rx, ry, rz}; }
  bool operator==(const Pose&) const = default;
};

struct DhRow {
  double a = 0.0;       // link length (m)
  double d = 0.0;       // link offset (m)
  double alpha = 0.0;   // link twist (rad)
  double theta0 = 0.0;  // joint-angle offset (rad)

  bool operator==(const DhRow&) const = default;
};

struct DhChain {
  std::array<DhRow, kNumJoints> rows{};

  // Manufacturer-published UR5e table.
  static DhChain ur5e() {
    DhChain c;
    c.rows = {{{0.0, 0.1625, kPi / 2, 0.0},
               {-0.425, 0.0, 0.0, 0.0},
               {-0.3922, 0.0, 0.0, 0.0},
               {0.0, 0.1333, kPi / 2, 0.0},
               {0.0, 0.0997, -kPi / 2, 0.0},
               {0.0, 0.0996, 0.0, 0.0}}};
    return c;
  }

  void validate() const {
    for (const auto& r : rows) {
      if (!std::isfinite(r.a) || !std::isfinite(r.d) || !std::isfinite(r.alpha) ||
          !std::isfinite(r.theta0)) {
        throw InvalidConfig("DH chain contains a non-finite entry");
      }
    }
  }

  bool operator==(const DhChain&) const = default;
};

struct JointInterval {
  double lo = -kPi;
  double hi = kPi;

  double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
  bool contains(double v) const { return v >= lo && v <= hi; }
  bool operator==(const JointInterval&) const = default;
};

struct JointLimits {
  std::array<JointInterval, kNumJoints> joints{};

  void validate() const {
    for (const auto& j : joints) {
      if (!std::isfinite(j.lo) || !std::isfinite(j.hi) || j.lo > j.hi) {
        throw InvalidConfig("joint limit interval must satisfy lo <= hi");
      }
    }
  }

  bool contains(const JointVector& q) const {
    for (std::size_t i = 0; i < kNumJoints; ++i) {
      if (!joints[i].contains(q[i])) return false;
    }
    return true;
  }

  bool operator==(const JointLimits&) const = default;
};

namespace detail {

using Mat3 = std::array<std::array<double, 3>, 3>;

inline Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 out{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
    }
  }
  return out;
}

}  // namespace detail

// Converts a rotation matrix to intrinsic X-Y-Z Euler angles. At the gimbal
// singularity ry = +-pi/2 the yaw is fixed to zero.
inline void rotation_to_rpy(const detail::Mat3& r, double& rx, double& ry, double& rz) {
  const double cy = std::hypot(r[0][0], r[0][1]);
  ry = std::atan2(r[0][2], cy);
  if (cy > 1e-12) {
    rx = std::atan2(-r[1][2], r[2][2]);
    rz = std::atan2(-r[0][1], r[0][0]);
  } else if (r[0][2] > 0.0) {
    rx = std::atan2(r[1][0], r[1][1]);
    rz = 0.0;
  } else {
    rx = std::atan2(-r[1][0], r[1][1]);
    rz = 0.0;
  }
  rx = wrap_angle(rx);
  ry = wrap_angle(ry);
  rz = wrap_angle(rz);
}

inline Pose forward_kinematics(const JointVector& joints, const DhChain& chain) {
  for (double q : joints.angles) {
    if (!std::isfinite(q)) throw InvalidInput("forward_kinematics: non-finite joint angle");
  }
  detail::Mat3 rot{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  std::array<double, 3> pos{0.0, 0.0, 0.0};

  for (std::size_t i = 0; i < kNumJoints; ++i) {
    const DhRow& row = chain.rows[i];
    const double theta = joints[i] + row.theta0;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
    const detail::Mat3 link{{{ct, -st * ca, st * sa}, {st, ct * ca, -ct * sa}, {0.0, sa, ca}}};
    const std::array<double, 3> offset{row.a * ct, row.a * st, row.d};
    for (int r = 0; r < 3; ++r) {
      pos[r] += rot[r][0] * offset[0] + rot[r][1] * offset[1] + rot[r][2] * offset[2];
    }
    rot = detail::matmul(rot, link);
  }

  Pose p{pos[0], pos[1], pos[2], 0.0, 0.0, 0.0};
  rotation_to_rpy(rot, p.rx, p.ry, p.rz);
  return p;
}

struct PoseDistance {
  double position = 0.0;     // m
  double orientation = 0.0;  // rad
  double weighted = 0.0;
};

struct DistanceWeights {
  double position = 0.5;
  double orientation = 0.5;

  void validate() const {
    if (!(position >= 0.0) || !(orientation >= 0.0) ||
        std::abs(position + orientation - 1.0) > 1e-12) {
      throw InvalidConfig("distance weights must be non-negative and sum to 1");
    }
  }

  bool operator==(const DistanceWeights&) const = default;
};

inline PoseDistance pose_distance(const Pose& a, const Pose& b, DistanceWeights w = {}) {
  w.validate();
  PoseDistance d;
  d.position = std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) +
                         (a.z - b.z) * (a.z - b.z));
  const double drx = wrap_angle(a.rx - b.rx);
  const double dry = wrap_angle(a.ry - b.ry);
  const double drz = wrap_angle(a.rz - b.rz);
  d.orientation = std::sqrt(drx * drx + dry * dry + drz * drz);
  d.weighted = w.position * d.position + w.orientation * d.orientation;
  return d;
}

// Pins joint 4 so the wrist link stays vertical, given joints 2 and 3.
inline double couple_joint4(double j2, double j3) {
  if (std::abs(kPi / 2 + j2) + j3 >= kPi) return -kPi - j2;
  return -j3 - j2;
}

}  // namespace pccl
