#pragma once

// Precision-decay curriculum: the required reach tolerance shrinks from a
// loose start value to a strict end value along a power curve.

#include <cmath>
#include <cstdint>

#include "pccl/errors.hpp"
#include "pccl/kinematics.hpp"

namespace pccl {

class DecaySchedule {
 public:
  // start > end > 0, length >= 1 epochs, slope > 0.
  DecaySchedule(double start, double end, std::int64_t length, double slope)
      : start_(start), end_(end), length_(length), slope_(slope) {
    if (!(std::isfinite(start) && std::isfinite(end) && std::isfinite(slope))) {
      throw InvalidConfig("decay schedule parameters must be finite");
    }
    if (!(end > 0.0)) throw InvalidConfig("decay schedule: end precision must be > 0");
    if (!(start > end)) throw InvalidConfig("decay schedule: start precision must exceed end");
    if (length < 1) throw InvalidConfig("decay schedule: length must be >= 1 epoch");
    if (!(slope > 0.0)) throw InvalidConfig("decay schedule: slope must be > 0");
  }

  double start() const { return start_; }
  double end() const { return end_; }
  std::int64_t length() const { return length_; }
  double slope() const { return slope_; }

  // Required precision at epoch `k`; holds at end() once the decay is over.
  double precision_at(std::int64_t k) const {
    if (k < 0) throw InvalidInput("precision_at: epoch index must be >= 0");
    if (k >= length_) return end_;
    if (k == 0) return start_;
    const double frac = static_cast<double>(length_ - k) / static_cast<double>(length_);
    return end_ + std::pow(frac, slope_) * (start_ - end_);
  }

 private:
  double start_;
  double end_;
  std::int64_t length_;
  double slope_;
};

// Target pose plus the precision it must be reached with. This is the goal
// vector the actor and critic are conditioned on.
struct AugmentedGoal {
  Pose target;
  double epsilon = 0.0;

  static constexpr std::size_t kSize = 7;

  std::array<double, kSize> flat() const {
    return {target.x, target.y, target.z, target.rx, target.ry, target.rz, epsilon};
  }
  bool operator==(const AugmentedGoal&) const = default;
};

inline AugmentedGoal augment_goal(const Pose& target, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InvalidInput("augment_goal: epsilon must be finite and > 0");
  }
  return AugmentedGoal{target, epsilon};
}

}  // namespace pccl
