#include "ums/frontend/keyframe.hpp"

#include <unordered_map>

namespace ums {

KeyframeDecision select_keyframe(const StereoFrameFeatures& current,
                                 const StereoFrameFeatures& last_kf,
                                 const Rotation& R_curr_from_kf,
                                 const KeyframeThresholds& thresholds, double focal_px) {
  if (current.t - last_kf.t > thresholds.max_time_gap) {
    return {true, KeyframeRule::TimeInterval};
  }

  std::unordered_map<std::uint64_t, const FeatureObservation*> previous;
  previous.reserve(last_kf.features.size());
  for (const auto& f : last_kf.features) previous[f.id] = &f;

  double parallax_sum = 0.0;
  int parallax_count = 0;
  auto add_parallax = [&](const Vec3& bearing_kf, const Vec3& bearing_now) {
    const Vec3 rotated = R_curr_from_kf * bearing_kf;
    if (rotated.z() < 1e-6 || bearing_now.z() < 1e-6) return;
    const Vec2 predicted = rotated.head<2>() / rotated.z();
    const Vec2 observed = bearing_now.head<2>() / bearing_now.z();
    parallax_sum += focal_px * (predicted - observed).norm();
    ++parallax_count;
  };
  for (const auto& f : current.features) {
    const auto it = previous.find(f.id);
    if (it == previous.end()) continue;
    const FeatureObservation& p = *it->second;
    if (f.has_left() && p.has_left()) {
      add_parallax(p.bearing_left, f.bearing_left);
    } else if (f.has_right() && p.has_right()) {
      add_parallax(p.bearing_right, f.bearing_right);
    }
  }
  if (parallax_count > 0 &&
      parallax_sum / parallax_count > thresholds.min_parallax_px) {
    return {true, KeyframeRule::Parallax};
  }

  const int constrained = current.count(FeatureKind::Stereo3D) + current.depth_initialized_2d;
  if (constrained < thresholds.min_tracked) {
    return {true, KeyframeRule::TrackedCount};
  }
  return {false, KeyframeRule::None};
}

}  // namespace ums
