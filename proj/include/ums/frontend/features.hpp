#pragma once

#include <cstdint>
#include <vector>

#include "ums/core/rotation.hpp"

namespace ums {

// Left2D / Right2D: seen by one camera only; Stereo3D: matched across the
// pair, so its depth is observable in a single frame.
enum class FeatureKind { Left2D, Right2D, Stereo3D };

enum class KeyframeRule { None, TimeInterval, Parallax, TrackedCount };

struct KeyframeDecision {
  bool is_keyframe = false;
  KeyframeRule rule = KeyframeRule::None;
};

struct FeatureObservation {
  std::uint64_t id = 0;
  int frame_id = 0;
  FeatureKind kind = FeatureKind::Left2D;
  Vec2 left_px = Vec2::Zero();
  Vec2 right_px = Vec2::Zero();
  Vec3 bearing_left = Vec3::UnitZ();   // unit ray in the left camera frame
  Vec3 bearing_right = Vec3::UnitZ();  // unit ray in the right camera frame
  int track_length = 1;                // frames this id has been seen in

  bool has_left() const { return kind != FeatureKind::Right2D; }
  bool has_right() const { return kind != FeatureKind::Left2D; }
};

struct StereoFrameFeatures {
  int frame_id = 0;
  double t = 0.0;
  std::vector<FeatureObservation> features;
  KeyframeDecision keyframe;
  // 2D features whose depth the estimator has since filled in; feeds the
  // tracked-count keyframe rule together with the stereo count.
  int depth_initialized_2d = 0;

  int count(FeatureKind kind) const {
    int n = 0;
    for (const auto& f : features) n += f.kind == kind;
    return n;
  }
};

}  // namespace ums
