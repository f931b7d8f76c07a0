#pragma once

#include <cstdint>
#include <memory>
#include <unordered_set>
#include <vector>

#include "ums/core/stereo_rig.hpp"
#include "ums/frontend/detect.hpp"
#include "ums/frontend/features.hpp"
#include "ums/frontend/keyframe.hpp"
#include "ums/frontend/klt.hpp"
#include "ums/frontend/ransac.hpp"

namespace ums {

struct TrackerOptions {
  DetectOptions detect;
  KltOptions klt;
  RansacOptions ransac;
  double epipolar_threshold = 1.5;  // px, stereo match gate
  int mono_levels = 4;              // pyramid depth for 2D feature tracking
  int stereo_levels = 2;            // pyramid depth for 3D feature tracking
  KeyframeThresholds keyframe;
};

// Per-frame feature pipeline over a stereo pair. Existing features are
// tracked left-to-left (short pyramid for stereo features, full for 2D, with
// a full-depth retry when the short pass fails), filtered by epipolar
// consensus, topped up with fresh corners, and classified by a left-right
// match: matched features are stereo, the rest are left-only, and corners
// found only in the right image become right-only features. Feature ids are
// unique and never reused.
class UnitedTracker {
 public:
  UnitedTracker(const StereoRig& rig, const TrackerOptions& options);

  // `R_body_prev_to_curr` rotates previous-frame body coordinates into the
  // current body frame (identity for the first frame); it drives the
  // rotation-compensated parallax rule.
  StereoFrameFeatures process(double t, const Image& left, const Image& right,
                              const Rotation& R_body_prev_to_curr = Rotation());

  // Estimator feedback for the tracked-count keyframe rule: these 2D feature
  // ids now have depth.
  void mark_depth_initialized(const std::vector<std::uint64_t>& ids);

  int frame_count() const { return frame_id_; }

 private:
  struct Track {
    std::uint64_t id = 0;
    Vec2 px = Vec2::Zero();        // anchor-image position
    Vec2 right_px = Vec2::Zero();  // valid when stereo
    bool stereo = false;
    int length = 1;
  };

  void top_up_left(const ImagePyramid& left_pyr, const ImagePyramid& right_pyr);
  void top_up_right(const ImagePyramid& left_pyr, const ImagePyramid& right_pyr);
  StereoFrameFeatures build_frame(double t) const;

  StereoRig rig_;
  StereoRig reversed_rig_;  // right camera in the leading role
  TrackerOptions opt_;

  std::unique_ptr<ImagePyramid> prev_left_, prev_right_;
  std::vector<Track> left_tracks_;   // left-anchored: Stereo3D + Left2D
  std::vector<Track> right_tracks_;  // right-anchored: Right2D
  std::unordered_set<std::uint64_t> depth_initialized_;

  std::uint64_t next_id_ = 0;
  int frame_id_ = 0;
  bool has_keyframe_ = false;
  StereoFrameFeatures last_keyframe_;
  Rotation R_cam_since_kf_;
};

}  // namespace ums
