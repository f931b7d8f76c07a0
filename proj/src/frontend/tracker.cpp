#include "ums/frontend/tracker.hpp"

#include <algorithm>

#include "ums/core/error.hpp"

namespace ums {

namespace {

// Unprojection that reports success instead of throwing; the tracker drops
// pixels the camera model cannot invert (outside the valid distortion range).
bool bearing_of(const CameraIntrinsics& cam, const Vec2& px, Vec3* out) {
  try {
    *out = cam.unproject(px);
    return true;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

UnitedTracker::UnitedTracker(const StereoRig& rig, const TrackerOptions& options)
    : rig_(rig), opt_(options) {
  reversed_rig_.left = rig.right;
  reversed_rig_.right = rig.left;
  reversed_rig_.T_left_right = rig.T_left_right.inverse();
  reversed_rig_.T_body_left = rig.T_body_right();
}

void UnitedTracker::mark_depth_initialized(const std::vector<std::uint64_t>& ids) {
  depth_initialized_.insert(ids.begin(), ids.end());
}

StereoFrameFeatures UnitedTracker::process(double t, const Image& left, const Image& right,
                                           const Rotation& R_body_prev_to_curr) {
  ImagePyramid left_pyr(left, 4);
  ImagePyramid right_pyr(right, 4);

  const Rotation r_bc = rig_.T_body_left.r;
  R_cam_since_kf_ = (r_bc.inverse() * R_body_prev_to_curr * r_bc) * R_cam_since_kf_;

  if (prev_left_ != nullptr) {
    // Track left-anchored features; stereo features use the short pyramid
    // with a full-depth retry, 2D features use the full pyramid directly.
    std::vector<Vec2> prev_px(left_tracks_.size());
    for (size_t i = 0; i < left_tracks_.size(); ++i) prev_px[i] = left_tracks_[i].px;

    std::vector<Vec2> curr_px(left_tracks_.size());
    std::vector<std::uint8_t> ok(left_tracks_.size(), 0);
    std::vector<size_t> mono_idx, stereo_idx;
    for (size_t i = 0; i < left_tracks_.size(); ++i) {
      (left_tracks_[i].stereo ? stereo_idx : mono_idx).push_back(i);
    }
    auto run_group = [&](const std::vector<size_t>& group, int levels) {
      if (group.empty()) return;
      std::vector<Vec2> pts(group.size());
      for (size_t k = 0; k < group.size(); ++k) pts[k] = prev_px[group[k]];
      std::vector<Vec2> res;
      std::vector<std::uint8_t> st;
      track_features(*prev_left_, left_pyr, pts, levels, &res, &st, opt_.klt);
      for (size_t k = 0; k < group.size(); ++k) {
        curr_px[group[k]] = res[k];
        ok[group[k]] = st[k];
      }
    };
    run_group(mono_idx, opt_.mono_levels);
    run_group(stereo_idx, opt_.stereo_levels);

    std::vector<size_t> stereo_retry;
    for (size_t i : stereo_idx) {
      if (!ok[i]) stereo_retry.push_back(i);
    }
    run_group(stereo_retry, opt_.mono_levels);

    // Epipolar consensus over the survivors.
    std::vector<size_t> survivors;
    std::vector<Vec3> prev_bearings, curr_bearings;
    for (size_t i = 0; i < left_tracks_.size(); ++i) {
      if (!ok[i]) continue;
      Vec3 b0, b1;
      if (!bearing_of(rig_.left, prev_px[i], &b0) || !bearing_of(rig_.left, curr_px[i], &b1)) {
        continue;
      }
      survivors.push_back(i);
      prev_bearings.push_back(b0);
      curr_bearings.push_back(b1);
    }
    std::vector<std::uint8_t> inlier(survivors.size(), 1);
    if (survivors.size() >= 8) {
      inlier = epipolar_ransac(prev_bearings, curr_bearings, opt_.ransac);
    }

    std::vector<Track> kept;
    kept.reserve(survivors.size());
    for (size_t k = 0; k < survivors.size(); ++k) {
      if (!inlier[k]) continue;
      Track track = left_tracks_[survivors[k]];
      track.px = curr_px[survivors[k]];
      ++track.length;
      kept.push_back(track);
    }
    left_tracks_ = std::move(kept);

    // Right-anchored features follow the right stream with the full pyramid.
    if (!right_tracks_.empty()) {
      std::vector<Vec2> pts(right_tracks_.size());
      for (size_t i = 0; i < right_tracks_.size(); ++i) pts[i] = right_tracks_[i].px;
      std::vector<Vec2> res;
      std::vector<std::uint8_t> st;
      track_features(*prev_right_, right_pyr, pts, opt_.mono_levels, &res, &st, opt_.klt);
      std::vector<Track> kept_right;
      for (size_t i = 0; i < right_tracks_.size(); ++i) {
        if (!st[i]) continue;
        Track track = right_tracks_[i];
        track.px = res[i];
        ++track.length;
        kept_right.push_back(track);
      }
      right_tracks_ = std::move(kept_right);
    }
  }

  // Refresh the stereo classification of every left-anchored feature.
  if (!left_tracks_.empty()) {
    std::vector<Vec2> pts(left_tracks_.size());
    for (size_t i = 0; i < left_tracks_.size(); ++i) pts[i] = left_tracks_[i].px;
    const StereoMatchResult match =
        stereo_match(left_pyr, right_pyr, pts, rig_, opt_.klt, opt_.epipolar_threshold);
    for (size_t i = 0; i < left_tracks_.size(); ++i) {
      left_tracks_[i].stereo = match.status[i] != 0;
      if (match.status[i]) left_tracks_[i].right_px = match.right_points[i];
    }
  }

  // A right-anchored feature that now matches into the left image graduates
  // to a stereo track (same id, same age).
  if (!right_tracks_.empty()) {
    std::vector<Vec2> pts(right_tracks_.size());
    for (size_t i = 0; i < right_tracks_.size(); ++i) pts[i] = right_tracks_[i].px;
    const StereoMatchResult match = stereo_match(right_pyr, left_pyr, pts, reversed_rig_,
                                                 opt_.klt, opt_.epipolar_threshold);
    std::vector<Track> still_right;
    for (size_t i = 0; i < right_tracks_.size(); ++i) {
      if (match.status[i]) {
        Track track = right_tracks_[i];
        track.right_px = track.px;
        track.px = match.right_points[i];
        track.stereo = true;
        left_tracks_.push_back(track);
      } else {
        still_right.push_back(right_tracks_[i]);
      }
    }
    right_tracks_ = std::move(still_right);
  }

  top_up_left(left_pyr, right_pyr);
  top_up_right(left_pyr, right_pyr);

  StereoFrameFeatures frame = build_frame(t);
  if (!has_keyframe_) {
    frame.keyframe = {true, KeyframeRule::TimeInterval};
  } else {
    frame.keyframe = select_keyframe(frame, last_keyframe_, R_cam_since_kf_, opt_.keyframe,
                                     0.5 * (rig_.left.fx + rig_.left.fy));
  }
  if (frame.keyframe.is_keyframe) {
    has_keyframe_ = true;
    last_keyframe_ = frame;
    R_cam_since_kf_ = Rotation();
  }

  prev_left_ = std::make_unique<ImagePyramid>(std::move(left_pyr));
  prev_right_ = std::make_unique<ImagePyramid>(std::move(right_pyr));
  ++frame_id_;
  return frame;
}

void UnitedTracker::top_up_left(const ImagePyramid& left_pyr, const ImagePyramid& right_pyr) {
  const int have = static_cast<int>(left_tracks_.size() + right_tracks_.size());
  if (have >= opt_.detect.budget) return;

  std::vector<Vec2> existing;
  existing.reserve(left_tracks_.size());
  for (const Track& track : left_tracks_) existing.push_back(track.px);

  DetectOptions detect_opt = opt_.detect;
  detect_opt.budget = opt_.detect.budget - static_cast<int>(right_tracks_.size());
  const std::vector<Vec2> fresh =
      detect_features(left_pyr.level(0).image, existing, detect_opt);
  if (fresh.empty()) return;

  const StereoMatchResult match =
      stereo_match(left_pyr, right_pyr, fresh, rig_, opt_.klt, opt_.epipolar_threshold);
  for (size_t i = 0; i < fresh.size(); ++i) {
    Track track;
    track.id = next_id_++;
    track.px = fresh[i];
    track.stereo = match.status[i] != 0;
    if (track.stereo) track.right_px = match.right_points[i];
    left_tracks_.push_back(track);
  }
}

void UnitedTracker::top_up_right(const ImagePyramid& left_pyr, const ImagePyramid& right_pyr) {
  const int have = static_cast<int>(left_tracks_.size() + right_tracks_.size());
  if (have >= opt_.detect.budget) return;

  // Mask out right pixels that already belong to stereo or right-only tracks.
  std::vector<Vec2> existing;
  for (const Track& track : left_tracks_) {
    if (track.stereo) existing.push_back(track.right_px);
  }
  for (const Track& track : right_tracks_) existing.push_back(track.px);

  DetectOptions detect_opt = opt_.detect;
  detect_opt.budget = static_cast<int>(existing.size()) +
                      (opt_.detect.budget - have);  // room on top of the mask
  const std::vector<Vec2> fresh =
      detect_features(right_pyr.level(0).image, existing, detect_opt);
  if (fresh.empty()) return;

  // Corners that match back into the left image are already covered by the
  // left stream; only the reverse-match failures become right-only features.
  const StereoMatchResult match = stereo_match(right_pyr, left_pyr, fresh, reversed_rig_,
                                               opt_.klt, opt_.epipolar_threshold);
  for (size_t i = 0; i < fresh.size(); ++i) {
    if (match.status[i]) continue;
    Track track;
    track.id = next_id_++;
    track.px = fresh[i];
    right_tracks_.push_back(track);
  }
}

StereoFrameFeatures UnitedTracker::build_frame(double t) const {
  StereoFrameFeatures frame;
  frame.frame_id = frame_id_;
  frame.t = t;
  frame.features.reserve(left_tracks_.size() + right_tracks_.size());
  for (const Track& track : left_tracks_) {
    FeatureObservation obs;
    obs.id = track.id;
    obs.frame_id = frame_id_;
    obs.left_px = track.px;
    obs.track_length = track.length;
    Vec3 bearing;
    if (!bearing_of(rig_.left, track.px, &bearing)) continue;
    obs.bearing_left = bearing;
    if (track.stereo && bearing_of(rig_.right, track.right_px, &bearing)) {
      obs.kind = FeatureKind::Stereo3D;
      obs.right_px = track.right_px;
      obs.bearing_right = bearing;
    } else {
      obs.kind = FeatureKind::Left2D;
    }
    frame.features.push_back(obs);
  }
  for (const Track& track : right_tracks_) {
    FeatureObservation obs;
    obs.id = track.id;
    obs.frame_id = frame_id_;
    obs.kind = FeatureKind::Right2D;
    obs.right_px = track.px;
    obs.track_length = track.length;
    Vec3 bearing;
    if (!bearing_of(rig_.right, track.px, &bearing)) continue;
    obs.bearing_right = bearing;
    frame.features.push_back(obs);
  }
  for (const FeatureObservation& obs : frame.features) {
    if (obs.kind != FeatureKind::Stereo3D && depth_initialized_.count(obs.id) != 0) {
      ++frame.depth_initialized_2d;
    }
  }
  return frame;
}

}  // namespace ums
