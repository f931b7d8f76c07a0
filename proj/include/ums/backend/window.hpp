#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "ums/backend/factors.hpp"
#include "ums/core/stereo_rig.hpp"
#include "ums/frontend/features.hpp"
#include "ums/imu/preintegration.hpp"

namespace ums {

// Which feature classes contribute reprojection terms: depth-resolved stereo
// matches always do; left-camera 2D tracks join on the second track; right
// 2D tracks are pulled in only when the estimator escalates.
enum class VisualFactorKind { StereoOnly, StereoPlusLeft2D, StereoPlusBoth2D };

struct WindowConfig {
  int max_keyframes = 10;
  double beta1 = 1.0;  // weight of depth-resolved stereo terms
  double beta2 = 0.5;  // weight of one-camera 2D terms
  double pixel_sigma = 1.5;
  double outlier_px = 3.0;            // post-round-1 landmark rejection gate
  double budget_ms_per_keyframe = 30.0;  // second-round time allowance
  int max_landmarks = 200;
  int min_stereo_count = 20;          // escalation gate on the newest keyframe
  double consistent_translation_m = 0.05;
  double consistent_rotation_rad = 0.5 * 3.14159265358979323846 / 180.0;
  double promote_parallax_deg = 1.0;  // 2D tracks gain depth at this parallax
  int solver_iterations = 12;
  // Calibration prior on the body-camera extrinsic. Online refinement is only
  // observable under rotational excitation; the prior keeps the extrinsic at
  // its calibrated value whenever the data cannot pin it down.
  double extrinsic_rot_sigma_rad = 0.01;
  double extrinsic_trans_sigma_m = 0.005;
  // Physical prior on the first keyframe's IMU biases, applied until a
  // marginalization prior carries the information instead. Without an
  // absolute anchor a window tilt compensated by a constant accelerometer
  // bias is nearly cost-free (vision is invariant to rigid motion), so the
  // estimator can drift into a tilted world frame.
  double accel_bias_sigma = 0.2;  // m/s^2
  double gyro_bias_sigma = 0.02;  // rad/s
};

struct WindowLandmark {
  std::uint64_t id = 0;
  int anchor = 0;  // window index of the anchoring keyframe
  // Parameterization ray in the anchor's left camera. For stereo-anchored
  // landmarks this is the measured bearing; for promoted one-camera tracks it
  // is the ray through the triangulated point.
  Vec3 anchor_bearing = Vec3::UnitZ();
  Vec3 anchor_bearing_right = Vec3::UnitZ();  // valid when stereo_anchor
  bool stereo_anchor = false;  // anchor frame measured depth across the pair
  double inverse_depth = 0.1;
  double mean_reprojection_px = 0.0;  // post-fit, updated by optimize_window
};

// Sliding-window estimator state: body keyframe states with their feature
// sets and pairwise preintegrations, the shared body-to-camera extrinsic,
// inverse-depth landmarks, and the Gaussian prior left behind by
// marginalized keyframes. Parameter-block ids are derived from the stable
// keyframe ids so the prior stays valid as the window slides.
struct WindowState {
  std::vector<std::uint64_t> ids;  // stable keyframe ids, strictly increasing
  std::vector<KeyframeState> states;
  std::vector<StereoFrameFeatures> frames;
  std::vector<PreintegratedImu> preints;  // size() - 1 entries, consecutive
  Transform T_b_c;
  std::map<std::uint64_t, WindowLandmark> landmarks;
  std::shared_ptr<PriorFactor> prior;
  std::uint64_t next_id = 0;

  int size() const { return static_cast<int>(states.size()); }
};

// Appends a keyframe (state, features, preintegration from the previous
// keyframe — absent only for the very first) and refreshes the landmark set:
// new stereo matches are triangulated immediately, established one-camera
// tracks gain depth once they accumulate enough parallax.
void add_keyframe(WindowState& window, const StereoFrameFeatures& frame,
                  const KeyframeState& state, std::optional<PreintegratedImu> preint,
                  const StereoRig& rig, const WindowConfig& config = WindowConfig());

struct OptimizeReport {
  double round1_cost = 0.0;       // cost after the first solve
  double final_cost = 0.0;        // cost after the second solve (or round 1)
  int removed_landmarks = 0;      // rejected as outliers between rounds
  bool budget_exceeded = false;   // round 2 skipped or cut short
  double wall_time_ms = 0.0;
  double mean_reprojection_px = 0.0;
};

// Two-round windowed bundle adjustment: solve, reject landmarks whose mean
// post-fit reprojection error exceeds the gate, re-solve within the time
// budget. Gauge: the first keyframe's position and yaw are held. use_imu
// selects the full tightly coupled objective; without it only reprojection
// terms (and the prior) are solved and the first pose is held completely.
// After the solve every keyframe is re-anchored by the yaw correction that
// keeps the first keyframe's heading at its pre-solve value.
OptimizeReport optimize_window(WindowState& window, const StereoRig& rig, const Vec3& gravity_w,
                               VisualFactorKind kind, double budget_ms, bool use_imu,
                               const WindowConfig& config = WindowConfig());

struct DualEstimate {
  Transform pose_stereo_only;  // newest body pose from the stereo-only track
  Transform pose_with_left2d;  // newest body pose with left 2D terms added
  bool consistent = false;
  bool escalated = false;
};

// Runs the stereo-only and stereo-plus-left-2D solves on independent copies
// of the window, compares the newest poses, and escalates to right-2D terms
// when they disagree or the newest keyframe is starved of stereo features.
// The accepted solve (escalated if escalation fired, otherwise the left-2D
// track) is committed back into `window`. Sequential and deterministic.
DualEstimate dual_estimate(WindowState& window, const StereoRig& rig, const Vec3& gravity_w,
                           double budget_ms, bool use_imu,
                           const WindowConfig& config = WindowConfig());

// Landmark upkeep: prunes landmarks that lost their constraining
// observations, promotes one-camera tracks whose parallax cleared the gate,
// and enforces the landmark cap by score (track length over one plus mean
// reprojection error). Returns the number of landmarks dropped by the cap.
int manage_landmarks(WindowState& window, const StereoRig& rig,
                     const WindowConfig& config = WindowConfig());

// Slides the window: the oldest keyframe state and the landmarks anchored to
// it are absorbed into the Gaussian prior, surviving landmarks re-anchor to
// their next observing keyframe, and the keyframe vectors shift down. No-op
// while the window is below capacity.
void marginalize_oldest(WindowState& window, const StereoRig& rig, const Vec3& gravity_w,
                        bool use_imu, const WindowConfig& config = WindowConfig());

}  // namespace ums
