#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "ums/core/stereo_rig.hpp"
#include "ums/core/transform.hpp"
#include "ums/frontend/features.hpp"
#include "ums/imu/preintegration.hpp"

namespace ums {

// Estimation mode of the odometry pipeline while it bootstraps itself:
// dead-reckoning on the IMU alone, stereo visual odometry, or the full
// tightly coupled estimator once vision and IMU agree on gravity and scale.
enum class TrackingMode { ImuOnly, VisualOnly, VisualInertial };

struct InitializerConfig {
  // visual_initialize
  int min_stereo_features = 20;          // per frame, before anything else runs
  double max_mean_reprojection_px = 2.0; // gate after bundle adjustment
  double pixel_sigma = 1.5;              // reprojection noise used for whitening
  double outlier_reprojection_px = 5.0;  // observations past this are dropped once

  // estimate_gyro_bias: relative rotations must span at least two axes; the
  // per-pair RMS excitation below this does not count as a spanned axis.
  // Visually estimated rotations carry noise well under a milliradian, so a
  // couple of milliradians separates real secondary-axis motion from noise.
  double rotation_span_tol_rad = 2e-3;

  // align_gravity_velocity
  double max_condition_number = 1e8;  // of the excitation-probe normal matrix
  double gravity_magnitude_tol = 0.2; // fractional bound on |g| before refinement
  double max_alignment_residual = 0.05;  // RMS of post-fit equation residuals
  double stationary_translation_m = 0.01;  // at-rest detection across the window
  double stationary_rotation_rad = 1e-2;

  // Degeneracy gates, disabled only by the forced-acceptance robustness
  // experiment that measures how badly an unchecked alignment behaves.
  bool enforce_rotation_span = true;
  bool enforce_conditioning = true;

  // loosely_coupled_ba convergence test between two consecutive solves
  double converged_translation_m = 0.1;
  double converged_rotation_rad = 0.5 * 3.14159265358979323846 / 180.0;
};

// --- visual initialization ---------------------------------------------------

struct VisualInitResult {
  // Left-camera poses T^{c0}_{ck}: the first keyframe's camera frame is the
  // working world frame of the bootstrap, so poses[0] is the identity.
  std::vector<Transform> poses;
  // Triangulated feature positions in the frame-0 camera frame, keyed by id.
  std::map<std::uint64_t, Vec3> landmarks;
  double mean_reprojection_px = 0.0;
};

// Bootstraps camera poses and structure from stereo-matched features alone:
// depth from the calibrated baseline in the first frame, later poses by
// PnP-RANSAC against the growing map, everything refined jointly by bundle
// adjustment. Throws InsufficientFeatures when any frame has fewer than
// min_stereo_features stereo matches, PnpFailure when a pose cannot be
// recovered, HighResidual when the post-adjustment mean reprojection error
// exceeds the gate.
VisualInitResult visual_initialize(const std::vector<StereoFrameFeatures>& window,
                                   const StereoRig& rig,
                                   const InitializerConfig& config = InitializerConfig());

// --- visual-inertial alignment ----------------------------------------------

// Gyroscope bias from the discrepancy between the preintegrated attitude
// increments and the relative body rotations implied by the visual chain
// (rel_rotations[k] = q^{b_k}_{b_{k+1}}, one per preintegration). On return
// the preintegrations are re-centred on the estimate. Throws TooFewPairs for
// fewer than two pairs and RankDeficient when the relative rotations span
// fewer than two axes, in which case a bias estimated against an essentially
// rotation-free chain would be trusted with no cross-axis corroboration.
Vec3 estimate_gyro_bias(const std::vector<Rotation>& rel_rotations,
                        std::vector<PreintegratedImu>& preints,
                        const InitializerConfig& config = InitializerConfig());

struct AlignmentResult {
  // Gravity expressed in the visual working frame (the frame the poses were
  // given in). |gravity| = kGravityMagnitude whenever success is true.
  Vec3 gravity = Vec3::Zero();
  std::vector<Vec3> velocities;  // per keyframe, in the same frame
  Vec3 gyro_bias = Vec3::Zero(); // linearization bias carried by the preints
  bool success = false;
  double residual_norm = 0.0;    // RMS of the post-fit equation residuals
};

// Solves the linear least squares coupling the visual pose increments to the
// preintegrated IMU terms for per-keyframe velocity and the gravity vector,
// then refines gravity on the two-dimensional tangent of the fixed-magnitude
// sphere. `poses` are the left-camera poses from visual initialization;
// T_body_camera lifts them onto the body frame. Gyro bias must already be
// applied to the preintegrations.
//
// Degenerate motion raises IllConditioned: the least-squares system is
// augmented with accelerometer-bias sensitivity columns as a pure probe
// (the bias itself is never estimated here), and when the probe's normal
// matrix has condition number above the gate, a constant accelerometer
// offset could masquerade as gravity, so any solution would be untrustworthy.
// A window that never moves is the harmless special case of that ambiguity:
// it is detected first and answered directly with zero velocities and the
// accelerometer direction as gravity.
//
// Soft failures (gravity magnitude off by more than the tolerance before
// refinement, or post-fit residuals above the threshold) return with
// success = false rather than throwing.
AlignmentResult align_gravity_velocity(const std::vector<PreintegratedImu>& preints,
                                       const std::vector<Transform>& poses,
                                       const Transform& T_body_camera,
                                       const InitializerConfig& config = InitializerConfig());

// --- loosely coupled refinement ----------------------------------------------

// Bundle state for the loose visual/inertial solve: two pose chains (camera
// poses from vision, body poses from IMU propagation) coupled only through
// the shared body-to-camera extrinsic, plus velocities, structure, and biases.
struct LooseState {
  std::vector<Transform> T_w_c;  // left-camera poses, chain anchored at kf 0
  std::vector<Transform> T_w_b;  // body poses
  std::vector<Vec3> velocities;  // world frame, one per keyframe
  Transform T_b_c;               // shared extrinsic estimate
  // Inverse depth per landmark, anchored at the first keyframe observing it.
  std::map<std::uint64_t, double> inverse_depths;
  Vec3 accel_bias = Vec3::Zero();  // held at zero during initialization
  Vec3 gyro_bias = Vec3::Zero();
};

struct LooseSolveReport {
  bool converged = false;        // pose change vs. the input below thresholds
  double max_translation_diff_m = 0.0;
  double max_rotation_diff_rad = 0.0;
  double mean_reprojection_px = 0.0;
};

// One solve of the loose objective: reprojection terms on the camera chain,
// preintegration terms on the body chain, and per-keyframe extrinsic
// consistency terms gluing the chains through T_b_c. The caller runs this
// twice; initialization is accepted when the second call reports poses within
// the convergence thresholds of the first call's result. gravity_w is the
// gravity vector in the frame the state is expressed in.
LooseSolveReport loosely_coupled_ba(LooseState& state,
                                    const std::vector<PreintegratedImu>& preints,
                                    const std::vector<StereoFrameFeatures>& window,
                                    const StereoRig& rig, const Vec3& gravity_w,
                                    const InitializerConfig& config = InitializerConfig());

// --- mode machine -------------------------------------------------------------

struct ModeEvents {
  bool visual_init_ok = false;   // a visual bootstrap is currently valid
  bool alignment_ok = false;     // alignment + loose refinement accepted
  bool total_tracking_loss = false;
};

// Mode transitions: tracking loss always falls back to dead reckoning and
// forces a fresh bootstrap; a valid visual bootstrap lifts dead reckoning to
// visual odometry; a successful alignment lifts visual odometry to the full
// estimator. The IMU-only mode never jumps straight to visual-inertial — an
// alignment can only be accepted on top of a standing visual bootstrap.
TrackingMode step_mode(TrackingMode current, const ModeEvents& events);

const char* to_string(TrackingMode mode);

}  // namespace ums
