#include "ums/backend/window.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <string>

#include "ums/backend/marginalize.hpp"
#include "ums/core/error.hpp"
#include "ums/core/triangulate.hpp"
#include "ums/solve/solver.hpp"

namespace ums {

namespace {

// Stable parameter-block ids. Keyframe blocks derive from the keyframe's
// monotonic id so the marginalization prior stays addressed correctly as the
// window slides; landmark blocks derive from the feature id.
constexpr int kStateStride = 10;
constexpr int kLambdaBase = 1'000'000'000;
constexpr int kSharedBase = 2'000'000'000;
constexpr int kExtrinsicQId = kSharedBase + 0;
constexpr int kExtrinsicPId = kSharedBase + 1;

int checked_state_id(std::uint64_t keyframe_id, int member) {
  const std::uint64_t base = keyframe_id * kStateStride + static_cast<std::uint64_t>(member);
  if (base >= kLambdaBase) {
    raise(ErrorCode::StructureError, "keyframe id too large for the block-id scheme");
  }
  return static_cast<int>(base);
}

int q_id(std::uint64_t kf) { return checked_state_id(kf, 0); }
int p_id(std::uint64_t kf) { return checked_state_id(kf, 1); }
int v_id(std::uint64_t kf) { return checked_state_id(kf, 2); }
int ba_id(std::uint64_t kf) { return checked_state_id(kf, 3); }
int bg_id(std::uint64_t kf) { return checked_state_id(kf, 4); }

int lambda_id(std::uint64_t feature_id) {
  const std::uint64_t id = kLambdaBase + feature_id;
  if (id >= kSharedBase) {
    raise(ErrorCode::StructureError, "feature id too large for the block-id scheme");
  }
  return static_cast<int>(id);
}

ParameterBlock rotation_block(int id, const Rotation& r) {
  ParameterBlock b;
  b.id = id;
  b.kind = ManifoldKind::Rotation;
  b.value = rotation_to_vector(r);
  return b;
}

ParameterBlock vector_block(int id, const Vec3& v) {
  ParameterBlock b;
  b.id = id;
  b.kind = ManifoldKind::Euclidean;
  b.value = v;
  return b;
}

ParameterBlock depth_block(int id, double lambda) {
  ParameterBlock b;
  b.id = id;
  b.kind = ManifoldKind::InverseDepth;
  b.value = Eigen::VectorXd::Constant(1, lambda);
  return b;
}

// Zero-anchored prior on one keyframe's biases: the physical knowledge that
// IMU biases are bounded. Used until the marginalization prior takes over.
std::shared_ptr<PriorFactor> bias_prior_factor(std::uint64_t kf, const WindowConfig& config) {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(6, 6);
  jac.topLeftCorner(3, 3) = Mat3::Identity() / std::max(config.accel_bias_sigma, 1e-9);
  jac.bottomRightCorner(3, 3) = Mat3::Identity() / std::max(config.gyro_bias_sigma, 1e-9);
  return std::make_shared<PriorFactor>(
      std::vector<int>{ba_id(kf), bg_id(kf)},
      std::vector<ManifoldKind>{ManifoldKind::Euclidean, ManifoldKind::Euclidean},
      std::vector<Eigen::VectorXd>{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)}, jac,
      Eigen::VectorXd::Zero(6));
}

const FeatureObservation* find_observation(const StereoFrameFeatures& frame,
                                           std::uint64_t feature_id) {
  for (const FeatureObservation& f : frame.features)
    if (f.id == feature_id) return &f;
  return nullptr;
}

bool includes_left_2d(VisualFactorKind kind) { return kind != VisualFactorKind::StereoOnly; }
bool includes_right_2d(VisualFactorKind kind) {
  return kind == VisualFactorKind::StereoPlusBoth2D;
}

// Adds every reprojection factor the landmark contributes under the given
// feature-class selection. Returns the number of target terms added.
int add_landmark_factors(Problem& problem, const WindowState& window, const WindowLandmark& lm,
                         const StereoRig& rig, VisualFactorKind kind,
                         const WindowConfig& config) {
  const double unit = rig.left.fx / config.pixel_sigma;
  const double w1 = config.beta1 * unit;
  const double w2 = config.beta2 * unit;
  int terms = 0;

  if (lm.stereo_anchor && config.beta1 > 0.0) {
    problem.add_factor(std::make_shared<AnchorDepthFactor>(
        lambda_id(lm.id), lm.anchor_bearing, lm.anchor_bearing_right, rig.T_left_right, w1));
    ++terms;
  }

  const std::uint64_t anchor_kf = window.ids[lm.anchor];
  for (int j = 0; j < window.size(); ++j) {
    if (j == lm.anchor) continue;
    const FeatureObservation* obs = find_observation(window.frames[j], lm.id);
    if (obs == nullptr) continue;

    BearingFactor::Observation term;
    term.anchor_bearing = lm.anchor_bearing;
    double weight_left = 0.0;
    double weight_right = 0.0;
    if (obs->kind == FeatureKind::Stereo3D) {
      if (config.beta1 > 0.0) {
        term.target_left = obs->bearing_left;
        term.target_right = obs->bearing_right;
        weight_left = weight_right = w1;
      }
    } else if (obs->kind == FeatureKind::Left2D) {
      if (includes_left_2d(kind) && config.beta2 > 0.0) {
        term.target_left = obs->bearing_left;
        weight_left = w2;
      }
    } else {  // Right2D
      if (includes_right_2d(kind) && config.beta2 > 0.0) {
        term.target_right = obs->bearing_right;
        weight_right = w2;
      }
    }
    if (!term.target_left && !term.target_right) continue;

    const std::uint64_t target_kf = window.ids[j];
    problem.add_factor(std::make_shared<BearingFactor>(
        std::vector<int>{q_id(anchor_kf), p_id(anchor_kf), q_id(target_kf), p_id(target_kf),
                         kExtrinsicQId, kExtrinsicPId, lambda_id(lm.id)},
        term, rig.T_left_right, weight_left, weight_right));
    ++terms;
  }
  return terms;
}

// Assembles the windowed problem. Without IMU terms the solve is pure
// reprojection: velocity/bias blocks are left out unless the prior still
// references them, the first pose is pinned completely, and the extrinsic is
// held (it is unobservable against a free pose chain).
Problem build_problem(const WindowState& window, const StereoRig& rig, const Vec3& gravity_w,
                      VisualFactorKind kind, bool use_imu, const WindowConfig& config) {
  Problem problem;
  const int n = window.size();

  for (int k = 0; k < n; ++k) {
    const std::uint64_t kf = window.ids[k];
    ParameterBlock q = rotation_block(q_id(kf), window.states[k].q);
    ParameterBlock p = vector_block(p_id(kf), window.states[k].p);
    if (k == 0) {
      if (use_imu) {
        q.frozen_dims = {2};  // yaw of the first keyframe fixes the gauge
        p.frozen_dims = {0, 1, 2};
      } else {
        q.constant = true;  // no gravity reference: hold the full pose
        p.constant = true;
      }
    }
    problem.add_block(std::move(q));
    problem.add_block(std::move(p));
    if (use_imu) {
      problem.add_block(vector_block(v_id(kf), window.states[k].v));
      problem.add_block(vector_block(ba_id(kf), window.states[k].ba));
      problem.add_block(vector_block(bg_id(kf), window.states[k].bg));
    }
  }
  {
    ParameterBlock eq = rotation_block(kExtrinsicQId, window.T_b_c.r);
    ParameterBlock ep = vector_block(kExtrinsicPId, window.T_b_c.t);
    eq.constant = ep.constant = !use_imu;
    problem.add_block(std::move(eq));
    problem.add_block(std::move(ep));
    if (use_imu) {
      // Calibration prior: the extrinsic is free to refine under rotational
      // excitation but anchored to the calibrated value otherwise.
      Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(6, 6);
      jac.topLeftCorner(3, 3) =
          Mat3::Identity() / std::max(config.extrinsic_rot_sigma_rad, 1e-9);
      jac.bottomRightCorner(3, 3) =
          Mat3::Identity() / std::max(config.extrinsic_trans_sigma_m, 1e-9);
      problem.add_factor(std::make_shared<PriorFactor>(
          std::vector<int>{kExtrinsicQId, kExtrinsicPId},
          std::vector<ManifoldKind>{ManifoldKind::Rotation, ManifoldKind::Euclidean},
          std::vector<Eigen::VectorXd>{rotation_to_vector(rig.T_body_left.r),
                                       Eigen::VectorXd(rig.T_body_left.t)},
          jac, Eigen::VectorXd::Zero(6)));
    }
  }

  for (const auto& [id, lm] : window.landmarks) {
    problem.add_block(depth_block(lambda_id(id), lm.inverse_depth));
    add_landmark_factors(problem, window, lm, rig, kind, config);
  }

  if (use_imu) {
    for (int k = 0; k + 1 < n; ++k) {
      const std::uint64_t i = window.ids[k];
      const std::uint64_t j = window.ids[k + 1];
      problem.add_factor(std::make_shared<ImuFactor>(
          std::vector<int>{p_id(i), q_id(i), v_id(i), ba_id(i), bg_id(i), p_id(j), q_id(j),
                           v_id(j), ba_id(j), bg_id(j)},
          window.preints[k], gravity_w));
    }
    if (!window.prior && n > 0) {
      problem.add_factor(bias_prior_factor(window.ids[0], config));
    }
  }

  if (window.prior) {
    // The prior may reference blocks the mode above did not create (the
    // velocity/bias states in a pure-visual solve); add them so it stays
    // well-formed, at current state values where the id maps to a live
    // keyframe.
    const auto& ids = window.prior->block_ids();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const int id = ids[i];
      if (problem.has_block(id)) continue;
      ParameterBlock b;
      b.id = id;
      b.kind = window.prior->kinds()[i];
      b.value = window.prior->linearization_points()[i];
      if (id < kLambdaBase) {
        const std::uint64_t kf = static_cast<std::uint64_t>(id) / kStateStride;
        const int member = id % kStateStride;
        for (int k = 0; k < n; ++k) {
          if (window.ids[k] != kf) continue;
          if (member == 2) b.value = window.states[k].v;
          if (member == 3) b.value = window.states[k].ba;
          if (member == 4) b.value = window.states[k].bg;
          break;
        }
      }
      problem.add_block(std::move(b));
    }
    problem.add_factor(window.prior);
  }
  return problem;
}

void write_back(const Problem& problem, WindowState& window, bool use_imu) {
  for (int k = 0; k < window.size(); ++k) {
    const std::uint64_t kf = window.ids[k];
    window.states[k].q = rotation_from_vector(problem.block(q_id(kf)).value);
    window.states[k].p = problem.block(p_id(kf)).value;
    if (use_imu) {
      window.states[k].v = problem.block(v_id(kf)).value;
      window.states[k].ba = problem.block(ba_id(kf)).value;
      window.states[k].bg = problem.block(bg_id(kf)).value;
    }
  }
  window.T_b_c = Transform(rotation_from_vector(problem.block(kExtrinsicQId).value),
                           Vec3(problem.block(kExtrinsicPId).value));
  for (auto& [id, lm] : window.landmarks) {
    if (problem.has_block(lambda_id(id))) {
      lm.inverse_depth = problem.block(lambda_id(id)).value[0];
    }
  }
}

Transform camera_pose(const WindowState& window, int k) {
  return window.states[k].pose() * window.T_b_c;
}

double term_error_px(const CameraIntrinsics& cam, const Vec3& p_c, const Vec2& observed) {
  if (p_c.z() <= 0.0) return 1e3;
  return (cam.project(p_c) - observed).norm();
}

// Post-fit pixel statistics per landmark over the terms the given selection
// includes; also accumulates the window-wide mean.
double update_reprojection_stats(WindowState& window, const StereoRig& rig,
                                 VisualFactorKind kind) {
  const Transform T_rl = rig.T_left_right.inverse();
  double total = 0.0;
  int total_terms = 0;
  for (auto& [id, lm] : window.landmarks) {
    double sum = 0.0;
    int terms = 0;
    const Vec3 p_anchor = lm.anchor_bearing / std::max(lm.inverse_depth, 1e-12);
    const Transform T_w_ca = camera_pose(window, lm.anchor);
    const Vec3 p_w = T_w_ca * p_anchor;

    if (lm.stereo_anchor) {
      const FeatureObservation* obs = find_observation(window.frames[lm.anchor], id);
      if (obs != nullptr && obs->has_right()) {
        sum += term_error_px(rig.right, T_rl * p_anchor, obs->right_px);
        ++terms;
      }
    }
    for (int j = 0; j < window.size(); ++j) {
      if (j == lm.anchor) continue;
      const FeatureObservation* obs = find_observation(window.frames[j], id);
      if (obs == nullptr) continue;
      const bool use_left = obs->kind == FeatureKind::Stereo3D ||
                            (obs->kind == FeatureKind::Left2D && includes_left_2d(kind));
      const bool use_right = obs->kind == FeatureKind::Stereo3D ||
                             (obs->kind == FeatureKind::Right2D && includes_right_2d(kind));
      if (!use_left && !use_right) continue;
      const Vec3 p_c = camera_pose(window, j).inverse() * p_w;
      if (use_left) {
        sum += term_error_px(rig.left, p_c, obs->left_px);
        ++terms;
      }
      if (use_right) {
        sum += term_error_px(rig.right, T_rl * p_c, obs->right_px);
        ++terms;
      }
    }
    lm.mean_reprojection_px = terms > 0 ? sum / terms : 0.0;
    total += sum;
    total_terms += terms;
  }
  return total_terms > 0 ? total / total_terms : 0.0;
}

int observer_count(const WindowState& window, std::uint64_t feature_id) {
  int count = 0;
  for (const StereoFrameFeatures& frame : window.frames) {
    count += find_observation(frame, feature_id) != nullptr;
  }
  return count;
}

// Promotes one-camera tracks to inverse-depth landmarks once two window
// keyframes give them enough parallax. Right-camera tracks are triangulated
// in the right chain but parameterized on the anchor's left camera, which is
// just a choice of coordinates for the estimated point.
void promote_2d_tracks(WindowState& window, const StereoRig& rig, const WindowConfig& config) {
  const int n = window.size();
  std::set<std::uint64_t> candidates;
  for (const StereoFrameFeatures& frame : window.frames) {
    for (const FeatureObservation& f : frame.features) {
      if (f.kind != FeatureKind::Stereo3D && !window.landmarks.count(f.id)) {
        candidates.insert(f.id);
      }
    }
  }

  for (std::uint64_t id : candidates) {
    int first = -1, last = -1;
    FeatureKind kind = FeatureKind::Left2D;
    for (int k = 0; k < n; ++k) {
      const FeatureObservation* obs = find_observation(window.frames[k], id);
      if (obs == nullptr) continue;
      if (first < 0) {
        first = k;
        kind = obs->kind;
      }
      last = k;
    }
    if (first < 0 || first == last) continue;
    const FeatureObservation* obs_a = find_observation(window.frames[first], id);
    const FeatureObservation* obs_b = find_observation(window.frames[last], id);
    if (obs_a->kind != obs_b->kind) continue;  // mixed-camera track: wait

    const bool right_track = kind == FeatureKind::Right2D;
    const Transform offset = right_track ? Transform(rig.T_left_right) : Transform::identity();
    const Transform T_w_a = camera_pose(window, first) * offset;
    const Transform T_w_b = camera_pose(window, last) * offset;
    const Vec3 bearing_a = right_track ? obs_a->bearing_right : obs_a->bearing_left;
    const Vec3 bearing_b = right_track ? obs_b->bearing_right : obs_b->bearing_left;
    try {
      const Triangulation tri =
          triangulate(T_w_a, T_w_b, bearing_a, bearing_b, config.promote_parallax_deg);
      const Vec3 p_anchor_left = camera_pose(window, first).inverse() * tri.point_w;
      if (p_anchor_left.norm() < 1e-6 || p_anchor_left.z() <= 0.0) continue;
      WindowLandmark lm;
      lm.id = id;
      lm.anchor = first;
      lm.anchor_bearing = right_track ? p_anchor_left.normalized() : obs_a->bearing_left;
      lm.stereo_anchor = false;
      lm.inverse_depth = 1.0 / p_anchor_left.norm();
      window.landmarks.emplace(id, lm);
    } catch (const Error&) {
      // Below the parallax gate or behind a camera: stays a 2D track.
    }
  }
}

}  // namespace

void add_keyframe(WindowState& window, const StereoFrameFeatures& frame,
                  const KeyframeState& state, std::optional<PreintegratedImu> preint,
                  const StereoRig& rig, const WindowConfig& config) {
  if (window.size() > 0) {
    if (!preint.has_value()) {
      raise(ErrorCode::StructureError, "non-first keyframe needs a preintegration");
    }
    window.preints.push_back(std::move(*preint));
  }
  window.ids.push_back(window.next_id++);
  window.states.push_back(state);
  window.frames.push_back(frame);

  // Depth-resolved features become landmarks immediately, anchored here.
  const int k = window.size() - 1;
  for (const FeatureObservation& f : frame.features) {
    if (f.kind != FeatureKind::Stereo3D || window.landmarks.count(f.id)) continue;
    try {
      const double depth = stereo_depth(rig.T_left_right, f.bearing_left, f.bearing_right);
      WindowLandmark lm;
      lm.id = f.id;
      lm.anchor = k;
      lm.anchor_bearing = f.bearing_left;
      lm.anchor_bearing_right = f.bearing_right;
      lm.stereo_anchor = true;
      lm.inverse_depth = 1.0 / depth;
      window.landmarks.emplace(f.id, lm);
    } catch (const Error&) {
      // Near-parallel rays: skip until a better view arrives.
    }
  }
  manage_landmarks(window, rig, config);
}

OptimizeReport optimize_window(WindowState& window, const StereoRig& rig, const Vec3& gravity_w,
                               VisualFactorKind kind, double budget_ms, bool use_imu,
                               const WindowConfig& config) {
  const auto t_start = std::chrono::steady_clock::now();
  const double yaw_before = window.size() > 0 ? window.states[0].q.yaw() : 0.0;

  SolverConfig solver_config;
  solver_config.max_iterations = config.solver_iterations;

  OptimizeReport report;
  {
    Problem problem = build_problem(window, rig, gravity_w, kind, use_imu, config);
    const SolveReport r1 = solve(problem, solver_config);
    write_back(problem, window, use_imu);
    report.round1_cost = r1.final_cost;
    report.final_cost = r1.final_cost;
  }
  report.mean_reprojection_px = update_reprojection_stats(window, rig, kind);

  // Landmarks that still reproject badly after the first round are outliers:
  // drop them and solve again inside whatever budget remains.
  std::vector<std::uint64_t> outliers;
  for (const auto& [id, lm] : window.landmarks) {
    if (lm.mean_reprojection_px > config.outlier_px) outliers.push_back(id);
  }
  for (std::uint64_t id : outliers) window.landmarks.erase(id);
  report.removed_landmarks = static_cast<int>(outliers.size());

  const double elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
          .count();
  const double remaining_ms = budget_ms - elapsed_ms;
  if (remaining_ms <= 0.0) {
    report.budget_exceeded = true;
  } else {
    solver_config.max_time_ms = remaining_ms;
    Problem problem = build_problem(window, rig, gravity_w, kind, use_imu, config);
    const SolveReport r2 = solve(problem, solver_config);
    write_back(problem, window, use_imu);
    report.final_cost = r2.final_cost;
    report.mean_reprojection_px = update_reprojection_stats(window, rig, kind);
  }

  // Heading re-anchoring: rotate the window about the first keyframe so its
  // yaw matches the pre-solve value. With the yaw gauge frozen this is the
  // identity; it becomes active if a caller solves with a different gauge.
  if (window.size() > 0) {
    const double yaw_diff = yaw_before - window.states[0].q.yaw();
    if (std::abs(yaw_diff) > 1e-12) {
      const Rotation fix = Rotation::about_z(yaw_diff);
      const Vec3 pivot = window.states[0].p;
      for (KeyframeState& s : window.states) {
        s.q = fix * s.q;
        s.p = pivot + fix * (s.p - pivot);
        s.v = fix * s.v;
      }
    }
  }

  report.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
          .count();
  return report;
}

DualEstimate dual_estimate(WindowState& window, const StereoRig& rig, const Vec3& gravity_w,
                           double budget_ms, bool use_imu, const WindowConfig& config) {
  WindowState track_a = window;
  optimize_window(track_a, rig, gravity_w, VisualFactorKind::StereoOnly, budget_ms, use_imu,
                  config);
  WindowState track_b = window;
  optimize_window(track_b, rig, gravity_w, VisualFactorKind::StereoPlusLeft2D, budget_ms,
                  use_imu, config);

  DualEstimate result;
  result.pose_stereo_only = track_a.states.back().pose();
  result.pose_with_left2d = track_b.states.back().pose();
  const PoseDelta delta = pose_delta(result.pose_stereo_only, result.pose_with_left2d);
  result.consistent = delta.translation < config.consistent_translation_m &&
                      delta.angle_rad < config.consistent_rotation_rad;

  int stereo_landmarks = 0;
  for (const FeatureObservation& f : window.frames.back().features) {
    stereo_landmarks += f.kind == FeatureKind::Stereo3D;
  }
  result.escalated = !result.consistent || stereo_landmarks < config.min_stereo_count;

  if (result.escalated) {
    WindowState track_c = window;
    optimize_window(track_c, rig, gravity_w, VisualFactorKind::StereoPlusBoth2D, budget_ms,
                    use_imu, config);
    window = std::move(track_c);
  } else {
    window = std::move(track_b);
  }
  return result;
}

int manage_landmarks(WindowState& window, const StereoRig& rig, const WindowConfig& config) {
  // Prune landmarks that lost their constraining observations as the window
  // slid: a stereo-anchored landmark stands on its own baseline measurement,
  // a promoted track needs two observers.
  std::vector<std::uint64_t> dead;
  for (const auto& [id, lm] : window.landmarks) {
    const int observers = observer_count(window, id);
    const bool constrained = lm.stereo_anchor ? observers >= 1 : observers >= 2;
    if (!constrained || lm.inverse_depth < 1e-7) dead.push_back(id);
  }
  for (std::uint64_t id : dead) window.landmarks.erase(id);

  promote_2d_tracks(window, rig, config);

  int dropped = 0;
  if (static_cast<int>(window.landmarks.size()) > config.max_landmarks) {
    // score = track length / (1 + mean reprojection error); ties break on id
    // so the cap is deterministic.
    std::vector<std::pair<double, std::uint64_t>> ranked;
    for (const auto& [id, lm] : window.landmarks) {
      const double score = observer_count(window, id) / (1.0 + lm.mean_reprojection_px);
      ranked.emplace_back(score, id);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (std::size_t i = config.max_landmarks; i < ranked.size(); ++i) {
      window.landmarks.erase(ranked[i].second);
      ++dropped;
    }
  }
  return dropped;
}

void marginalize_oldest(WindowState& window, const StereoRig& rig, const Vec3& gravity_w,
                        bool use_imu, const WindowConfig& config) {
  if (window.size() < config.max_keyframes) return;

  const std::uint64_t kf0 = window.ids[0];

  // Factor set that touches the departing keyframe: its preintegration, the
  // reprojection terms of landmarks anchored to it (every feature class), and
  // the standing prior. Terms merely observing the keyframe from another
  // anchor are dropped; their landmarks live on unchanged.
  std::vector<ParameterBlock> blocks;
  for (int k = 0; k < window.size(); ++k) {
    const std::uint64_t kf = window.ids[k];
    blocks.push_back(rotation_block(q_id(kf), window.states[k].q));
    blocks.push_back(vector_block(p_id(kf), window.states[k].p));
    blocks.push_back(vector_block(v_id(kf), window.states[k].v));
    blocks.push_back(vector_block(ba_id(kf), window.states[k].ba));
    blocks.push_back(vector_block(bg_id(kf), window.states[k].bg));
  }
  blocks.push_back(rotation_block(kExtrinsicQId, window.T_b_c.r));
  blocks.push_back(vector_block(kExtrinsicPId, window.T_b_c.t));

  std::set<int> eliminated = {q_id(kf0), p_id(kf0), v_id(kf0), ba_id(kf0), bg_id(kf0)};

  Problem scratch;  // reuses the factor builder for the anchored terms
  std::vector<std::shared_ptr<Factor>> factors;
  for (const auto& [id, lm] : window.landmarks) {
    if (lm.anchor != 0) continue;
    blocks.push_back(depth_block(lambda_id(id), lm.inverse_depth));
    eliminated.insert(lambda_id(id));
    add_landmark_factors(scratch, window, lm, rig, VisualFactorKind::StereoPlusBoth2D, config);
  }
  factors = scratch.factors();
  if (use_imu && !window.preints.empty()) {
    const std::uint64_t kf1 = window.ids[1];
    factors.push_back(std::make_shared<ImuFactor>(
        std::vector<int>{p_id(kf0), q_id(kf0), v_id(kf0), ba_id(kf0), bg_id(kf0), p_id(kf1),
                         q_id(kf1), v_id(kf1), ba_id(kf1), bg_id(kf1)},
        window.preints[0], gravity_w));
  }
  if (window.prior) {
    factors.push_back(window.prior);
  } else if (use_imu) {
    // First marginalization: fold the bootstrap bias anchor into the prior so
    // the bias information survives the keyframe's departure.
    factors.push_back(bias_prior_factor(kf0, config));
  }

  window.prior = marginalize(blocks, factors, eliminated);

  // Landmarks anchored to the departing keyframe re-anchor to their next
  // observer (their old parameter was absorbed into the prior; the point
  // itself continues as a fresh estimate), or disappear with the keyframe.
  std::vector<std::uint64_t> anchored;
  for (const auto& [id, lm] : window.landmarks) {
    if (lm.anchor == 0) anchored.push_back(id);
  }
  for (std::uint64_t id : anchored) {
    WindowLandmark& lm = window.landmarks.at(id);
    const Vec3 p_w = camera_pose(window, 0) * (lm.anchor_bearing / lm.inverse_depth);
    bool rehomed = false;
    for (int j = 1; j < window.size() && !rehomed; ++j) {
      const FeatureObservation* obs = find_observation(window.frames[j], id);
      if (obs == nullptr) continue;
      const Vec3 p_c = camera_pose(window, j).inverse() * p_w;
      if (p_c.z() <= 0.0 || p_c.norm() < 1e-6) continue;
      lm.anchor = j;
      lm.inverse_depth = 1.0 / p_c.norm();
      if (obs->kind == FeatureKind::Stereo3D) {
        lm.anchor_bearing = obs->bearing_left;
        lm.anchor_bearing_right = obs->bearing_right;
        lm.stereo_anchor = true;
      } else {
        lm.anchor_bearing =
            obs->kind == FeatureKind::Left2D ? obs->bearing_left : p_c.normalized();
        lm.stereo_anchor = false;
      }
      rehomed = true;
    }
    if (!rehomed) window.landmarks.erase(id);
  }

  window.ids.erase(window.ids.begin());
  window.states.erase(window.states.begin());
  window.frames.erase(window.frames.begin());
  if (!window.preints.empty()) window.preints.erase(window.preints.begin());
  for (auto& [id, lm] : window.landmarks) lm.anchor -= 1;

  manage_landmarks(window, rig, config);
}

}  // namespace ums
