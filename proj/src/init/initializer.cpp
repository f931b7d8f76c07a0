#include "ums/init/initializer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <string>

#include "ums/backend/factors.hpp"
#include "ums/core/error.hpp"
#include "ums/core/pnp.hpp"
#include "ums/core/triangulate.hpp"
#include "ums/solve/solver.hpp"

namespace ums {

namespace {

// Block id layout for the bootstrap problems. Keyframe blocks are packed per
// index; landmark and singleton blocks live in disjoint high ranges.
constexpr int kPerKeyframe = 10;
constexpr int kLambdaBase = 1'000'000;
constexpr int kSharedBase = 9'000'000;

int cam_q_id(int k) { return kPerKeyframe * k + 0; }
int cam_p_id(int k) { return kPerKeyframe * k + 1; }
int body_q_id(int k) { return kPerKeyframe * k + 2; }
int body_p_id(int k) { return kPerKeyframe * k + 3; }
int vel_id(int k) { return kPerKeyframe * k + 4; }
constexpr int kAccelBiasId = kSharedBase + 0;
constexpr int kGyroBiasId = kSharedBase + 1;
constexpr int kExtrinsicQId = kSharedBase + 2;
constexpr int kExtrinsicPId = kSharedBase + 3;
constexpr int kIdentityQId = kSharedBase + 4;
constexpr int kIdentityPId = kSharedBase + 5;

ParameterBlock rotation_block(int id, const Rotation& r, bool constant = false) {
  ParameterBlock b;
  b.id = id;
  b.kind = ManifoldKind::Rotation;
  b.value = rotation_to_vector(r);
  b.constant = constant;
  return b;
}

ParameterBlock vector_block(int id, const Vec3& v, bool constant = false) {
  ParameterBlock b;
  b.id = id;
  b.kind = ManifoldKind::Euclidean;
  b.value = v;
  b.constant = constant;
  return b;
}

ParameterBlock depth_block(int id, double lambda) {
  ParameterBlock b;
  b.id = id;
  b.kind = ManifoldKind::InverseDepth;
  b.value = Eigen::VectorXd::Constant(1, lambda);
  return b;
}

Transform pose_from_blocks(const Problem& problem, int q_id, int p_id) {
  return Transform(rotation_from_vector(problem.block(q_id).value),
                   Vec3(problem.block(p_id).value));
}

// Per-landmark bookkeeping shared by the two bundle problems: where the
// landmark is anchored and which window frames observe it.
struct LandmarkTrack {
  std::uint64_t feature_id = 0;
  int anchor_frame = 0;
  Vec3 anchor_left = Vec3::UnitZ();
  Vec3 anchor_right = Vec3::UnitZ();
  // frame index -> observation (excluding the anchor frame itself)
  std::vector<std::pair<int, const FeatureObservation*>> targets;
};

// Collects stereo-matched tracks over the window, anchored at the first frame
// that sees each feature. Only depth-resolved features take part in the
// bootstrap; one-camera tracks wait until the full estimator is running.
std::vector<LandmarkTrack> collect_stereo_tracks(
    const std::vector<StereoFrameFeatures>& window) {
  std::map<std::uint64_t, LandmarkTrack> by_id;
  for (int k = 0; k < static_cast<int>(window.size()); ++k) {
    for (const FeatureObservation& f : window[k].features) {
      if (f.kind != FeatureKind::Stereo3D) continue;
      auto it = by_id.find(f.id);
      if (it == by_id.end()) {
        LandmarkTrack t;
        t.feature_id = f.id;
        t.anchor_frame = k;
        t.anchor_left = f.bearing_left;
        t.anchor_right = f.bearing_right;
        by_id.emplace(f.id, std::move(t));
      } else {
        it->second.targets.emplace_back(k, &f);
      }
    }
  }
  std::vector<LandmarkTrack> tracks;
  tracks.reserve(by_id.size());
  for (auto& [id, t] : by_id) tracks.push_back(std::move(t));
  return tracks;
}

double reprojection_px(const CameraIntrinsics& cam, const Vec3& p_c, const Vec2& observed_px) {
  if (p_c.z() <= 0.0) return 1e3;  // behind the camera: count as a gross error
  return (cam.project(p_c) - observed_px).norm();
}

// Mean pixel reprojection error over every live observation of the given
// camera-chain poses and inverse depths, mirroring the bearing factors.
double mean_reprojection(const std::vector<LandmarkTrack>& tracks,
                         const std::vector<Transform>& T_w_c,
                         const std::map<std::uint64_t, double>& inverse_depths,
                         const std::vector<StereoFrameFeatures>& window, const StereoRig& rig,
                         const std::set<std::pair<std::uint64_t, int>>& dropped) {
  double sum = 0.0;
  int count = 0;
  const Transform T_rl = rig.T_left_right.inverse();
  for (const LandmarkTrack& t : tracks) {
    auto lam = inverse_depths.find(t.feature_id);
    if (lam == inverse_depths.end() || lam->second <= 0.0) continue;
    const Vec3 p_anchor = t.anchor_left / lam->second;
    const Vec3 p_w = T_w_c[t.anchor_frame] * p_anchor;
    // anchor right view
    const FeatureObservation* anchor_obs = nullptr;
    for (const FeatureObservation& f : window[t.anchor_frame].features)
      if (f.id == t.feature_id) anchor_obs = &f;
    if (anchor_obs != nullptr && !dropped.count({t.feature_id, t.anchor_frame})) {
      sum += reprojection_px(rig.right, T_rl * p_anchor, anchor_obs->right_px);
      ++count;
    }
    for (const auto& [frame, obs] : t.targets) {
      if (dropped.count({t.feature_id, frame})) continue;
      const Vec3 p_c = T_w_c[frame].inverse() * p_w;
      sum += reprojection_px(rig.left, p_c, obs->left_px);
      sum += reprojection_px(rig.right, T_rl * p_c, obs->right_px);
      count += 2;
    }
  }
  return count > 0 ? sum / count : 0.0;
}

}  // namespace

VisualInitResult visual_initialize(const std::vector<StereoFrameFeatures>& window,
                                   const StereoRig& rig, const InitializerConfig& config) {
  const int n = static_cast<int>(window.size());
  if (n < 2) raise(ErrorCode::InsufficientFeatures, "visual bootstrap needs at least 2 keyframes");
  for (int k = 0; k < n; ++k) {
    if (window[k].count(FeatureKind::Stereo3D) < config.min_stereo_features) {
      raise(ErrorCode::InsufficientFeatures,
            "keyframe " + std::to_string(k) + " has fewer than " +
                std::to_string(config.min_stereo_features) + " stereo features");
    }
  }

  // Chain of left-camera poses, grown frame by frame: depth from the stereo
  // baseline seeds the map, each later pose comes from PnP against it.
  std::vector<Transform> poses(1, Transform::identity());
  std::map<std::uint64_t, Vec3> map_points;  // frame-0 camera coordinates

  auto add_stereo_points = [&](int k) {
    for (const FeatureObservation& f : window[k].features) {
      if (f.kind != FeatureKind::Stereo3D || map_points.count(f.id)) continue;
      try {
        const double depth = stereo_depth(rig.T_left_right, f.bearing_left, f.bearing_right);
        map_points.emplace(f.id, poses[k] * (f.bearing_left * depth));
      } catch (const Error&) {
        // Near-parallel rays carry no usable depth; skip the feature.
      }
    }
  };
  add_stereo_points(0);

  for (int k = 1; k < n; ++k) {
    std::vector<Vec3> points;
    std::vector<Vec3> bearings;
    for (const FeatureObservation& f : window[k].features) {
      if (f.kind != FeatureKind::Stereo3D) continue;
      auto it = map_points.find(f.id);
      if (it == map_points.end()) continue;
      points.push_back(it->second);
      bearings.push_back(f.bearing_left);
    }
    PnpConfig pnp_config;
    pnp_config.angle_threshold_rad = 2.0 / rig.left.fx;
    pnp_config.seed = 1000 + static_cast<std::uint64_t>(k);
    try {
      poses.push_back(pnp_ransac(points, bearings, pnp_config).T_w_c);
    } catch (const Error& e) {
      raise(ErrorCode::PnpFailure,
            "pose recovery failed at keyframe " + std::to_string(k) + ": " + e.what());
    }
    add_stereo_points(k);
  }

  // Joint refinement: anchor-depth terms pin each landmark's inverse depth to
  // its stereo measurement, bearing terms couple the poses. Frame 0 is frozen
  // to fix the working frame.
  std::vector<LandmarkTrack> tracks = collect_stereo_tracks(window);
  const double weight = rig.left.fx / config.pixel_sigma;
  std::set<std::pair<std::uint64_t, int>> dropped;  // (feature, frame) outliers

  std::map<std::uint64_t, double> inverse_depths;
  double mean_px = 0.0;
  for (int round = 0; round < 2; ++round) {
    Problem problem;
    for (int k = 0; k < n; ++k) {
      problem.add_block(rotation_block(cam_q_id(k), poses[k].r, k == 0));
      problem.add_block(vector_block(cam_p_id(k), poses[k].t, k == 0));
    }
    problem.add_block(rotation_block(kIdentityQId, Rotation(), true));
    problem.add_block(vector_block(kIdentityPId, Vec3::Zero(), true));

    int lambda_count = 0;
    std::map<std::uint64_t, int> lambda_ids;
    for (const LandmarkTrack& t : tracks) {
      auto it = map_points.find(t.feature_id);
      if (it == map_points.end()) continue;
      const Vec3 p_anchor = poses[t.anchor_frame].inverse() * it->second;
      if (p_anchor.norm() < 1e-6) continue;
      const int lambda_id = kLambdaBase + lambda_count++;
      lambda_ids[t.feature_id] = lambda_id;
      problem.add_block(depth_block(lambda_id, 1.0 / p_anchor.norm()));

      if (!dropped.count({t.feature_id, t.anchor_frame})) {
        problem.add_factor(std::make_shared<AnchorDepthFactor>(
            lambda_id, t.anchor_left, t.anchor_right, rig.T_left_right, weight));
      }
      for (const auto& [frame, obs] : t.targets) {
        if (dropped.count({t.feature_id, frame})) continue;
        BearingFactor::Observation bearing_obs;
        bearing_obs.anchor_bearing = t.anchor_left;
        bearing_obs.target_left = obs->bearing_left;
        bearing_obs.target_right = obs->bearing_right;
        problem.add_factor(std::make_shared<BearingFactor>(
            std::vector<int>{cam_q_id(t.anchor_frame), cam_p_id(t.anchor_frame), cam_q_id(frame),
                             cam_p_id(frame), kIdentityQId, kIdentityPId, lambda_ids[t.feature_id]},
            bearing_obs, rig.T_left_right, weight, weight));
      }
    }

    SolverConfig solver_config;
    solver_config.max_iterations = 30;
    solve(problem, solver_config);

    for (int k = 0; k < n; ++k) poses[k] = pose_from_blocks(problem, cam_q_id(k), cam_p_id(k));
    inverse_depths.clear();
    for (const auto& [fid, lid] : lambda_ids) inverse_depths[fid] = problem.block(lid).value[0];
    for (auto& [fid, p_w] : map_points) {
      auto it = inverse_depths.find(fid);
      if (it == inverse_depths.end() || it->second <= 0.0) continue;
      const LandmarkTrack& t = *std::find_if(tracks.begin(), tracks.end(),
                                             [&](const LandmarkTrack& c) { return c.feature_id == fid; });
      p_w = poses[t.anchor_frame] * (t.anchor_left / it->second);
    }

    mean_px = mean_reprojection(tracks, poses, inverse_depths, window, rig, dropped);

    // One rejection pass: drop gross observations and re-solve. A second
    // sweep buys nothing on bootstrap-sized windows.
    if (round == 0) {
      const Transform T_rl = rig.T_left_right.inverse();
      std::size_t before = dropped.size();
      for (const LandmarkTrack& t : tracks) {
        auto lam = inverse_depths.find(t.feature_id);
        if (lam == inverse_depths.end() || lam->second <= 0.0) continue;
        const Vec3 p_anchor = t.anchor_left / lam->second;
        const Vec3 p_w = poses[t.anchor_frame] * p_anchor;
        const FeatureObservation* anchor_obs = nullptr;
        for (const FeatureObservation& f : window[t.anchor_frame].features)
          if (f.id == t.feature_id) anchor_obs = &f;
        if (anchor_obs != nullptr &&
            reprojection_px(rig.right, T_rl * p_anchor, anchor_obs->right_px) >
                config.outlier_reprojection_px) {
          dropped.insert({t.feature_id, t.anchor_frame});
        }
        for (const auto& [frame, obs] : t.targets) {
          const Vec3 p_c = poses[frame].inverse() * p_w;
          const double err = std::max(reprojection_px(rig.left, p_c, obs->left_px),
                                      reprojection_px(rig.right, T_rl * p_c, obs->right_px));
          if (err > config.outlier_reprojection_px) dropped.insert({t.feature_id, frame});
        }
      }
      if (dropped.size() == before) break;  // nothing rejected: the solve stands
    }
  }

  if (mean_px > config.max_mean_reprojection_px) {
    raise(ErrorCode::HighResidual, "mean reprojection " + std::to_string(mean_px) +
                                       " px after bundle adjustment");
  }

  VisualInitResult result;
  result.poses = std::move(poses);
  result.mean_reprojection_px = mean_px;
  for (const LandmarkTrack& t : tracks) {
    auto it = inverse_depths.find(t.feature_id);
    if (it == inverse_depths.end() || it->second <= 0.0) continue;
    result.landmarks[t.feature_id] = result.poses[t.anchor_frame] * (t.anchor_left / it->second);
  }
  return result;
}

Vec3 estimate_gyro_bias(const std::vector<Rotation>& rel_rotations,
                        std::vector<PreintegratedImu>& preints,
                        const InitializerConfig& config) {
  const std::size_t n = rel_rotations.size();
  if (n != preints.size()) {
    raise(ErrorCode::StructureError, "one relative rotation per preintegration required");
  }
  if (n < 2) raise(ErrorCode::TooFewPairs, "gyro bias estimation needs at least 2 pairs");

  if (config.enforce_rotation_span) {
    // The relative rotations must genuinely excite at least two axes: with a
    // single (or no) excited axis the visual chain cannot corroborate the
    // estimate across axes, so the window is rejected as degenerate motion.
    Mat3 span = Mat3::Zero();
    for (const Rotation& r : rel_rotations) {
      const Vec3 theta = r.log();
      span += theta * theta.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(span);
    const double tol = static_cast<double>(n) * config.rotation_span_tol_rad *
                       config.rotation_span_tol_rad;
    if (eig.eigenvalues()[1] <= tol) {
      raise(ErrorCode::RankDeficient, "relative rotations span fewer than two axes");
    }
  }

  Vec3 bg = preints[0].lin_bg();
  for (int iteration = 0; iteration < 5; ++iteration) {
    Mat3 h = Mat3::Zero();
    Vec3 g = Vec3::Zero();
    for (std::size_t k = 0; k < n; ++k) {
      const Rotation gamma = preints[k].gamma_corrected(bg);
      const Rotation q_err = gamma.inverse() * rel_rotations[k];
      const Vec3 r = 2.0 * q_err.vec();
      const Mat3 l = q_err.w() * Mat3::Identity() - skew(q_err.vec());
      const Mat3 j = -l * preints[k].d_gamma_d_bg();
      h += j.transpose() * j;
      g += j.transpose() * r;
    }
    const Vec3 delta = h.ldlt().solve(-g);
    bg += delta;
    if (delta.norm() < 1e-14) break;
  }

  for (PreintegratedImu& pre : preints) pre = pre.recentered(pre.lin_ba(), bg);
  return bg;
}

namespace {

// Rows of the alignment least squares for one keyframe pair, evaluated
// against candidate velocities and gravity. Unknown layout: [v_0..v_n, g].
struct AlignmentSystem {
  Eigen::MatrixXd a;       // 6 n_pairs x (3 (n_pairs + 1) + 3)
  Eigen::VectorXd b;
  Eigen::MatrixXd bias_probe;  // 6 n_pairs x 3 accel-bias sensitivity columns
  int gravity_col = 0;
};

AlignmentSystem build_alignment_system(const std::vector<PreintegratedImu>& preints,
                                       const std::vector<Transform>& body_poses) {
  const int n_pairs = static_cast<int>(preints.size());
  const int cols = 3 * (n_pairs + 1) + 3;
  AlignmentSystem sys;
  sys.gravity_col = 3 * (n_pairs + 1);
  sys.a = Eigen::MatrixXd::Zero(6 * n_pairs, cols);
  sys.b = Eigen::VectorXd::Zero(6 * n_pairs);
  sys.bias_probe = Eigen::MatrixXd::Zero(6 * n_pairs, 3);

  for (int k = 0; k < n_pairs; ++k) {
    const double dt = preints[k].dt();
    const Mat3 rt = body_poses[k].r.matrix().transpose();
    const Vec3 dp = body_poses[k + 1].t - body_poses[k].t;
    const int row_p = 6 * k;      // position rows
    const int row_v = 6 * k + 3;  // velocity rows

    // alpha_k = R_k^T (p_{k+1} - p_k - v_k dt - 0.5 g dt^2)
    sys.a.block<3, 3>(row_p, 3 * k) = dt * rt;
    sys.a.block<3, 3>(row_p, sys.gravity_col) = 0.5 * dt * dt * rt;
    sys.b.segment<3>(row_p) = rt * dp - preints[k].alpha();

    // beta_k = R_k^T (v_{k+1} - v_k - g dt)
    sys.a.block<3, 3>(row_v, 3 * (k + 1)) = rt;
    sys.a.block<3, 3>(row_v, 3 * k) = -rt;
    sys.a.block<3, 3>(row_v, sys.gravity_col) = -dt * rt;
    sys.b.segment<3>(row_v) = preints[k].beta();

    sys.bias_probe.block<3, 3>(row_p, 0) = preints[k].d_alpha_d_ba();
    sys.bias_probe.block<3, 3>(row_v, 0) = preints[k].d_beta_d_ba();
  }
  return sys;
}

// Condition number of the normal matrix after column equilibration, so the
// verdict reflects the geometry rather than the mixed units of the unknowns.
double probe_condition_number(const Eigen::MatrixXd& a_aug) {
  Eigen::MatrixXd scaled = a_aug;
  for (int c = 0; c < scaled.cols(); ++c) {
    const double norm = scaled.col(c).norm();
    if (norm < 1e-12) return std::numeric_limits<double>::infinity();
    scaled.col(c) /= norm;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled.transpose() * scaled);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

}  // namespace

AlignmentResult align_gravity_velocity(const std::vector<PreintegratedImu>& preints,
                                       const std::vector<Transform>& poses,
                                       const Transform& T_body_camera,
                                       const InitializerConfig& config) {
  const int n_pairs = static_cast<int>(preints.size());
  if (static_cast<int>(poses.size()) != n_pairs + 1) {
    raise(ErrorCode::StructureError, "need one camera pose per keyframe");
  }
  if (n_pairs < 2) raise(ErrorCode::TooFewPairs, "alignment needs at least 2 keyframe pairs");

  std::vector<Transform> body_poses(poses.size());
  const Transform T_camera_body = T_body_camera.inverse();
  for (std::size_t k = 0; k < poses.size(); ++k) body_poses[k] = poses[k] * T_camera_body;

  AlignmentResult result;
  result.gyro_bias = preints[0].lin_bg();

  // A window that never moved: velocities are zero by inspection and the
  // accelerometer direction is gravity. The general probe below would flag
  // this window as ambiguous (a constant accelerometer offset and gravity are
  // indistinguishable at rest), but with no motion to corrupt there is
  // nothing safer to wait for, so it is answered directly.
  double max_translation = 0.0;
  double max_rotation = 0.0;
  for (int k = 0; k < n_pairs; ++k) {
    max_translation =
        std::max(max_translation, (body_poses[k + 1].t - body_poses[k].t).norm());
    max_rotation = std::max(max_rotation, body_poses[k].r.angle_to(body_poses[k + 1].r));
  }
  const bool stationary = max_translation < config.stationary_translation_m &&
                          max_rotation < config.stationary_rotation_rad;

  Eigen::VectorXd velocities;
  Vec3 g_raw = Vec3::Zero();
  if (stationary) {
    velocities = Eigen::VectorXd::Zero(3 * (n_pairs + 1));
    for (int k = 0; k < n_pairs; ++k) {
      g_raw += -(body_poses[k].r * preints[k].beta()) / preints[k].dt();
    }
    g_raw /= n_pairs;
  } else {
    const AlignmentSystem sys = build_alignment_system(preints, body_poses);
    if (config.enforce_conditioning) {
      Eigen::MatrixXd a_aug(sys.a.rows(), sys.a.cols() + 3);
      a_aug << sys.a, sys.bias_probe;
      const double cond = probe_condition_number(a_aug);
      if (!(cond < config.max_condition_number)) {
        raise(ErrorCode::IllConditioned,
              "degenerate motion: a constant accelerometer offset is indistinguishable "
              "from gravity (probe condition number " +
                  std::to_string(cond) + ")");
      }
    }
    const Eigen::VectorXd x = sys.a.colPivHouseholderQr().solve(sys.b);
    velocities = x.head(sys.gravity_col);
    g_raw = x.segment<3>(sys.gravity_col);
  }

  const bool magnitude_ok =
      std::abs(g_raw.norm() - kGravityMagnitude) <= config.gravity_magnitude_tol * kGravityMagnitude;

  Vec3 gravity = g_raw;
  if (magnitude_ok && g_raw.norm() > 1e-9) {
    gravity = kGravityMagnitude * g_raw.normalized();
    if (!stationary) {
      // Refine on the sphere of fixed gravity magnitude: two tangent
      // coefficients replace the three gravity unknowns, velocities re-solved
      // jointly at each step.
      const AlignmentSystem sys = build_alignment_system(preints, body_poses);
      for (int iteration = 0; iteration < 4; ++iteration) {
        const Vec3 g_hat = gravity.normalized();
        const Vec3 seed = std::abs(g_hat.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
        const Vec3 b1 = g_hat.cross(seed).normalized();
        const Vec3 b2 = g_hat.cross(b1);

        Eigen::MatrixXd a(sys.a.rows(), sys.gravity_col + 2);
        a.leftCols(sys.gravity_col) = sys.a.leftCols(sys.gravity_col);
        a.col(sys.gravity_col) = sys.a.middleCols<3>(sys.gravity_col) * (kGravityMagnitude * b1);
        a.col(sys.gravity_col + 1) =
            sys.a.middleCols<3>(sys.gravity_col) * (kGravityMagnitude * b2);
        const Eigen::VectorXd rhs = sys.b - sys.a.middleCols<3>(sys.gravity_col) * gravity;
        const Eigen::VectorXd x = a.colPivHouseholderQr().solve(rhs);
        velocities = x.head(sys.gravity_col);
        gravity += kGravityMagnitude * (b1 * x[sys.gravity_col] + b2 * x[sys.gravity_col + 1]);
        gravity = kGravityMagnitude * gravity.normalized();
      }
    }
  }

  // Post-fit residuals against the final gravity and velocities.
  double sq_sum = 0.0;
  for (int k = 0; k < n_pairs; ++k) {
    const double dt = preints[k].dt();
    const Mat3 rt = body_poses[k].r.matrix().transpose();
    const Vec3 v_k = velocities.segment<3>(3 * k);
    const Vec3 v_k1 = velocities.segment<3>(3 * (k + 1));
    const Vec3 dp = body_poses[k + 1].t - body_poses[k].t;
    const Vec3 e_p = preints[k].alpha() - rt * (dp - v_k * dt - 0.5 * gravity * dt * dt);
    const Vec3 e_v = preints[k].beta() - rt * (v_k1 - v_k - gravity * dt);
    sq_sum += e_p.squaredNorm() + e_v.squaredNorm();
  }
  result.residual_norm = std::sqrt(sq_sum / (6.0 * n_pairs));

  result.gravity = gravity;
  result.velocities.resize(n_pairs + 1);
  for (int k = 0; k <= n_pairs; ++k) result.velocities[k] = velocities.segment<3>(3 * k);
  result.success = magnitude_ok && result.residual_norm < config.max_alignment_residual;
  return result;
}

LooseSolveReport loosely_coupled_ba(LooseState& state,
                                    const std::vector<PreintegratedImu>& preints,
                                    const std::vector<StereoFrameFeatures>& window,
                                    const StereoRig& rig, const Vec3& gravity_w,
                                    const InitializerConfig& config) {
  const int n = static_cast<int>(window.size());
  if (static_cast<int>(state.T_w_c.size()) != n || static_cast<int>(state.T_w_b.size()) != n ||
      static_cast<int>(state.velocities.size()) != n ||
      static_cast<int>(preints.size()) != n - 1) {
    raise(ErrorCode::StructureError, "loose state, window, and preintegrations disagree in size");
  }

  const std::vector<Transform> input_cams = state.T_w_c;
  const std::vector<Transform> input_bodies = state.T_w_b;

  Problem problem;
  for (int k = 0; k < n; ++k) {
    problem.add_block(rotation_block(cam_q_id(k), state.T_w_c[k].r, k == 0));
    problem.add_block(vector_block(cam_p_id(k), state.T_w_c[k].t, k == 0));
    problem.add_block(rotation_block(body_q_id(k), state.T_w_b[k].r));
    problem.add_block(vector_block(body_p_id(k), state.T_w_b[k].t));
    problem.add_block(vector_block(vel_id(k), state.velocities[k]));
  }
  // Accelerometer bias stays pinned at zero through the bootstrap; it only
  // becomes estimable once the full window with richer excitation runs.
  problem.add_block(vector_block(kAccelBiasId, state.accel_bias, true));
  problem.add_block(vector_block(kGyroBiasId, state.gyro_bias));
  problem.add_block(rotation_block(kExtrinsicQId, state.T_b_c.r));
  problem.add_block(vector_block(kExtrinsicPId, state.T_b_c.t));
  problem.add_block(rotation_block(kIdentityQId, Rotation(), true));
  problem.add_block(vector_block(kIdentityPId, Vec3::Zero(), true));

  const double weight = rig.left.fx / config.pixel_sigma;
  std::vector<LandmarkTrack> tracks = collect_stereo_tracks(window);
  int lambda_count = 0;
  std::map<std::uint64_t, int> lambda_ids;
  for (const LandmarkTrack& t : tracks) {
    auto it = state.inverse_depths.find(t.feature_id);
    if (it == state.inverse_depths.end() || it->second <= 0.0) continue;
    const int lambda_id = kLambdaBase + lambda_count++;
    lambda_ids[t.feature_id] = lambda_id;
    problem.add_block(depth_block(lambda_id, it->second));
    problem.add_factor(std::make_shared<AnchorDepthFactor>(lambda_id, t.anchor_left,
                                                           t.anchor_right, rig.T_left_right,
                                                           weight));
    for (const auto& [frame, obs] : t.targets) {
      BearingFactor::Observation bearing_obs;
      bearing_obs.anchor_bearing = t.anchor_left;
      bearing_obs.target_left = obs->bearing_left;
      bearing_obs.target_right = obs->bearing_right;
      problem.add_factor(std::make_shared<BearingFactor>(
          std::vector<int>{cam_q_id(t.anchor_frame), cam_p_id(t.anchor_frame), cam_q_id(frame),
                           cam_p_id(frame), kIdentityQId, kIdentityPId, lambda_id},
          bearing_obs, rig.T_left_right, weight, weight));
    }
  }

  for (int k = 0; k + 1 < n; ++k) {
    problem.add_factor(std::make_shared<ImuFactor>(
        std::vector<int>{body_p_id(k), body_q_id(k), vel_id(k), kAccelBiasId, kGyroBiasId,
                         body_p_id(k + 1), body_q_id(k + 1), vel_id(k + 1), kAccelBiasId,
                         kGyroBiasId},
        preints[k], gravity_w));
  }
  for (int k = 0; k < n; ++k) {
    problem.add_factor(std::make_shared<ExtrinsicConsistencyFactor>(std::vector<int>{
        body_q_id(k), body_p_id(k), cam_q_id(k), cam_p_id(k), kExtrinsicQId, kExtrinsicPId}));
  }

  SolverConfig solver_config;
  solver_config.max_iterations = 30;
  solve(problem, solver_config);

  for (int k = 0; k < n; ++k) {
    state.T_w_c[k] = pose_from_blocks(problem, cam_q_id(k), cam_p_id(k));
    state.T_w_b[k] = pose_from_blocks(problem, body_q_id(k), body_p_id(k));
    state.velocities[k] = problem.block(vel_id(k)).value;
  }
  state.T_b_c = pose_from_blocks(problem, kExtrinsicQId, kExtrinsicPId);
  state.gyro_bias = problem.block(kGyroBiasId).value;
  for (auto& [fid, lambda] : state.inverse_depths) {
    auto it = lambda_ids.find(fid);
    if (it != lambda_ids.end()) lambda = problem.block(it->second).value[0];
  }

  LooseSolveReport report;
  for (int k = 0; k < n; ++k) {
    const PoseDelta cam = pose_delta(state.T_w_c[k], input_cams[k]);
    const PoseDelta body = pose_delta(state.T_w_b[k], input_bodies[k]);
    report.max_translation_diff_m =
        std::max({report.max_translation_diff_m, cam.translation, body.translation});
    report.max_rotation_diff_rad =
        std::max({report.max_rotation_diff_rad, cam.angle_rad, body.angle_rad});
  }
  report.converged = report.max_translation_diff_m < config.converged_translation_m &&
                     report.max_rotation_diff_rad < config.converged_rotation_rad;
  report.mean_reprojection_px =
      mean_reprojection(tracks, state.T_w_c, state.inverse_depths, window, rig, {});
  return report;
}

TrackingMode step_mode(TrackingMode current, const ModeEvents& events) {
  if (events.total_tracking_loss) return TrackingMode::ImuOnly;
  switch (current) {
    case TrackingMode::ImuOnly:
      // Alignment can only be accepted on top of a standing visual bootstrap,
      // so the best a dead-reckoning frame can reach is visual odometry.
      return events.visual_init_ok ? TrackingMode::VisualOnly : TrackingMode::ImuOnly;
    case TrackingMode::VisualOnly:
      if (!events.visual_init_ok) return TrackingMode::ImuOnly;
      return events.alignment_ok ? TrackingMode::VisualInertial : TrackingMode::VisualOnly;
    case TrackingMode::VisualInertial:
      return TrackingMode::VisualInertial;
  }
  return current;
}

const char* to_string(TrackingMode mode) {
  switch (mode) {
    case TrackingMode::ImuOnly:
      return "ImuOnly";
    case TrackingMode::VisualOnly:
      return "VisualOnly";
    case TrackingMode::VisualInertial:
      return "VisualInertial";
  }
  return "unknown";
}

}  // namespace ums
