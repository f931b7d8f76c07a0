#include "ums/sim/generate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ums/core/error.hpp"

namespace ums {

namespace {

constexpr double kMinDepth = 0.3;   // m, in front of either camera
constexpr double kEdgeMargin = 4.0;  // px kept clear of the border

// Only every fifth landmark is visible to the right camera under LeftOnly —
// still enough stereo pairs per frame to seed depths.
bool right_visible_under_left_only(int landmark_id) { return landmark_id % 5 == 0; }

bool project_into(const CameraIntrinsics& cam, const Transform& T_w_c, const Vec3& p_w,
                  Vec2* px) {
  const Vec3 p_c = T_w_c.inverse() * p_w;
  if (p_c.z() < kMinDepth) return false;
  const Vec2 uv = cam.project(p_c);
  if (!cam.in_bounds(uv, kEdgeMargin)) return false;
  *px = uv;
  return true;
}

}  // namespace

StereoRig synthetic_rig() {
  StereoRig rig;
  rig.left.fx = 460.0;
  rig.left.fy = 460.0;
  rig.left.cx = 376.0;
  rig.left.cy = 240.0;
  rig.left.width = 752;
  rig.left.height = 480;
  rig.right = rig.left;

  // Optical axis along body x, camera x to the body's right, camera y down.
  Mat3 r_bc;
  r_bc << 0.0, 0.0, 1.0,  //
      -1.0, 0.0, 0.0,     //
      0.0, -1.0, 0.0;
  rig.T_body_left = Transform(Rotation(r_bc), Vec3(0.05, 0.02, 0.0));
  rig.T_left_right = Transform(Rotation(), Vec3(0.11, 0.0, 0.0));
  return rig;
}

GroundTruthBundle generate(const Scenario& scenario) {
  validate(scenario);

  GroundTruthBundle bundle;
  bundle.scenario = scenario;
  bundle.rig = synthetic_rig();
  bundle.trajectory = std::make_shared<TrajectoryModel>(scenario);
  const TrajectoryModel& model = *bundle.trajectory;

  // Scene: uniform points in the path's bounding box grown by a margin, kept
  // away from the path itself so no projection sits closer than ~2 m.
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
  Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
  std::vector<Vec3> path;
  for (double t = 0.0; t <= scenario.duration + 1e-9; t += 0.25) {
    path.push_back(model.pose(t).t);
    lo = lo.cwiseMin(path.back());
    hi = hi.cwiseMax(path.back());
  }
  const Vec3 box_lo = lo - Vec3(9.0, 9.0, 2.5);
  const Vec3 box_hi = hi + Vec3(9.0, 9.0, 5.0);

  std::mt19937_64 rng(scenario.seed);
  std::uniform_real_distribution<double> ux(box_lo.x(), box_hi.x());
  std::uniform_real_distribution<double> uy(box_lo.y(), box_hi.y());
  std::uniform_real_distribution<double> uz(box_lo.z(), box_hi.z());
  bundle.landmarks.reserve(scenario.point_count);
  int id = 0;
  int guard = 0;
  while (static_cast<int>(bundle.landmarks.size()) < scenario.point_count &&
         guard++ < scenario.point_count * 200) {
    const Vec3 candidate(ux(rng), uy(rng), uz(rng));
    double nearest = std::numeric_limits<double>::max();
    for (const Vec3& p : path) nearest = std::min(nearest, (candidate - p).norm());
    if (nearest < 2.0) continue;
    bundle.landmarks.push_back({id++, candidate});
  }

  // Exact IMU stream.
  const int n_imu = static_cast<int>(std::llround(scenario.duration * scenario.imu_rate));
  bundle.imu.reserve(n_imu + 1);
  for (int i = 0; i <= n_imu; ++i) {
    bundle.imu.push_back(model.imu(i / scenario.imu_rate, gravity_world()));
  }

  // Frames with exact observations.
  const int stride = static_cast<int>(std::llround(scenario.imu_rate / scenario.frame_rate));
  const int n_frames = n_imu / stride;
  bundle.frame_times.reserve(n_frames + 1);
  bundle.frame_states.reserve(n_frames + 1);
  bundle.frames.reserve(n_frames + 1);
  for (int k = 0; k <= n_frames; ++k) {
    const double t = (k * stride) / scenario.imu_rate;
    bundle.frame_times.push_back(t);
    bundle.frame_states.push_back(model.state(t));

    SimFrame frame;
    frame.t = t;
    const bool blacked_out = scenario.texture == TextureProfile::BlackoutWindow &&
                             t > scenario.blackout_start && t < scenario.blackout_end;
    if (!blacked_out) {
      const Transform T_w_b = model.pose(t);
      const Transform T_w_cl = T_w_b * bundle.rig.T_body_left;
      const Transform T_w_cr = T_w_cl * bundle.rig.T_left_right;
      for (const SimLandmark& lm : bundle.landmarks) {
        SimFeatureObs obs;
        obs.landmark_id = lm.id;
        obs.in_left = project_into(bundle.rig.left, T_w_cl, lm.p_w, &obs.left_px);
        obs.in_right = project_into(bundle.rig.right, T_w_cr, lm.p_w, &obs.right_px);
        if (scenario.texture == TextureProfile::LeftOnly &&
            !right_visible_under_left_only(lm.id)) {
          obs.in_right = false;
        }
        if (obs.in_left || obs.in_right) frame.obs.push_back(obs);
      }
    }
    bundle.frames.push_back(std::move(frame));
  }

  if (scenario.render_images) render_images(bundle);
  return bundle;
}

void render_images(GroundTruthBundle& bundle) {
  constexpr double kSigma = 1.2;
  constexpr int kRadius = 5;  // ~4 sigma
  constexpr std::uint8_t kBackground = 8;

  auto splat = [](Image& img, const Vec2& px, double amplitude) {
    const int cx = static_cast<int>(std::lround(px.x()));
    const int cy = static_cast<int>(std::lround(px.y()));
    for (int y = cy - kRadius; y <= cy + kRadius; ++y) {
      if (y < 0 || y >= img.height) continue;
      for (int x = cx - kRadius; x <= cx + kRadius; ++x) {
        if (x < 0 || x >= img.width) continue;
        const double dx = x - px.x();
        const double dy = y - px.y();
        const double v = amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
        const int merged = static_cast<int>(img.at(x, y)) + static_cast<int>(std::lround(v));
        img.at(x, y) = static_cast<std::uint8_t>(std::min(merged, 255));
      }
    }
  };

  const int w = bundle.rig.left.width;
  const int h = bundle.rig.left.height;
  for (SimFrame& frame : bundle.frames) {
    frame.left_image = Image(w, h, kBackground);
    frame.right_image = Image(w, h, kBackground);
    for (const SimFeatureObs& obs : frame.obs) {
      // deterministic per-landmark brightness, bright enough to track
      const double amplitude = 130.0 + (obs.landmark_id * 37) % 100;
      if (obs.in_left) splat(frame.left_image, obs.left_px, amplitude);
      if (obs.in_right) splat(frame.right_image, obs.right_px, amplitude);
    }
  }
}

}  // namespace ums
