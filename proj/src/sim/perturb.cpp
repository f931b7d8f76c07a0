#include "ums/sim/perturb.hpp"

#include <random>

#include "ums/core/error.hpp"
#include "ums/sim/generate.hpp"

namespace ums {

GroundTruthBundle perturb(const GroundTruthBundle& bundle, const NoiseSpec& noise,
                          const PlantedSpec& planted) {
  if (noise.gyro_sigma < 0.0 || noise.accel_sigma < 0.0 || noise.gyro_walk_sigma < 0.0 ||
      noise.accel_walk_sigma < 0.0 || noise.pixel_sigma < 0.0) {
    raise(ErrorCode::NegativeInput, "noise magnitudes must be non-negative");
  }
  if (planted.outlier_fraction < 0.0 || planted.outlier_fraction > 1.0 ||
      planted.gyro_spike_fraction < 0.0 || planted.gyro_spike_fraction > 1.0) {
    raise(ErrorCode::NegativeInput, "fractions must lie in [0, 1]");
  }

  GroundTruthBundle out = bundle;
  out.planted_gyro_bias = planted.gyro_bias;
  out.planted_accel_bias = planted.accel_bias;

  std::mt19937_64 rng(bundle.scenario.seed ^ 0x5eed5eedULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> axis_pick(0, 2);

  Vec3 gyro_walk = Vec3::Zero();
  Vec3 accel_walk = Vec3::Zero();
  for (ImuSample& s : out.imu) {
    for (int k = 0; k < 3; ++k) {
      gyro_walk(k) += noise.gyro_walk_sigma * gauss(rng);
      accel_walk(k) += noise.accel_walk_sigma * gauss(rng);
      s.gyro(k) += planted.gyro_bias(k) + gyro_walk(k) + noise.gyro_sigma * gauss(rng);
      s.accel(k) += planted.accel_bias(k) + accel_walk(k) + noise.accel_sigma * gauss(rng);
    }
    if (planted.gyro_spike_fraction > 0.0 && unit(rng) < planted.gyro_spike_fraction) {
      s.gyro(axis_pick(rng)) += (unit(rng) < 0.5 ? -1.0 : 1.0) * planted.gyro_spike_magnitude;
    }
  }

  const double margin = 10.0;
  std::uniform_real_distribution<double> ux(margin, bundle.rig.left.width - 1 - margin);
  std::uniform_real_distribution<double> uy(margin, bundle.rig.left.height - 1 - margin);
  for (SimFrame& frame : out.frames) {
    for (SimFeatureObs& obs : frame.obs) {
      if (obs.in_left) {
        if (planted.outlier_fraction > 0.0 && unit(rng) < planted.outlier_fraction) {
          obs.left_px = Vec2(ux(rng), uy(rng));
          obs.left_outlier = true;
        } else {
          obs.left_px += noise.pixel_sigma * Vec2(gauss(rng), gauss(rng));
        }
      }
      if (obs.in_right) {
        if (planted.outlier_fraction > 0.0 && unit(rng) < planted.outlier_fraction) {
          obs.right_px = Vec2(ux(rng), uy(rng));
          obs.right_outlier = true;
        } else {
          obs.right_px += noise.pixel_sigma * Vec2(gauss(rng), gauss(rng));
        }
      }
    }
  }

  if (!out.frames.empty() && !out.frames.front().left_image.empty()) {
    render_images(out);
  }
  return out;
}

}  // namespace ums
