#pragma once

#include "ums/sim/bundle.hpp"

namespace ums {

// Per-sample (discrete) noise magnitudes; all default to clean.
struct NoiseSpec {
  double gyro_sigma = 0.0;        // rad/s per sample
  double accel_sigma = 0.0;       // m/s^2 per sample
  double gyro_walk_sigma = 0.0;   // rad/s random-walk increment per sample
  double accel_walk_sigma = 0.0;  // m/s^2 random-walk increment per sample
  double pixel_sigma = 0.0;       // px on each observation coordinate
};

// Deliberately planted corruption, recorded in the bundle for oracle queries.
struct PlantedSpec {
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();
  double outlier_fraction = 0.0;      // probability a pixel is replaced
  double gyro_spike_fraction = 0.0;   // probability a gyro sample gets a spike
  double gyro_spike_magnitude = 0.0;  // rad/s added on one axis when it does
};

// Corrupts the bundle's sensor streams in place semantics (returns a copy):
// white noise + random-walk bias drift + planted constant biases on the IMU,
// Gaussian pixel noise and uniform replacement outliers on the observations.
// Deterministic for a fixed bundle seed. Rendered images are refreshed so the
// dots follow the corrupted pixels. Throws NegativeInput for negative sigmas.
GroundTruthBundle perturb(const GroundTruthBundle& bundle, const NoiseSpec& noise,
                          const PlantedSpec& planted);

}  // namespace ums
