#include "ums/imu/types.hpp"

namespace ums {

namespace {

Vec3 clamp_delta(const Vec3& previous, const Vec3& raw, const Vec3& max_delta) {
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    out(i) = std::clamp(raw(i), previous(i) - max_delta(i), previous(i) + max_delta(i));
  }
  return out;
}

}  // namespace

ImuSample saturate_sample(const ImuSample& previous, const ImuSample& raw,
                          const SaturationLimits& limits) {
  ImuSample out = raw;
  if (limits.apply_gyro) out.gyro = clamp_delta(previous.gyro, raw.gyro, limits.gyro_max_delta);
  if (limits.apply_accel) out.accel = clamp_delta(previous.accel, raw.accel, limits.accel_max_delta);
  return out;
}

}  // namespace ums
