#pragma once

#include <string>

#include "ums/sim/bundle.hpp"

namespace ums {

// Writes the bundle as an ASL-layout dataset (mav0/{imu0,cam0,cam1,
// state_groundtruth_estimate0}) plus a calibration.cfg describing the rig, so
// the full pipeline can be exercised through the real dataset loader. Renders
// images into the bundle first when they are missing. Throws IoError.
void export_euroc(GroundTruthBundle& bundle, const std::string& directory);

}  // namespace ums
