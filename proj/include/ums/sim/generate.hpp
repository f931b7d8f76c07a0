#pragma once

#include "ums/sim/bundle.hpp"

namespace ums {

// Builds the full ground-truth bundle for a scenario: scene points scattered
// around the path, exact IMU samples, true states, and per-frame feature
// observations by forward projection. Deterministic for a fixed seed. Images
// are rendered only when scenario.render_images is set.
GroundTruthBundle generate(const Scenario& scenario);

// (Re-)renders every frame's dot images from the frame's current observation
// pixels. Called by generate and again after perturbation, so dots follow the
// noisy pixels.
void render_images(GroundTruthBundle& bundle);

}  // namespace ums
