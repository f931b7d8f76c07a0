#include "ums/frontend/klt.hpp"

#include <algorithm>
#include <cmath>

#include "ums/core/error.hpp"

namespace ums {

namespace {

// Tracks one point through `levels` levels; returns false when lost. `guess`
// holds the estimated position in `next` on entry (seed) and exit.
bool lk_point(const ImagePyramid& prev, const ImagePyramid& next, int levels,
              const Vec2& point, Vec2* guess, const KltOptions& opt) {
  const int half = opt.half_window;
  const int n_pixels = (2 * half + 1) * (2 * half + 1);
  std::vector<double> patch(n_pixels), grad_x(n_pixels), grad_y(n_pixels);

  Vec2 d = *guess - point;  // displacement estimate, full-resolution units
  for (int level = levels - 1; level >= 0; --level) {
    const double scale = static_cast<double>(1 << level);
    const PyramidLevel& pl = prev.level(level);
    const PyramidLevel& nl = next.level(level);
    const Vec2 p = point / scale;
    Vec2 dl = d / scale;

    const double margin = half + 1.0;
    auto patch_fits = [&](const Image& img, const Vec2& center) {
      return center.x() >= margin && center.y() >= margin &&
             center.x() <= img.width - 1.0 - margin &&
             center.y() <= img.height - 1.0 - margin;
    };

    // A coarse level that cannot see the patch just passes the estimate down;
    // only the full-resolution level declares the point lost.
    if (!patch_fits(pl.image, p)) {
      if (level == 0) return false;
      continue;
    }

    // Template patch and its gradients, fixed for the level.
    Eigen::Matrix2d G = Eigen::Matrix2d::Zero();
    int idx = 0;
    for (int dy = -half; dy <= half; ++dy) {
      for (int dx = -half; dx <= half; ++dx, ++idx) {
        const double x = p.x() + dx, y = p.y() + dy;
        patch[idx] = pl.image.sample(x, y);
        grad_x[idx] = pl.sample_gx(x, y);
        grad_y[idx] = pl.sample_gy(x, y);
        G(0, 0) += grad_x[idx] * grad_x[idx];
        G(0, 1) += grad_x[idx] * grad_y[idx];
        G(1, 1) += grad_y[idx] * grad_y[idx];
      }
    }
    G(1, 0) = G(0, 1);
    const double tr = G(0, 0) + G(1, 1);
    const double det_term =
        std::sqrt(std::max(0.0, (G(0, 0) - G(1, 1)) * (G(0, 0) - G(1, 1)) +
                                    4.0 * G(0, 1) * G(0, 1)));
    const double min_eig = 0.5 * (tr - det_term) / n_pixels;
    if (min_eig < opt.min_eig_per_pixel) {
      if (level == 0) return false;
      continue;
    }
    const Eigen::Matrix2d G_inv = G.inverse();

    bool ok = true;
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
      const Vec2 q = p + dl;
      if (!patch_fits(nl.image, q)) {
        ok = level > 0;  // coarse overshoot: fall through with the last estimate
        break;
      }
      Vec2 b = Vec2::Zero();
      idx = 0;
      for (int dy = -half; dy <= half; ++dy) {
        for (int dx = -half; dx <= half; ++dx, ++idx) {
          const double r = patch[idx] - nl.image.sample(q.x() + dx, q.y() + dy);
          b.x() += r * grad_x[idx];
          b.y() += r * grad_y[idx];
        }
      }
      const Vec2 step = G_inv * b;
      if (!step.allFinite()) return false;
      dl += step;
      if (step.norm() < opt.tolerance) break;
    }
    if (!ok && level == 0) return false;
    d = dl * scale;
  }

  *guess = point + d;
  const Image& full = next.level(0).image;
  if (!full.contains(guess->x(), guess->y(), 1.0)) return false;
  return true;
}

bool lk_with_fb(const ImagePyramid& prev, const ImagePyramid& next, int levels,
                const Vec2& point, Vec2* guess, const KltOptions& opt) {
  if (!lk_point(prev, next, levels, point, guess, opt)) return false;
  if (opt.fb_threshold < 0.0) return true;
  Vec2 back = point;  // seed the reverse track at the known answer
  if (!lk_point(next, prev, levels, *guess, &back, opt)) return false;
  return (back - point).norm() <= opt.fb_threshold;
}

}  // namespace

void track_features(const ImagePyramid& prev, const ImagePyramid& next,
                    const std::vector<Vec2>& points, int levels,
                    std::vector<Vec2>* tracked, std::vector<std::uint8_t>* status,
                    const KltOptions& options, const std::vector<Vec2>* seeds) {
  if (levels > prev.levels() || levels > next.levels() || levels < 1) {
    raise(ErrorCode::ConfigError, "tracking level count exceeds the pyramid depth");
  }
  tracked->resize(points.size());
  status->assign(points.size(), 0);
  for (size_t i = 0; i < points.size(); ++i) {
    Vec2 guess = seeds != nullptr ? (*seeds)[i] : points[i];
    const bool ok = lk_with_fb(prev, next, levels, points[i], &guess, options);
    (*tracked)[i] = guess;
    (*status)[i] = ok ? 1 : 0;
  }
}

StereoMatchResult stereo_match(const ImagePyramid& left, const ImagePyramid& right,
                               const std::vector<Vec2>& left_points, const StereoRig& rig,
                               const KltOptions& options, double epipolar_threshold) {
  StereoMatchResult out;
  out.right_points.resize(left_points.size());
  out.status.assign(left_points.size(), 0);
  out.retried.assign(left_points.size(), 0);

  // Essential matrix of the pair: for bearings f_l, f_r (right point p_l =
  // R p_r + t in left coordinates), f_l' [t]x R f_r = 0.
  const Mat3 E = skew(rig.T_left_right.t) * rig.T_left_right.r.matrix();
  const double focal = 0.5 * (rig.left.fx + rig.left.fy);

  for (size_t i = 0; i < left_points.size(); ++i) {
    Vec2 guess = left_points[i];
    bool ok = lk_with_fb(left, right, 2, left_points[i], &guess, options);
    if (!ok && left.levels() >= 4 && right.levels() >= 4) {
      guess = left_points[i];
      ok = lk_with_fb(left, right, 4, left_points[i], &guess, options);
      if (ok) out.retried[i] = 1;
    }
    if (!ok) continue;

    // Distance from the epipolar line of the left ray, in (approximate) px.
    Vec3 f_l, f_r;
    try {
      f_l = rig.left.unproject(left_points[i]);
      f_r = rig.right.unproject(guess);
    } catch (const Error&) {
      continue;
    }
    if (f_r.z() < 1e-9) continue;
    const Vec3 line_r = E.transpose() * f_l;  // line in the right normalized plane
    const double denom = std::hypot(line_r.x(), line_r.y());
    if (denom < 1e-12) continue;
    const Vec3 x_r(f_r.x() / f_r.z(), f_r.y() / f_r.z(), 1.0);
    const double dist_px = focal * std::abs(line_r.dot(x_r)) / denom;
    if (dist_px > epipolar_threshold) continue;

    out.right_points[i] = guess;
    out.status[i] = 1;
  }
  return out;
}

}  // namespace ums
