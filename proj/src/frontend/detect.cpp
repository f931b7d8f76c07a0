#include "ums/frontend/detect.hpp"

#include <algorithm>
#include <cmath>

#include "ums/frontend/pyramid.hpp"

namespace ums {

namespace {

struct Candidate {
  int x = 0, y = 0;
  double score = 0.0;
};

double sample_field(const std::vector<float>& f, int w, int h, double x, double y) {
  x = std::clamp(x, 0.0, w - 1.0);
  y = std::clamp(y, 0.0, h - 1.0);
  const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = (1.0 - fx) * f[static_cast<size_t>(y0) * w + x0] +
                     fx * f[static_cast<size_t>(y0) * w + x1];
  const double bot = (1.0 - fx) * f[static_cast<size_t>(y1) * w + x0] +
                     fx * f[static_cast<size_t>(y1) * w + x1];
  return (1.0 - fy) * top + fy * bot;
}

// Iterative solve of the gradient-orthogonality condition: the corner is the
// point q where every window gradient is orthogonal to the offset toward q,
// i.e. sum g g^T (p - q) = 0.
Vec2 refine_with_fields(const std::vector<float>& gx, const std::vector<float>& gy, int w,
                        int h, const Vec2& corner, const DetectOptions& options) {
  Vec2 q = corner;
  const int half = options.refine_half_window;
  for (int iter = 0; iter < options.refine_max_iterations; ++iter) {
    Eigen::Matrix2d G = Eigen::Matrix2d::Zero();
    Vec2 b = Vec2::Zero();
    for (int dy = -half; dy <= half; ++dy) {
      for (int dx = -half; dx <= half; ++dx) {
        const double px = q.x() + dx, py = q.y() + dy;
        const Vec2 g(sample_field(gx, w, h, px, py), sample_field(gy, w, h, px, py));
        const Eigen::Matrix2d outer = g * g.transpose();
        G += outer;
        b += outer * Vec2(px, py);
      }
    }
    if (std::abs(G.determinant()) < 1e-12) break;
    const Vec2 next = G.ldlt().solve(b);
    const double step = (next - q).norm();
    // never wander off the corner's own neighborhood
    if (!next.allFinite() || (next - corner).norm() > 2.0 * half) break;
    q = next;
    if (step < options.refine_tolerance) break;
  }
  return q;
}

}  // namespace

Vec2 refine_subpixel(const Image& image, const Vec2& corner, const DetectOptions& options) {
  std::vector<float> gx, gy;
  scharr_gradients(image, &gx, &gy);
  return refine_with_fields(gx, gy, image.width, image.height, corner, options);
}

std::vector<Vec2> detect_features(const Image& image, const std::vector<Vec2>& existing,
                                  const DetectOptions& options) {
  std::vector<Vec2> out;
  const int room = options.budget - static_cast<int>(existing.size());
  if (room <= 0 || image.empty()) return out;

  const int w = image.width, h = image.height;
  std::vector<float> gx, gy;
  scharr_gradients(image, &gx, &gy);

  // Shi-Tomasi response: smaller eigenvalue of the 5x5 structure tensor.
  const int half = 2;
  const int margin = half + 1;
  std::vector<float> score(static_cast<size_t>(w) * h, 0.0f);
  double best = 0.0;
  for (int y = margin; y < h - margin; ++y) {
    for (int x = margin; x < w - margin; ++x) {
      double a = 0.0, bsum = 0.0, c = 0.0;
      for (int dy = -half; dy <= half; ++dy) {
        const size_t row = static_cast<size_t>(y + dy) * w;
        for (int dx = -half; dx <= half; ++dx) {
          const double ix = gx[row + x + dx];
          const double iy = gy[row + x + dx];
          a += ix * ix;
          bsum += ix * iy;
          c += iy * iy;
        }
      }
      const double tr = a + c;
      const double det_term = std::sqrt(std::max(0.0, (a - c) * (a - c) + 4.0 * bsum * bsum));
      const double min_eig = 0.5 * (tr - det_term);
      score[static_cast<size_t>(y) * w + x] = static_cast<float>(min_eig);
      best = std::max(best, min_eig);
    }
  }
  if (best <= 0.0) return out;

  // 3x3 non-maximum suppression over the quality floor.
  const double floor_score = options.quality_level * best;
  std::vector<Candidate> candidates;
  for (int y = margin; y < h - margin; ++y) {
    for (int x = margin; x < w - margin; ++x) {
      const float s = score[static_cast<size_t>(y) * w + x];
      if (s < floor_score) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          if (score[static_cast<size_t>(y + dy) * w + (x + dx)] > s) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) candidates.push_back({x, y, s});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& lhs, const Candidate& rhs) { return lhs.score > rhs.score; });

  const double min_dist = options.scaled_min_distance(w);
  const double min_dist_sq = min_dist * min_dist;
  auto too_close = [&](const Vec2& p, const std::vector<Vec2>& set) {
    for (const Vec2& q : set) {
      if ((p - q).squaredNorm() < min_dist_sq) return true;
    }
    return false;
  };

  for (const Candidate& cand : candidates) {
    if (static_cast<int>(out.size()) >= room) break;
    const Vec2 p(cand.x, cand.y);
    if (too_close(p, existing) || too_close(p, out)) continue;
    out.push_back(refine_with_fields(gx, gy, w, h, p, options));
  }
  return out;
}

}  // namespace ums
