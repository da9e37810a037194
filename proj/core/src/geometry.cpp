#include "hartlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hartlab::geometry {

bool BoundingBox::valid() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) &&
         w >= 0.0 && h >= 0.0;
}

double area(const BoundingBox& b) { return b.w * b.h; }

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double left = std::max(a.x, b.x);
  const double right = std::min(a.x + a.w, b.x + b.w);
  const double top = std::max(a.y, b.y);
  const double bottom = std::min(a.y + a.h, b.y + b.h);
  const double iw = right - left;
  const double ih = bottom - top;
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  const double uni = area(a) + area(b) - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

double iogt(std::span<const BoundingBox> preds, const BoundingBox& gt) {
  const double gt_area = area(gt);
  if (gt_area <= 0.0) throw std::invalid_argument("degenerate ground truth");
  double best = 0.0;
  for (const BoundingBox& p : preds) {
    best = std::max(best, intersection_area(p, gt) / gt_area);
  }
  return best;
}

bool grounding_correct(std::span<const BoundingBox> preds, const BoundingBox& gt, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must be in [0,1]");
  return iogt(preds, gt) > tau;
}

double coverage_score(std::span<const BoundingBox> preds, std::span<const BoundingBox> gts,
                      GtAggregation agg) {
  if (gts.empty()) throw std::invalid_argument("degenerate ground truth");
  double score = agg == GtAggregation::All ? std::numeric_limits<double>::infinity() : 0.0;
  for (const BoundingBox& gt : gts) {
    const double c = iogt(preds, gt);
    score = agg == GtAggregation::All ? std::min(score, c) : std::max(score, c);
  }
  return score;
}

bool grounding_correct(std::span<const BoundingBox> preds, std::span<const BoundingBox> gts,
                       double tau, GtAggregation agg) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must be in [0,1]");
  return coverage_score(preds, gts, agg) > tau;
}

}  // namespace hartlab::geometry
