#pragma once

#include <span>
#include <vector>

namespace hartlab::geometry {

// Axis-aligned box in pixel coordinates, stored as top-left corner plus
// extents. Corner-format inputs are converted at the ingestion boundary
// (see from_corners) so the rest of the code deals with one convention.
struct BoundingBox {
  double x = 0.0;  // left edge
  double y = 0.0;  // top edge
  double w = 0.0;
  double h = 0.0;

  static BoundingBox from_corners(double x1, double y1, double x2, double y2) {
    return BoundingBox{x1, y1, x2 - x1, y2 - y1};
  }

  // Invariants: finite coordinates, nonnegative extents.
  bool valid() const;

  bool operator==(const BoundingBox&) const = default;
};

double area(const BoundingBox& b);

// Area of the overlap rectangle; 0 when disjoint. Symmetric.
double intersection_area(const BoundingBox& a, const BoundingBox& b);

// Intersection over union. Defined as 0 when both boxes are degenerate
// (union area 0); callers that need to surface such inputs should check
// degeneracy themselves (the eval harness flags those records).
double iou(const BoundingBox& a, const BoundingBox& b);

// Intersection over ground-truth: max over predictions of
// intersection_area(pred, gt) / area(gt). Empty prediction set scores 0.
// Throws std::invalid_argument("degenerate ground truth") if area(gt) == 0.
double iogt(std::span<const BoundingBox> preds, const BoundingBox& gt);

// How a sample with several ground-truth boxes is judged: "All" requires
// every gt box to be covered above the threshold by some prediction,
// "Any" requires at least one.
enum class GtAggregation { All, Any };

// Strictly-greater-than threshold test, single ground truth.
bool grounding_correct(std::span<const BoundingBox> preds, const BoundingBox& gt, double tau);

// Multi ground-truth variant.
bool grounding_correct(std::span<const BoundingBox> preds, std::span<const BoundingBox> gts,
                       double tau, GtAggregation agg = GtAggregation::All);

// Scalar coverage score for a record: min over gt boxes of iogt (All) or
// max (Any). grounding_correct(...) == (coverage_score(...) > tau), which is
// what makes threshold sweeps and single-threshold reports consistent.
double coverage_score(std::span<const BoundingBox> preds, std::span<const BoundingBox> gts,
                      GtAggregation agg = GtAggregation::All);

}  // namespace hartlab::geometry
