#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hartlab/geometry.hpp"
#include "hartlab/stats.hpp"

namespace hartlab::evalharness {

// One externally produced grounding result: ground-truth boxes, predicted
// boxes and a precomputed answer-correctness flag.
struct GroundingRecord {
  std::string id;
  std::vector<geometry::BoundingBox> gt_boxes;
  std::vector<geometry::BoundingBox> pred_boxes;
  bool answer_correct = false;
};

enum class BoxFormat { Xywh, Xyxy };

struct ParseOptions {
  // Strict mode (default) turns any malformed line into an error that lists
  // every offending line number. Lenient mode skips them with a count;
  // silent data loss would corrupt the joint statistics.
  bool lenient = false;
};

struct ParseResult {
  std::vector<GroundingRecord> records;
  std::vector<std::string> line_errors;  // "line N: reason"
  std::size_t skipped = 0;
  BoxFormat format = BoxFormat::Xywh;
};

// Reads a JSONL record file. The first line must be a header object
// {"box_format": "xywh"|"xyxy", "version": 1}; each following line is one
// record {"id", "gt_boxes", "pred_boxes", "answer_correct"} with boxes as
// 4-element arrays in the header's format. Throws report::IoError when the
// file cannot be read and std::invalid_argument on strict-mode parse
// failures or an empty record set.
ParseResult read_records(const std::string& path, const ParseOptions& options = {});

enum class SweepMetric { Iogt, Iou };

struct RecordClassification {
  std::string id;
  double score = 0.0;  // coverage (iogt) or best IoU, aggregated over gt boxes
  bool grounding_correct = false;
  bool answer_correct = false;
  bool flagged = false;  // degenerate pred/gt pairing encountered (iou metric)
};

struct PilotReport {
  double tau = 0.0;
  stats::JointStats joint;
  std::optional<double> misgrounded_given_correct;  // absent when no answer is correct
  double mi_nats = 0.0;
  std::vector<RecordClassification> per_record;
};

// Per-record scalar the threshold comparisons run on: for Iogt the coverage
// of the gt area, for Iou the best IoU over predictions; multi-gt records
// aggregate with min (All) or max (Any). A single code path feeds both
// pilot_report and threshold_sweep, so the two always agree at equal tau.
RecordClassification classify_record(const GroundingRecord& record, double tau,
                                     SweepMetric metric = SweepMetric::Iogt,
                                     geometry::GtAggregation agg = geometry::GtAggregation::All);

PilotReport pilot_report(std::span<const GroundingRecord> records, double tau,
                         SweepMetric metric = SweepMetric::Iogt,
                         geometry::GtAggregation agg = geometry::GtAggregation::All);

struct SweepPoint {
  double tau = 0.0;
  double grounding_accuracy = 0.0;
};

// Grounding accuracy per threshold; taus must be sorted ascending in [0,1].
// Monotone nonincreasing by construction (strict > against a fixed score).
std::vector<SweepPoint> threshold_sweep(std::span<const GroundingRecord> records,
                                        std::span<const double> taus,
                                        SweepMetric metric = SweepMetric::Iogt,
                                        geometry::GtAggregation agg = geometry::GtAggregation::All);

// Writes records in the JSONL interchange format (header line + one record
// per line). The inverse of read_records for xywh content.
void write_records(const std::string& path, std::span<const GroundingRecord> records);

}  // namespace hartlab::evalharness
