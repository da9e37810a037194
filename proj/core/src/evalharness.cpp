#include "hartlab/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "hartlab/report.hpp"

namespace hartlab::evalharness {

namespace {

using nlohmann::json;

geometry::BoundingBox parse_box(const json& arr, BoxFormat format) {
  if (!arr.is_array() || arr.size() != 4) {
    throw std::invalid_argument("box must be a 4-element array");
  }
  double v[4];
  for (int i = 0; i < 4; ++i) {
    if (!arr[i].is_number()) throw std::invalid_argument("box coordinates must be numbers");
    v[i] = arr[i].get<double>();
  }
  const geometry::BoundingBox box = format == BoxFormat::Xywh
                                        ? geometry::BoundingBox{v[0], v[1], v[2], v[3]}
                                        : geometry::BoundingBox::from_corners(v[0], v[1], v[2], v[3]);
  if (!box.valid()) throw std::invalid_argument("box has negative extent or non-finite values");
  return box;
}

GroundingRecord parse_record(const json& j, BoxFormat format) {
  if (!j.is_object()) throw std::invalid_argument("record must be an object");
  GroundingRecord rec;
  rec.id = j.at("id").get<std::string>();
  if (rec.id.empty()) throw std::invalid_argument("record id must be nonempty");
  for (const auto& b : j.at("gt_boxes")) rec.gt_boxes.push_back(parse_box(b, format));
  if (rec.gt_boxes.empty()) throw std::invalid_argument("record needs at least one gt box");
  for (const auto& b : rec.gt_boxes) {
    if (geometry::area(b) <= 0.0) throw std::invalid_argument("gt box must have positive area");
  }
  for (const auto& b : j.at("pred_boxes")) rec.pred_boxes.push_back(parse_box(b, format));
  rec.answer_correct = j.at("answer_correct").get<bool>();
  return rec;
}

}  // namespace

ParseResult read_records(const std::string& path, const ParseOptions& options) {
  const std::string text = report::read_text_file(path);

  ParseResult result;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::set<std::string> seen_ids;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (!header_seen) {
        const std::string fmt = j.at("box_format").get<std::string>();
        if (fmt == "xywh") {
          result.format = BoxFormat::Xywh;
        } else if (fmt == "xyxy") {
          result.format = BoxFormat::Xyxy;
        } else {
          throw std::invalid_argument("box_format must be \"xywh\" or \"xyxy\"");
        }
        if (j.at("version").get<int>() != 1) {
          throw std::invalid_argument("unsupported record file version");
        }
        header_seen = true;
        continue;
      }
      GroundingRecord rec = parse_record(j, result.format);
      if (!seen_ids.insert(rec.id).second) {
        throw std::invalid_argument("duplicate record id \"" + rec.id + "\"");
      }
      result.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      result.line_errors.push_back("line " + std::to_string(line_no) + ": " + e.what());
      ++result.skipped;
    }
  }

  if (!header_seen) throw std::invalid_argument(path + ": missing box_format header line");
  if (!options.lenient && !result.line_errors.empty()) {
    std::string msg = path + ": " + std::to_string(result.line_errors.size()) + " malformed line(s):";
    for (const auto& err : result.line_errors) msg += "\n  " + err;
    throw std::invalid_argument(msg);
  }
  if (result.records.empty()) throw std::invalid_argument(path + ": no records");
  return result;
}

RecordClassification classify_record(const GroundingRecord& record, double tau,
                                     SweepMetric metric, geometry::GtAggregation agg) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must be in [0,1]");
  RecordClassification out;
  out.id = record.id;
  out.answer_correct = record.answer_correct;

  try {
    if (metric == SweepMetric::Iogt) {
      out.score = geometry::coverage_score(record.pred_boxes, record.gt_boxes, agg);
    } else {
      if (record.gt_boxes.empty()) throw std::invalid_argument("degenerate ground truth");
      double score = agg == geometry::GtAggregation::All ? 1.0 : 0.0;
      for (const auto& gt : record.gt_boxes) {
        double best = 0.0;
        for (const auto& pred : record.pred_boxes) {
          if (geometry::area(pred) + geometry::area(gt) <= 0.0) out.flagged = true;
          best = std::max(best, geometry::iou(pred, gt));
        }
        score = agg == geometry::GtAggregation::All ? std::min(score, best)
                                                    : std::max(score, best);
      }
      out.score = score;
    }
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("record \"" + record.id + "\": " + e.what());
  }
  out.grounding_correct = out.score > tau;
  return out;
}

PilotReport pilot_report(std::span<const GroundingRecord> records, double tau, SweepMetric metric,
                         geometry::GtAggregation agg) {
  if (records.empty()) throw std::invalid_argument("no records");
  PilotReport report;
  report.tau = tau;
  report.per_record.reserve(records.size());
  for (const GroundingRecord& rec : records) {
    RecordClassification c = classify_record(rec, tau, metric, agg);
    if (c.grounding_correct) {
      c.answer_correct ? ++report.joint.n11 : ++report.joint.n10;
    } else {
      c.answer_correct ? ++report.joint.n01 : ++report.joint.n00;
    }
    report.per_record.push_back(std::move(c));
  }
  if (report.joint.n01 + report.joint.n11 > 0) {
    report.misgrounded_given_correct = stats::misgrounded_given_correct(report.joint);
  }
  report.mi_nats = stats::mutual_information(report.joint);
  return report;
}

std::vector<SweepPoint> threshold_sweep(std::span<const GroundingRecord> records,
                                        std::span<const double> taus, SweepMetric metric,
                                        geometry::GtAggregation agg) {
  if (records.empty()) throw std::invalid_argument("no records");
  if (taus.empty()) throw std::invalid_argument("no thresholds");
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] >= 0.0 && taus[i] <= 1.0)) throw std::invalid_argument("tau must be in [0,1]");
    if (i > 0 && taus[i] < taus[i - 1]) {
      throw std::invalid_argument("thresholds must be sorted ascending");
    }
  }

  std::vector<double> scores;
  scores.reserve(records.size());
  for (const GroundingRecord& rec : records) {
    scores.push_back(classify_record(rec, 0.0, metric, agg).score);
  }

  std::vector<SweepPoint> curve;
  curve.reserve(taus.size());
  for (double tau : taus) {
    std::size_t correct = 0;
    for (double s : scores) {
      if (s > tau) ++correct;
    }
    curve.push_back(
        SweepPoint{tau, static_cast<double>(correct) / static_cast<double>(records.size())});
  }
  return curve;
}

void write_records(const std::string& path, std::span<const GroundingRecord> records) {
  std::string out = R"({"box_format": "xywh", "version": 1})";
  out += "\n";
  for (const GroundingRecord& rec : records) {
    json j;
    j["id"] = rec.id;
    auto boxes = [](const std::vector<geometry::BoundingBox>& bs) {
      json arr = json::array();
      for (const auto& b : bs) arr.push_back({b.x, b.y, b.w, b.h});
      return arr;
    };
    j["gt_boxes"] = boxes(rec.gt_boxes);
    j["pred_boxes"] = boxes(rec.pred_boxes);
    j["answer_correct"] = rec.answer_correct;
    out += j.dump();
    out += "\n";
  }
  report::write_text_file(path, out);
}

}  // namespace hartlab::evalharness
