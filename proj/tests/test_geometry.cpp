#include <doctest.h>

#include <stdexcept>
#include <vector>

#include "hartlab/geometry.hpp"
#include "hartlab/rng.hpp"

using namespace hartlab;
using geometry::BoundingBox;

namespace {

BoundingBox random_box(rng::Xoshiro256pp& gen) {
  return BoundingBox{gen.next_double() * 40.0 - 20.0, gen.next_double() * 40.0 - 20.0,
                     gen.next_double() * 20.0, gen.next_double() * 20.0};
}

}  // namespace

TEST_CASE("area") {
  CHECK(geometry::area({0, 0, 10, 10}) == 100.0);
  CHECK(geometry::area({5, 5, 0, 7}) == 0.0);
  CHECK(geometry::area({2.5, 0, 4, 3}) == 12.0);
}

TEST_CASE("intersection_area") {
  CHECK(geometry::intersection_area({0, 0, 10, 10}, {0, 0, 10, 10}) == 100.0);
  CHECK(geometry::intersection_area({0, 0, 5, 5}, {10, 10, 5, 5}) == 0.0);
  CHECK(geometry::intersection_area({0, 0, 10, 10}, {5, 5, 10, 10}) == 25.0);

  rng::Xoshiro256pp gen(11);
  for (int i = 0; i < 500; ++i) {
    const BoundingBox a = random_box(gen);
    const BoundingBox b = random_box(gen);
    const double inter = geometry::intersection_area(a, b);
    CHECK(inter == geometry::intersection_area(b, a));
    CHECK(inter >= 0.0);
    CHECK(inter <= std::min(geometry::area(a), geometry::area(b)) + 1e-12);
  }
}

TEST_CASE("iou") {
  CHECK(geometry::iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
  CHECK(geometry::iou({0, 0, 5, 5}, {10, 10, 5, 5}) == 0.0);
  CHECK(geometry::iou({0, 0, 10, 10}, {5, 0, 10, 10}) == doctest::Approx(50.0 / 150.0).epsilon(1e-12));
  // both degenerate: defined as 0
  CHECK(geometry::iou({1, 1, 0, 0}, {2, 2, 0, 0}) == 0.0);

  rng::Xoshiro256pp gen(12);
  for (int i = 0; i < 500; ++i) {
    const BoundingBox a = random_box(gen);
    const BoundingBox b = random_box(gen);
    CHECK(geometry::iou(a, b) == geometry::iou(b, a));
    if (geometry::area(a) > 0.0) CHECK(geometry::iou(a, a) == doctest::Approx(1.0));
  }
}

TEST_CASE("iogt") {
  const BoundingBox gt{0, 0, 10, 10};
  CHECK(geometry::iogt(std::vector<BoundingBox>{gt}, gt) == 1.0);
  CHECK(geometry::iogt(std::vector<BoundingBox>{}, gt) == 0.0);
  CHECK(geometry::iogt(std::vector<BoundingBox>{{0, 0, 5, 10}}, gt) == 0.5);
  CHECK_THROWS_AS(geometry::iogt(std::vector<BoundingBox>{gt}, BoundingBox{0, 0, 0, 5}),
                  std::invalid_argument);
}

TEST_CASE("iogt is monotone in the prediction set") {
  rng::Xoshiro256pp gen(13);
  for (int i = 0; i < 300; ++i) {
    BoundingBox gt = random_box(gen);
    if (geometry::area(gt) <= 0.0) gt.w = gt.h = 5.0;
    std::vector<BoundingBox> preds;
    double last = 0.0;
    for (int j = 0; j < 5; ++j) {
      preds.push_back(random_box(gen));
      const double cur = geometry::iogt(preds, gt);
      CHECK(cur >= last);
      last = cur;
    }
  }
}

TEST_CASE("iou and iogt are invariant under translation and scaling") {
  rng::Xoshiro256pp gen(14);
  for (int i = 0; i < 300; ++i) {
    BoundingBox gt = random_box(gen);
    if (geometry::area(gt) <= 0.0) gt.w = gt.h = 3.0;
    const BoundingBox pred = random_box(gen);
    const double dx = gen.next_double() * 10.0 - 5.0;
    const double dy = gen.next_double() * 10.0 - 5.0;
    const double s = 0.5 + gen.next_double() * 3.0;

    const BoundingBox gt_t{gt.x + dx, gt.y + dy, gt.w, gt.h};
    const BoundingBox pred_t{pred.x + dx, pred.y + dy, pred.w, pred.h};
    CHECK(geometry::iou(pred_t, gt_t) == doctest::Approx(geometry::iou(pred, gt)).epsilon(1e-9));
    CHECK(geometry::iogt(std::vector<BoundingBox>{pred_t}, gt_t) ==
          doctest::Approx(geometry::iogt(std::vector<BoundingBox>{pred}, gt)).epsilon(1e-9));

    const BoundingBox gt_s{gt.x * s, gt.y * s, gt.w * s, gt.h * s};
    const BoundingBox pred_s{pred.x * s, pred.y * s, pred.w * s, pred.h * s};
    CHECK(geometry::iou(pred_s, gt_s) == doctest::Approx(geometry::iou(pred, gt)).epsilon(1e-9));
    CHECK(geometry::iogt(std::vector<BoundingBox>{pred_s}, gt_s) ==
          doctest::Approx(geometry::iogt(std::vector<BoundingBox>{pred}, gt)).epsilon(1e-9));
  }
}

TEST_CASE("grounding_correct uses a strict threshold") {
  const BoundingBox gt{0, 0, 10, 10};
  // coverage 0.5 vs tau 0.3
  CHECK(geometry::grounding_correct(std::vector<BoundingBox>{{0, 0, 5, 10}}, gt, 0.3));
  // coverage exactly 0.3 does not pass
  CHECK_FALSE(geometry::grounding_correct(std::vector<BoundingBox>{{0, 0, 3, 10}}, gt, 0.3));
  // no overlap at tau 0 does not pass either
  CHECK_FALSE(geometry::grounding_correct(std::vector<BoundingBox>{{20, 20, 5, 5}}, gt, 0.0));
  CHECK_THROWS_AS(geometry::grounding_correct(std::vector<BoundingBox>{gt}, gt, 1.5),
                  std::invalid_argument);
}

TEST_CASE("multi ground-truth aggregation") {
  const std::vector<BoundingBox> gts{{0, 0, 10, 10}, {100, 0, 10, 10}};
  const std::vector<BoundingBox> preds{{0, 0, 10, 10}};  // covers only the first gt
  CHECK(geometry::grounding_correct(preds, gts, 0.3, geometry::GtAggregation::Any));
  CHECK_FALSE(geometry::grounding_correct(preds, gts, 0.3, geometry::GtAggregation::All));

  const std::vector<BoundingBox> both{{0, 0, 10, 10}, {100, 0, 10, 10}};
  CHECK(geometry::grounding_correct(both, gts, 0.3, geometry::GtAggregation::All));
  CHECK(geometry::coverage_score(preds, gts, geometry::GtAggregation::All) == 0.0);
  CHECK(geometry::coverage_score(preds, gts, geometry::GtAggregation::Any) == 1.0);
}

TEST_CASE("corner-format conversion") {
  const BoundingBox b = BoundingBox::from_corners(2.0, 3.0, 12.0, 8.0);
  CHECK(b == BoundingBox{2.0, 3.0, 10.0, 5.0});
  CHECK_FALSE(BoundingBox::from_corners(5.0, 0.0, 1.0, 2.0).valid());
}
