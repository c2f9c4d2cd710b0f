#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "skm/scan_log.hpp"
#include "skm/scan_pipeline.hpp"

using namespace skm;

namespace {

RangeScan ring_scan(const Pose2& pose, std::size_t beams, double range, double max_range) {
  RangeScan s;
  s.pose = pose;
  s.max_range = max_range;
  for (std::size_t i = 0; i < beams; ++i) {
    s.angles.push_back(-std::numbers::pi + 2.0 * std::numbers::pi * static_cast<double>(i) / beams);
    s.ranges.push_back(range);
  }
  return s;
}

SampleGrid<2> grid(double size, double res = 0.25) {
  SampleGrid<2> g;
  g.origin = Point2(-size / 2, -size / 2);
  g.resolution = res;
  g.extents = Cell2::Constant(static_cast<std::int64_t>(std::llround(size / res)));
  return g;
}

}  // namespace

TEST(ScanToObstacles, Geometry) {
  RangeScan s;
  s.pose = {Point2(0, 0), 0.0};
  s.max_range = 5;
  s.angles = {0.0, 1.0};
  s.ranges = {2.0, 5.0};
  auto obs = scan_to_obstacles(s, 0.3);
  ASSERT_EQ(obs.size(), 1u);
  EXPECT_NEAR(obs[0].center.x(), 2.0, 1e-12);
  EXPECT_NEAR(obs[0].center.y(), 0.0, 1e-12);
  EXPECT_EQ(obs[0].radius, 0.3);

  s.pose = {Point2(1, 1), std::numbers::pi / 2};
  s.angles = {0.0};
  s.ranges = {1.0};
  obs = scan_to_obstacles(s, 0.0);
  ASSERT_EQ(obs.size(), 1u);
  EXPECT_NEAR(obs[0].center.x(), 1.0, 1e-12);
  EXPECT_NEAR(obs[0].center.y(), 2.0, 1e-12);

  EXPECT_TRUE(scan_to_obstacles(ring_scan({Point2(0, 0), 0}, 16, 4.0, 4.0), 0.25).empty());
}

TEST(FreeSpaceTest, Rules) {
  const auto s = ring_scan({Point2(0, 0), 0}, 360, 3.0, 8.0);
  EXPECT_TRUE(free_space_test(Point2(0, 0), s, 0.25));
  // beam at angle 0 exists exactly (index 180)
  EXPECT_TRUE(free_space_test(Point2(0.9 * 3.0, 0), s, 0.0));
  EXPECT_FALSE(free_space_test(Point2(3.1, 0), s, 0.0));
  // r shrinks the free interval
  EXPECT_FALSE(free_space_test(Point2(2.9, 0), s, 0.25));
  EXPECT_TRUE(free_space_test(Point2(2.7, 0), s, 0.25));

  const auto empty = ring_scan({Point2(0, 0), 0}, 360, 8.0, 8.0);
  EXPECT_TRUE(free_space_test(Point2(7.9, 0), empty, 0.25));
  EXPECT_FALSE(free_space_test(Point2(8.1, 0), empty, 0.25));
}

TEST(FreeSpaceTest, BracketingAndGaps) {
  RangeScan s;
  s.pose = {Point2(0, 0), 0};
  s.max_range = 10;
  s.angles = {-0.1, 0.0, 0.1, 0.2};
  s.ranges = {10, 5, 2, 10};
  // Between the 5 m and 2 m beams the smaller limit applies.
  const Point2 dir(std::cos(0.05), std::sin(0.05));
  EXPECT_TRUE(free_space_test(Point2(1.9 * dir), s, 0.0));
  EXPECT_FALSE(free_space_test(Point2(2.1 * dir), s, 0.0));
  // Outside the field of view (wraparound gap much larger than spacing).
  EXPECT_FALSE(free_space_test(Point2(-1, 0), s, 0.0));
}

TEST(GenerateBatch, EmptySpaceGivesOnlyFree) {
  const auto g = grid(20);
  const SupportVectorModel<2> m;
  const auto gb = generate_batch(ring_scan({Point2(0.1, 0.1), 0}, 360, 6.0, 6.0), g, m, AugmentationConfig{}, 0.25);
  ASSERT_FALSE(gb.batch.empty());
  EXPECT_EQ(gb.occupied, 0u);
  for (const auto& s : gb.batch.samples) EXPECT_EQ(s.label, Label::Free);
  EXPECT_NO_THROW(gb.batch.validate());
  EXPECT_LE(gb.observed_free, 64u);
}

TEST(GenerateBatch, SingleHitDiscAndCollar) {
  const auto g = grid(20);
  const SupportVectorModel<2> m;
  RangeScan s = ring_scan({Point2(0.1, 0.1), 0}, 360, 6.0, 6.0);
  s.ranges[180] = 3.0;  // angle 0
  const double r = 0.25;
  const AugmentationConfig cfg;
  const auto gb = generate_batch(s, g, m, cfg, r);
  EXPECT_NO_THROW(gb.batch.validate());
  const Point2 hit = s.endpoint(180);
  std::vector<Point2> pos, neg;
  for (const auto& smp : gb.batch.samples) (smp.label == Label::Occupied ? pos : neg).push_back(smp.position);
  ASSERT_FALSE(pos.empty());
  EXPECT_EQ(pos.size(), gb.occupied);
  // Occupied samples form the disc of radius r (plus the endpoint cell).
  std::size_t disc = 0;
  for (std::int64_t y = 0; y < g.extents.y(); ++y)
    for (std::int64_t x = 0; x < g.extents.x(); ++x)
      if ((cell_center(Cell2(x, y), g) - hit).norm() <= r) ++disc;
  EXPECT_GE(pos.size(), disc);
  EXPECT_LE(pos.size(), disc + 1);
  for (const auto& p : pos) {
    const bool own_cell = point_to_cell(p, g) == point_to_cell(hit, g);
    EXPECT_TRUE(own_cell || (p - hit).norm() <= r + 1e-12);
    bool has_neighbor = false;
    for (const auto& q : neg)
      if ((p - q).cwiseAbs().maxCoeff() < cfg.neighbor_threshold) has_neighbor = true;
    EXPECT_TRUE(has_neighbor);
  }
  EXPECT_GT(gb.augmented, 0u);
}

TEST(GenerateBatch, ExistingSupportVectorsNotInCollar) {
  const auto g = grid(20);
  RangeScan s = ring_scan({Point2(0.1, 0.1), 0}, 360, 6.0, 6.0);
  s.ranges[180] = 3.0;
  SupportVectorModel<2> empty;
  const auto first = generate_batch(s, g, empty, AugmentationConfig{}, 0.25);
  const std::size_t n_bar = first.occupied + first.observed_free;
  ASSERT_GT(first.augmented, 0u);
  const Point2 collar_pt = first.batch.samples[n_bar].position;

  SupportVectorModel<2> m;
  m.add(Label::Free, collar_pt, 1.0);
  const auto second = generate_batch(s, g, m, AugmentationConfig{}, 0.25);
  for (std::size_t i = second.occupied + second.observed_free; i < second.batch.size(); ++i)
    EXPECT_NE(second.batch.samples[i].position, collar_pt);
  EXPECT_EQ(second.augmented + 1, first.augmented);
}

TEST(GenerateBatch, EndpointCellIsTheCellTheBeamEnters) {
  const auto g = grid(20);
  // Beam 0 points along -x and ends exactly on the face x = 0.
  RangeScan s = ring_scan({Point2(2.1, 0.1), 0}, 360, 6.0, 6.0);
  s.ranges[0] = 2.1;
  const auto gb = generate_batch(s, g, SupportVectorModel<2>{}, AugmentationConfig{}, 0.0);
  ASSERT_EQ(gb.occupied, 1u);
  EXPECT_NEAR(gb.batch.samples[0].position.x(), -0.125, 1e-12);
  EXPECT_NEAR(gb.batch.samples[0].position.y(), 0.125, 1e-12);

  s = ring_scan({Point2(-2.1, 0.1), 0}, 360, 6.0, 6.0);
  s.ranges[180] = 2.1;
  const auto gb2 = generate_batch(s, g, SupportVectorModel<2>{}, AugmentationConfig{}, 0.0);
  ASSERT_EQ(gb2.occupied, 1u);
  EXPECT_NEAR(gb2.batch.samples[0].position.x(), 0.125, 1e-12);
}

TEST(GenerateBatch, SkipModelOccupiedCollar) {
  const auto g = grid(20);
  RangeScan s = ring_scan({Point2(0.1, 0.1), 0}, 360, 6.0, 6.0);
  s.ranges[180] = 3.0;
  SupportVectorModel<2> m;
  m.add(Label::Occupied, s.endpoint(180) + Vector2(0.6, 0.0), 10.0);
  AugmentationConfig cfg;
  const auto plain = generate_batch(s, g, m, cfg, 0.0);
  cfg.skip_model_occupied = true;
  const auto skipped = generate_batch(s, g, m, cfg, 0.0);
  ASSERT_GT(plain.augmented, 0u);
  EXPECT_LT(skipped.augmented, plain.augmented);
  for (std::size_t i = skipped.occupied + skipped.observed_free; i < skipped.batch.size(); ++i)
    EXPECT_EQ(m.classify(skipped.batch.samples[i].position), Label::Free);
}

TEST(GenerateBatch, FreeSubsamplingCap) {
  const auto g = grid(30);
  AugmentationConfig cfg;
  cfg.free_min = 10;
  cfg.free_ratio = 2.0;
  RangeScan s = ring_scan({Point2(0.1, 0.1), 0}, 360, 8.0, 8.0);
  s.ranges[0] = 4.0;
  const auto gb = generate_batch(s, g, SupportVectorModel<2>{}, cfg, 0.0);
  EXPECT_LE(gb.observed_free, std::max<std::size_t>(10, 2 * gb.occupied));
  EXPECT_GT(gb.observed_cells.size(), gb.observed_free);
}

TEST(GenerateBatch, PoseOffGrid) {
  const auto g = grid(4);
  EXPECT_THROW(generate_batch(ring_scan({Point2(10, 10), 0}, 8, 1.0, 2.0), g, SupportVectorModel<2>{},
                              AugmentationConfig{}, 0.25),
               OutOfRangeError);
}

TEST(AugmentationConfig, Validation) {
  AugmentationConfig c;
  c.neighbor_threshold = 0.1;
  EXPECT_THROW(c.validate(0.25), InvalidArgumentError);
  c.neighbor_threshold = 0.0;
  EXPECT_THROW(c.validate(0.25), InvalidArgumentError);
}

TEST(ScanLog, RoundTripAndErrors) {
  std::vector<RangeScan> scans{ring_scan({Point2(1, 2), 0.5}, 4, 1.5, 3.0), ring_scan({Point2(0, 0), 0}, 2, 3.0, 3.0)};
  std::stringstream ss;
  write_scan_log(ss, scans);
  ss << "\n";
  std::stringstream in(ss.str());
  const auto back = read_scan_log(in);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].pose.position, Point2(1, 2));
  EXPECT_EQ(back[0].ranges, scans[0].ranges);
  std::stringstream bad("{\"t\":0}\n");
  EXPECT_THROW(read_scan_log(bad), ParseError);
  std::stringstream bad2("{\"pose\":[0,0,0],\"angles\":[0],\"ranges\":[5],\"max_range\":1}\n");
  EXPECT_THROW(read_scan_log(bad2), ParseError);
  std::stringstream empty("");
  EXPECT_TRUE(read_scan_log(empty).empty());
}
