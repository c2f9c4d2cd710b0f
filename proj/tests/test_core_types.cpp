#include <gtest/gtest.h>

#include <numbers>

#include "skm/core_types.hpp"

using namespace skm;

namespace {

SampleGrid<2> unit_grid() {
  SampleGrid<2> g;
  g.origin = Point2::Zero();
  g.resolution = 0.25;
  g.extents = Cell2(8, 8);
  return g;
}

}  // namespace

TEST(PointToCell, FloorDivision) {
  const auto g = unit_grid();
  EXPECT_EQ(point_to_cell(Point2(0.6, 0.3), g), Cell2(2, 1));
  EXPECT_EQ(point_to_cell(Point2(0.0, 0.0), g), Cell2(0, 0));
  // floor(0.999 / 0.25) = floor(3.996) = 3
  EXPECT_EQ(point_to_cell(Point2(0.999, 0.999), g), Cell2(3, 3));
}

TEST(PointToCell, RejectsOutside) {
  const auto g = unit_grid();
  EXPECT_THROW(point_to_cell(Point2(-0.01, 0.5), g), OutOfRangeError);
  EXPECT_THROW(point_to_cell(Point2(2.0, 0.5), g), OutOfRangeError);
  EXPECT_THROW(point_to_cell(Point2(NAN, 0.5), g), OutOfRangeError);
}

TEST(CellCenter, HalfCellOffset) {
  const auto g = unit_grid();
  EXPECT_EQ(cell_center(Cell2(0, 0), g), Point2(0.125, 0.125));
  EXPECT_EQ(cell_center(Cell2(2, 1), g), Point2(0.625, 0.375));
  EXPECT_THROW(cell_center(Cell2(8, 0), g), OutOfRangeError);
}

TEST(CellCenter, RoundTripsEveryCell) {
  SampleGrid<2> g;
  g.origin = Point2(-3.3, 1.7);
  g.resolution = 0.1;
  g.extents = Cell2(37, 23);
  for (std::int64_t y = 0; y < g.extents.y(); ++y)
    for (std::int64_t x = 0; x < g.extents.x(); ++x) {
      const Cell2 c(x, y);
      ASSERT_EQ(point_to_cell(cell_center(c, g), g), c);
      ASSERT_EQ(g.unlinear(g.linear(c)), c);
    }
}

TEST(SampleGrid, Validation) {
  SampleGrid<2> g = unit_grid();
  g.resolution = 0.0;
  EXPECT_THROW(g.validate(), InvalidArgumentError);
  g = unit_grid();
  g.extents = Cell2(0, 3);
  EXPECT_THROW(g.validate(), InvalidArgumentError);
  EXPECT_NO_THROW(unit_grid().validate());
}

TEST(SampleGrid, ThreeDimensional) {
  SampleGrid<3> g;
  g.resolution = 0.5;
  g.extents = CellIndex<3>(4, 5, 6);
  EXPECT_EQ(g.cell_count(), 120);
  const CellIndex<3> c(3, 1, 5);
  EXPECT_EQ(point_to_cell(cell_center(c, g), g), c);
}

TEST(Label, Conversion) {
  EXPECT_EQ(sign_of(Label::Occupied), 1);
  EXPECT_EQ(sign_of(Label::Free), -1);
  EXPECT_EQ(label_from_int(-1), Label::Free);
  EXPECT_THROW(label_from_int(0), InvalidArgumentError);
}

TEST(NormalizeAngle, Range) {
  EXPECT_DOUBLE_EQ(normalize_angle(std::numbers::pi), std::numbers::pi);
  EXPECT_DOUBLE_EQ(normalize_angle(-std::numbers::pi), std::numbers::pi);
  EXPECT_NEAR(normalize_angle(3 * std::numbers::pi / 2), -std::numbers::pi / 2, 1e-12);
  EXPECT_NEAR(normalize_angle(7.0), 7.0 - 2 * std::numbers::pi, 1e-12);
}

TEST(KernelParams, Validation) {
  EXPECT_THROW((KernelParams{0.0, 1.0}.validate()), InvalidArgumentError);
  EXPECT_THROW((KernelParams{1.0, -1.0}.validate()), InvalidArgumentError);
  EXPECT_NO_THROW(KernelParams{}.validate());
}

TEST(RangeScan, EndpointsAndValidation) {
  RangeScan s;
  s.pose = {Point2(1, 1), std::numbers::pi / 2};
  s.angles = {0.0};
  s.ranges = {1.0};
  s.max_range = 5.0;
  EXPECT_TRUE(s.is_hit(0));
  EXPECT_NEAR(s.endpoint(0).x(), 1.0, 1e-12);
  EXPECT_NEAR(s.endpoint(0).y(), 2.0, 1e-12);
  s.ranges = {6.0};
  EXPECT_THROW(s.validate(), InvalidArgumentError);
  s.ranges = {1.0, 2.0};
  EXPECT_THROW(s.validate(), InvalidArgumentError);
}
