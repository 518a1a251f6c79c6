#include <cmath>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "mfglab/errors.hpp"
#include "mfglab/grid.hpp"

using namespace mfglab;

TEST(Grid, NodeIndexingIsXFastest) {
  auto g = SpaceTimeGrid::build({2.0, 1.0}, {5, 3}, 1.0, 4);
  EXPECT_EQ(g->nodes(), 15);
  EXPECT_EQ(g->node(2, 1), 7);
  EXPECT_DOUBLE_EQ(g->x(7), 1.0);
  EXPECT_DOUBLE_EQ(g->y(7), 0.5);
  EXPECT_DOUBLE_EQ(g->t(3), 1.0);
}

TEST(Grid, CornersCarryOneEntryPerSide) {
  auto g = SpaceTimeGrid::build({1.0, 1.0}, {4, 4}, 1.0, 3);
  EXPECT_EQ(g->boundary_size(), 16);
  EXPECT_EQ(g->entries_at(g->node(0, 0)).size(), 2u);
  EXPECT_EQ(g->entries_at(g->node(1, 0)).size(), 1u);
  EXPECT_TRUE(g->entries_at(g->node(1, 1)).empty());
  for (const auto& e : g->boundary()) EXPECT_DOUBLE_EQ(std::hypot(e.normal[0], e.normal[1]), 1.0);
}

TEST(Grid, OneDimensionalBoundaryIsTwoPoints) {
  auto g = SpaceTimeGrid::build({1.0}, {9}, 1.0, 5);
  ASSERT_EQ(g->boundary_size(), 2);
  EXPECT_DOUBLE_EQ(g->boundary()[0].normal[0] + g->boundary()[1].normal[0], 0.0);
  EXPECT_DOUBLE_EQ(g->boundary_measure(), 2.0);
}

TEST(Grid, TrapezoidIsExactForBilinearSpaceTime) {
  auto g = SpaceTimeGrid::build({1.0, 2.0}, {7, 5}, 3.0, 4);
  ScalarField f(g);
  for (int n = 0; n < g->nt(); ++n)
    for (int k = 0; k < g->nodes(); ++k) f.at(k, n) = (1 + g->x(k)) * g->y(k) * g->t(n);
  // int_0^1 (1+x) dx * int_0^2 y dy * int_0^3 t dt = 1.5 * 2 * 4.5
  EXPECT_NEAR(integrate_interior(f), 13.5, 1e-12);
}

TEST(Grid, RejectsDegenerateSpecs) {
  EXPECT_THROW(SpaceTimeGrid::build({1.0}, {2}, 1.0, 5), ConfigError);
  EXPECT_THROW(SpaceTimeGrid::build({-1.0}, {9}, 1.0, 5), ConfigError);
  EXPECT_THROW(SpaceTimeGrid::build({1.0}, {9}, 0.0, 5), ConfigError);
  EXPECT_THROW(SpaceTimeGrid::build({1.0, 1.0, 1.0}, {4, 4, 4}, 1.0, 5), ConfigError);
}

TEST(Grid, PartitionMarksObservedEntries) {
  auto g = SpaceTimeGrid::build({1.0, 1.0}, {4, 4}, 1.0, 3);
  BoundaryPartition part(g, {Side::X1, Side::Y1});
  int observed = 0;
  for (int e = 0; e < g->boundary_size(); ++e) observed += part.entry_observed(e);
  EXPECT_EQ(observed, 8);
  EXPECT_TRUE(part.node_observed(g->node(3, 0)));
  EXPECT_FALSE(part.node_observed(g->node(0, 0)));
  EXPECT_EQ(parse_side("y1"), Side::Y1);
  EXPECT_THROW(parse_side("z0"), ConfigError);
}

TEST(Grid, FieldCsvHasProvenanceAndHeader) {
  auto g = SpaceTimeGrid::build({1.0}, {3}, 1.0, 3);
  ScalarField f(g, 0.25);
  const std::string path = ::testing::TempDir() + "field.csv";
  write_field_csv(path, f, "config_hash: abc, seed: 3");
  std::ifstream in(path);
  std::string l1, l2, l3;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  EXPECT_EQ(l1, "# config_hash: abc, seed: 3");
  EXPECT_EQ(l2, "x,t,value");
  EXPECT_EQ(l3, "0,0,0.25");
}
