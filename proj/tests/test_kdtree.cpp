#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "roadreg/kdtree.hpp"
#include "roadreg/kernels.hpp"

using namespace roadreg;

namespace {

std::vector<Eigen::Vector3d> random_points(std::mt19937_64& rng, std::size_t n, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<Eigen::Vector3d> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  return pts;
}

}  // namespace

TEST(KdTree, NearestMatchesBruteForce) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto target = random_points(rng, 500, 10.0);
    const auto queries = random_points(rng, 200, 12.0);
    const KdTree tree(target);
    const auto expected = oracle::brute_correspondences(queries, target, 3.0);
    std::size_t k = 0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const auto nn = tree.nearest(queries[i], 9.0);
      if (k < expected.size() && expected[k].source == static_cast<std::int32_t>(i)) {
        ASSERT_TRUE(nn.has_value());
        EXPECT_EQ(nn->index, expected[k].target);
        EXPECT_EQ(nn->squared_distance, expected[k].squared_distance);
        ++k;
      } else {
        EXPECT_FALSE(nn.has_value());
      }
    }
  }
}

TEST(KdTree, TiesGoToLowestIndex) {
  std::vector<Eigen::Vector3d> pts = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {1, 0, 0}};
  const KdTree tree(pts, 1);
  const auto nn = tree.nearest(Eigen::Vector3d::Zero(), 10.0);
  ASSERT_TRUE(nn.has_value());
  EXPECT_EQ(nn->index, 0);
  const auto dup = tree.nearest({1, 0, 0}, 10.0);
  EXPECT_EQ(dup->index, 0);
}

TEST(KdTree, RadiusSearchIsInclusiveAndSorted) {
  std::mt19937_64 rng(2);
  const auto pts = random_points(rng, 400, 5.0);
  const KdTree tree(pts);
  std::vector<std::int32_t> got;
  for (int q = 0; q < 50; ++q) {
    const Eigen::Vector3d c = pts[q];
    const double r = (pts[q] - pts[q + 1]).norm();
    tree.radius_search(c, r, got);
    std::vector<std::int32_t> expected;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if ((pts[i] - c).squaredNorm() <= r * r) expected.push_back(static_cast<std::int32_t>(i));
    }
    EXPECT_EQ(got, expected);
  }
}

TEST(KdTree, EmptyTreeFindsNothing) {
  const KdTree tree(std::span<const Eigen::Vector3d>{});
  EXPECT_FALSE(tree.nearest(Eigen::Vector3d::Zero(), 1e9).has_value());
}

TEST(Kernels, ParallelMatchesSerial) {
  std::mt19937_64 rng(4);
  const auto target = random_points(rng, 3000, 20.0);
  const auto queries = random_points(rng, 2000, 22.0);
  const KdTree tree(target);
  EXPECT_EQ(kernels::nearest_batch(tree, queries, 2.0),
            kernels::nearest_batch_serial(tree, queries, 2.0));
  EXPECT_EQ(kernels::radius_neighbors(tree, queries, 1.5),
            kernels::radius_neighbors_serial(tree, queries, 1.5));
  const Pose pose = Pose::from_xyz_rpy({1, 2, 3}, 0.1, 0.2, 0.3);
  EXPECT_EQ(kernels::transform_batch(pose, queries), kernels::transform_batch_serial(pose, queries));
}

TEST(Kernels, NearestBatchMarksMissesWithMinusOne) {
  const std::vector<Eigen::Vector3d> target = {{0, 0, 0}};
  const std::vector<Eigen::Vector3d> queries = {{0.5, 0, 0}, {5, 0, 0}};
  const KdTree tree(target);
  const auto nn = kernels::nearest_batch(tree, queries, 1.0);
  EXPECT_EQ(nn[0].index, 0);
  EXPECT_EQ(nn[1].index, -1);
}
