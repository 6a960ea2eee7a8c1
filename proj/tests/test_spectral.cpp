#include <gtest/gtest.h>

#include "support.hpp"

using namespace cpr;
using cpr::testing::adjusted_rand_index;
using cpr::testing::planted_blocks;

namespace {

std::vector<std::size_t> block_labels(std::size_t blocks, std::size_t size) {
  std::vector<std::size_t> out;
  for (std::size_t b = 0; b < blocks; ++b) out.insert(out.end(), size, b);
  return out;
}

Eigen::MatrixXd random_graph(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd A(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < A.rows(); ++r)
    for (Eigen::Index c = 0; c < A.cols(); ++c)
      A(r, c) = rng.bernoulli(0.6) ? 0.05 + rng.uniform() : 0.0;
  for (Eigen::Index r = 0; r < A.rows(); ++r) A(r, r % A.cols()) += 0.5;
  for (Eigen::Index c = 0; c < A.cols(); ++c) A(c % A.rows(), c) += 0.5;
  return A;
}

}  // namespace

TEST(KMeans, EachPointOwnCluster) {
  Eigen::MatrixXd P(4, 2);
  P << 0, 0, 1, 0, 0, 1, 5, 5;
  auto r = kmeans(P, 4, 3);
  std::set<std::size_t> ids(r.assignment.begin(), r.assignment.end());
  EXPECT_EQ(ids.size(), 4u);
  EXPECT_NEAR(r.objective(), 0.0, 1e-15);
}

TEST(KMeans, SeparatedPairsMatchBruteForce) {
  Eigen::MatrixXd P(4, 2);
  P << 0, 0, 0, 1, 10, 10, 11, 10;
  // Brute force over all 2-partitions of the 4 points.
  double best = std::numeric_limits<double>::infinity();
  for (int mask = 1; mask < 15; ++mask) {
    double sse = 0;
    for (int side = 0; side < 2; ++side) {
      Eigen::RowVector2d mean = Eigen::RowVector2d::Zero();
      int cnt = 0;
      for (int i = 0; i < 4; ++i)
        if (((mask >> i) & 1) == side) {
          mean += P.row(i);
          ++cnt;
        }
      mean /= cnt;
      for (int i = 0; i < 4; ++i)
        if (((mask >> i) & 1) == side) sse += (P.row(i) - mean).squaredNorm();
    }
    best = std::min(best, sse);
  }
  auto r = kmeans(P, 2, 9);
  EXPECT_EQ(r.assignment[0], r.assignment[1]);
  EXPECT_EQ(r.assignment[2], r.assignment[3]);
  EXPECT_NE(r.assignment[0], r.assignment[2]);
  EXPECT_NEAR(r.objective(), best, 1e-12);
  EXPECT_NEAR(r.objective(), 0.5 + 0.5, 1e-12);
}

TEST(KMeans, DeterministicMonotoneAndErrors) {
  Rng rng(5);
  Eigen::MatrixXd P(60, 3);
  for (Eigen::Index i = 0; i < P.rows(); ++i)
    for (Eigen::Index j = 0; j < P.cols(); ++j) P(i, j) = rng.uniform();
  auto a = kmeans(P, 5, 77), b = kmeans(P, 5, 77);
  EXPECT_EQ(a.assignment, b.assignment);
  for (std::size_t i = 1; i < a.objective_history.size(); ++i)
    EXPECT_LE(a.objective_history[i], a.objective_history[i - 1] + 1e-12);
  EXPECT_THROW(kmeans(P, 0, 1), ValidationError);
  EXPECT_THROW(kmeans(P, 61, 1), ValidationError);
}

TEST(KMeans, DuplicatePointsStillFillEveryCluster) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(6, 2);
  P(5, 0) = 1;
  auto r = kmeans(P, 3, 1);
  std::set<std::size_t> ids(r.assignment.begin(), r.assignment.end());
  EXPECT_EQ(ids.size(), 3u);
}

TEST(Spectral, ResidualAndLeadingValue) {
  for (std::uint64_t g = 0; g < 20; ++g) {
    auto A = random_graph(4 + g % 7, 3 + g % 5, g);
    auto An = normalized_adjacency(A);
    auto trip = singular_triplets(An);
    EXPECT_NEAR(trip[0].sigma, 1.0, 1e-8);
    for (const auto& t : trip) EXPECT_LE((An * t.v - t.sigma * t.u).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Spectral, ZeroDegreeNodeIsNumericalError) {
  Eigen::MatrixXd A(2, 2);
  A << 1, 0, 0, 0;
  try {
    normalized_adjacency(A);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numerical);
  }
}

TEST(Spectral, SingleCluster) {
  auto cc = spectral_coclusters(random_graph(4, 3, 1), 1, 0);
  EXPECT_EQ(cc.row_assign, std::vector<std::size_t>(4, 0));
  EXPECT_EQ(cc.col_assign, std::vector<std::size_t>(3, 0));
}

TEST(Spectral, TwoDisjointBlocks) {
  auto A = planted_blocks(2, 3, 3, 1.0, 0.0);
  auto cc = spectral_coclusters(A, 2, 4);
  EXPECT_EQ(adjusted_rand_index(cc.row_assign, block_labels(2, 3)), 1.0);
  EXPECT_EQ(adjusted_rand_index(cc.col_assign, block_labels(2, 3)), 1.0);
  EXPECT_EQ(cc.row_assign[0], cc.col_assign[0]);
  EXPECT_EQ(cc.row_assign[3], cc.col_assign[3]);
}

TEST(Spectral, PlantedBlocksRecovered) {
  for (std::size_t k : {2u, 3u, 4u}) {
    auto A = planted_blocks(k, 5, 5, 1.0, 0.01);
    auto cc = spectral_coclusters(A, k, 11);
    std::vector<std::size_t> all = cc.row_assign;
    all.insert(all.end(), cc.col_assign.begin(), cc.col_assign.end());
    auto truth = block_labels(k, 5);
    auto both = truth;
    both.insert(both.end(), truth.begin(), truth.end());
    EXPECT_DOUBLE_EQ(adjusted_rand_index(all, both), 1.0) << "k=" << k;
  }
}

TEST(Spectral, ScaleInvariance) {
  for (std::uint64_t g = 0; g < 10; ++g) {
    auto A = random_graph(8, 6, 100 + g);
    auto a = spectral_coclusters(A, 3, 5);
    auto b = spectral_coclusters(A * 37.5, 3, 5);
    std::vector<std::size_t> la = a.row_assign, lb = b.row_assign;
    la.insert(la.end(), a.col_assign.begin(), a.col_assign.end());
    lb.insert(lb.end(), b.col_assign.begin(), b.col_assign.end());
    EXPECT_DOUBLE_EQ(adjusted_rand_index(la, lb), 1.0);
  }
}

TEST(Spectral, InvalidK) {
  auto A = planted_blocks(2, 2, 2, 1, 0);
  EXPECT_THROW(spectral_coclusters(A, 9, 0), ValidationError);
  EXPECT_THROW(spectral_coclusters(A, 0, 0), ValidationError);
}

TEST(Spectral, EmbeddingDimensions) {
  auto A = planted_blocks(4, 3, 3, 1.0, 0.01);
  auto emb = spectral_embedding(A, 4);
  EXPECT_EQ(emb.used.size(), 3u);  // symmetric blocks tie all three nontrivial values
  EXPECT_NEAR(emb.Z.norm(), 1.0, 1e-12);
  EXPECT_EQ(emb.Z.rows(), 24);
}
