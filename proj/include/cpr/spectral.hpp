#pragma once

// Bipartite spectral co-clustering. Rows and columns of a nonnegative
// association matrix A are embedded jointly through the singular vectors of
// the degree-normalized matrix A_n = D1^{-1/2} A D2^{-1/2}, then clustered
// with k-means.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <cstdint>
#include <vector>

#include "cpr/error.hpp"
#include "cpr/kmeans.hpp"

namespace cpr {

struct SingularTriplet {
  double sigma = 0.0;
  Eigen::VectorXd u;  // left (row) singular vector
  Eigen::VectorXd v;  // right (column) singular vector
};

/// D1^{-1/2} A D2^{-1/2}. Every row and column must have positive degree.
inline Eigen::MatrixXd normalized_adjacency(const Eigen::MatrixXd& A) {
  const Eigen::VectorXd d1 = A.rowwise().sum();
  const Eigen::VectorXd d2 = A.colwise().sum().transpose();
  if ((d1.array() <= 0.0).any() || (d2.array() <= 0.0).any())
    throw Error(ErrorKind::numerical, "zero-degree node in bipartite graph");
  const Eigen::VectorXd s1 = d1.array().rsqrt();
  const Eigen::VectorXd s2 = d2.array().rsqrt();
  return s1.asDiagonal() * A * s2.asDiagonal();
}

/// Full thin SVD, singular values descending. Signs are canonical: the
/// largest-magnitude entry of the stacked [u; v] is positive.
inline std::vector<SingularTriplet> singular_triplets(const Eigen::MatrixXd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  std::vector<SingularTriplet> out;
  const auto& s = svd.singularValues();
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    SingularTriplet t{s[i], svd.matrixU().col(i), svd.matrixV().col(i)};
    double best = 0.0;
    double sign = 1.0;
    for (Eigen::Index r = 0; r < t.u.size(); ++r)
      if (std::abs(t.u[r]) > best + 1e-12) {
        best = std::abs(t.u[r]);
        sign = t.u[r] < 0 ? -1.0 : 1.0;
      }
    for (Eigen::Index r = 0; r < t.v.size(); ++r)
      if (std::abs(t.v[r]) > best + 1e-12) {
        best = std::abs(t.v[r]);
        sign = t.v[r] < 0 ? -1.0 : 1.0;
      }
    t.u *= sign;
    t.v *= sign;
    out.push_back(std::move(t));
  }
  return out;
}

struct CoClustering {
  std::size_t k = 1;
  std::vector<std::size_t> row_assign;
  std::vector<std::size_t> col_assign;
};

struct SpectralEmbedding {
  Eigen::MatrixXd normalized;             // A_n
  std::vector<SingularTriplet> used;      // nontrivial pairs used for Z
  Eigen::MatrixXd Z;                      // (rows + cols) x dims, unit Frobenius norm
};

/// Relative gap under which singular values count as tied. A tied group
/// straddling the cut-off is taken whole, since any single basis of that
/// subspace is arbitrary.
inline constexpr double kSingularTieTolerance = 1e-6;

/// Builds Z = [D1^{-1/2} U; D2^{-1/2} V] from singular vectors 2..l+1 with
/// l = ceil(log2 k). The trivial pair (D1^{1/2} 1, D2^{1/2} 1), whose singular
/// value is exactly 1, is deflated first, so disconnected graphs embed the
/// same way as connected ones.
inline SpectralEmbedding spectral_embedding(const Eigen::MatrixXd& A, std::size_t k) {
  SpectralEmbedding emb;
  emb.normalized = normalized_adjacency(A);
  const Eigen::VectorXd d1 = A.rowwise().sum();
  const Eigen::VectorXd d2 = A.colwise().sum().transpose();
  const Eigen::VectorXd u0 = d1.array().sqrt().matrix().normalized();
  const Eigen::VectorXd v0 = d2.array().sqrt().matrix().normalized();
  const Eigen::MatrixXd deflated = emb.normalized - u0 * v0.transpose();

  std::size_t dims = 0;
  while ((std::size_t{1} << dims) < k) ++dims;
  const auto triplets = singular_triplets(deflated);
  std::size_t take = std::min(dims, triplets.size());
  // Pairs with vanishing singular value carry no cluster structure.
  while (take > 0 && triplets[take - 1].sigma <= 1e-10) --take;
  while (take > 0 && take < triplets.size() &&
         triplets[take].sigma >=
             triplets[take - 1].sigma * (1.0 - kSingularTieTolerance) &&
         triplets[take].sigma > kSingularTieTolerance)
    ++take;
  for (std::size_t i = 0; i < take; ++i) emb.used.push_back(triplets[i]);

  const auto rows = A.rows(), cols = A.cols();
  emb.Z = Eigen::MatrixXd::Zero(rows + cols, static_cast<Eigen::Index>(take));
  for (std::size_t c = 0; c < take; ++c) {
    const auto ci = static_cast<Eigen::Index>(c);
    emb.Z.col(ci).head(rows) = emb.used[c].u.array() / d1.array().sqrt();
    emb.Z.col(ci).tail(cols) = emb.used[c].v.array() / d2.array().sqrt();
  }
  const double norm = emb.Z.norm();
  if (norm > 0) emb.Z /= norm;
  return emb;
}

/// Co-clusters rows and columns of the nonnegative matrix A into k groups.
inline CoClustering spectral_coclusters(const Eigen::MatrixXd& A, std::size_t k,
                                        std::uint64_t seed) {
  const auto rows = static_cast<std::size_t>(A.rows());
  const auto cols = static_cast<std::size_t>(A.cols());
  if (rows == 0 || cols == 0) throw ValidationError("co-clustering needs a non-empty graph");
  if (k < 1 || k > rows + cols)
    throw ValidationError("invalid k: " + std::to_string(k) + " clusters for " +
                          std::to_string(rows + cols) + " nodes");
  CoClustering cc;
  cc.k = k;
  if (k == 1) {
    normalized_adjacency(A);  // still rejects zero-degree nodes
    cc.row_assign.assign(rows, 0);
    cc.col_assign.assign(cols, 0);
    return cc;
  }
  const auto emb = spectral_embedding(A, k);
  const auto km = kmeans(emb.Z, k, seed);
  cc.row_assign.assign(km.assignment.begin(), km.assignment.begin() + static_cast<std::ptrdiff_t>(rows));
  cc.col_assign.assign(km.assignment.begin() + static_cast<std::ptrdiff_t>(rows), km.assignment.end());
  return cc;
}

}  // namespace cpr
