#pragma once

#include <filesystem>
#include <map>
#include <random>
#include <string>

#include "cpr/cpr.hpp"

namespace cpr::testing {

inline const Resources& bundled() {
  static const Resources res = Resources::load(CPR_DEFAULT_DATA_DIR);
  return res;
}

inline const Toolkit& toolkit() {
  static const Toolkit kit = Toolkit::load(CPR_DEFAULT_DATA_DIR);
  return kit;
}

inline std::filesystem::path bundled_corpus() {
  return std::filesystem::path(CPR_DEFAULT_DATA_DIR) / "corpus" / "synthetic40.jsonl";
}

inline TokenSequence words(std::initializer_list<std::string> texts,
                           const WordSet& stopwords = {}) {
  return comment_sequence(std::vector<std::string>(texts), stopwords);
}

/// Adjusted Rand index between two labelings of the same items.
inline double adjusted_rand_index(const std::vector<std::size_t>& a,
                                  const std::vector<std::size_t>& b) {
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  std::map<std::size_t, double> ca, cb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ca[a[i]] += 1;
    cb[b[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double sj = 0, sa = 0, sb = 0;
  for (const auto& [k, v] : joint) sj += c2(v);
  for (const auto& [k, v] : ca) sa += c2(v);
  for (const auto& [k, v] : cb) sb += c2(v);
  const double expected = sa * sb / c2(static_cast<double>(a.size()));
  const double max_index = (sa + sb) / 2;
  if (max_index == expected) return 1.0;
  return (sj - expected) / (max_index - expected);
}

/// Block-diagonal bipartite adjacency: `blocks` blocks of size rows x cols.
inline Eigen::MatrixXd planted_blocks(std::size_t blocks, std::size_t rows, std::size_t cols,
                                      double intra, double inter) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(blocks * rows),
                                                static_cast<Eigen::Index>(blocks * cols), inter);
  for (std::size_t b = 0; b < blocks; ++b)
    A.block(static_cast<Eigen::Index>(b * rows), static_cast<Eigen::Index>(b * cols),
            static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols))
        .setConstant(intra);
  return A;
}

class TempDir {
 public:
  TempDir() {
    static std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("cpr-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace cpr::testing
