#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cner {

using EmbeddingMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Word vectors, one row per word.
struct EmbeddingTable {
  std::vector<std::string> words;
  EmbeddingMatrix vectors;  // words.size() x dim
  std::unordered_map<std::string, Eigen::Index> rows;
  /// Number of later rows that replaced an earlier entry for the same word.
  std::size_t duplicates_overridden = 0;

  Eigen::Index dim() const { return vectors.cols(); }
  std::size_t size() const { return words.size(); }
  const double* find(std::string_view word) const;
};

/// Text format: optional "count dim" header, then "word v1 ... vd" per line.
EmbeddingTable load_embeddings(std::istream& in, const std::string& source = "<embeddings>",
                               bool normalize_nfc = true);
EmbeddingTable load_embeddings(const std::filesystem::path& path, bool normalize_nfc = true);

struct ClusterModel {
  EmbeddingMatrix centroids;  // k x dim
  std::unordered_map<std::string, int> assignment;
  double inertia = 0;

  int k() const { return static_cast<int>(centroids.rows()); }
  /// Id handed to words with no stored assignment and no vector.
  int oov_id() const { return k(); }
};

struct KMeansOptions {
  int k = 64;
  std::uint64_t seed = 0;
  int max_iter = 100;
  /// Stop once no centroid moves farther than this (Euclidean).
  double tol = 1e-8;
};

struct KMeansResult {
  ClusterModel model;
  /// Inertia after each assignment step.
  std::vector<double> inertia_history;
  int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding over the canonically sorted vocabulary.
KMeansResult kmeans(const EmbeddingTable& table, const KMeansOptions& options);

/// Stored id, else nearest centroid for a word found in `vectors`, else oov_id().
int assign_cluster(const ClusterModel& model, std::string_view word, const EmbeddingTable* vectors = nullptr);

/// Sum of squared distances from each assigned word to its centroid.
double recompute_inertia(const ClusterModel& model, const EmbeddingTable& table);

void save_clusters(const ClusterModel& model, std::ostream& out);
void save_clusters(const ClusterModel& model, const std::filesystem::path& path);
ClusterModel load_clusters(std::istream& in, const std::string& source = "<clusters>");
ClusterModel load_clusters(const std::filesystem::path& path);

}  // namespace cner
