#include "cner/clustering.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "cner/error.hpp"
#include "cner/text.hpp"
#include "cner/unicode.hpp"

namespace cner {

const double* EmbeddingTable::find(std::string_view word) const {
  auto it = rows.find(std::string(word));
  return it == rows.end() ? nullptr : vectors.row(it->second).data();
}

// ---------------------------------------------------------------------------
// Embeddings

EmbeddingTable load_embeddings(std::istream& in, const std::string& source, bool normalize_nfc) {
  EmbeddingTable table;
  std::vector<std::vector<double>> values;
  long dim = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = text::split_ws(line);
    if (fields.empty()) continue;
    if (values.empty() && table.words.empty() && fields.size() == 2 && text::parse_int<long>(fields[0]) &&
        text::parse_int<long>(fields[1])) {
      continue;  // "vocab_count dim" header
    }
    if (fields.size() < 2) throw ParseError(source, line_no, "embedding row has no values");
    const long d = static_cast<long>(fields.size()) - 1;
    if (dim < 0) dim = d;
    if (d != dim)
      throw ParseError(source, line_no,
                       "expected " + std::to_string(dim) + " values, found " + std::to_string(d));
    std::vector<double> v(static_cast<std::size_t>(d));
    for (long i = 0; i < d; ++i) {
      auto x = text::parse_double(fields[static_cast<std::size_t>(i + 1)]);
      if (!x || !std::isfinite(*x)) throw ParseError(source, line_no, "bad embedding value");
      v[static_cast<std::size_t>(i)] = *x;
    }
    std::string word = normalize_nfc ? unicode::nfc(fields[0]) : std::string(fields[0]);
    if (auto it = table.rows.find(word); it != table.rows.end()) {
      values[static_cast<std::size_t>(it->second)] = std::move(v);
      ++table.duplicates_overridden;
      continue;
    }
    table.rows.emplace(word, static_cast<Eigen::Index>(table.words.size()));
    table.words.push_back(std::move(word));
    values.push_back(std::move(v));
  }
  if (table.words.empty()) throw DataError(source + ": no embeddings found");
  table.vectors.resize(static_cast<Eigen::Index>(values.size()), dim);
  for (std::size_t i = 0; i < values.size(); ++i)
    table.vectors.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(values[i].data(), dim);
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, bool normalize_nfc) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings file " + path.string());
  return load_embeddings(in, path.string(), normalize_nfc);
}

// ---------------------------------------------------------------------------
// k-means

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int nearest(const EmbeddingMatrix& centroids, const Eigen::Ref<const Eigen::RowVectorXd>& x, double* dist = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < centroids.rows(); ++j) {
    double d = (centroids.row(j) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

EmbeddingMatrix seed_plus_plus(const EmbeddingMatrix& X, int k, std::mt19937_64& rng) {
  const Eigen::Index n = X.rows();
  EmbeddingMatrix c(k, X.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  auto first = std::min<Eigen::Index>(static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(n)), n - 1);
  c.row(0) = X.row(first);
  chosen[static_cast<std::size_t>(first)] = true;
  Eigen::VectorXd d2 = (X.rowwise() - c.row(0)).rowwise().squaredNorm();
  for (int j = 1; j < k; ++j) {
    const double total = d2.sum();
    Eigen::Index pick = -1;
    if (total > 0) {
      const double target = uniform01(rng) * total;
      double cum = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (d2(i) <= 0) continue;
        cum += d2(i);
        pick = i;
        if (cum > target) break;
      }
    } else {
      // Remaining points coincide with chosen centroids.
      for (Eigen::Index i = 0; i < n && pick < 0; ++i)
        if (!chosen[static_cast<std::size_t>(i)]) pick = i;
    }
    c.row(j) = X.row(pick);
    chosen[static_cast<std::size_t>(pick)] = true;
    d2 = d2.cwiseMin((X.rowwise() - c.row(j)).rowwise().squaredNorm());
  }
  return c;
}

}  // namespace

KMeansResult kmeans(const EmbeddingTable& table, const KMeansOptions& options) {
  const auto n = static_cast<Eigen::Index>(table.size());
  if (options.k < 1) throw ConfigError("k must be >= 1");
  if (options.k > n)
    throw ConfigError("k = " + std::to_string(options.k) + " exceeds the vocabulary size " + std::to_string(n));
  if (options.max_iter < 1) throw ConfigError("k-means max_iter must be >= 1");

  // Canonical word order makes the result independent of file order.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    return table.words[static_cast<std::size_t>(a)] < table.words[static_cast<std::size_t>(b)];
  });
  EmbeddingMatrix X(n, table.dim());
  for (Eigen::Index i = 0; i < n; ++i) X.row(i) = table.vectors.row(order[static_cast<std::size_t>(i)]);

  std::mt19937_64 rng(options.seed);
  const int k = options.k;
  EmbeddingMatrix centroids = seed_plus_plus(X, k, rng);

  KMeansResult result;
  std::vector<int> assign(static_cast<std::size_t>(n)), previous;
  Eigen::VectorXd dist(n);
  double movement = std::numeric_limits<double>::infinity();
  for (int iter = 1;; ++iter) {
    double inertia = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      assign[static_cast<std::size_t>(i)] = nearest(centroids, X.row(i), &dist(i));
      inertia += dist(i);
    }
    result.inertia_history.push_back(inertia);
    result.iterations = iter;
#ifndef NDEBUG
    if (result.inertia_history.size() > 1 && inertia > result.inertia_history[result.inertia_history.size() - 2])
      throw InternalError("k-means inertia increased");
#endif
    if (assign == previous || iter >= options.max_iter || movement < options.tol) break;

    EmbeddingMatrix updated = EmbeddingMatrix::Zero(k, X.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int j = assign[static_cast<std::size_t>(i)];
      updated.row(j) += X.row(i);
      ++counts[static_cast<std::size_t>(j)];
    }
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    for (int j = 0; j < k; ++j) {
      if (counts[static_cast<std::size_t>(j)] > 0) {
        updated.row(j) /= static_cast<double>(counts[static_cast<std::size_t>(j)]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its current centroid.
      Eigen::Index far = -1;
      double far_d = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (taken[static_cast<std::size_t>(i)]) continue;
        double d = (X.row(i) - centroids.row(assign[static_cast<std::size_t>(i)])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      taken[static_cast<std::size_t>(far)] = true;
      updated.row(j) = X.row(far);
    }
    movement = (updated - centroids).rowwise().norm().maxCoeff();
    centroids = std::move(updated);
    previous = assign;
  }

  result.model.centroids = std::move(centroids);
  result.model.inertia = result.inertia_history.back();
  for (Eigen::Index i = 0; i < n; ++i)
    result.model.assignment.emplace(table.words[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])],
                                    assign[static_cast<std::size_t>(i)]);
  return result;
}

int assign_cluster(const ClusterModel& model, std::string_view word, const EmbeddingTable* vectors) {
  if (auto it = model.assignment.find(std::string(word)); it != model.assignment.end()) return it->second;
  if (vectors && vectors->dim() == model.centroids.cols()) {
    if (const double* v = vectors->find(word))
      return nearest(model.centroids, Eigen::Map<const Eigen::RowVectorXd>(v, vectors->dim()));
  }
  return model.oov_id();
}

double recompute_inertia(const ClusterModel& model, const EmbeddingTable& table) {
  // Sorted traversal keeps the floating-point sum order canonical.
  std::vector<std::pair<std::string, int>> items(model.assignment.begin(), model.assignment.end());
  std::sort(items.begin(), items.end());
  double total = 0;
  for (const auto& [word, id] : items) {
    const double* v = table.find(word);
    if (!v) continue;
    total += (Eigen::Map<const Eigen::RowVectorXd>(v, table.dim()) - model.centroids.row(id)).squaredNorm();
  }
  return total;
}

// ---------------------------------------------------------------------------
// Cluster files

void save_clusters(const ClusterModel& model, std::ostream& out) {
  out << "CLUSTERS\t" << model.k() << '\t' << model.centroids.cols() << '\n';
  out << "inertia\t" << text::format_double(model.inertia) << '\n';
  for (Eigen::Index j = 0; j < model.centroids.rows(); ++j) {
    out << "centroid\t" << j;
    for (Eigen::Index c = 0; c < model.centroids.cols(); ++c) out << '\t' << text::format_double(model.centroids(j, c));
    out << '\n';
  }
  std::vector<std::pair<std::string, int>> items(model.assignment.begin(), model.assignment.end());
  std::sort(items.begin(), items.end());
  out << "assignments\t" << items.size() << '\n';
  for (const auto& [word, id] : items) out << word << '\t' << id << '\n';
}

void save_clusters(const ClusterModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write cluster file " + path.string());
  save_clusters(model, out);
}

ClusterModel load_clusters(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw ParseError(source, line_no + 1, std::string("unexpected end of file, expected ") + what);
    ++line_no;
    return text::split(line, '\t');
  };

  auto head = next("CLUSTERS header");
  if (head.size() != 3 || head[0] != "CLUSTERS") throw ParseError(source, line_no, "expected 'CLUSTERS<TAB>k<TAB>dim'");
  auto k = text::parse_int<int>(head[1]);
  auto dim = text::parse_int<int>(head[2]);
  if (!k || *k < 1) throw ParseError(source, line_no, "cluster count k must be >= 1");
  if (!dim || *dim < 1) throw ParseError(source, line_no, "dimension must be >= 1");

  ClusterModel model;
  auto inertia = next("inertia");
  if (inertia.size() != 2 || inertia[0] != "inertia" || !text::parse_double(inertia[1]))
    throw ParseError(source, line_no, "expected 'inertia<TAB>value'");
  model.inertia = *text::parse_double(inertia[1]);

  model.centroids.resize(*k, *dim);
  for (int j = 0; j < *k; ++j) {
    auto row = next("centroid");
    if (static_cast<int>(row.size()) != *dim + 2 || row[0] != "centroid" || text::parse_int<int>(row[1]) != j)
      throw ParseError(source, line_no, "malformed centroid " + std::to_string(j));
    for (int c = 0; c < *dim; ++c) {
      auto v = text::parse_double(row[static_cast<std::size_t>(c + 2)]);
      if (!v) throw ParseError(source, line_no, "bad centroid value");
      model.centroids(j, c) = *v;
    }
  }

  auto section = next("assignments header");
  if (section.size() != 2 || section[0] != "assignments" || !text::parse_int<std::size_t>(section[1]))
    throw ParseError(source, line_no, "expected 'assignments<TAB>count'");
  const auto count = *text::parse_int<std::size_t>(section[1]);
  for (std::size_t i = 0; i < count; ++i) {
    auto row = next("word<TAB>cluster_id");
    if (row.size() != 2 || row[0].empty()) throw ParseError(source, line_no, "expected 'word<TAB>cluster_id'");
    auto id = text::parse_int<int>(row[1]);
    if (!id || *id < 0 || *id >= *k)
      throw ParseError(source, line_no, "cluster id out of range [0, " + std::to_string(*k) + ")");
    if (!model.assignment.emplace(std::string(row[0]), *id).second)
      throw ParseError(source, line_no, "duplicate word '" + std::string(row[0]) + "'");
  }
  return model;
}

ClusterModel load_clusters(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open cluster file " + path.string());
  return load_clusters(in, path.string());
}

}  // namespace cner
