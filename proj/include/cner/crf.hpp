#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cner/conll.hpp"
#include "cner/features.hpp"

namespace cner {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Derived>
typename Derived::Scalar logsumexp(const Eigen::DenseBase<Derived>& x) {
  using std::exp;
  using std::log;
  using Scalar = typename Derived::Scalar;
  const Scalar m = x.maxCoeff();
  if (!(m > -std::numeric_limits<Scalar>::infinity()) || m == std::numeric_limits<Scalar>::infinity()) return m;
  return m + log((x.derived().array() - m).exp().sum());
}

/// All CRF parameters in one flat vector, laid out as
/// emission (F x L, row-major) | transition (L x L, row-major, [from][to]) | start (L) | end (L).
template <typename Scalar>
class CrfWeights {
 public:
  using Index = Eigen::Index;

  CrfWeights() = default;
  CrfWeights(Index num_features, Index num_labels)
      : features_(num_features), labels_(num_labels),
        params_(Vector<Scalar>::Zero(num_features * num_labels + num_labels * num_labels + 2 * num_labels)) {}

  static Index param_count(Index num_features, Index num_labels) {
    return num_features * num_labels + num_labels * num_labels + 2 * num_labels;
  }

  Index num_features() const { return features_; }
  Index num_labels() const { return labels_; }

  Vector<Scalar>& params() { return params_; }
  const Vector<Scalar>& params() const { return params_; }

  auto emission() { return Eigen::Map<RowMatrix<Scalar>>(params_.data(), features_, labels_); }
  auto emission() const { return Eigen::Map<const RowMatrix<Scalar>>(params_.data(), features_, labels_); }
  auto transition() { return Eigen::Map<RowMatrix<Scalar>>(params_.data() + transition_offset(), labels_, labels_); }
  auto transition() const {
    return Eigen::Map<const RowMatrix<Scalar>>(params_.data() + transition_offset(), labels_, labels_);
  }
  auto start() { return Eigen::Map<Vector<Scalar>>(params_.data() + start_offset(), labels_); }
  auto start() const { return Eigen::Map<const Vector<Scalar>>(params_.data() + start_offset(), labels_); }
  auto end() { return Eigen::Map<Vector<Scalar>>(params_.data() + start_offset() + labels_, labels_); }
  auto end() const { return Eigen::Map<const Vector<Scalar>>(params_.data() + start_offset() + labels_, labels_); }

  template <typename Other>
  CrfWeights<Other> cast() const {
    CrfWeights<Other> out(features_, labels_);
    out.params() = params_.template cast<Other>();
    return out;
  }

 private:
  Index transition_offset() const { return features_ * labels_; }
  Index start_offset() const { return features_ * labels_ + labels_ * labels_; }

  Index features_ = 0;
  Index labels_ = 0;
  Vector<Scalar> params_;
};

/// emit(t, l) = sum over active features f at t of emission[f][l].
template <typename Scalar>
RowMatrix<Scalar> emission_scores(const CrfWeights<Scalar>& w, const FeatureSequence& x) {
  const auto n = static_cast<Eigen::Index>(x.size());
  RowMatrix<Scalar> e = RowMatrix<Scalar>::Zero(n, w.num_labels());
  const auto em = w.emission();
  for (Eigen::Index t = 0; t < n; ++t) {
    for (FeatureId f : x[static_cast<std::size_t>(t)].ids) e.row(t) += em.row(f);
  }
  return e;
}

/// w . Phi(x, y) for a labeling, given precomputed emission scores.
template <typename Scalar>
Scalar sequence_score(const RowMatrix<Scalar>& emission, const CrfWeights<Scalar>& w, std::span<const int> labels) {
  const auto n = emission.rows();
  if (n == 0 || static_cast<Eigen::Index>(labels.size()) != n)
    throw DataError("label sequence length does not match the sentence");
  for (int y : labels) {
    if (y < 0 || y >= w.num_labels()) throw DataError("label id " + std::to_string(y) + " out of range");
  }
  Scalar s = w.start()(labels[0]) + emission(0, labels[0]);
  for (Eigen::Index t = 1; t < n; ++t) {
    s += w.transition()(labels[static_cast<std::size_t>(t - 1)], labels[static_cast<std::size_t>(t)]);
    s += emission(t, labels[static_cast<std::size_t>(t)]);
  }
  return s + w.end()(labels[static_cast<std::size_t>(n - 1)]);
}

template <typename Scalar>
Scalar sequence_score(const CrfWeights<Scalar>& w, const FeatureSequence& x, std::span<const int> labels) {
  return sequence_score(emission_scores(w, x), w, labels);
}

template <typename Scalar>
struct Lattice {
  RowMatrix<Scalar> emission;   // n x L
  RowMatrix<Scalar> log_alpha;  // n x L, includes start and emission at t
  RowMatrix<Scalar> log_beta;   // n x L, includes end, excludes emission at t
  Scalar log_z = 0;

  /// P(y_t = l | x), n x L.
  RowMatrix<Scalar> marginals() const { return ((log_alpha + log_beta).array() - log_z).exp().matrix(); }
};

template <typename Scalar>
Lattice<Scalar> forward_backward(RowMatrix<Scalar> emission, const CrfWeights<Scalar>& w) {
  const auto n = emission.rows();
  const auto L = w.num_labels();
  if (n == 0) throw DataError("forward-backward needs a non-empty sequence");
  Lattice<Scalar> lat;
  lat.log_alpha.resize(n, L);
  lat.log_beta.resize(n, L);
  const auto trans = w.transition();

  lat.log_alpha.row(0) = w.start().transpose() + emission.row(0);
  for (Eigen::Index t = 1; t < n; ++t) {
    for (Eigen::Index b = 0; b < L; ++b) {
      lat.log_alpha(t, b) = emission(t, b) + logsumexp(lat.log_alpha.row(t - 1).transpose() + trans.col(b));
    }
  }
  lat.log_beta.row(n - 1) = w.end().transpose();
  for (Eigen::Index t = n - 2; t >= 0; --t) {
    const Vector<Scalar> next = emission.row(t + 1).transpose() + lat.log_beta.row(t + 1).transpose();
    for (Eigen::Index a = 0; a < L; ++a) {
      lat.log_beta(t, a) = logsumexp(trans.row(a).transpose() + next);
    }
  }
  lat.log_z = logsumexp(lat.log_alpha.row(n - 1).transpose() + w.end());
  lat.emission = std::move(emission);
  return lat;
}

template <typename Scalar>
Lattice<Scalar> forward_backward(const CrfWeights<Scalar>& w, const FeatureSequence& x) {
  return forward_backward(emission_scores(w, x), w);
}

/// Additive masks (0 or -inf) forbidding BIO-illegal transitions at decode time.
struct BioConstraints {
  RowMatrix<double> transition;
  Vector<double> start;
};

BioConstraints bio_constraints(const LabelSchema& schema);

template <typename Scalar>
struct Decoding {
  std::vector<int> labels;
  Scalar score = 0;
};

/// Max-score labeling. Ties go to the smaller label id at every backtrace
/// decision (including the final label). The returned score is
/// sequence_score(labels), recomputed from the decomposition.
template <typename Scalar>
Decoding<Scalar> viterbi(const RowMatrix<Scalar>& emission, const CrfWeights<Scalar>& w,
                         const BioConstraints* constraints = nullptr) {
  const auto n = emission.rows();
  const auto L = w.num_labels();
  if (n == 0) throw DataError("viterbi needs a non-empty sequence");
  RowMatrix<Scalar> trans = w.transition();
  Vector<Scalar> start = w.start();
  if (constraints) {
    trans += constraints->transition.template cast<Scalar>();
    start += constraints->start.template cast<Scalar>();
  }
  RowMatrix<Scalar> delta(n, L);
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> back(n, L);
  delta.row(0) = start.transpose() + emission.row(0);
  back.row(0).setZero();
  for (Eigen::Index t = 1; t < n; ++t) {
    for (Eigen::Index b = 0; b < L; ++b) {
      int best = 0;
      Scalar best_score = delta(t - 1, 0) + trans(0, b);
      for (Eigen::Index a = 1; a < L; ++a) {
        Scalar s = delta(t - 1, a) + trans(a, b);
        if (s > best_score) {
          best_score = s;
          best = static_cast<int>(a);
        }
      }
      delta(t, b) = best_score + emission(t, b);
      back(t, b) = best;
    }
  }
  int last = 0;
  Scalar last_score = delta(n - 1, 0) + w.end()(0);
  for (Eigen::Index l = 1; l < L; ++l) {
    Scalar s = delta(n - 1, l) + w.end()(l);
    if (s > last_score) {
      last_score = s;
      last = static_cast<int>(l);
    }
  }
  Decoding<Scalar> out;
  out.labels.assign(static_cast<std::size_t>(n), 0);
  out.labels.back() = last;
  for (Eigen::Index t = n - 1; t > 0; --t) {
    out.labels[static_cast<std::size_t>(t - 1)] = back(t, out.labels[static_cast<std::size_t>(t)]);
  }
  out.score = sequence_score<Scalar>(emission, w, out.labels);
  return out;
}

template <typename Scalar>
Decoding<Scalar> viterbi(const CrfWeights<Scalar>& w, const FeatureSequence& x,
                         const BioConstraints* constraints = nullptr) {
  return viterbi(emission_scores(w, x), w, constraints);
}

// ---------------------------------------------------------------------------
// Training

struct LabeledSequence {
  FeatureSequence features;
  std::vector<int> labels;
};

struct Objective {
  double value = 0;
  CrfWeights<double> gradient;
};

/// Sum over the batch of (log Z - score(gold)) + l2/2 |w|^2, with its exact gradient
/// (expected counts - gold counts + l2 w). Sentences are evaluated on up to
/// `threads` workers and reduced in batch order, so the result is bitwise
/// independent of the thread count.
Objective nll_and_gradient(const CrfWeights<double>& w, std::span<const LabeledSequence> batch, double l2,
                           unsigned threads = 1);

struct TrainConfig {
  double l2 = 1.0;
  int max_iterations = 200;
  double tolerance = 1e-5;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  /// Called with (iteration, objective) for the zero start (iteration 0) and every accepted step.
  std::function<void(int, double)> progress;

  void validate() const;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(int iteration, const std::string& what)
      : std::runtime_error("training aborted at iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

struct TrainLog {
  /// objective[0] is the zero-weight objective; one entry per accepted iteration after it.
  std::vector<double> objective;
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
};

struct TrainedWeights {
  CrfWeights<double> weights;
  TrainLog log;
};

/// L-BFGS with backtracking (Armijo) line search from zero weights.
TrainedWeights train_weights(std::span<const LabeledSequence> corpus, Eigen::Index num_features,
                             Eigen::Index num_labels, const TrainConfig& config);

// ---------------------------------------------------------------------------
// Model

struct CrfModel {
  LabelSchema schema;
  FeatureIndex index;
  FeatureTemplateConfig features;
  bool bio_constraints = false;
  CrfWeights<double> weights;

  /// Throws ModelFormatError on inconsistent dimensions or non-finite weights.
  void check() const;

  /// Decodes one featurized sentence into label ids.
  std::vector<int> decode(const FeatureSequence& x) const;
};

struct TrainedModel {
  CrfModel model;
  TrainLog log;
};

/// `index` must be frozen; `corpus` holds the featurized gold sequences it produced.
TrainedModel train(const LabelSchema& schema, FeatureIndex index, const FeatureTemplateConfig& features,
                   std::span<const LabeledSequence> corpus, const TrainConfig& config);

inline constexpr const char* kModelMagic = "CRFSEQ1";
inline constexpr int kModelFormatVersion = 1;

void save_model(const CrfModel& model, std::ostream& out);
void save_model(const CrfModel& model, const std::filesystem::path& path);
CrfModel load_model(std::istream& in);
CrfModel load_model(const std::filesystem::path& path);

}  // namespace cner
