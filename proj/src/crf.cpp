#include "cner/crf.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "cner/lbfgs.hpp"
#include "cner/parallel.hpp"
#include "cner/text.hpp"

namespace cner {

BioConstraints bio_constraints(const LabelSchema& schema) {
  const auto L = static_cast<Eigen::Index>(schema.size());
  constexpr double forbidden = -std::numeric_limits<double>::infinity();
  BioConstraints c{RowMatrix<double>::Zero(L, L), Vector<double>::Zero(L)};
  for (Eigen::Index b = 0; b < L; ++b) {
    const auto& to = schema.label(static_cast<int>(b));
    if (bio_prefix(to) != 'I') continue;
    c.start(b) = forbidden;
    for (Eigen::Index a = 0; a < L; ++a) {
      const auto& from = schema.label(static_cast<int>(a));
      if (bio_prefix(from) == 'O' || entity_type(from) != entity_type(to)) c.transition(a, b) = forbidden;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Objective

namespace {

struct SentenceExpectations {
  double log_z = 0;
  double gold = 0;
  RowMatrix<double> node;  // n x L marginals
  RowMatrix<double> pair;  // L x L expected transition counts
};

SentenceExpectations expectations(const CrfWeights<double>& w, const LabeledSequence& seq) {
  const auto L = w.num_labels();
  auto lat = forward_backward(w, seq.features);
  SentenceExpectations out;
  out.log_z = lat.log_z;
  out.gold = sequence_score<double>(lat.emission, w, seq.labels);
  out.node = lat.marginals();
  out.pair = RowMatrix<double>::Zero(L, L);
  const auto trans = w.transition();
  for (Eigen::Index t = 1; t < lat.emission.rows(); ++t) {
    RowMatrix<double> m = trans;
    m.colwise() += lat.log_alpha.row(t - 1).transpose();
    m.rowwise() += lat.emission.row(t) + lat.log_beta.row(t);
    out.pair += (m.array() - lat.log_z).exp().matrix();
  }
  return out;
}

}  // namespace

Objective nll_and_gradient(const CrfWeights<double>& w, std::span<const LabeledSequence> batch, double l2,
                           unsigned threads) {
  std::vector<SentenceExpectations> per(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) { per[i] = expectations(w, batch[i]); });

  Objective obj{0.5 * l2 * w.params().squaredNorm(), CrfWeights<double>(w.num_features(), w.num_labels())};
  obj.gradient.params() = l2 * w.params();
  auto g_emit = obj.gradient.emission();
  auto g_trans = obj.gradient.transition();
  auto g_start = obj.gradient.start();
  auto g_end = obj.gradient.end();

  // Fixed batch order keeps the reduction reproducible.
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& seq = batch[i];
    const auto& e = per[i];
    obj.value += e.log_z - e.gold;
    const auto n = seq.labels.size();
    for (std::size_t t = 0; t < n; ++t) {
      const auto row = static_cast<Eigen::Index>(t);
      for (FeatureId f : seq.features[t].ids) {
        g_emit.row(f) += e.node.row(row);
        g_emit(f, seq.labels[t]) -= 1.0;
      }
      if (t > 0) g_trans(seq.labels[t - 1], seq.labels[t]) -= 1.0;
    }
    g_trans += e.pair;
    g_start += e.node.row(0).transpose();
    g_start(seq.labels.front()) -= 1.0;
    g_end += e.node.row(static_cast<Eigen::Index>(n - 1)).transpose();
    g_end(seq.labels.back()) -= 1.0;
  }
  return obj;
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  if (!(l2 >= 0) || !std::isfinite(l2)) throw ConfigError("l2 must be a finite value >= 0");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (!(tolerance > 0)) throw ConfigError("tolerance must be > 0");
}

TrainedWeights train_weights(std::span<const LabeledSequence> corpus, Eigen::Index num_features,
                             Eigen::Index num_labels, const TrainConfig& config) {
  config.validate();
  if (corpus.empty()) throw DataError("cannot train on an empty corpus");
  for (const auto& seq : corpus) {
    if (seq.labels.empty() || seq.labels.size() != seq.features.size())
      throw DataError("training sequence with mismatched or empty labels");
    for (int y : seq.labels)
      if (y < 0 || y >= num_labels) throw DataError("gold label id out of range");
    for (const auto& fv : seq.features)
      for (FeatureId f : fv.ids)
        if (static_cast<Eigen::Index>(f) >= num_features) throw DataError("feature id outside the index");
  }

  LbfgsOptions opt;
  opt.max_iterations = config.max_iterations;
  opt.tolerance = config.tolerance;

  CrfWeights<double> w(num_features, num_labels);
  auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    w.params() = x;
    auto obj = nll_and_gradient(w, corpus, config.l2, config.threads);
    grad = std::move(obj.gradient.params());
    return obj.value;
  };
  auto abort = [](int iteration) -> void { throw TrainingError(iteration, "objective is not finite"); };

  auto step = [&](int iteration, double value) {
    if (config.progress) config.progress(iteration, value);
  };
  auto res = minimize_lbfgs(objective, Eigen::VectorXd::Zero(w.params().size()), opt, abort, step);

  TrainedWeights out{CrfWeights<double>(num_features, num_labels), {}};
  out.weights.params() = std::move(res.x);
  out.log.objective = std::move(res.history);
  out.log.iterations = res.iterations;
  out.log.converged = res.converged;
  out.log.stop_reason = std::move(res.stop_reason);
  return out;
}

TrainedModel train(const LabelSchema& schema, FeatureIndex index, const FeatureTemplateConfig& features,
                   std::span<const LabeledSequence> corpus, const TrainConfig& config) {
  if (!index.frozen()) throw InternalError("training requires a frozen feature index");
  auto trained = train_weights(corpus, static_cast<Eigen::Index>(index.size()),
                               static_cast<Eigen::Index>(schema.size()), config);
  TrainedModel out;
  out.model.schema = schema;
  out.model.index = std::move(index);
  out.model.features = features;
  out.model.weights = std::move(trained.weights);
  out.log = std::move(trained.log);
  return out;
}

// ---------------------------------------------------------------------------
// Model

void CrfModel::check() const {
  if (weights.num_labels() != static_cast<Eigen::Index>(schema.size()))
    throw ModelFormatError("weight matrices do not match the label schema");
  if (weights.num_features() != static_cast<Eigen::Index>(index.size()))
    throw ModelFormatError("emission matrix does not match the feature index");
  if (weights.params().size() != CrfWeights<double>::param_count(weights.num_features(), weights.num_labels()))
    throw ModelFormatError("weight vector has the wrong size");
  if (!weights.params().allFinite()) throw ModelFormatError("model contains non-finite weights");
}

std::vector<int> CrfModel::decode(const FeatureSequence& x) const {
  if (x.empty()) return {};
  if (bio_constraints) {
    auto c = cner::bio_constraints(schema);
    return viterbi(weights, x, &c).labels;
  }
  return viterbi(weights, x).labels;
}

namespace {

void write_row(std::ostream& out, const double* values, Eigen::Index count) {
  for (Eigen::Index i = 0; i < count; ++i) {
    if (i) out << '\t';
    out << text::format_double(values[i]);
  }
  out << '\n';
}

class ModelReader {
 public:
  explicit ModelReader(std::istream& in) : in_(in) {}

  std::string line(const char* expecting) {
    std::string l;
    if (!std::getline(in_, l)) throw ModelFormatError(std::string("truncated model file: expected ") + expecting);
    ++line_no_;
    if (!l.empty() && l.back() == '\r') l.pop_back();
    return l;
  }

  /// Reads "<keyword> a b ..." and returns the integer fields.
  std::vector<long long> header(const std::string& keyword, std::size_t fields) {
    auto l = line(keyword.c_str());
    auto parts = text::split_ws(l);
    if (parts.size() != fields + 1 || parts[0] != keyword) fail("expected '" + keyword + "' block header");
    std::vector<long long> out;
    for (std::size_t i = 1; i < parts.size(); ++i) {
      auto v = text::parse_int<long long>(parts[i]);
      if (!v || *v < 0) fail("bad dimension in '" + keyword + "' header");
      out.push_back(*v);
    }
    return out;
  }

  void values(double* out, Eigen::Index count, const char* block) {
    auto l = line(block);
    auto parts = text::split(l, '\t');
    if (static_cast<Eigen::Index>(parts.size()) != count)
      fail(std::string("dimension mismatch in ") + block + " block");
    for (Eigen::Index i = 0; i < count; ++i) {
      auto v = text::parse_double(parts[static_cast<std::size_t>(i)]);
      if (!v) fail(std::string("bad number in ") + block + " block");
      out[i] = *v;
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ModelFormatError("model line " + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

}  // namespace

void save_model(const CrfModel& model, std::ostream& out) {
  model.check();
  const auto F = model.weights.num_features();
  const auto L = model.weights.num_labels();
  out << kModelMagic << '\n' << "format " << kModelFormatVersion << '\n';
  out << "entity_types " << model.schema.entity_types().size() << '\n';
  for (const auto& t : model.schema.entity_types()) out << t << '\n';
  const auto& keys = FeatureTemplateConfig::keys();
  out << "feature_config " << keys.size() + 1 << '\n';
  for (const auto& k : keys) out << k << '\t' << model.features.get(k) << '\n';
  out << "bio_constraints\t" << (model.bio_constraints ? "on" : "off") << '\n';
  out << "features " << F << '\n';
  for (const auto& name : model.index.names()) out << name << '\n';
  out << "emission " << F << ' ' << L << '\n';
  const auto emit = model.weights.emission();
  for (Eigen::Index f = 0; f < F; ++f) write_row(out, emit.data() + f * L, L);
  out << "transition " << L << ' ' << L << '\n';
  const auto trans = model.weights.transition();
  for (Eigen::Index a = 0; a < L; ++a) write_row(out, trans.data() + a * L, L);
  out << "start " << L << '\n';
  write_row(out, model.weights.start().data(), L);
  out << "end " << L << '\n';
  write_row(out, model.weights.end().data(), L);
  out << "end_of_model\n";
}

void save_model(const CrfModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file " + path.string());
  save_model(model, out);
  if (!out) throw DataError("failed writing model file " + path.string());
}

CrfModel load_model(std::istream& in) {
  ModelReader r(in);
  if (r.line(kModelMagic) != kModelMagic)
    throw ModelFormatError(std::string("not a model file: expected magic string ") + kModelMagic);
  auto version = r.header("format", 1);
  if (version[0] != kModelFormatVersion)
    throw ModelFormatError("unsupported model format version " + std::to_string(version[0]) + " (expected " +
                           std::to_string(kModelFormatVersion) + ")");

  CrfModel model;
  auto n_types = r.header("entity_types", 1)[0];
  std::vector<std::string> types;
  for (long long i = 0; i < n_types; ++i) types.push_back(r.line("entity type"));
  try {
    model.schema = LabelSchema(types);
  } catch (const ConfigError& e) {
    r.fail(e.what());
  }

  auto n_config = r.header("feature_config", 1)[0];
  for (long long i = 0; i < n_config; ++i) {
    auto l = r.line("feature config entry");
    auto tab = l.find('\t');
    if (tab == std::string::npos) r.fail("expected 'key<TAB>value'");
    auto key = l.substr(0, tab);
    auto value = l.substr(tab + 1);
    try {
      if (key == "bio_constraints")
        model.bio_constraints = value == "on";
      else
        model.features.set(key, value);
    } catch (const ConfigError& e) {
      r.fail(e.what());
    }
  }

  auto F = r.header("features", 1)[0];
  for (long long i = 0; i < F; ++i) {
    auto name = r.line("feature string");
    if (model.index.find(name)) r.fail("duplicate feature string '" + name + "'");
    model.index.add(name);
  }
  model.index.freeze();

  auto emit_dims = r.header("emission", 2);
  const auto L = static_cast<Eigen::Index>(model.schema.size());
  if (emit_dims[0] != F || emit_dims[1] != L) r.fail("emission dimensions disagree with features/labels");
  model.weights = CrfWeights<double>(F, L);
  auto emit = model.weights.emission();
  for (Eigen::Index f = 0; f < F; ++f) r.values(emit.data() + f * L, L, "emission");
  auto trans_dims = r.header("transition", 2);
  if (trans_dims[0] != L || trans_dims[1] != L) r.fail("transition dimensions disagree with labels");
  auto trans = model.weights.transition();
  for (Eigen::Index a = 0; a < L; ++a) r.values(trans.data() + a * L, L, "transition");
  if (r.header("start", 1)[0] != L) r.fail("start dimension disagrees with labels");
  r.values(model.weights.start().data(), L, "start");
  if (r.header("end", 1)[0] != L) r.fail("end dimension disagrees with labels");
  r.values(model.weights.end().data(), L, "end");
  if (r.line("end_of_model") != "end_of_model") r.fail("expected end_of_model");
  model.check();
  return model;
}

CrfModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path.string());
  return load_model(in);
}

}  // namespace cner
