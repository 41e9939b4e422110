#include "cner/pipeline.hpp"

#include <fstream>

#include "cner/parallel.hpp"
#include "cner/text.hpp"

namespace cner {

namespace {

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "on" || value == "true" || value == "yes" || value == "1") return true;
  if (value == "off" || value == "false" || value == "no" || value == "0") return false;
  throw ConfigError("'" + std::string(key) + "' expects on/off, got '" + std::string(value) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  std::optional<T> v;
  if constexpr (std::is_floating_point_v<T>)
    v = text::parse_double(value);
  else
    v = text::parse_int<T>(value);
  if (!v) throw ConfigError("'" + std::string(key) + "' expects a number, got '" + std::string(value) + "'");
  return *v;
}

std::filesystem::path resolve(std::string_view value, const std::filesystem::path& base) {
  std::filesystem::path p{std::string(value)};
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> keys{"train_file",   "dev_file",        "model_file",   "embeddings_file",
                                  "cluster_file", "pos_lexicon",     "output_file",  "gazetteer",
                                  "columns",      "entity_types",    "bare_tags",    "nfc",
                                  "bio_mode",     "l2",              "max_iterations", "tolerance",
                                  "seed",         "threads",         "bio_constraints", "k",
                                  "kmeans_max_iter", "kmeans_tol"};
    for (const auto& f : FeatureTemplateConfig::keys()) keys.push_back(f);
    return keys;
  }();
  return k;
}

void RunConfig::set(std::string_view key, std::string_view raw, const std::filesystem::path& base_dir) {
  const auto value = text::trim(raw);
  if (key == "train_file") {
    train_file = resolve(value, base_dir);
  } else if (key == "dev_file") {
    dev_file = resolve(value, base_dir);
  } else if (key == "model_file") {
    model_file = resolve(value, base_dir);
  } else if (key == "embeddings_file") {
    embeddings_file = resolve(value, base_dir);
  } else if (key == "cluster_file") {
    cluster_file = resolve(value, base_dir);
  } else if (key == "pos_lexicon") {
    pos_lexicon = resolve(value, base_dir);
  } else if (key == "output_file") {
    output_file = resolve(value, base_dir);
  } else if (key == "gazetteer") {
    for (auto item : text::split(value, ',')) {
      item = text::trim(item);
      if (item.empty()) continue;
      auto eq = item.find('=');
      if (eq == std::string_view::npos || eq == 0 || eq + 1 == item.size())
        throw ConfigError("gazetteer expects TYPE=path, got '" + std::string(item) + "'");
      gazetteers[std::string(text::trim(item.substr(0, eq)))] = resolve(text::trim(item.substr(eq + 1)), base_dir);
    }
  } else if (key == "columns") {
    columns = ColumnSpec::parse(value);
  } else if (key == "entity_types") {
    entity_types.clear();
    for (auto t : text::split(value, ',')) {
      t = text::trim(t);
      if (!t.empty()) entity_types.emplace_back(t);
    }
    LabelSchema check(entity_types);
  } else if (key == "bare_tags") {
    bare_tags = parse_bool(key, value);
  } else if (key == "nfc") {
    normalize_nfc = parse_bool(key, value);
  } else if (key == "bio_mode") {
    if (value == "strict")
      bio_mode = BioMode::strict;
    else if (value == "repair")
      bio_mode = BioMode::repair;
    else
      throw ConfigError("bio_mode expects strict or repair");
  } else if (key == "l2") {
    train.l2 = parse_number<double>(key, value);
  } else if (key == "max_iterations") {
    train.max_iterations = parse_number<int>(key, value);
  } else if (key == "tolerance") {
    train.tolerance = parse_number<double>(key, value);
  } else if (key == "seed") {
    train.seed = parse_number<std::uint64_t>(key, value);
    kmeans.seed = train.seed;
  } else if (key == "threads") {
    auto n = parse_number<unsigned>(key, value);
    train.threads = n == 0 ? default_threads() : n;
  } else if (key == "bio_constraints") {
    bio_constraints = parse_bool(key, value);
  } else if (key == "k") {
    kmeans.k = parse_number<int>(key, value);
  } else if (key == "kmeans_max_iter") {
    kmeans.max_iter = parse_number<int>(key, value);
  } else if (key == "kmeans_tol") {
    kmeans.tol = parse_number<double>(key, value);
  } else if (std::find(FeatureTemplateConfig::keys().begin(), FeatureTemplateConfig::keys().end(), key) !=
             FeatureTemplateConfig::keys().end()) {
    features.set(key, value);
  } else {
    throw ConfigError("unknown configuration key '" + std::string(key) + "'");
  }
}

ParseOptions RunConfig::parse_options(bool require_label) const {
  ParseOptions o;
  o.require_label = require_label;
  o.normalize_nfc = normalize_nfc;
  o.bare_tags = bare_tags;
  return o;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = text::trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty() || (body.front() == '[' && body.back() == ']')) continue;
    auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected 'key = value'");
    entries.emplace_back(std::string(text::trim(body.substr(0, eq))), std::string(text::trim(body.substr(eq + 1))));
  }
  return entries;
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  const auto base = path.parent_path();
  for (const auto& [key, value] : read_config_file(path)) {
    try {
      config.set(key, value, base);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
}

// ---------------------------------------------------------------------------
// Resources

std::vector<std::string> missing_resources(const FeatureTemplateConfig& features, const RunConfig& config) {
  std::vector<std::string> missing;
  if (features.use_cluster && config.cluster_file.empty()) missing.push_back("cluster_file (clusters feature)");
  if (features.use_gazetteer && config.gazetteers.empty()) missing.push_back("gazetteer (gazetteers feature)");
  auto need = [&](const std::filesystem::path& p, const std::string& what) {
    if (!p.empty() && !std::filesystem::exists(p)) missing.push_back(what + " " + p.string() + " (not found)");
  };
  if (features.use_cluster) {
    need(config.cluster_file, "cluster_file");
    need(config.embeddings_file, "embeddings_file");
  }
  if (features.use_gazetteer)
    for (const auto& [type, path] : config.gazetteers) need(path, "gazetteer " + type);
  if (features.use_pos) need(config.pos_lexicon, "pos_lexicon");
  return missing;
}

Resources load_resources(const FeatureTemplateConfig& features, const RunConfig& config,
                         std::vector<std::string>* warnings) {
  auto missing = missing_resources(features, config);
  if (!missing.empty()) {
    std::string msg = "missing resources:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw ConfigError(msg);
  }
  Resources r;
  if (features.use_cluster) {
    r.clusters = load_clusters(config.cluster_file);
    if (!config.embeddings_file.empty()) r.embeddings = load_embeddings(config.embeddings_file, config.normalize_nfc);
  }
  if (features.use_gazetteer) r.gazetteer = load_gazetteer(config.gazetteers, warnings, config.normalize_nfc);
  if (features.use_pos && !config.pos_lexicon.empty())
    r.pos_lexicon = load_pos_lexicon(config.pos_lexicon, config.normalize_nfc);
  return r;
}

PositionAnnotations annotate(const Sentence& sentence, const FeatureTemplateConfig& features,
                             const Resources& resources) {
  PositionAnnotations ann;
  if (features.use_cluster && resources.clusters) {
    const EmbeddingTable* vectors = resources.embeddings ? &*resources.embeddings : nullptr;
    for (const auto& tok : sentence.tokens)
      ann.cluster_ids.push_back(assign_cluster(*resources.clusters, tok.surface, vectors));
  }
  if (features.use_gazetteer && resources.gazetteer) ann.gazetteer_types = match_positions(*resources.gazetteer, sentence);
  return ann;
}

Corpus load_corpus(const std::filesystem::path& path, const RunConfig& config, const Resources& resources,
                   const FeatureTemplateConfig& features, bool labeled) {
  Corpus corpus = read_conll_file(path, config.columns, config.parse_options(labeled));
  if (features.use_pos && resources.pos_lexicon) apply_pos_lexicon(corpus, *resources.pos_lexicon);
  if (labeled) {
    for (std::size_t s = 0; s < corpus.size(); ++s) {
      try {
        corpus[s] = validate_bio(std::move(corpus[s]), config.bio_mode);
      } catch (const BioError& e) {
        throw DataError(path.string() + ": sentence " + std::to_string(s) + ": " + e.what());
      }
    }
    check_labels(corpus, config.schema());
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Training and tagging

TrainOutcome run_training(const RunConfig& config) {
  if (config.train_file.empty()) throw ConfigError("train_file is required");
  if (!std::filesystem::exists(config.train_file))
    throw ConfigError("train_file " + config.train_file.string() + " does not exist");
  if (!config.dev_file.empty() && !std::filesystem::exists(config.dev_file))
    throw ConfigError("dev_file " + config.dev_file.string() + " does not exist");
  if (config.features.use_pos && !config.columns.has(ColumnRole::pos) && config.pos_lexicon.empty())
    throw ConfigError("pos features need a pos column or a pos_lexicon");
  config.features.validate();
  config.train.validate();
  const LabelSchema schema = config.schema();

  TrainOutcome out;
  Resources resources = load_resources(config.features, config, &out.warnings);
  Corpus corpus = load_corpus(config.train_file, config, resources, config.features, true);
  if (corpus.empty()) throw DataError(config.train_file.string() + ": training corpus is empty");

  std::vector<PositionAnnotations> ann(corpus.size());
  for (std::size_t s = 0; s < corpus.size(); ++s) ann[s] = annotate(corpus[s], config.features, resources);
  IndexedCorpus indexed = index_corpus(corpus, config.features, ann, config.train.threads);

  std::vector<LabeledSequence> batch(corpus.size());
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    batch[s].features = std::move(indexed.vectors[s]);
    for (const auto& tok : corpus[s].tokens) batch[s].labels.push_back(schema.index(tok.label));
  }
  out.trained = train(schema, std::move(indexed.index), config.features, batch, config.train);
  out.trained.model.bio_constraints = config.bio_constraints;

  if (!config.dev_file.empty()) {
    Corpus dev = load_corpus(config.dev_file, config, resources, config.features, true);
    auto predicted = tag_corpus(out.trained.model, dev, resources, config.train.threads);
    out.dev_report = evaluate(dev, predicted);
  }
  return out;
}

std::vector<std::vector<std::string>> tag_corpus(const CrfModel& model, const Corpus& corpus,
                                                 const Resources& resources, unsigned threads) {
  std::vector<std::vector<std::string>> out(corpus.size());
  parallel_for(corpus.size(), threads, [&](std::size_t s) {
    auto ann = annotate(corpus[s], model.features, resources);
    auto x = featurize(corpus[s], model.features, ann, model.index);
    for (int id : model.decode(x)) out[s].push_back(model.schema.label(id));
  });
  return out;
}

}  // namespace cner
