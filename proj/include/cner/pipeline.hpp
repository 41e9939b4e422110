#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cner/clustering.hpp"
#include "cner/conll.hpp"
#include "cner/crf.hpp"
#include "cner/features.hpp"
#include "cner/gazetteer.hpp"
#include "cner/metrics.hpp"

namespace cner {

/// Everything a run needs, settable key by key from a config file or CLI flags.
struct RunConfig {
  std::filesystem::path train_file;
  std::filesystem::path dev_file;
  std::filesystem::path model_file;
  std::filesystem::path embeddings_file;
  std::filesystem::path cluster_file;
  std::filesystem::path pos_lexicon;
  std::filesystem::path output_file;
  std::map<std::string, std::filesystem::path> gazetteers;

  ColumnSpec columns;
  std::vector<std::string> entity_types = LabelSchema::default_entity_types();
  bool bare_tags = false;
  bool normalize_nfc = true;
  BioMode bio_mode = BioMode::repair;

  FeatureTemplateConfig features;
  TrainConfig train;
  bool bio_constraints = false;
  KMeansOptions kmeans;

  /// Keys accepted by set(), in documentation order.
  static const std::vector<std::string>& keys();

  /// Applies one key. Relative paths resolve against `base_dir`.
  /// `seed` feeds both training and clustering; `threads` feeds training.
  void set(std::string_view key, std::string_view value, const std::filesystem::path& base_dir = {});

  LabelSchema schema() const { return LabelSchema(entity_types); }
  ParseOptions parse_options(bool require_label) const;
};

/// "key = value" lines; '#' starts a comment. Keys may repeat.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);
/// Applies a config file on top of `config`, resolving paths against the file's directory.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

struct Resources {
  std::optional<ClusterModel> clusters;
  std::optional<EmbeddingTable> embeddings;
  std::optional<Gazetteer> gazetteer;
  std::optional<PosLexicon> pos_lexicon;
};

/// Names of resources that `features` needs but `config` does not supply.
std::vector<std::string> missing_resources(const FeatureTemplateConfig& features, const RunConfig& config);

/// Loads what `features` needs (plus optional embeddings for unseen-word clustering).
/// Throws ConfigError listing every missing resource.
Resources load_resources(const FeatureTemplateConfig& features, const RunConfig& config,
                         std::vector<std::string>* warnings = nullptr);

PositionAnnotations annotate(const Sentence& sentence, const FeatureTemplateConfig& features,
                             const Resources& resources);

/// Reads a corpus, fills POS from the lexicon when needed, and (for labeled input)
/// applies the BIO mode and checks labels against the schema.
Corpus load_corpus(const std::filesystem::path& path, const RunConfig& config, const Resources& resources,
                   const FeatureTemplateConfig& features, bool labeled);

struct TrainOutcome {
  TrainedModel trained;
  std::optional<EvalReport> dev_report;
  std::vector<std::string> warnings;
};

/// Validates the configuration, then featurizes, trains and (with a dev file) evaluates.
TrainOutcome run_training(const RunConfig& config);

/// Predicted label strings for every sentence.
std::vector<std::vector<std::string>> tag_corpus(const CrfModel& model, const Corpus& corpus,
                                                 const Resources& resources, unsigned threads = 1);

}  // namespace cner
