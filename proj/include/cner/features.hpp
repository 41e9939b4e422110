#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cner/conll.hpp"

namespace cner {

/// Which template families fire and with what windows.
struct FeatureTemplateConfig {
  bool use_pos = false;
  int pos_window = 2;
  bool use_suffix = true;
  std::vector<int> suffix_lengths{1, 2, 3, 4};
  bool use_prefix = true;
  std::vector<int> prefix_lengths{1, 2, 3};
  bool use_neighbors = true;
  int neighbor_window = 2;
  bool use_digit = false;
  bool use_cluster = false;
  bool use_gazetteer = false;
  bool lowercase_ascii = true;
  std::string boundary_pad = "<PAD>";

  /// Throws ConfigError on negative windows, non-positive affix lengths or a blank pad.
  void validate() const;

  /// Family keys understood by set()/get(): pos, suffix, prefix, neighbors,
  /// digit, clusters, gazetteers, pad, lowercase.
  static const std::vector<std::string>& keys();
  /// Sets one family from its declarative value ("off", "2", "1,2,3", "on").
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;

  bool operator==(const FeatureTemplateConfig&) const = default;
};

/// Reads "key = value" lines ('#' comments) into a feature config.
FeatureTemplateConfig load_feature_config(const std::filesystem::path& path);

using FeatureId = std::uint32_t;

/// Interns feature strings to dense ids. After freeze() unseen strings map to nothing.
class FeatureIndex {
 public:
  /// Returns the id, adding the string while unfrozen; nullopt for unseen strings once frozen.
  std::optional<FeatureId> add(const std::string& feature);
  std::optional<FeatureId> find(const std::string& feature) const;

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  std::size_t size() const { return names_.size(); }
  const std::string& name(FeatureId id) const { return names_.at(id); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::unordered_map<std::string, FeatureId> ids_;
  std::vector<std::string> names_;
  bool frozen_ = false;
};

/// Strictly increasing ids of the indicator features active at one position.
struct FeatureVector {
  std::vector<FeatureId> ids;
  bool operator==(const FeatureVector&) const = default;
};

using FeatureSequence = std::vector<FeatureVector>;

/// Per-position side information consumed by the cluster and gazetteer templates.
struct PositionAnnotations {
  std::vector<int> cluster_ids;
  std::vector<std::vector<std::string>> gazetteer_types;
};

/// Escapes '\' and '=' so that feature strings stay injective.
std::string escape_feature_value(std::string_view value);

std::vector<std::string> extract_features(const Sentence& sentence, std::size_t position,
                                          const FeatureTemplateConfig& config,
                                          const PositionAnnotations& annotations = {});

/// Looks each string up in a frozen index; unseen features are dropped.
FeatureVector make_feature_vector(const FeatureIndex& index, const std::vector<std::string>& features);
FeatureSequence featurize(const Sentence& sentence, const FeatureTemplateConfig& config,
                          const PositionAnnotations& annotations, const FeatureIndex& index);

struct IndexedCorpus {
  FeatureIndex index;
  std::vector<FeatureSequence> vectors;
};

/// Extracts in parallel, then interns in corpus order and freezes the index.
/// `annotations` is empty or has one entry per sentence.
IndexedCorpus index_corpus(const Corpus& sentences, const FeatureTemplateConfig& config,
                           const std::vector<PositionAnnotations>& annotations = {},
                           unsigned threads = 1);

using PosLexicon = std::unordered_map<std::string, std::string>;

/// "word<TAB>tag" per line.
PosLexicon load_pos_lexicon(const std::filesystem::path& path, bool normalize_nfc = true);
/// Fills missing POS tags from the lexicon; words it lacks get `unknown_tag`.
void apply_pos_lexicon(Corpus& corpus, const PosLexicon& lexicon, const std::string& unknown_tag = "UNK");

}  // namespace cner
