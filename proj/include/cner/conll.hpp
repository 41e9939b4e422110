#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cner/error.hpp"

namespace cner {

struct Token {
  std::string surface;
  std::optional<std::string> pos;
  std::string label;  // empty when the corpus carries no label column

  bool operator==(const Token&) const = default;
};

struct Sentence {
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
  std::vector<std::string> labels() const;

  bool operator==(const Sentence&) const = default;
};

using Corpus = std::vector<Sentence>;

/// Ordered label alphabet: "O", then B-X, I-X for each entity type X in order.
class LabelSchema {
 public:
  LabelSchema();
  explicit LabelSchema(std::vector<std::string> entity_types);

  /// LOC, GRP, PROD, CW, CORP, PER.
  static const std::vector<std::string>& default_entity_types();

  const std::vector<std::string>& entity_types() const { return types_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }

  std::optional<int> find(std::string_view label) const;
  /// Throws DataError for labels outside the schema.
  int index(std::string_view label) const;
  const std::string& label(int id) const { return labels_.at(static_cast<std::size_t>(id)); }

  bool operator==(const LabelSchema& other) const { return types_ == other.types_; }

 private:
  std::vector<std::string> types_;
  std::vector<std::string> labels_;
};

/// "B-LOC" -> 'B', "I-LOC" -> 'I', anything else -> 'O'.
char bio_prefix(std::string_view label);
/// "B-LOC" -> "LOC", "O" -> "".
std::string_view entity_type(std::string_view label);

enum class ColumnRole { surface, pos, label, skip };

struct ColumnSpec {
  std::vector<ColumnRole> roles{ColumnRole::surface, ColumnRole::label};

  /// Comma-separated role names: surface, pos, label, or "_" / skip.
  static ColumnSpec parse(std::string_view text);
  std::string to_string() const;
  std::optional<std::size_t> column_of(ColumnRole role) const;
  bool has(ColumnRole role) const { return column_of(role).has_value(); }
};

struct ParseOptions {
  std::string source = "<input>";
  /// When false, rows may omit the label column (tagging input).
  bool require_label = true;
  bool normalize_nfc = true;
  /// Map bare family tags ("LOC") onto B-/I- by adjacency.
  bool bare_tags = false;
};

Corpus parse_conll(std::istream& in, const ColumnSpec& columns, const ParseOptions& options = {});
Corpus parse_conll(std::string_view text, const ColumnSpec& columns, const ParseOptions& options = {});
Corpus read_conll_file(const std::filesystem::path& path, const ColumnSpec& columns,
                       ParseOptions options = {});

/// Tab-separated rows, one blank line after every sentence.
void write_conll(std::ostream& out, const Corpus& sentences, const ColumnSpec& columns);
std::string write_conll(const Corpus& sentences, const ColumnSpec& columns);

class BioError : public DataError {
 public:
  BioError(std::size_t position, std::string label)
      : DataError("illegal BIO label '" + label + "' at position " + std::to_string(position)),
        position_(position), label_(std::move(label)) {}
  std::size_t position() const { return position_; }
  const std::string& label() const { return label_; }

 private:
  std::size_t position_;
  std::string label_;
};

enum class BioMode { strict, repair };

/// Strict: throws BioError on an I-X that does not continue B-X/I-X.
/// Repair: rewrites such an I-X to B-X.
Sentence validate_bio(Sentence sentence, BioMode mode);
std::vector<std::string> repair_bio(std::vector<std::string> labels);

/// Throws DataError naming sentence and position for labels outside the schema.
void check_labels(const Corpus& corpus, const LabelSchema& schema);

struct CorpusStats {
  std::size_t sentence_count = 0;
  std::size_t token_count = 0;
  std::size_t min_len = 0;
  std::size_t max_len = 0;
  /// Entity family ("LOC", ...) or "O" -> token count.
  std::map<std::string, std::size_t> tag_counts;

  double mean_len() const {
    return sentence_count == 0 ? 0.0 : static_cast<double>(token_count) / static_cast<double>(sentence_count);
  }
};

CorpusStats corpus_stats(const Corpus& sentences);

enum class ReportFormat { human, tsv };
std::string render_stats(const CorpusStats& stats, ReportFormat format);

/// w_i = 1 - n_i / sum_j n_j.
std::map<std::string, double> class_weights(const std::map<std::string, std::size_t>& tag_counts);

}  // namespace cner
