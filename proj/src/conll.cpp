#include "cner/conll.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "cner/text.hpp"
#include "cner/unicode.hpp"

namespace cner {

std::vector<std::string> Sentence::labels() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.label);
  return out;
}

// ---------------------------------------------------------------------------
// LabelSchema

const std::vector<std::string>& LabelSchema::default_entity_types() {
  static const std::vector<std::string> types{"LOC", "GRP", "PROD", "CW", "CORP", "PER"};
  return types;
}

LabelSchema::LabelSchema() : LabelSchema(default_entity_types()) {}

LabelSchema::LabelSchema(std::vector<std::string> entity_types) : types_(std::move(entity_types)) {
  labels_.push_back("O");
  for (std::size_t i = 0; i < types_.size(); ++i) {
    const auto& t = types_[i];
    if (t.empty() || t == "O" || std::any_of(t.begin(), t.end(), text::is_blank))
      throw ConfigError("invalid entity type name '" + t + "'");
    if (std::find(types_.begin(), types_.begin() + static_cast<std::ptrdiff_t>(i), t) !=
        types_.begin() + static_cast<std::ptrdiff_t>(i))
      throw ConfigError("duplicate entity type '" + t + "'");
    labels_.push_back("B-" + t);
    labels_.push_back("I-" + t);
  }
}

std::optional<int> LabelSchema::find(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return static_cast<int>(i);
  }
  return std::nullopt;
}

int LabelSchema::index(std::string_view label) const {
  if (auto id = find(label)) return *id;
  throw DataError("label '" + std::string(label) + "' is not in the label schema");
}

char bio_prefix(std::string_view label) {
  if (label.size() > 2 && label[1] == '-' && (label[0] == 'B' || label[0] == 'I')) return label[0];
  return 'O';
}

std::string_view entity_type(std::string_view label) {
  if (bio_prefix(label) == 'O') return {};
  return label.substr(2);
}

// ---------------------------------------------------------------------------
// ColumnSpec

ColumnSpec ColumnSpec::parse(std::string_view spec) {
  ColumnSpec out;
  out.roles.clear();
  for (auto part : text::split(spec, ',')) {
    part = text::trim(part);
    if (part == "surface" || part == "word") {
      out.roles.push_back(ColumnRole::surface);
    } else if (part == "pos") {
      out.roles.push_back(ColumnRole::pos);
    } else if (part == "label" || part == "tag") {
      out.roles.push_back(ColumnRole::label);
    } else if (part == "_" || part == "skip") {
      out.roles.push_back(ColumnRole::skip);
    } else {
      throw ConfigError("unknown column role '" + std::string(part) + "'");
    }
  }
  for (auto role : {ColumnRole::surface, ColumnRole::pos, ColumnRole::label}) {
    if (std::count(out.roles.begin(), out.roles.end(), role) > 1)
      throw ConfigError("column role repeated in '" + std::string(spec) + "'");
  }
  if (!out.has(ColumnRole::surface)) throw ConfigError("column spec has no surface column");
  return out;
}

std::string ColumnSpec::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < roles.size(); ++i) {
    if (i) out += ',';
    switch (roles[i]) {
      case ColumnRole::surface: out += "surface"; break;
      case ColumnRole::pos: out += "pos"; break;
      case ColumnRole::label: out += "label"; break;
      case ColumnRole::skip: out += "_"; break;
    }
  }
  return out;
}

std::optional<std::size_t> ColumnSpec::column_of(ColumnRole role) const {
  auto it = std::find(roles.begin(), roles.end(), role);
  if (it == roles.end()) return std::nullopt;
  return static_cast<std::size_t>(it - roles.begin());
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

void map_bare_tags(Sentence& s) {
  std::string previous_family = "O";
  for (auto& tok : s.tokens) {
    if (tok.label.empty()) continue;
    if (tok.label == "O" || bio_prefix(tok.label) != 'O') {
      previous_family = tok.label == "O" ? "O" : std::string(entity_type(tok.label));
      continue;
    }
    std::string family = tok.label;
    tok.label = (family == previous_family ? "I-" : "B-") + family;
    previous_family = family;
  }
}

}  // namespace

Corpus parse_conll(std::istream& in, const ColumnSpec& columns, const ParseOptions& options) {
  const auto surface_col = columns.column_of(ColumnRole::surface);
  const auto pos_col = columns.column_of(ColumnRole::pos);
  const auto label_col = columns.column_of(ColumnRole::label);
  if (!surface_col) throw ConfigError("column spec has no surface column");

  std::size_t required = *surface_col + 1;
  if (pos_col) required = std::max(required, *pos_col + 1);
  std::size_t minimum = required;
  if (label_col) {
    required = std::max(required, *label_col + 1);
    if (options.require_label) minimum = required;
  }

  Corpus corpus;
  Sentence current;
  auto flush = [&] {
    if (current.tokens.empty()) return;
    if (options.bare_tags) map_bare_tags(current);
    corpus.push_back(std::move(current));
    current = Sentence{};
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = text::split_ws(line);
    if (fields.empty()) {
      flush();
      continue;
    }
    // Comment lines ahead of a sentence's first row.
    if (current.tokens.empty() && line.front() == '#') continue;
    if (fields.size() < minimum) {
      throw ParseError(options.source, line_no,
                       "expected " + std::to_string(minimum) + " columns, found " +
                           std::to_string(fields.size()));
    }
    Token tok;
    auto surface = fields[*surface_col];
    tok.surface = options.normalize_nfc ? unicode::nfc(surface) : std::string(surface);
    if (pos_col) tok.pos = std::string(fields[*pos_col]);
    if (label_col && *label_col < fields.size()) tok.label = std::string(fields[*label_col]);
    current.tokens.push_back(std::move(tok));
  }
  flush();
  return corpus;
}

Corpus parse_conll(std::string_view text, const ColumnSpec& columns, const ParseOptions& options) {
  std::istringstream in{std::string(text)};
  return parse_conll(in, columns, options);
}

Corpus read_conll_file(const std::filesystem::path& path, const ColumnSpec& columns, ParseOptions options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  options.source = path.string();
  return parse_conll(in, columns, options);
}

// ---------------------------------------------------------------------------
// Writing

void write_conll(std::ostream& out, const Corpus& sentences, const ColumnSpec& columns) {
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    for (std::size_t t = 0; t < sentences[s].tokens.size(); ++t) {
      const Token& tok = sentences[s].tokens[t];
      for (std::size_t c = 0; c < columns.roles.size(); ++c) {
        if (c) out << '\t';
        switch (columns.roles[c]) {
          case ColumnRole::surface:
            out << tok.surface;
            break;
          case ColumnRole::pos:
            if (!tok.pos)
              throw DataError("sentence " + std::to_string(s) + " token " + std::to_string(t) +
                              " has no POS tag to write");
            out << *tok.pos;
            break;
          case ColumnRole::label:
            if (tok.label.empty())
              throw DataError("sentence " + std::to_string(s) + " token " + std::to_string(t) +
                              " has no label to write");
            out << tok.label;
            break;
          case ColumnRole::skip:
            out << '_';
            break;
        }
      }
      out << '\n';
    }
    out << '\n';
  }
}

std::string write_conll(const Corpus& sentences, const ColumnSpec& columns) {
  std::ostringstream out;
  write_conll(out, sentences, columns);
  return out.str();
}

// ---------------------------------------------------------------------------
// BIO discipline

std::vector<std::string> repair_bio(std::vector<std::string> labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (bio_prefix(labels[i]) != 'I') continue;
    auto type = entity_type(labels[i]);
    bool continues = i > 0 && bio_prefix(labels[i - 1]) != 'O' && entity_type(labels[i - 1]) == type;
    if (!continues) labels[i] = "B-" + std::string(type);
  }
  return labels;
}

Sentence validate_bio(Sentence sentence, BioMode mode) {
  auto& toks = sentence.tokens;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto& label = toks[i].label;
    if (label != "O" && bio_prefix(label) == 'O') throw BioError(i, label);
    if (bio_prefix(label) != 'I') continue;
    auto type = entity_type(label);
    bool continues = i > 0 && bio_prefix(toks[i - 1].label) != 'O' && entity_type(toks[i - 1].label) == type;
    if (continues) continue;
    if (mode == BioMode::strict) throw BioError(i, label);
    toks[i].label = "B-" + std::string(type);
  }
  return sentence;
}

void check_labels(const Corpus& corpus, const LabelSchema& schema) {
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const auto& toks = corpus[s].tokens;
    for (std::size_t t = 0; t < toks.size(); ++t) {
      if (!schema.find(toks[t].label))
        throw DataError("sentence " + std::to_string(s) + " position " + std::to_string(t) +
                        ": label '" + toks[t].label + "' is not in the label schema");
    }
  }
}

// ---------------------------------------------------------------------------
// Statistics

CorpusStats corpus_stats(const Corpus& sentences) {
  CorpusStats st;
  st.sentence_count = sentences.size();
  if (sentences.empty()) return st;
  st.min_len = sentences.front().size();
  for (const auto& s : sentences) {
    st.min_len = std::min(st.min_len, s.size());
    st.max_len = std::max(st.max_len, s.size());
    st.token_count += s.size();
    for (const auto& tok : s.tokens) {
      std::string family = bio_prefix(tok.label) == 'O' ? tok.label : std::string(entity_type(tok.label));
      if (family.empty()) family = "_";
      ++st.tag_counts[family];
    }
  }
  return st;
}

std::string render_stats(const CorpusStats& st, ReportFormat format) {
  std::ostringstream out;
  if (format == ReportFormat::tsv) {
    out << "sentences\t" << st.sentence_count << '\n'
        << "tokens\t" << st.token_count << '\n'
        << "min_length\t" << st.min_len << '\n'
        << "max_length\t" << st.max_len << '\n'
        << "mean_length\t" << text::format_double(st.mean_len()) << '\n';
    for (const auto& [tag, n] : st.tag_counts) out << "tag." << tag << '\t' << n << '\n';
    return out.str();
  }
  out << "Sentences:      " << st.sentence_count << '\n'
      << "Tokens:         " << st.token_count << '\n'
      << "Length min/max: " << st.min_len << " / " << st.max_len << '\n'
      << "Length mean:    " << std::fixed << std::setprecision(2) << st.mean_len() << '\n'
      << "Tag counts:\n";
  for (const auto& [tag, n] : st.tag_counts) {
    out << "  " << std::left << std::setw(8) << tag << std::right << std::setw(10) << n << '\n';
  }
  return out.str();
}

std::map<std::string, double> class_weights(const std::map<std::string, std::size_t>& tag_counts) {
  std::size_t total = 0;
  for (const auto& [tag, n] : tag_counts) total += n;
  if (total == 0) throw DataError("class weights need at least one positive count");
  std::map<std::string, double> weights;
  for (const auto& [tag, n] : tag_counts) {
    weights[tag] = 1.0 - static_cast<double>(n) / static_cast<double>(total);
  }
  return weights;
}

}  // namespace cner
