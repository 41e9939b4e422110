#include "cner/features.hpp"

#include <algorithm>
#include <fstream>

#include "cner/parallel.hpp"
#include "cner/text.hpp"
#include "cner/unicode.hpp"

namespace cner {

// ---------------------------------------------------------------------------
// FeatureTemplateConfig

namespace {

bool parse_switch(std::string_view key, std::string_view value) {
  if (value == "on" || value == "true" || value == "yes" || value == "1") return true;
  if (value == "off" || value == "false" || value == "no" || value == "0") return false;
  throw ConfigError("feature family '" + std::string(key) + "' expects on/off, got '" + std::string(value) + "'");
}

bool is_off(std::string_view value) { return value == "off" || value == "false" || value == "none" || value == "no"; }

int parse_window(std::string_view key, std::string_view value) {
  auto k = text::parse_int<int>(value);
  if (!k || *k < 0)
    throw ConfigError("feature family '" + std::string(key) + "' expects off or a window >= 0, got '" +
                      std::string(value) + "'");
  return *k;
}

std::vector<int> parse_lengths(std::string_view key, std::string_view value) {
  std::string normalized(value);
  std::replace(normalized.begin(), normalized.end(), ',', ' ');
  std::vector<int> out;
  for (auto part : text::split_ws(normalized)) {
    auto n = text::parse_int<int>(part);
    if (!n || *n < 1)
      throw ConfigError("feature family '" + std::string(key) + "' expects lengths >= 1, got '" +
                        std::string(value) + "'");
    out.push_back(*n);
  }
  if (out.empty()) throw ConfigError("feature family '" + std::string(key) + "' has no lengths");
  return out;
}

std::string join_lengths(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

void FeatureTemplateConfig::validate() const {
  if (pos_window < 0 || neighbor_window < 0) throw ConfigError("feature windows must be >= 0");
  for (int n : suffix_lengths)
    if (n < 1) throw ConfigError("suffix lengths must be >= 1");
  for (int n : prefix_lengths)
    if (n < 1) throw ConfigError("prefix lengths must be >= 1");
  if (boundary_pad.empty() || std::any_of(boundary_pad.begin(), boundary_pad.end(), text::is_blank))
    throw ConfigError("boundary pad must be a non-empty literal without whitespace");
}

const std::vector<std::string>& FeatureTemplateConfig::keys() {
  static const std::vector<std::string> k{"pos",    "suffix",     "prefix", "neighbors", "digit",
                                          "clusters", "gazetteers", "pad",    "lowercase"};
  return k;
}

void FeatureTemplateConfig::set(std::string_view key, std::string_view raw) {
  auto value = text::trim(raw);
  if (key == "pos") {
    use_pos = !is_off(value);
    if (use_pos) pos_window = parse_window(key, value);
  } else if (key == "neighbors") {
    use_neighbors = !is_off(value);
    if (use_neighbors) neighbor_window = parse_window(key, value);
  } else if (key == "suffix") {
    use_suffix = !is_off(value);
    if (use_suffix) suffix_lengths = parse_lengths(key, value);
  } else if (key == "prefix") {
    use_prefix = !is_off(value);
    if (use_prefix) prefix_lengths = parse_lengths(key, value);
  } else if (key == "digit") {
    use_digit = parse_switch(key, value);
  } else if (key == "clusters") {
    use_cluster = parse_switch(key, value);
  } else if (key == "gazetteers") {
    use_gazetteer = parse_switch(key, value);
  } else if (key == "lowercase") {
    lowercase_ascii = parse_switch(key, value);
  } else if (key == "pad") {
    boundary_pad = std::string(value);
  } else {
    throw ConfigError("unknown feature family '" + std::string(key) + "'");
  }
}

std::string FeatureTemplateConfig::get(std::string_view key) const {
  auto sw = [](bool b) { return std::string(b ? "on" : "off"); };
  if (key == "pos") return use_pos ? std::to_string(pos_window) : "off";
  if (key == "neighbors") return use_neighbors ? std::to_string(neighbor_window) : "off";
  if (key == "suffix") return use_suffix ? join_lengths(suffix_lengths) : "off";
  if (key == "prefix") return use_prefix ? join_lengths(prefix_lengths) : "off";
  if (key == "digit") return sw(use_digit);
  if (key == "clusters") return sw(use_cluster);
  if (key == "gazetteers") return sw(use_gazetteer);
  if (key == "lowercase") return sw(lowercase_ascii);
  if (key == "pad") return boundary_pad;
  throw ConfigError("unknown feature family '" + std::string(key) + "'");
}

FeatureTemplateConfig load_feature_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open feature config " + path.string());
  FeatureTemplateConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = text::trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty()) continue;
    auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError(path.string(), line_no, "expected 'key = value'");
    config.set(text::trim(body.substr(0, eq)), text::trim(body.substr(eq + 1)));
  }
  config.validate();
  return config;
}

// ---------------------------------------------------------------------------
// FeatureIndex

std::optional<FeatureId> FeatureIndex::add(const std::string& feature) {
  if (auto it = ids_.find(feature); it != ids_.end()) return it->second;
  if (frozen_) return std::nullopt;
  auto id = static_cast<FeatureId>(names_.size());
  ids_.emplace(feature, id);
  names_.push_back(feature);
  return id;
}

std::optional<FeatureId> FeatureIndex::find(const std::string& feature) const {
  if (auto it = ids_.find(feature); it != ids_.end()) return it->second;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Extraction

std::string escape_feature_value(std::string_view value) {
  std::string out;
  out.reserve(value.size());
  for (char c : value) {
    if (c == '\\' || c == '=') out += '\\';
    out += c;
  }
  return out;
}

namespace {

std::string offset_tag(int o) {
  if (o > 0) return "[+" + std::to_string(o) + "]";
  return "[" + std::to_string(o) + "]";
}

}  // namespace

std::vector<std::string> extract_features(const Sentence& sentence, std::size_t position,
                                          const FeatureTemplateConfig& config,
                                          const PositionAnnotations& annotations) {
  const auto& toks = sentence.tokens;
  const auto n = static_cast<long>(toks.size());
  if (position >= toks.size())
    throw InternalError("feature position " + std::to_string(position) + " outside sentence");
  const auto t = static_cast<long>(position);
  const std::string pad = escape_feature_value(config.boundary_pad);

  auto word = [&](long i) {
    return config.lowercase_ascii ? unicode::ascii_lower(toks[static_cast<std::size_t>(i)].surface)
                                  : toks[static_cast<std::size_t>(i)].surface;
  };

  std::vector<std::string> out;
  out.emplace_back("bias");

  if (config.use_neighbors) {
    for (int o = -config.neighbor_window; o <= config.neighbor_window; ++o) {
      long i = t + o;
      out.push_back("w" + offset_tag(o) + "=" + (i < 0 || i >= n ? pad : escape_feature_value(word(i))));
    }
  }

  if (config.use_pos) {
    for (int o = -config.pos_window; o <= config.pos_window; ++o) {
      long i = t + o;
      std::string value = pad;
      if (i >= 0 && i < n) {
        const auto& pos = toks[static_cast<std::size_t>(i)].pos;
        if (!pos)
          throw ConfigError("POS features enabled but token " + std::to_string(i) + " ('" +
                            toks[static_cast<std::size_t>(i)].surface + "') has no POS tag");
        value = escape_feature_value(*pos);
      }
      out.push_back("pos" + offset_tag(o) + "=" + value);
    }
  }

  if (config.use_suffix || config.use_prefix) {
    const std::string current = word(t);
    if (config.use_suffix) {
      for (int len : config.suffix_lengths)
        out.push_back("suf" + std::to_string(len) + "=" +
                      escape_feature_value(unicode::suffix(current, static_cast<std::size_t>(len))));
    }
    if (config.use_prefix) {
      for (int len : config.prefix_lengths)
        out.push_back("pre" + std::to_string(len) + "=" +
                      escape_feature_value(unicode::prefix(current, static_cast<std::size_t>(len))));
    }
  }

  if (config.use_digit) {
    out.push_back(std::string("digit=") + (unicode::is_digit_token(toks[position].surface) ? "true" : "false"));
  }

  if (config.use_cluster) {
    if (annotations.cluster_ids.size() != toks.size())
      throw ConfigError("cluster features enabled but no cluster lookup was supplied");
    for (int o = -1; o <= 1; ++o) {
      long i = t + o;
      out.push_back("cluster" + offset_tag(o) + "=" +
                    (i < 0 || i >= n ? pad : std::to_string(annotations.cluster_ids[static_cast<std::size_t>(i)])));
    }
  }

  if (config.use_gazetteer) {
    if (annotations.gazetteer_types.size() != toks.size())
      throw ConfigError("gazetteer features enabled but no gazetteer matches were supplied");
    for (const auto& type : annotations.gazetteer_types[position]) out.push_back("gaz=" + escape_feature_value(type));
  }
  return out;
}

FeatureVector make_feature_vector(const FeatureIndex& index, const std::vector<std::string>& features) {
  FeatureVector fv;
  fv.ids.reserve(features.size());
  for (const auto& f : features) {
    if (auto id = index.find(f)) fv.ids.push_back(*id);
  }
  std::sort(fv.ids.begin(), fv.ids.end());
  fv.ids.erase(std::unique(fv.ids.begin(), fv.ids.end()), fv.ids.end());
  return fv;
}

FeatureSequence featurize(const Sentence& sentence, const FeatureTemplateConfig& config,
                          const PositionAnnotations& annotations, const FeatureIndex& index) {
  FeatureSequence seq;
  seq.reserve(sentence.size());
  for (std::size_t t = 0; t < sentence.size(); ++t)
    seq.push_back(make_feature_vector(index, extract_features(sentence, t, config, annotations)));
  return seq;
}

IndexedCorpus index_corpus(const Corpus& sentences, const FeatureTemplateConfig& config,
                           const std::vector<PositionAnnotations>& annotations, unsigned threads) {
  if (!annotations.empty() && annotations.size() != sentences.size())
    throw InternalError("annotations must cover every sentence");
  static const PositionAnnotations none;

  std::vector<std::vector<std::vector<std::string>>> strings(sentences.size());
  parallel_for(sentences.size(), threads, [&](std::size_t s) {
    const auto& ann = annotations.empty() ? none : annotations[s];
    auto& out = strings[s];
    out.reserve(sentences[s].size());
    try {
      for (std::size_t t = 0; t < sentences[s].size(); ++t)
        out.push_back(extract_features(sentences[s], t, config, ann));
    } catch (const ConfigError& e) {
      throw ConfigError("sentence " + std::to_string(s) + ": " + e.what());
    }
  });

  IndexedCorpus result;
  result.vectors.resize(sentences.size());
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    for (const auto& feats : strings[s]) {
      FeatureVector fv;
      fv.ids.reserve(feats.size());
      for (const auto& f : feats) fv.ids.push_back(*result.index.add(f));
      std::sort(fv.ids.begin(), fv.ids.end());
      fv.ids.erase(std::unique(fv.ids.begin(), fv.ids.end()), fv.ids.end());
      result.vectors[s].push_back(std::move(fv));
    }
  }
  result.index.freeze();
  return result;
}

// ---------------------------------------------------------------------------
// POS lexicon

PosLexicon load_pos_lexicon(const std::filesystem::path& path, bool normalize_nfc) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open POS lexicon " + path.string());
  PosLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = text::split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() != 2) throw ParseError(path.string(), line_no, "expected 'word<TAB>tag'");
    std::string word = normalize_nfc ? unicode::nfc(fields[0]) : std::string(fields[0]);
    lex[word] = std::string(fields[1]);
  }
  return lex;
}

void apply_pos_lexicon(Corpus& corpus, const PosLexicon& lexicon, const std::string& unknown_tag) {
  for (auto& s : corpus) {
    for (auto& tok : s.tokens) {
      if (tok.pos) continue;
      auto it = lexicon.find(tok.surface);
      tok.pos = it == lexicon.end() ? unknown_tag : it->second;
    }
  }
}

}  // namespace cner
