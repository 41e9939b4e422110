#include "cner/gazetteer.hpp"

#include <fstream>

#include "cner/error.hpp"
#include "cner/text.hpp"
#include "cner/unicode.hpp"

namespace cner {

bool Gazetteer::add(const std::string& type, const std::string& entry) {
  auto words = text::split_ws(entry);
  if (words.empty()) return false;
  std::string joined;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) joined += ' ';
    joined += words[i];
  }
  bool inserted = entries_[type].insert(std::move(joined)).second;
  if (inserted) max_len_ = std::max(max_len_, words.size());
  return inserted;
}

bool Gazetteer::contains(const std::string& type, const std::string& joined) const {
  auto it = entries_.find(type);
  return it != entries_.end() && it->second.count(joined) > 0;
}

std::size_t Gazetteer::entry_count(const std::string& type) const {
  auto it = entries_.find(type);
  return it == entries_.end() ? 0 : it->second.size();
}

std::vector<std::string> Gazetteer::types() const {
  std::vector<std::string> out;
  for (const auto& [type, set] : entries_) out.push_back(type);
  return out;
}

Gazetteer load_gazetteer(const std::map<std::string, std::filesystem::path>& paths, std::vector<std::string>* warnings,
                         bool normalize_nfc) {
  Gazetteer gaz;
  for (const auto& [type, path] : paths) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read gazetteer for type " + type + ": " + path.string());
    gaz.add_type(type);
    std::string line;
    while (std::getline(in, line)) {
      gaz.add(type, normalize_nfc ? unicode::nfc(line) : line);
    }
    if (gaz.entry_count(type) == 0 && warnings)
      warnings->push_back("gazetteer for type " + type + " (" + path.string() + ") is empty");
  }
  return gaz;
}

std::vector<std::vector<std::string>> match_positions(const Gazetteer& gazetteer, const Sentence& sentence) {
  const std::size_t n = sentence.size();
  std::vector<std::vector<std::string>> hits(n);
  const auto max_len = gazetteer.max_entry_len();
  for (const auto& type : gazetteer.types()) {
    std::vector<bool> marked(n, false);
    for (std::size_t start = 0; start < n; ++start) {
      // Longest entry of this type starting here.
      std::string joined;
      std::size_t longest = 0;
      for (std::size_t len = 1; len <= max_len && start + len <= n; ++len) {
        if (len > 1) joined += ' ';
        joined += sentence.tokens[start + len - 1].surface;
        if (gazetteer.contains(type, joined)) longest = len;
      }
      for (std::size_t i = start; i < start + longest; ++i) marked[i] = true;
    }
    for (std::size_t i = 0; i < n; ++i)
      if (marked[i]) hits[i].push_back(type);
  }
  return hits;
}

}  // namespace cner
