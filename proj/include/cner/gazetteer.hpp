#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "cner/conll.hpp"

namespace cner {

/// Per entity type, the set of known (possibly multi-word) surface forms.
class Gazetteer {
 public:
  /// Adds an entry given as whitespace-separated words; returns false for duplicates or blanks.
  bool add(const std::string& type, const std::string& entry);
  void add_type(const std::string& type) { entries_[type]; }

  bool contains(const std::string& type, const std::string& joined) const;
  std::size_t entry_count(const std::string& type) const;
  std::size_t max_entry_len() const { return max_len_; }
  std::vector<std::string> types() const;

 private:
  // Entries are stored as their words joined by single spaces.
  std::map<std::string, std::unordered_set<std::string>> entries_;
  std::size_t max_len_ = 0;
};

/// One file per entity type, one entry per line. Empty files produce a warning.
Gazetteer load_gazetteer(const std::map<std::string, std::filesystem::path>& paths,
                         std::vector<std::string>* warnings = nullptr, bool normalize_nfc = true);

/// For every position, the entity types of the longest entry (per type) that
/// starts at some position and covers it. Result is sorted by type name.
std::vector<std::vector<std::string>> match_positions(const Gazetteer& gazetteer, const Sentence& sentence);

}  // namespace cner
