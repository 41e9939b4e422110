#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cner/conll.hpp"

namespace cner {

struct EntitySpan {
  std::string type;
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive

  auto operator<=>(const EntitySpan&) const = default;
};

/// Each maximal B-X (I-X)* run becomes one span. A stray I-X that does not
/// continue a same-type span opens a new one.
std::vector<EntitySpan> extract_spans(std::span<const std::string> labels);

struct TypeScores {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;

  std::size_t support() const { return tp + fn; }
};

struct EvalReport {
  std::map<std::string, TypeScores> per_type;
  TypeScores micro;
  /// Mean F1 over types with gold support > 0.
  double macro_f1 = 0;
  std::size_t tokens = 0;
  std::size_t correct_tokens = 0;
};

/// Strict span matching: a predicted span counts iff the identical (type, start, end) is gold.
EvalReport evaluate(const Corpus& gold, const std::vector<std::vector<std::string>>& predicted);

/// human: a table with Table-style row names (P-X, R-X, F1-X, Precision, Recall, F1, Macro-F1);
/// tsv: one "name<TAB>value" line per metric.
std::string render_report(const EvalReport& report, ReportFormat format);

}  // namespace cner
