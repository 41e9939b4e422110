#include "cner/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

#include "cner/text.hpp"

namespace cner {

std::vector<EntitySpan> extract_spans(std::span<const std::string> labels) {
  std::vector<EntitySpan> spans;
  bool open = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const char p = bio_prefix(labels[i]);
    if (p == 'O') {
      open = false;
      continue;
    }
    const auto type = entity_type(labels[i]);
    if (p == 'I' && open && spans.back().type == type) {
      spans.back().end = i;
      continue;
    }
    spans.push_back({std::string(type), i, i});
    open = true;
  }
  return spans;
}

namespace {

void finish(TypeScores& s) {
  s.precision = s.tp + s.fp == 0 ? 0.0 : static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp);
  s.recall = s.tp + s.fn == 0 ? 0.0 : static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn);
  s.f1 = s.precision + s.recall == 0 ? 0.0 : 2 * s.precision * s.recall / (s.precision + s.recall);
}

}  // namespace

EvalReport evaluate(const Corpus& gold, const std::vector<std::vector<std::string>>& predicted) {
  if (gold.size() != predicted.size())
    throw DataError("gold has " + std::to_string(gold.size()) + " sentences, prediction has " +
                    std::to_string(predicted.size()));
  EvalReport report;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    auto gold_labels = gold[s].labels();
    if (gold_labels.size() != predicted[s].size())
      throw DataError("length mismatch in sentence " + std::to_string(s) + ": gold " +
                      std::to_string(gold_labels.size()) + ", predicted " + std::to_string(predicted[s].size()));
    for (std::size_t t = 0; t < gold_labels.size(); ++t) {
      ++report.tokens;
      if (gold_labels[t] == predicted[s][t]) ++report.correct_tokens;
    }
    auto g = extract_spans(gold_labels);
    auto p = extract_spans(predicted[s]);
    std::set<EntitySpan> gold_set(g.begin(), g.end());
    std::set<EntitySpan> pred_set(p.begin(), p.end());
    for (const auto& span : gold_set) {
      auto& scores = report.per_type[span.type];
      if (pred_set.count(span))
        ++scores.tp;
      else
        ++scores.fn;
    }
    for (const auto& span : pred_set) {
      if (!gold_set.count(span)) ++report.per_type[span.type].fp;
    }
  }
  double macro_sum = 0;
  std::size_t macro_n = 0;
  for (auto& [type, scores] : report.per_type) {
    finish(scores);
    report.micro.tp += scores.tp;
    report.micro.fp += scores.fp;
    report.micro.fn += scores.fn;
    if (scores.support() > 0) {
      macro_sum += scores.f1;
      ++macro_n;
    }
  }
  finish(report.micro);
  report.macro_f1 = macro_n == 0 ? 0.0 : macro_sum / static_cast<double>(macro_n);
  return report;
}

std::string render_report(const EvalReport& report, ReportFormat format) {
  std::ostringstream out;
  if (format == ReportFormat::tsv) {
    for (const auto& [type, s] : report.per_type) {
      out << "P-" << type << '\t' << text::format_double(s.precision) << '\n'
          << "R-" << type << '\t' << text::format_double(s.recall) << '\n'
          << "F1-" << type << '\t' << text::format_double(s.f1) << '\n'
          << "support-" << type << '\t' << s.support() << '\n';
    }
    out << "Precision\t" << text::format_double(report.micro.precision) << '\n'
        << "Recall\t" << text::format_double(report.micro.recall) << '\n'
        << "F1\t" << text::format_double(report.micro.f1) << '\n'
        << "Macro-F1\t" << text::format_double(report.macro_f1) << '\n';
    return out.str();
  }
  auto row = [&](const std::string& name, double value, const std::string& support = "") {
    out << std::left << std::setw(12) << name << std::right << std::fixed << std::setprecision(6) << std::setw(10)
        << value;
    if (!support.empty()) out << std::setw(10) << support;
    out << '\n';
  };
  out << std::left << std::setw(12) << "Metric" << std::right << std::setw(10) << "Value" << std::setw(10)
      << "Support" << '\n';
  for (const auto& [type, s] : report.per_type) {
    const auto support = std::to_string(s.support());
    row("P-" + type, s.precision, support);
    row("R-" + type, s.recall, support);
    row("F1-" + type, s.f1, support);
  }
  const auto total = std::to_string(report.micro.support());
  row("Precision", report.micro.precision, total);
  row("Recall", report.micro.recall, total);
  row("F1", report.micro.f1, total);
  row("Macro-F1", report.macro_f1);
  return out.str();
}

}  // namespace cner
