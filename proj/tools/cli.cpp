#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <memory>

#include "cner/parallel.hpp"
#include "cner/pipeline.hpp"
#include "cner/text.hpp"

namespace cner::cli {

namespace {

ReportFormat parse_format(const std::string& s) {
  if (s == "human") return ReportFormat::human;
  if (s == "tsv") return ReportFormat::tsv;
  throw ConfigError("--format expects human or tsv");
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << content;
}

int cmd_stats(const RunConfig& config, const std::string& corpus_path, const std::string& format, std::ostream& out) {
  if (!std::filesystem::exists(corpus_path)) throw DataError("corpus file " + corpus_path + " does not exist");
  Corpus corpus = read_conll_file(corpus_path, config.columns, config.parse_options(true));
  out << render_stats(corpus_stats(corpus), parse_format(format));
  return kOk;
}

int cmd_cluster(const RunConfig& config, std::ostream& out) {
  if (config.embeddings_file.empty()) throw ConfigError("cluster needs embeddings_file");
  if (config.cluster_file.empty()) throw ConfigError("cluster needs cluster_file for the output");
  auto table = load_embeddings(config.embeddings_file, config.normalize_nfc);
  auto result = kmeans(table, config.kmeans);
  save_clusters(result.model, config.cluster_file);
  out << "words\t" << table.size() << '\n'
      << "k\t" << result.model.k() << '\n'
      << "iterations\t" << result.iterations << '\n'
      << "inertia\t" << text::format_double(result.model.inertia) << '\n';
  if (table.duplicates_overridden) out << "duplicates_overridden\t" << table.duplicates_overridden << '\n';
  return kOk;
}

int cmd_train(RunConfig config, std::ostream& out, std::ostream& err) {
  if (config.model_file.empty()) throw ConfigError("train needs model_file");
  const auto log_path = std::filesystem::path(config.model_file.string() + ".trainlog");
  auto log = std::make_shared<std::ofstream>(log_path, std::ios::binary);
  if (!*log) throw DataError("cannot write " + log_path.string());
  *log << "iteration\tobjective\n";
  config.train.progress = [log](int iteration, double objective) {
    *log << iteration << '\t' << text::format_double(objective) << '\n';
    log->flush();
  };
  TrainOutcome outcome;
  try {
    outcome = run_training(config);
  } catch (const TrainingError& e) {
    err << "error: " << e.what() << " (iteration log: " << log_path.string() << ")\n";
    return kInternal;
  }
  for (const auto& w : outcome.warnings) err << "warning: " << w << '\n';
  save_model(outcome.trained.model, config.model_file);
  const auto& tl = outcome.trained.log;
  out << "features\t" << outcome.trained.model.index.size() << '\n'
      << "iterations\t" << tl.iterations << '\n'
      << "objective\t" << text::format_double(tl.objective.back()) << '\n'
      << "stop\t" << tl.stop_reason << '\n'
      << "model\t" << config.model_file.string() << '\n';
  if (outcome.dev_report) out << render_report(*outcome.dev_report, ReportFormat::human);
  return kOk;
}

int cmd_tag(RunConfig config, const std::string& input, std::ostream& out, std::ostream& err) {
  if (config.model_file.empty()) throw ConfigError("tag needs model_file");
  if (input.empty()) throw ConfigError("tag needs an input corpus");
  if (!std::filesystem::exists(input)) throw DataError("input corpus " + input + " does not exist");
  CrfModel model = load_model(config.model_file);
  std::vector<std::string> warnings;
  Resources resources = load_resources(model.features, config, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  Corpus corpus = load_corpus(input, config, resources, model.features, false);
  auto predicted = tag_corpus(model, corpus, resources, config.train.threads);

  ColumnSpec columns;
  columns.roles = {ColumnRole::surface};
  if (config.columns.has(ColumnRole::pos)) columns.roles.push_back(ColumnRole::pos);
  columns.roles.push_back(ColumnRole::label);
  for (std::size_t s = 0; s < corpus.size(); ++s)
    for (std::size_t t = 0; t < corpus[s].size(); ++t) corpus[s].tokens[t].label = predicted[s][t];
  const std::string text = write_conll(corpus, columns);
  if (config.output_file.empty())
    out << text;
  else
    write_text(config.output_file, text);
  return kOk;
}

// Labels from the last column of each row, grouped by sentence.
std::vector<std::vector<std::string>> read_last_column(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::vector<std::string>> sentences;
  std::vector<std::string> current;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = text::split_ws(line);
    if (fields.empty()) {
      if (!current.empty()) sentences.push_back(std::move(current));
      current.clear();
      continue;
    }
    if (current.empty() && line.front() == '#') continue;
    if (fields.size() < 2) throw ParseError(path, line_no, "expected a surface and a label column");
    current.emplace_back(fields.back());
  }
  if (!current.empty()) sentences.push_back(std::move(current));
  return sentences;
}

int cmd_eval(const RunConfig& config, const std::vector<std::string>& files, const std::string& format,
             std::ostream& out) {
  if (files.empty() || files.size() > 2) throw ConfigError("eval takes GOLD [PREDICTED]");
  for (const auto& f : files)
    if (!std::filesystem::exists(f)) throw DataError("file " + f + " does not exist");
  RunConfig gold_config = config;
  if (files.size() == 1) {
    // Single file: the prediction is an extra column after the configured ones.
    gold_config.columns.roles.push_back(ColumnRole::skip);
  }
  Corpus gold = load_corpus(files[0], gold_config, Resources{}, FeatureTemplateConfig{}, true);
  auto predicted = read_last_column(files.back());
  auto report = evaluate(gold, predicted);
  out << render_report(report, parse_format(format));
  if (!config.output_file.empty()) write_text(config.output_file, render_report(report, ReportFormat::tsv));
  return kOk;
}

const std::map<std::string, std::string> kKeyHelp{
    {"train_file", "Labeled training corpus"},
    {"dev_file", "Labeled corpus scored after training"},
    {"model_file", "Model to write (train) or read (tag)"},
    {"embeddings_file", "Word vectors for clustering and unseen words"},
    {"cluster_file", "Cluster file to write (cluster) or read"},
    {"pos_lexicon", "word<TAB>tag lexicon for corpora without POS"},
    {"output_file", "Where tag/eval write instead of stdout"},
    {"columns", "Column roles, e.g. surface,pos,label"},
    {"entity_types", "Comma-separated entity types"},
    {"bare_tags", "on: labels are bare types without B-/I-"},
    {"nfc", "on/off: NFC-normalize surfaces"},
    {"bio_mode", "repair or strict"},
    {"l2", "L2 regularization strength"},
    {"max_iterations", "Optimizer iteration cap"},
    {"tolerance", "Relative objective change that stops training"},
    {"seed", "Seed for k-means"},
    {"threads", "Worker threads (0 = hardware)"},
    {"bio_constraints", "on: forbid illegal BIO transitions when decoding"},
    {"k", "Number of clusters"},
    {"kmeans_max_iter", "k-means iteration cap"},
    {"kmeans_tol", "k-means centroid movement tolerance"},
    {"pos", "POS window or off"},
    {"suffix", "Suffix lengths or off"},
    {"prefix", "Prefix lengths or off"},
    {"neighbors", "Neighbor word window or off"},
    {"digit", "on/off: digit feature"},
    {"clusters", "on/off: cluster features"},
    {"gazetteers", "on/off: gazetteer features"},
    {"pad", "Boundary padding token"},
    {"lowercase", "on/off: lowercase ASCII letters"},
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Feature-based CRF named entity recognizer", "cner"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "Declarative run configuration (key = value)");

  // Every configuration key doubles as a --key flag that overrides the file.
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  std::vector<std::string> gazetteer_flags;
  for (const auto& key : RunConfig::keys()) {
    if (key == "gazetteer") {
      options[key] = app.add_option("--gazetteer", gazetteer_flags, "TYPE=path, repeatable");
    } else {
      auto help = kKeyHelp.find(key);
      options[key] = app.add_option("--" + key, values[key], help == kKeyHelp.end() ? "" : help->second);
    }
  }

  auto* stats = app.add_subcommand("stats", "Corpus statistics");
  std::string stats_corpus, format = "human";
  stats->add_option("corpus", stats_corpus, "CoNLL corpus")->required();
  stats->add_option("--format", format, "human or tsv");

  auto* cluster = app.add_subcommand("cluster", "k-means over word embeddings");
  std::string cluster_in, cluster_out;
  cluster->add_option("embeddings", cluster_in, "Embedding text file");
  cluster->add_option("output", cluster_out, "Cluster file to write");

  auto* train = app.add_subcommand("train", "Train a CRF model");

  auto* tag = app.add_subcommand("tag", "Tag a corpus with a trained model");
  std::string tag_input;
  tag->add_option("input", tag_input, "CoNLL corpus (label column optional)");

  auto* eval = app.add_subcommand("eval", "Span-level precision/recall/F1");
  std::vector<std::string> eval_files;
  eval->add_option("files", eval_files, "GOLD [PREDICTED]")->expected(1, 2);
  eval->add_option("--format", format, "human or tsv");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    RunConfig config;
    config.train.threads = default_threads();
    if (!config_path.empty()) apply_config_file(config, config_path);
    for (const auto& key : RunConfig::keys()) {
      if (options[key]->count() == 0) continue;
      if (key == "gazetteer") {
        for (const auto& g : gazetteer_flags) config.set(key, g);
      } else {
        config.set(key, values[key]);
      }
    }
    if (!cluster_in.empty()) config.embeddings_file = cluster_in;
    if (!cluster_out.empty()) config.cluster_file = cluster_out;

    if (*stats) return cmd_stats(config, stats_corpus, format, out);
    if (*cluster) return cmd_cluster(config, out);
    if (*train) return cmd_train(config, out, err);
    if (*tag) return cmd_tag(config, tag_input, out, err);
    if (*eval) return cmd_eval(config, eval_files, format, out);
    err << "error: no subcommand\n";
    return kUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace cner::cli
