// Acceptance suite: one PASS/FAIL line per criterion. Criterion 10 needs the
// external corpus and resources and never affects the exit status.

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "cner/clustering.hpp"
#include "cner/pipeline.hpp"
#include "test_support.hpp"

using namespace cner;
namespace ct = cner::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects the first few failure messages of one criterion.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) messages_ += (messages_.empty() ? "" : "; ") + what;
  }
  Outcome outcome(const std::string& summary) const {
    if (failures_ == 0) return {true, summary};
    return {false, std::to_string(failures_) + "/" + std::to_string(checks_) + " checks failed: " + messages_};
  }

 private:
  std::size_t checks_ = 0, failures_ = 0;
  std::string messages_;
};

std::string num(double v) {
  std::ostringstream out;
  out.precision(3);
  out << v;
  return out.str();
}

std::vector<std::vector<std::string>> decode_all(const CrfWeights<double>& w, const LabelSchema& schema,
                                                 const std::vector<LabeledSequence>& batch) {
  std::vector<std::vector<std::string>> out;
  for (const auto& seq : batch) {
    std::vector<std::string> labels;
    for (int id : viterbi(w, seq.features).labels) labels.push_back(schema.label(id));
    out.push_back(std::move(labels));
  }
  return out;
}

struct Toy {
  LabelSchema schema{std::vector<std::string>{"LOC", "PER", "CW"}};
  Corpus corpus;
  IndexedCorpus indexed;
  std::vector<LabeledSequence> batch;
  FeatureTemplateConfig features;
};

Toy make_toy(std::size_t sentences, std::uint64_t seed) {
  Toy t;
  t.corpus = ct::separable_corpus(sentences, seed);
  t.features.use_suffix = t.features.use_prefix = false;
  t.features.neighbor_window = 0;
  t.indexed = index_corpus(t.corpus, t.features);
  for (std::size_t s = 0; s < t.corpus.size(); ++s) {
    LabeledSequence seq{t.indexed.vectors[s], {}};
    for (const auto& tok : t.corpus[s].tokens) seq.labels.push_back(t.schema.index(tok.label));
    t.batch.push_back(std::move(seq));
  }
  return t;
}

Outcome partition_function() {
  Checker c;
  std::mt19937_64 rng(101);
  double worst = 0;
  const int draws = 300;
  for (int d = 0; d < draws; ++d) {
    int n = 1 + d % 6, L = 1 + (d / 6) % 4;
    auto inst = ct::random_instance(rng, n, L, 8, 1.0 + (d % 3));
    double err = std::abs(forward_backward(inst.weights, inst.features).log_z -
                          static_cast<double>(ct::brute_log_z(inst.weights.params(), 8, L, inst.features)));
    worst = std::max(worst, err);
    c.expect(err < 1e-10, "draw " + std::to_string(d) + " error " + num(err));
  }
  return c.outcome(std::to_string(draws) + " models, max |error| " + num(worst));
}

Outcome gradient() {
  Checker c;
  std::mt19937_64 rng(102);
  const double h = 1e-5;
  std::size_t components = 0;
  const int draws = 25;
  for (int d = 0; d < draws; ++d) {
    const int F = 5, L = 2 + d % 3, n = 1 + d % 4;
    auto inst = ct::random_instance(rng, n, L, F);
    std::vector<int> y;
    for (int t = 0; t < n; ++t) y.push_back(static_cast<int>(rng() % static_cast<unsigned>(L)));
    std::vector<LabeledSequence> batch{{inst.features, y}};
    const double l2 = 0.25 * (d % 5);
    auto obj = nll_and_gradient(inst.weights, batch, l2);
    Eigen::VectorXd p = inst.weights.params();
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      Eigen::VectorXd plus = p, minus = p;
      plus(i) += h;
      minus(i) -= h;
      double fd = static_cast<double>(
          (ct::brute_objective(plus, F, L, batch, l2) - ct::brute_objective(minus, F, L, batch, l2)) / (2 * h));
      double g = obj.gradient.params()(i);
      c.expect(std::abs(g - fd) <= std::max(1e-5 * std::max(std::abs(fd), std::abs(g)), 1e-8),
               "draw " + std::to_string(d) + " component " + std::to_string(i));
      ++components;
    }
  }
  return c.outcome(std::to_string(draws) + " draws, " + std::to_string(components) + " components");
}

Outcome viterbi_oracle() {
  Checker c;
  std::mt19937_64 rng(103);
  const int draws = 1200;
  int ties = 0;
  for (int d = 0; d < draws; ++d) {
    const bool integer = d % 2 == 1;
    int n = 1 + static_cast<int>(rng() % 7), L = 1 + static_cast<int>(rng() % 5);
    auto inst = ct::random_instance(rng, n, L, 4, 1.0, integer);
    auto got = viterbi(inst.weights, inst.features);
    auto best = ct::brute_best(inst.weights.params(), 4, L, inst.features);
    if (best.optima > 1) ++ties;
    if (integer) {
      c.expect(static_cast<long double>(got.score) == best.score, "draw " + std::to_string(d) + " score");
      c.expect(got.labels == best.labels, "draw " + std::to_string(d) + " tie-break");
    } else {
      c.expect(std::abs(static_cast<long double>(got.score) - best.score) < 1e-12L,
               "draw " + std::to_string(d) + " score");
    }
    c.expect(got.score == sequence_score(inst.weights, inst.features, got.labels),
             "draw " + std::to_string(d) + " reported score");
  }
  c.expect(ties > 0, "no tie cases were generated");
  return c.outcome(std::to_string(draws) + " instances, " + std::to_string(ties) + " with tied optima");
}

Outcome convex_training() {
  Checker c;
  const auto t0 = std::chrono::steady_clock::now();
  auto toy = make_toy(240, 104);
  TrainConfig cfg;
  cfg.max_iterations = 50;
  auto trained = train_weights(toy.batch, static_cast<Eigen::Index>(toy.indexed.index.size()),
                               static_cast<Eigen::Index>(toy.schema.size()), cfg);
  auto report = evaluate(toy.corpus, decode_all(trained.weights, toy.schema, toy.batch));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& h = trained.log.objective;
  for (std::size_t i = 1; i < h.size(); ++i) c.expect(h[i] <= h[i - 1], "objective rose at " + std::to_string(i));
  c.expect(trained.log.iterations <= 50, "iterations");
  c.expect(report.micro.f1 == 1.0, "training F1 " + num(report.micro.f1));
  c.expect(report.per_type.size() == 3, "entity types present");
  c.expect(seconds < 60.0, "runtime " + num(seconds) + " s");
  return c.outcome("240 sentences, F1 " + num(report.micro.f1) + ", " + std::to_string(trained.log.iterations) +
                   " iterations, runtime " + num(seconds) + " s");
}

Outcome lattice_invariants() {
  Checker c;
  std::mt19937_64 rng(105);
  std::size_t positions = 0;
  for (int d = 0; d < 500; ++d) {
    int n = 1 + static_cast<int>(rng() % 12), L = 1 + static_cast<int>(rng() % 6);
    auto inst = ct::random_instance(rng, n, L, 10, 2.0);
    auto lat = forward_backward(inst.weights, inst.features);
    auto m = lat.marginals();
    for (int t = 0; t < n; ++t) {
      c.expect(std::abs(m.row(t).sum() - 1.0) < 1e-10, "marginal sum, draw " + std::to_string(d));
      double lse = logsumexp((lat.log_alpha.row(t) + lat.log_beta.row(t)).transpose());
      c.expect(std::abs(lse - lat.log_z) < 1e-8, "partition consistency, draw " + std::to_string(d));
      ++positions;
    }
  }
  return c.outcome("500 models, " + std::to_string(positions) + " positions");
}

EmbeddingTable random_table(std::mt19937_64& rng, int words, int dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::ostringstream out;
  out.precision(17);
  for (int w = 0; w < words; ++w) {
    out << "w" << w;
    for (int d = 0; d < dim; ++d) out << ' ' << g(rng);
    out << '\n';
  }
  std::istringstream in(out.str());
  return load_embeddings(in);
}

Outcome kmeans_checks() {
  Checker c;
  std::mt19937_64 rng(106);
  for (int d = 0; d < 20; ++d) {
    auto table = random_table(rng, 80, 4);
    auto r = kmeans(table, {3 + d % 6, static_cast<std::uint64_t>(d), 100, 1e-10});
    for (std::size_t i = 1; i < r.inertia_history.size(); ++i)
      c.expect(r.inertia_history[i] <= r.inertia_history[i - 1], "inertia rose, draw " + std::to_string(d));
  }

  auto table = random_table(rng, 50, 6);
  auto one = kmeans(table, {1, 7, 100, 1e-8});
  Eigen::RowVectorXd mean = table.vectors.colwise().mean();
  const double dev = (one.model.centroids.row(0) - mean).cwiseAbs().maxCoeff();
  c.expect(dev <= 1e-12, "k=1 centroid off by " + num(dev));

  std::istringstream triads(
      "p 0.0 0.0\nq 0.2 0.1\nr 0.1 0.3\n"
      "x 10.0 10.0\ny 10.3 9.9\nz 9.8 10.2\n");
  auto tri = load_embeddings(triads);
  const std::set<std::set<std::string>> planted{{"p", "q", "r"}, {"x", "y", "z"}};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto r = kmeans(tri, {2, seed, 100, 1e-8});
    std::map<int, std::set<std::string>> groups;
    for (const auto& [w, id] : r.model.assignment) groups[id].insert(w);
    std::set<std::set<std::string>> found;
    for (const auto& [_, g] : groups) found.insert(g);
    c.expect(found == planted, "triads not recovered with seed " + std::to_string(seed));
  }
  return c.outcome("20 monotone runs, k=1 mean error " + num(dev) + ", triads recovered for 10 seeds");
}

Outcome metrics_oracle() {
  Checker c;
  auto sent = [](std::vector<std::string> labels) {
    Sentence s;
    for (auto& l : labels) s.tokens.push_back({"w", std::nullopt, l});
    return s;
  };
  struct Fixture {
    Corpus gold;
    std::vector<std::vector<std::string>> pred;
    double p, r, f1;
  };
  const std::vector<Fixture> fixtures{
      {{sent({"B-LOC", "I-LOC", "O", "B-PER"})}, {{"B-LOC", "I-LOC", "B-PER", "I-PER"}}, 0.5, 0.5, 0.5},
      {{sent({"B-LOC", "O"})}, {{"B-PER", "O"}}, 0.0, 0.0, 0.0},
      {{sent({"B-LOC", "O", "B-LOC", "I-LOC"}), sent({"B-CW", "O"})},
       {{"B-LOC", "O", "B-LOC", "I-LOC"}, {"O", "B-CW"}},
       2.0 / 3.0,
       2.0 / 3.0,
       2.0 / 3.0},
      {{sent({"B-PER", "I-PER", "I-PER"})}, {{"B-PER", "I-PER", "O"}}, 0.0, 0.0, 0.0},
      {{sent({"B-CW", "B-CW", "O", "B-GRP"})}, {{"B-CW", "B-CW", "O", "O"}}, 1.0, 2.0 / 3.0, 0.8},
      {{sent({"B-LOC"}), sent({"O", "B-PER"})}, {{"B-LOC"}, {"B-PER", "O"}}, 0.5, 0.5, 0.5},
  };
  for (std::size_t i = 0; i < fixtures.size(); ++i) {
    const auto& f = fixtures[i];
    auto r = evaluate(f.gold, f.pred);
    c.expect(r.micro.precision == f.p && r.micro.recall == f.r && std::abs(r.micro.f1 - f.f1) < 1e-15,
             "fixture " + std::to_string(i));
  }

  std::mt19937_64 rng(107);
  const std::vector<std::string> pool{"O", "O", "B-LOC", "I-LOC", "B-PER", "I-PER", "B-CW", "I-CW"};
  auto random_labels = [&](std::size_t n) {
    std::vector<std::string> l;
    for (std::size_t t = 0; t < n; ++t) l.push_back(pool[rng() % pool.size()]);
    return repair_bio(l);
  };
  for (int d = 0; d < 100; ++d) {
    Corpus gold, pred;
    std::vector<std::vector<std::string>> gold_labels, pred_labels;
    for (int s = 0; s < 10; ++s) {
      std::size_t n = 1 + rng() % 8;
      gold.push_back(sent(random_labels(n)));
      pred.push_back(sent(random_labels(n)));
      gold_labels.push_back(gold.back().labels());
      pred_labels.push_back(pred.back().labels());
    }
    auto self = evaluate(gold, gold_labels);
    if (self.micro.support() > 0)
      c.expect(self.micro.precision == 1.0 && self.micro.recall == 1.0 && self.micro.f1 == 1.0,
               "gold vs gold, draw " + std::to_string(d));
    auto a = evaluate(gold, pred_labels);
    auto b = evaluate(pred, gold_labels);
    c.expect(a.micro.precision == b.micro.recall && a.micro.recall == b.micro.precision,
             "swap symmetry, draw " + std::to_string(d));
  }
  return c.outcome(std::to_string(fixtures.size()) + " fixtures, 100 random corpora");
}

Outcome round_trips() {
  Checker c;
  // CoNLL
  std::mt19937_64 rng(108);
  const std::vector<std::string> words{"ঢাকা", "আমি", "রংপুর", "২০২৩", "x"};
  const std::vector<std::string> labels{"O", "B-LOC", "I-LOC", "B-PER"};
  const auto spec = ColumnSpec::parse("surface,pos,label");
  for (int d = 0; d < 100; ++d) {
    Corpus corpus;
    for (std::size_t s = rng() % 6; s > 0; --s) {
      Sentence sent;
      for (std::size_t t = 1 + rng() % 6; t > 0; --t)
        sent.tokens.push_back({words[rng() % words.size()], "NN", labels[rng() % labels.size()]});
      corpus.push_back(sent);
    }
    c.expect(parse_conll(write_conll(corpus, spec), spec) == corpus, "CoNLL round trip " + std::to_string(d));
  }
  auto sample = read_conll_file(CNER_TEST_DATA "/sample.conll", spec);
  c.expect(parse_conll(write_conll(sample, spec), spec) == sample, "CoNLL sample file");

  // model
  auto toy = make_toy(60, 109);
  TrainConfig cfg;
  cfg.max_iterations = 20;
  auto trained = train(toy.schema, toy.indexed.index, toy.features, toy.batch, cfg);
  std::stringstream saved;
  save_model(trained.model, saved);
  auto loaded = load_model(saved);
  c.expect(loaded.weights.params() == trained.model.weights.params(), "model weights");
  c.expect(loaded.index.names() == trained.model.index.names(), "model feature index");
  c.expect(loaded.schema == trained.model.schema && loaded.features == trained.model.features, "model config");
  std::stringstream resaved;
  save_model(loaded, resaved);
  c.expect(resaved.str() == saved.str(), "model bytes after reload");
  auto held_out = ct::separable_corpus(40, 110);
  held_out.push_back(Sentence{{{"unseen", std::nullopt, "O"}, {"zzz", std::nullopt, "O"}}});
  auto before = tag_corpus(trained.model, held_out, Resources{});
  auto after = tag_corpus(loaded, held_out, Resources{});
  c.expect(before == after, "model predictions after reload");

  // clusters
  auto table = random_table(rng, 40, 3);
  auto km = kmeans(table, {5, 3, 100, 1e-8});
  std::stringstream cbuf;
  save_clusters(km.model, cbuf);
  auto cl = load_clusters(cbuf);
  c.expect(cl.assignment == km.model.assignment, "cluster assignments");
  c.expect(cl.centroids == km.model.centroids && cl.inertia == km.model.inertia, "cluster centroids");
  bool same = true;
  for (const auto& w : table.words)
    same = same && assign_cluster(cl, w, &table) == assign_cluster(km.model, w, &table);
  same = same && assign_cluster(cl, "never-seen") == cl.oov_id();
  c.expect(same, "cluster lookups after reload");
  return c.outcome("CoNLL, model and cluster files reproduce content and predictions");
}

Outcome determinism() {
  Checker c;
  ct::TempDir dir("acceptance");
  const ColumnSpec cols;
  dir.write("train.conll", write_conll(ct::separable_corpus(150, 111), cols));
  dir.write("emb.txt", "locb0 1 0\nlocb1 0.9 0.1\nperb0 0 1\nperb1 0.1 0.9\no0 0.5 0.5\no1 0.4 0.6\n");
  auto config = dir.write("run.conf",
                          "train_file = train.conll\nmodel_file = model.crf\nentity_types = LOC,PER,CW\n"
                          "embeddings_file = emb.txt\ncluster_file = clusters.tsv\nk = 3\nclusters = on\n"
                          "max_iterations = 40\nseed = 5\n");
  auto run = [&](std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = cli::run(args, out, err);
    c.expect(code == 0, "exit " + std::to_string(code) + ": " + err.str());
  };
  run({"--config", config.string(), "cluster"});
  std::vector<std::string> models;
  for (const char* threads : {"1", "1", "4", "3"}) {
    run({"--config", config.string(), "--threads", threads, "train"});
    models.push_back(ct::slurp(dir / "model.crf"));
  }
  c.expect(!models[0].empty(), "model file written");
  for (std::size_t i = 1; i < models.size(); ++i) c.expect(models[i] == models[0], "run " + std::to_string(i) + " differs");
  return c.outcome("4 training runs (threads 1, 1, 4, 3) wrote identical " + std::to_string(models[0].size()) +
                   "-byte models");
}

// External data: $CNER_BANGLACONER_DIR/base.conf names the corpus and resources.
Outcome external_ablation() {
  const char* root = std::getenv("CNER_BANGLACONER_DIR");
  RunConfig base;
  apply_config_file(base, std::filesystem::path(root) / "base.conf");
  struct Row {
    const char* name;
    std::map<std::string, std::string> families;
    double reference;
  };
  const std::vector<Row> rows{
      {"pos+suffix", {{"prefix", "off"}, {"neighbors", "off"}}, 0.56},
      {"pos+suffix+neighbors", {{"prefix", "off"}}, 0.62},
      {"pos+suffix+neighbors+gazetteers", {{"prefix", "off"}, {"gazetteers", "on"}}, 0.689},
      {"pos+prefix+suffix+neighbors", {}, 0.692},
      {"pos+prefix+suffix+neighbors+clusters", {{"clusters", "on"}}, 0.72},
  };
  std::vector<double> f1;
  std::string detail;
  for (const auto& row : rows) {
    RunConfig config = base;
    config.features.set("pos", "2");
    config.features.set("suffix", "1,2,3,4");
    config.features.set("prefix", "1,2,3");
    config.features.set("neighbors", "2");
    config.features.set("clusters", "off");
    config.features.set("gazetteers", "off");
    for (const auto& [k, v] : row.families) config.features.set(k, v);
    auto outcome = run_training(config);
    if (!outcome.dev_report) return {false, "base.conf must name a dev_file"};
    f1.push_back(outcome.dev_report->micro.f1);
    detail += std::string(detail.empty() ? "" : ", ") + row.name + " " + num(f1.back()) + " (ref " +
              num(row.reference) + ")";
  }
  Checker c;
  c.expect(std::abs(f1.back() - 0.72) <= 0.05, "full feature set outside 0.72 +/- 0.05");
  for (std::size_t i = 1; i < f1.size(); ++i) c.expect(f1[i] > f1[i - 1], "ordering broken at row " + std::to_string(i));
  auto o = c.outcome(detail);
  if (!o.pass) o.detail += " [" + detail + "]";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"partition function matches enumeration", partition_function},
      {"gradient matches finite differences", gradient},
      {"Viterbi matches enumeration incl. tie-break", viterbi_oracle},
      {"separable corpus trained to F1 1.0", convex_training},
      {"marginal normalization and partition consistency", lattice_invariants},
      {"k-means invariants", kmeans_checks},
      {"metrics oracle", metrics_oracle},
      {"round trips", round_trips},
      {"training determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " -- "
              << o.detail << std::endl;
  }

  const char* root = std::getenv("CNER_BANGLACONER_DIR");
  if (!root || !std::filesystem::exists(std::filesystem::path(root) / "base.conf")) {
    std::cout << "SKIP criterion 10: external-data ablation (set CNER_BANGLACONER_DIR to a directory with base.conf)"
              << std::endl;
  } else {
    Outcome o;
    try {
      o = external_ablation();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion 10 (non-gating): external-data ablation -- " << o.detail
              << std::endl;
  }
  std::cout << (failed == 0 ? "all gating criteria passed" : std::to_string(failed) + " gating criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
