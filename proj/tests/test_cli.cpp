#include <doctest.h>

#include <sstream>

#include "cli.hpp"
#include "cner/conll.hpp"
#include "cner/text.hpp"
#include "test_support.hpp"

using cner::testing::slurp;
using cner::testing::TempDir;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cner::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::map<std::string, std::string> tsv(const std::string& text) {
  std::map<std::string, std::string> m;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    auto f = cner::text::split(line, '\t');
    if (f.size() == 2) m[std::string(f[0])] = std::string(f[1]);
  }
  return m;
}

// Train/dev files drawn from the separable generator, plus a config naming them.
struct ToyProject {
  TempDir dir{"cli"};
  std::filesystem::path config;

  explicit ToyProject(const std::string& extra = "") {
    const cner::ColumnSpec cols;
    dir.write("train.conll", cner::write_conll(cner::testing::separable_corpus(200, 1), cols));
    dir.write("dev.conll", cner::write_conll(cner::testing::separable_corpus(40, 2), cols));
    config = dir.write("run.conf",
                       "# toy run\n"
                       "train_file = train.conll\n"
                       "dev_file = dev.conll\n"
                       "model_file = model.crf\n"
                       "entity_types = LOC,PER,CW\n"
                       "suffix = off\n"
                       "prefix = off\n"
                       "neighbors = 0\n"
                       "max_iterations = 60\n" +
                           extra);
  }

  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("cli: stats on the checked-in sample") {
  auto r = run({"stats", CNER_TEST_DATA "/sample.conll", "--columns", "surface,pos,label", "--format", "tsv"});
  REQUIRE(r.code == 0);
  auto m = tsv(r.out);
  CHECK(m["sentences"] == "3");
  CHECK(m["tokens"] == "8");
  CHECK(m["min_length"] == "1");
  CHECK(m["max_length"] == "4");
  CHECK(m["tag.LOC"] == "3");
  CHECK(m["tag.PER"] == "1");
  CHECK(m["tag.O"] == "4");
}

TEST_CASE("cli: missing corpus is reported on stderr") {
  auto r = run({"stats", "/nonexistent/corpus.conll"});
  CHECK(r.code != 0);
  CHECK(r.err.find("/nonexistent/corpus.conll") != std::string::npos);
}

TEST_CASE("cli: usage errors") {
  CHECK(run({}).code == cner::cli::kUsage);
  CHECK(run({"frobnicate"}).code == cner::cli::kUsage);
  CHECK(run({"train", "--l2", "abc", "--model_file", "/tmp/x"}).code == cner::cli::kUsage);
  auto help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("train") != std::string::npos);
}

TEST_CASE("cli: train, tag and eval on the separable fixture") {
  ToyProject p;
  auto trained = run({"--config", p.config.string(), "train"});
  REQUIRE_MESSAGE(trained.code == 0, trained.err);
  CHECK(std::filesystem::exists(p.path("model.crf")));
  CHECK(slurp(p.path("model.crf.trainlog")).rfind("iteration\tobjective\n0\t", 0) == 0);
  CHECK(trained.out.find("stop\t") != std::string::npos);

  // dev report from training
  std::istringstream lines(trained.out);
  std::string dev_f1;
  for (std::string line; std::getline(lines, line);) {
    auto f = cner::text::split_ws(line);
    if (f.size() >= 2 && f[0] == "F1") dev_f1 = std::string(f[1]);
  }
  CHECK(dev_f1 == "1.000000");

  SUBCASE("tagging reproduces the gold labels") {
    auto tagged = run({"--config", p.config.string(), "tag", p.path("train.conll")});
    REQUIRE(tagged.code == 0);
    CHECK(tagged.out == slurp(p.path("train.conll")));
  }
  SUBCASE("tag then eval matches the training-time dev report") {
    auto tagged =
        run({"--config", p.config.string(), "--output_file", p.path("dev.pred"), "tag", p.path("dev.conll")});
    REQUIRE(tagged.code == 0);
    auto eval = run({"--config", p.config.string(), "eval", p.path("dev.conll"), p.path("dev.pred")});
    REQUIRE(eval.code == 0);
    CHECK(trained.out.find(eval.out) != std::string::npos);
    auto eval_tsv = run({"eval", p.path("dev.conll"), p.path("dev.pred"), "--format", "tsv"});
    CHECK(tsv(eval_tsv.out)["F1"] == "1");
  }
  SUBCASE("single-token and unseen-word sentences still get a full labeling") {
    p.dir.write("odd.conll", "loci3\n\nzzz\nqqq\nlocb1\n");
    auto tagged = run({"--config", p.config.string(), "tag", p.path("odd.conll")});
    REQUIRE(tagged.code == 0);
    auto corpus = cner::parse_conll(tagged.out, cner::ColumnSpec{});
    REQUIRE(corpus.size() == 2);
    CHECK(corpus[0].size() == 1);
    CHECK(corpus[1].size() == 3);
    for (const auto& s : corpus)
      for (const auto& t : s.tokens) CHECK(!t.label.empty());
  }
}

TEST_CASE("cli: single-file eval reads the prediction from the last column") {
  TempDir dir("eval");
  auto f = dir.write("both.conll", "a\tB-LOC\tB-LOC\nb\tI-LOC\tO\n\nc\tB-PER\tB-PER\n");
  auto r = run({"--entity_types", "LOC,PER", "eval", f.string(), "--format", "tsv"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  auto m = tsv(r.out);
  CHECK(m["Precision"] == "0.5");
  CHECK(m["Recall"] == "0.5");
  CHECK(m["F1-PER"] == "1");
}

TEST_CASE("cli: missing gazetteer is a configuration error before training") {
  ToyProject p("gazetteers = on\ngazetteer = LOC=missing_loc.txt\n");
  auto r = run({"--config", p.config.string(), "train"});
  CHECK(r.code == cner::cli::kUsage);
  CHECK(r.err.find("missing_loc.txt") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(p.path("model.crf")));
}

TEST_CASE("cli: tagging with a cluster model but no cluster file lists the missing resource") {
  ToyProject p;
  p.dir.write("emb.txt", "locb1 1 0\nperb1 0 1\no1 0.5 0.5\n");
  REQUIRE(run({"--config", p.config.string(), "--k", "2", "cluster", p.path("emb.txt"), p.path("c.tsv")}).code == 0);
  REQUIRE(run({"--config", p.config.string(), "--clusters", "on", "--cluster_file", p.path("c.tsv"), "train"}).code ==
          0);
  auto r = run({"--config", p.config.string(), "tag", p.path("dev.conll")});
  CHECK(r.code == cner::cli::kUsage);
  CHECK(r.err.find("cluster") != std::string::npos);
  auto ok = run({"--config", p.config.string(), "--cluster_file", p.path("c.tsv"), "tag", p.path("dev.conll")});
  CHECK(ok.code == 0);
}

TEST_CASE("cli: cluster writes a loadable file") {
  TempDir dir("cluster");
  dir.write("emb.txt", "2 2\na 0 0\nb 0.1 0\nc 5 5\nd 5.1 5\n");
  auto r = run({"--k", "2", "--seed", "3", "cluster", (dir / "emb.txt").string(), (dir / "c.tsv").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  auto m = tsv(r.out);
  CHECK(m["words"] == "4");
  CHECK(m["k"] == "2");
  CHECK(slurp(dir / "c.tsv").rfind("CLUSTERS\t2\t2\n", 0) == 0);
  CHECK(run({"--k", "9", "cluster", (dir / "emb.txt").string(), (dir / "c.tsv").string()}).code ==
        cner::cli::kUsage);
}

TEST_CASE("cli: training is byte-identical across runs and thread counts") {
  ToyProject p;
  REQUIRE(run({"--config", p.config.string(), "--threads", "1", "train"}).code == 0);
  const auto first = slurp(p.path("model.crf"));
  REQUIRE(run({"--config", p.config.string(), "--threads", "1", "train"}).code == 0);
  CHECK(slurp(p.path("model.crf")) == first);
  REQUIRE(run({"--config", p.config.string(), "--threads", "4", "train"}).code == 0);
  CHECK(slurp(p.path("model.crf")) == first);
}
