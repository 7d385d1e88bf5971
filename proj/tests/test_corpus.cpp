#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "s2wtm/corpus.hpp"
#include "s2wtm/errors.hpp"
#include "s2wtm/synthetic.hpp"

using namespace s2wtm;
using namespace s2wtm::corpus;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("s2wtm_corpus_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("tokenize lowercases, strips punctuation and drops short words") {
  CHECK(tokenize("Hello, WORLD! It's a test-case.") ==
        std::vector<std::string>{"hello", "world", "test", "case"});
  CHECK(tokenize("numbers 42 and 1234 stay") == std::vector<std::string>{"numbers", "and", "1234", "stay"});
  CHECK(tokenize("ÉCOLE «quoted» naïve") == std::vector<std::string>{"école", "quoted", "naïve"});
  PreprocessRules keep;
  keep.lowercase = false;
  keep.min_word_length = 1;
  CHECK(tokenize("A b-C", keep) == std::vector<std::string>{"A", "b", "C"});
  PreprocessRules lemma;
  lemma.lemmatizer = [](std::string_view w) {
    std::string s(w);
    if (s.size() > 3 && s.back() == 's') s.pop_back();
    return s;
  };
  CHECK(tokenize("cats dogs", lemma) == std::vector<std::string>{"cat", "dog"});
}

TEST_CASE("build_corpus filters words, then documents, then freezes a sorted vocabulary") {
  const std::vector<std::string> raw{"zebra apple mango apple", "tiny doc", "mango kiwi banana", "a b c d e"};
  const Corpus c = build_corpus(raw, {"fruit", "none", "fruit", "none"}, {});
  CHECK(c.size() == 2);
  CHECK(c.vocabulary == std::vector<std::string>{"apple", "banana", "kiwi", "mango", "zebra"});
  CHECK(c.documents[0] == std::vector<std::int32_t>{4, 0, 3, 0});
  CHECK(c.labels == std::vector<int>{0, 0});
  CHECK(c.label_names == std::vector<std::string>{"fruit"});
  CHECK(c.partitions == std::vector<Partition>{Partition::Train, Partition::Train});
}

TEST_CASE("corpus round-trips through the on-disk layout") {
  synthetic::PlantedOptions opts;
  opts.documents = 120;
  Corpus c = synthetic::make_planted_corpus(opts).corpus;
  const fs::path dir = scratch("roundtrip");
  save_corpus(c, dir);
  const Corpus back = load_corpus(dir);
  CHECK(back.vocabulary == c.vocabulary);
  CHECK(back.documents == c.documents);
  CHECK(back.partitions == c.partitions);
  // Label ids are renumbered in first-seen order; the partition they induce is unchanged.
  REQUIRE(back.labels.size() == c.labels.size());
  for (std::size_t i = 0; i < c.labels.size(); ++i)
    for (std::size_t j = 0; j < c.labels.size(); ++j)
      CHECK((c.labels[i] == c.labels[j]) == (back.labels[i] == back.labels[j]));
  fs::remove_all(dir);
}

TEST_CASE("loading reports missing files and malformed rows") {
  const fs::path dir = scratch("errors");
  try {
    load_corpus(dir);
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("vocabulary.txt") != std::string::npos);
  }
  write(dir / "vocabulary.txt", "alpha\nbeta\ngamma\n");
  try {
    load_corpus(dir);
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("corpus.tsv") != std::string::npos);
  }
  write(dir / "corpus.tsv", "alpha beta gamma\tholdout\n");
  CHECK_THROWS_AS(load_corpus(dir), DataError);
  write(dir / "corpus.tsv", "alpha beta gamma\ttrain\tx\nalpha beta beta\ttest\n");
  CHECK_THROWS_AS(load_corpus(dir), DataError);
  write(dir / "vocabulary.txt", "alpha\nalpha\n");
  CHECK_THROWS_AS(load_corpus(dir), DataError);
  fs::remove_all(dir);
}

TEST_CASE("out-of-vocabulary tokens are dropped or rejected by policy") {
  const fs::path dir = scratch("oov");
  write(dir / "vocabulary.txt", "alpha\nbeta\ngamma\n");
  write(dir / "corpus.tsv", "alpha beta gamma delta\tval\nalpha delta\ttrain\n");
  const Corpus c = load_corpus(dir);
  REQUIRE(c.size() == 1);
  CHECK(c.documents[0] == std::vector<std::int32_t>{0, 1, 2});
  CHECK(c.partitions[0] == Partition::Validation);
  CHECK_FALSE(c.labeled());
  LoadOptions strict;
  strict.oov = OovPolicy::Error;
  CHECK_THROWS_AS(load_corpus(dir, strict), DataError);
  fs::remove_all(dir);
}

TEST_CASE("partitions are cut at rounded fractions") {
  synthetic::PlantedOptions opts;
  opts.documents = 101;
  Corpus c = synthetic::make_planted_corpus(opts).corpus;
  assign_partitions(c, 0.7, 0.15, RngStream(3));
  CHECK(c.indices_of(Partition::Train).size() == 71);
  CHECK(c.indices_of(Partition::Validation).size() == 15);
  CHECK(c.indices_of(Partition::Test).size() == 15);
  CHECK_THROWS_AS(assign_partitions(c, 0.9, 0.2, RngStream(3)), ConfigError);
  CHECK(parse_partition("validation") == Partition::Validation);
  CHECK(partition_tag(Partition::Test) == "test");
}

TEST_CASE("bag-of-words counts and triplet export") {
  const Corpus c = build_corpus({"beta alpha beta gamma", "gamma gamma gamma"}, {}, {});
  const BowMatrix bow = build_bow(c);
  CHECK(bow.rows() == 2);
  CHECK(bow.vocab_size() == 3);
  Eigen::MatrixXd expected(2, 3);
  expected << 1, 2, 1, 0, 0, 3;
  CHECK(bow.dense() == expected);
  CHECK(bow.dense_rows({1, 0}).row(0) == expected.row(1));

  const fs::path dir = scratch("bow");
  export_triplets(bow, dir / "bow.txt");
  std::ifstream in(dir / "bow.txt");
  std::stringstream text;
  text << in.rdbuf();
  CHECK(text.str() == "0 0 1\n0 1 2\n0 2 1\n1 2 3\n");
  fs::remove_all(dir);
}

TEST_CASE("planted corpora are reproducible and well formed") {
  synthetic::PlantedOptions opts;
  opts.documents = 200;
  const auto a = synthetic::make_planted_corpus(opts);
  const auto b = synthetic::make_planted_corpus(opts);
  CHECK(a.corpus == b.corpus);
  CHECK(a.corpus.vocab_size() == 500);
  CHECK(a.top_words.size() == 5);
  CHECK((a.topic_word.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  for (const auto& doc : a.corpus.documents) {
    CHECK(doc.size() >= 40);
    CHECK(doc.size() <= 80);
  }
}
