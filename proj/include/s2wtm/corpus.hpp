#pragma once

// Corpus loading, preprocessing, vocabulary construction and bag-of-words
// assembly. The on-disk layout follows the OCTIS convention:
//   corpus.tsv      one document per line: text TAB partition [TAB label]
//   vocabulary.txt  one term per line

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "s2wtm/rng.hpp"

namespace s2wtm::corpus {

enum class Partition { Train, Validation, Test };

std::string_view partition_tag(Partition p);
Partition parse_partition(std::string_view tag);

struct Corpus {
  std::vector<std::string> vocabulary;
  std::vector<std::vector<std::int32_t>> documents;
  /// Empty for unlabeled corpora; otherwise one id per document, contiguous from 0.
  std::vector<int> labels;
  std::vector<std::string> label_names;
  std::vector<Partition> partitions;

  bool labeled() const { return !labels.empty(); }
  Eigen::Index vocab_size() const { return static_cast<Eigen::Index>(vocabulary.size()); }
  Eigen::Index size() const { return static_cast<Eigen::Index>(documents.size()); }
  std::vector<std::size_t> indices_of(Partition p) const;

  /// Throws DataError when an invariant is violated.
  void validate() const;

  bool operator==(const Corpus&) const = default;
};

struct PreprocessRules {
  bool lowercase = true;
  bool strip_punctuation = true;
  std::size_t min_word_length = 3;
  std::size_t min_doc_length = 3;
  /// Applied to every surviving token; identity when empty.
  std::function<std::string(std::string_view)> lemmatizer;
};

/// Normalizes one raw text into tokens: lowercase, punctuation and symbols
/// replaced by spaces, whitespace split, lemmatize, drop short words.
std::vector<std::string> tokenize(std::string_view text, const PreprocessRules& rules = {});

struct Preprocessed {
  std::vector<std::vector<std::string>> documents;
  /// Index into the raw input of each surviving document.
  std::vector<std::size_t> kept;
};

/// Tokenizes every document and discards those shorter than min_doc_length.
Preprocessed preprocess(const std::vector<std::string>& raw, const PreprocessRules& rules = {});

/// Builds a corpus from raw texts. Words are filtered first, then documents,
/// and the vocabulary (sorted) is frozen from the surviving documents.
/// `labels` and `partitions` may be empty; otherwise they align with `raw`.
Corpus build_corpus(const std::vector<std::string>& raw, const std::vector<std::string>& labels,
                    const std::vector<Partition>& partitions, const PreprocessRules& rules = {});

enum class OovPolicy { Drop, Error };

struct LoadOptions {
  PreprocessRules rules;
  OovPolicy oov = OovPolicy::Drop;
};

Corpus load_corpus(const std::filesystem::path& dir, const LoadOptions& options = {});
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// Reassigns partition tags by shuffling with `rng` and cutting at
/// round(train * n) and round((train + validation) * n).
void assign_partitions(Corpus& corpus, double train, double validation, RngStream rng);

/// Sparse document-term counts, one row per document.
struct BowMatrix {
  Eigen::SparseMatrix<double, Eigen::RowMajor, int> counts;

  Eigen::Index rows() const { return counts.rows(); }
  Eigen::Index vocab_size() const { return counts.cols(); }
  /// Dense copy of the given rows, in the given order.
  Eigen::MatrixXd dense_rows(const std::vector<std::size_t>& rows) const;
  Eigen::MatrixXd dense() const;
};

BowMatrix build_bow(const Corpus& corpus);

/// Writes `doc_id token_id count` lines, row-major.
void export_triplets(const BowMatrix& bow, const std::filesystem::path& path);

}  // namespace s2wtm::corpus
