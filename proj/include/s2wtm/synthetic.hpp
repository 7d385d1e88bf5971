#pragma once

// Planted-topic corpora for end-to-end checks: each topic owns a disjoint
// block of the vocabulary, with ten clearly dominant anchor words.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "s2wtm/corpus.hpp"

namespace s2wtm::synthetic {

struct PlantedOptions {
  int topics = 5;
  int vocab = 500;
  int documents = 2000;
  int min_length = 40;
  int max_length = 80;
  /// Probability that a token comes from the document's own topic; the rest
  /// is drawn from the other topics uniformly.
  double purity = 0.9;
  /// Share of each topic's mass spread uniformly over the whole vocabulary.
  double background = 0.05;
  std::uint64_t seed = 7;
};

struct PlantedCorpus {
  corpus::Corpus corpus;
  Eigen::MatrixXd topic_word;                 ///< K x V, rows sum to 1
  std::vector<std::vector<int>> top_words;    ///< K lists of 10 word ids
};

PlantedCorpus make_planted_corpus(const PlantedOptions& options = {});

}  // namespace s2wtm::synthetic
