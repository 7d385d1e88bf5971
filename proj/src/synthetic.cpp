#include "s2wtm/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>

#include "s2wtm/errors.hpp"

namespace s2wtm::synthetic {

PlantedCorpus make_planted_corpus(const PlantedOptions& options) {
  const int k = options.topics;
  const int v = options.vocab;
  if (k < 2 || v < 10 * k) throw ConfigError("planted corpus needs K >= 2 and V >= 10 K");
  PlantedCorpus out;
  RngStream rng(options.seed);

  const int block = v / k;
  out.topic_word = Eigen::MatrixXd::Zero(k, v);
  for (int t = 0; t < k; ++t) {
    Eigen::RowVectorXd own = Eigen::RowVectorXd::Zero(v);
    for (int r = 0; r < block; ++r) own(t * block + r) = r < 10 ? 10.0 - 0.3 * r : 1.0;
    own /= own.sum();
    out.topic_word.row(t) = (1.0 - options.background) * own +
                            Eigen::RowVectorXd::Constant(v, options.background / static_cast<double>(v));
    std::vector<int> top(10);
    std::iota(top.begin(), top.end(), t * block);
    out.top_words.push_back(top);
  }

  auto& c = out.corpus;
  for (int w = 0; w < v; ++w) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "w%04d", w);
    c.vocabulary.emplace_back(buf);
  }
  for (int t = 0; t < k; ++t) c.label_names.push_back("topic" + std::to_string(t));

  std::vector<std::discrete_distribution<int>> word_dist;
  for (int t = 0; t < k; ++t) {
    const Eigen::RowVectorXd row = out.topic_word.row(t);
    word_dist.emplace_back(row.data(), row.data() + row.size());
  }
  std::uniform_int_distribution<int> pick_label(0, k - 1);
  std::uniform_int_distribution<int> pick_other(0, k - 2);
  std::uniform_int_distribution<int> pick_length(options.min_length, options.max_length);
  for (int d = 0; d < options.documents; ++d) {
    const int label = pick_label(rng.engine());
    const int length = pick_length(rng.engine());
    std::vector<std::int32_t> doc;
    for (int i = 0; i < length; ++i) {
      int topic = label;
      if (rng.uniform() >= options.purity) {
        topic = pick_other(rng.engine());
        if (topic >= label) ++topic;
      }
      doc.push_back(word_dist[static_cast<std::size_t>(topic)](rng.engine()));
    }
    c.documents.push_back(std::move(doc));
    c.labels.push_back(label);
  }
  c.partitions.assign(c.documents.size(), corpus::Partition::Train);
  corpus::assign_partitions(c, 0.7, 0.15, rng.split("partitions"));
  c.validate();
  return out;
}

}  // namespace s2wtm::synthetic
