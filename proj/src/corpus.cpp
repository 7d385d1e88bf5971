#include "s2wtm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "s2wtm/errors.hpp"

namespace s2wtm::corpus {

namespace {

// Minimal UTF-8 handling: decode to code points, classify, re-encode.

std::vector<char32_t> decode_utf8(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    int len = 1;
    char32_t cp = c;
    if (c >= 0xF0 && c < 0xF8) {
      len = 4;
      cp = c & 0x07;
    } else if (c >= 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if (c >= 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if (c >= 0x80) {
      cp = 0xFFFD;  // stray continuation byte
    }
    if (len > 1) {
      if (i + static_cast<std::size_t>(len) > s.size()) {
        out.push_back(0xFFFD);
        break;
      }
      for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]) & 0x3F);
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_space(char32_t c) {
  return c == U' ' || (c >= U'\t' && c <= U'\r') || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F ||
         c == 0x3000;
}

// Unicode general categories P* and S* for the blocks that matter in text
// corpora; letters and digits outside these blocks are kept.
bool is_punct_or_symbol(char32_t c) {
  if (c < 0x80) return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
                       (c >= 0x7B && c <= 0x7E);
  if (c >= 0xA1 && c <= 0xBF) return c != 0xAA && c != 0xB2 && c != 0xB3 && c != 0xB5 && c != 0xB9 && c != 0xBA &&
                                     c != 0xBC && c != 0xBD && c != 0xBE;
  if (c == 0xD7 || c == 0xF7) return true;
  if (c >= 0x2010 && c <= 0x2027) return true;
  if (c >= 0x2030 && c <= 0x205E) return true;
  if (c >= 0x20A0 && c <= 0x20CF) return true;  // currency
  if (c >= 0x2190 && c <= 0x2BFF) return true;  // arrows, math, technical, shapes, dingbats
  if (c >= 0x2E00 && c <= 0x2E7F) return true;
  if (c >= 0x3001 && c <= 0x3003) return true;
  if (c >= 0x3008 && c <= 0x3011) return true;
  if (c >= 0xFF01 && c <= 0xFF0F) return true;
  if (c >= 0xFF1A && c <= 0xFF20) return true;
  if (c >= 0xFF3B && c <= 0xFF40) return true;
  if (c >= 0xFF5B && c <= 0xFF65) return true;
  if (c >= 0x1F000 && c <= 0x1FAFF) return true;  // emoji and pictographs
  return false;
}

char32_t to_lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if ((c >= 0xC0 && c <= 0xDE) && c != 0xD7) return c + 32;        // Latin-1
  if (c >= 0x391 && c <= 0x3AB && c != 0x3A2) return c + 32;        // Greek
  if (c >= 0x410 && c <= 0x42F) return c + 32;                      // Cyrillic
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  if (c >= 0x100 && c <= 0x17F && c != 0x130 && c != 0x138 && c != 0x149 && c != 0x178) {
    // Latin Extended-A alternates upper/lower, with the parity flipping at 0x139.
    const bool odd_upper = (c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E);
    const bool upper = odd_upper ? (c % 2 == 1) : (c % 2 == 0);
    return upper ? c + 1 : c;
  }
  return c;
}

[[noreturn]] void data_error(const std::filesystem::path& file, std::size_t line, const std::string& what) {
  throw DataError(file.string() + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

std::string_view partition_tag(Partition p) {
  switch (p) {
    case Partition::Train:
      return "train";
    case Partition::Validation:
      return "val";
    case Partition::Test:
      return "test";
  }
  return "train";
}

Partition parse_partition(std::string_view tag) {
  if (tag == "train") return Partition::Train;
  if (tag == "val" || tag == "validation") return Partition::Validation;
  if (tag == "test") return Partition::Test;
  throw DataError("unknown partition tag '" + std::string(tag) + "'");
}

std::vector<std::size_t> Corpus::indices_of(Partition p) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < partitions.size(); ++i)
    if (partitions[i] == p) out.push_back(i);
  return out;
}

void Corpus::validate() const {
  const auto v = static_cast<std::int32_t>(vocabulary.size());
  for (std::size_t d = 0; d < documents.size(); ++d) {
    if (documents[d].size() < 3) throw DataError("document " + std::to_string(d) + " has fewer than 3 tokens");
    for (std::int32_t t : documents[d])
      if (t < 0 || t >= v) throw DataError("document " + std::to_string(d) + " has token id out of range");
  }
  if (partitions.size() != documents.size()) throw DataError("partition tags do not align with documents");
  if (!labels.empty()) {
    if (labels.size() != documents.size()) throw DataError("labels do not align with documents");
    std::vector<bool> seen(label_names.size(), false);
    for (int l : labels) {
      if (l < 0 || static_cast<std::size_t>(l) >= label_names.size()) throw DataError("label id out of range");
      seen[static_cast<std::size_t>(l)] = true;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) throw DataError("label ids are not contiguous");
  }
}

std::vector<std::string> tokenize(std::string_view text, const PreprocessRules& rules) {
  std::vector<std::string> tokens;
  std::vector<char32_t> current;
  auto flush = [&] {
    if (current.empty()) return;
    std::string word;
    for (char32_t c : current) append_utf8(word, c);
    current.clear();
    if (rules.lemmatizer) word = rules.lemmatizer(word);
    if (decode_utf8(word).size() >= rules.min_word_length) tokens.push_back(std::move(word));
  };
  for (char32_t c : decode_utf8(text)) {
    if (is_space(c) || (rules.strip_punctuation && is_punct_or_symbol(c))) {
      flush();
      continue;
    }
    current.push_back(rules.lowercase ? to_lower(c) : c);
  }
  flush();
  return tokens;
}

Preprocessed preprocess(const std::vector<std::string>& raw, const PreprocessRules& rules) {
  Preprocessed out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto tokens = tokenize(raw[i], rules);
    if (tokens.size() < rules.min_doc_length) continue;
    out.documents.push_back(std::move(tokens));
    out.kept.push_back(i);
  }
  return out;
}

namespace {

void assign_labels(Corpus& corpus, const std::vector<std::string>& names) {
  std::map<std::string, int> ids;
  for (const auto& name : names) {
    auto [it, inserted] = ids.emplace(name, static_cast<int>(corpus.label_names.size()));
    if (inserted) corpus.label_names.push_back(name);
    corpus.labels.push_back(it->second);
  }
}

}  // namespace

Corpus build_corpus(const std::vector<std::string>& raw, const std::vector<std::string>& labels,
                    const std::vector<Partition>& partitions, const PreprocessRules& rules) {
  if (!labels.empty() && labels.size() != raw.size()) throw DataError("build_corpus: labels do not align");
  if (!partitions.empty() && partitions.size() != raw.size()) throw DataError("build_corpus: partitions do not align");
  Preprocessed pre = preprocess(raw, rules);
  Corpus corpus;
  std::vector<std::string> vocab;
  for (const auto& doc : pre.documents) vocab.insert(vocab.end(), doc.begin(), doc.end());
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  corpus.vocabulary = vocab;
  std::unordered_map<std::string, std::int32_t> index;
  for (std::size_t i = 0; i < vocab.size(); ++i) index.emplace(vocab[i], static_cast<std::int32_t>(i));
  std::vector<std::string> kept_labels;
  for (std::size_t d = 0; d < pre.documents.size(); ++d) {
    std::vector<std::int32_t> ids;
    for (const auto& t : pre.documents[d]) ids.push_back(index.at(t));
    corpus.documents.push_back(std::move(ids));
    const std::size_t src = pre.kept[d];
    corpus.partitions.push_back(partitions.empty() ? Partition::Train : partitions[src]);
    if (!labels.empty()) kept_labels.push_back(labels[src]);
  }
  if (!labels.empty()) assign_labels(corpus, kept_labels);
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& dir, const LoadOptions& options) {
  const auto vocab_path = dir / "vocabulary.txt";
  const auto corpus_path = dir / "corpus.tsv";
  std::ifstream vocab_in(vocab_path);
  if (!vocab_in) throw DataError("missing vocabulary file " + vocab_path.string());
  std::ifstream corpus_in(corpus_path);
  if (!corpus_in) throw DataError("missing corpus file " + corpus_path.string());

  Corpus corpus;
  std::unordered_map<std::string, std::int32_t> index;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(vocab_in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!index.emplace(line, static_cast<std::int32_t>(corpus.vocabulary.size())).second)
      data_error(vocab_path, lineno, "duplicate term '" + line + "'");
    corpus.vocabulary.push_back(line);
  }

  std::vector<std::string> label_column;
  bool any_label = false, any_unlabeled = false;
  lineno = 0;
  while (std::getline(corpus_in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cols = split(line, '\t');
    if (cols.size() < 2 || cols.size() > 3) data_error(corpus_path, lineno, "expected 2 or 3 tab-separated columns");
    Partition part;
    try {
      part = parse_partition(cols[1]);
    } catch (const DataError& e) {
      data_error(corpus_path, lineno, e.what());
    }
    std::vector<std::int32_t> ids;
    for (const auto& tok : tokenize(cols[0], options.rules)) {
      auto it = index.find(tok);
      if (it != index.end()) {
        ids.push_back(it->second);
      } else if (options.oov == OovPolicy::Error) {
        data_error(corpus_path, lineno, "token '" + tok + "' is not in the vocabulary");
      }
    }
    if (ids.size() < std::max<std::size_t>(options.rules.min_doc_length, 3)) continue;
    const bool has_label = cols.size() == 3 && !cols[2].empty();
    any_label = any_label || has_label;
    any_unlabeled = any_unlabeled || !has_label;
    corpus.documents.push_back(std::move(ids));
    corpus.partitions.push_back(part);
    label_column.push_back(has_label ? cols[2] : std::string());
  }
  if (any_label && any_unlabeled) throw DataError(corpus_path.string() + ": some documents lack a label");
  if (any_label) assign_labels(corpus, label_column);
  corpus.validate();
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  corpus.validate();
  std::filesystem::create_directories(dir);
  std::ofstream vocab(dir / "vocabulary.txt", std::ios::binary | std::ios::trunc);
  for (const auto& w : corpus.vocabulary) vocab << w << '\n';
  std::ofstream out(dir / "corpus.tsv", std::ios::binary | std::ios::trunc);
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    const auto& doc = corpus.documents[d];
    for (std::size_t i = 0; i < doc.size(); ++i) {
      if (i) out << ' ';
      out << corpus.vocabulary[static_cast<std::size_t>(doc[i])];
    }
    out << '\t' << partition_tag(corpus.partitions[d]);
    if (corpus.labeled()) out << '\t' << corpus.label_names[static_cast<std::size_t>(corpus.labels[d])];
    out << '\n';
  }
  if (!vocab || !out) throw DataError("failed writing corpus to " + dir.string());
}

void assign_partitions(Corpus& corpus, double train, double validation, RngStream rng) {
  if (train < 0 || validation < 0 || train + validation > 1.0) throw ConfigError("invalid partition fractions");
  const std::size_t n = corpus.documents.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng.engine());
  const auto n_train = static_cast<std::size_t>(std::llround(train * static_cast<double>(n)));
  const auto n_train_val = static_cast<std::size_t>(std::llround((train + validation) * static_cast<double>(n)));
  corpus.partitions.assign(n, Partition::Test);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train)
      corpus.partitions[order[i]] = Partition::Train;
    else if (i < n_train_val)
      corpus.partitions[order[i]] = Partition::Validation;
  }
}

Eigen::MatrixXd BowMatrix::dense_rows(const std::vector<std::size_t>& rows) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), counts.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    for (decltype(counts)::InnerIterator it(counts, r); it; ++it) out(static_cast<Eigen::Index>(i), it.col()) = it.value();
  }
  return out;
}

Eigen::MatrixXd BowMatrix::dense() const { return Eigen::MatrixXd(counts); }

BowMatrix build_bow(const Corpus& corpus) {
  std::vector<Eigen::Triplet<double, int>> triplets;
  const auto v = static_cast<std::int32_t>(corpus.vocabulary.size());
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    std::map<std::int32_t, int> counts;
    for (std::int32_t t : corpus.documents[d])
      if (t >= 0 && t < v) ++counts[t];
    for (const auto& [t, c] : counts) triplets.emplace_back(static_cast<int>(d), t, static_cast<double>(c));
  }
  BowMatrix bow;
  bow.counts.resize(static_cast<Eigen::Index>(corpus.documents.size()), v);
  bow.counts.setFromTriplets(triplets.begin(), triplets.end());
  bow.counts.makeCompressed();
  return bow;
}

void export_triplets(const BowMatrix& bow, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (Eigen::Index r = 0; r < bow.counts.rows(); ++r)
    for (decltype(bow.counts)::InnerIterator it(bow.counts, r); it; ++it)
      out << r << ' ' << it.col() << ' ' << static_cast<long long>(it.value()) << '\n';
}

}  // namespace s2wtm::corpus
