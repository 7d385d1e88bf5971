#include "s2wtm/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "s2wtm/checkpoint.hpp"
#include "s2wtm/errors.hpp"
#include "s2wtm/evaluation.hpp"

namespace s2wtm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<std::vector<std::string>> words_of(const std::vector<std::vector<int>>& ids,
                                               const std::vector<std::string>& vocabulary) {
  std::vector<std::vector<std::string>> out;
  for (const auto& topic : ids) {
    std::vector<std::string> words;
    for (int w : topic) words.push_back(vocabulary[static_cast<std::size_t>(w)]);
    out.push_back(std::move(words));
  }
  return out;
}

std::vector<std::vector<int>> ids_of(const std::vector<std::vector<std::string>>& topics,
                                     const std::vector<std::string>& vocabulary, const fs::path& source) {
  std::map<std::string_view, int> index;
  for (std::size_t i = 0; i < vocabulary.size(); ++i) index.emplace(vocabulary[i], static_cast<int>(i));
  std::vector<std::vector<int>> out;
  for (const auto& topic : topics) {
    std::vector<int> ids;
    for (const auto& w : topic) {
      auto it = index.find(w);
      if (it == index.end()) throw DataError(source.string() + ": topic word '" + w + "' is not in the vocabulary");
      ids.push_back(it->second);
    }
    out.push_back(std::move(ids));
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

/// Element-wise median of equally shaped JSON values. Booleans take the
/// median of their 0/1 encoding, so a tie resolves to false.
json median_json(const std::vector<json>& items) {
  const json& first = items.front();
  for (const json& j : items)
    if (j.type() != first.type() || (j.is_array() && j.size() != first.size()))
      throw DataError("per-seed metrics have mismatched shapes and cannot be aggregated");
  if (first.is_object()) {
    json out = json::object();
    for (const auto& [key, _] : first.items()) {
      std::vector<json> column;
      for (const json& j : items) {
        if (!j.contains(key)) throw DataError("metric key '" + key + "' is missing from some seeds");
        column.push_back(j.at(key));
      }
      out[key] = median_json(column);
    }
    return out;
  }
  if (first.is_array()) {
    json out = json::array();
    for (std::size_t i = 0; i < first.size(); ++i) {
      std::vector<json> column;
      for (const json& j : items) column.push_back(j[i]);
      out.push_back(median_json(column));
    }
    return out;
  }
  if (first.is_boolean()) {
    std::vector<double> v;
    for (const json& j : items) v.push_back(j.get<bool>() ? 1.0 : 0.0);
    return median(v) > 0.5;
  }
  if (first.is_number()) {
    std::vector<double> v;
    for (const json& j : items) v.push_back(j.get<double>());
    return median(v);
  }
  return nullptr;
}

std::vector<std::uint64_t> seed_dirs_present(const fs::path& out) {
  std::vector<std::uint64_t> seeds;
  if (!fs::is_directory(out)) throw DataError("run directory " + out.string() + " does not exist");
  for (const auto& entry : fs::directory_iterator(out)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_directory() || name.rfind("seed_", 0) != 0) continue;
    try {
      seeds.push_back(parse_u64_list(name.substr(5), "seed directory").front());
    } catch (const ConfigError&) {
    }
  }
  std::sort(seeds.begin(), seeds.end());
  return seeds;
}

double mean_npmi(const corpus::Corpus& corpus, const model::TopicSet& topics, int window) {
  eval::NpmiOptions opts;
  opts.window = window;
  return eval::npmi(topics.top_words, corpus, opts).mean;
}

}  // namespace

fs::path seed_dir(const fs::path& out, std::uint64_t seed) { return out / ("seed_" + std::to_string(seed)); }

corpus::Corpus load_config_corpus(RunConfig& config) {
  corpus::Corpus c = corpus::load_corpus(config.corpus);
  if (c.size() == 0) throw DataError("corpus " + config.corpus.string() + " has no documents");
  if (config.vocab && *config.vocab != c.vocab_size())
    throw ConfigError("model.vocab is " + std::to_string(*config.vocab) + " but the corpus vocabulary has " +
                      std::to_string(c.vocab_size()) + " terms");
  config.model.vocab = c.vocab_size();
  config.model.validate();
  return c;
}

TrainedRun train_seed(const corpus::Corpus& corpus, const corpus::BowMatrix& bow, const model::ModelConfig& base,
                      std::uint64_t seed, const fs::path& dir, std::ostream* progress) {
  model::ModelConfig config = base;
  config.seed = seed;
  auto report = [&](const model::EpochLog& e) {
    if (progress)
      *progress << "seed " << seed << " epoch " << e.epoch << "/" << config.epochs << " rl " << e.rl << " ot " << e.ot
                << " (" << e.seconds << " s)\n"
                << std::flush;
  };
  model::TrainResult trained = model::train(bow, config, report);
  TrainedRun run{seed, trained.params, model::extract_topics(trained.params, config), trained.log};
  if (dir.empty()) return run;

  fs::create_directories(dir);
  save_checkpoint(dir / "checkpoint.bin", run.params.to_named());
  write_topics_json(dir / "topics.json", words_of(run.topics.top_words, corpus.vocabulary), seed);
  write_matrix_csv(dir / "beta.csv", run.topics.beta);
  write_matrix_csv(dir / "theta.csv", model::infer_doc_topics(run.params, config, bow.dense()));
  auto log = open_out(dir / "train_log.csv");
  log << "epoch,rl,ot,seconds\n";
  for (const auto& e : run.log)
    log << e.epoch << ',' << format_double(e.rl) << ',' << format_double(e.ot) << ',' << format_double(e.seconds)
        << '\n';
  return run;
}

void cmd_train(RunConfig config, std::ostream& progress) {
  if (config.output.empty()) throw ConfigError("output: no output directory given");
  const corpus::Corpus corpus = load_config_corpus(config);
  const corpus::BowMatrix bow = corpus::build_bow(corpus);
  for (std::uint64_t seed : config.seeds) train_seed(corpus, bow, config.model, seed, seed_dir(config.output, seed), &progress);
}

void cmd_evaluate(RunConfig config, std::ostream& progress) {
  if (config.output.empty()) throw ConfigError("output: no run directory given");
  const corpus::Corpus corpus = load_config_corpus(config);
  const corpus::BowMatrix bow = corpus::build_bow(corpus);
  const std::vector<std::uint64_t> seeds = seed_dirs_present(config.output);
  if (seeds.empty()) throw DataError("no seed_* directories under " + config.output.string());
  const MetricToggles& mt = config.metrics;
  const bool spherical = config.model.geometry == model::Geometry::Spherical;

  std::vector<json> all;
  for (std::uint64_t seed : seeds) {
    const fs::path dir = seed_dir(config.output, seed);
    const fs::path topics_path = dir / "topics.json";
    if (!fs::exists(topics_path)) throw DataError("missing file " + topics_path.string());
    const auto topics = ids_of(read_topics_json(topics_path), corpus.vocabulary, topics_path);
    json m = json::object();
    m["npmi_mean"] = nullptr;
    m["npmi_per_topic"] = nullptr;
    m["irbo"] = nullptr;
    m["nmi"] = nullptr;
    m["purity"] = nullptr;
    m["probe_accuracy"] = nullptr;
    m["collapse"] = nullptr;
    if (mt.npmi) {
      eval::NpmiOptions opts;
      opts.window = mt.window;
      const auto r = eval::npmi(topics, corpus, opts);
      m["npmi_mean"] = r.mean;
      m["npmi_per_topic"] = r.per_topic;
    }
    if (mt.irbo) m["irbo"] = eval::irbo(topics);

    const bool need_theta = corpus.labeled() && (mt.clustering || mt.probe);
    if (need_theta) {
      const fs::path theta_path = dir / "theta.csv";
      if (!fs::exists(theta_path)) throw DataError("missing file " + theta_path.string());
      const Eigen::MatrixXd theta = read_matrix_csv(theta_path);
      if (theta.rows() != corpus.size())
        throw DataError(theta_path.string() + " has " + std::to_string(theta.rows()) + " rows but the corpus has " +
                        std::to_string(corpus.size()) + " documents");
      if (mt.clustering) {
        const auto scores = eval::cluster_metrics(corpus.labels, eval::argmax_rows(theta));
        m["nmi"] = scores.nmi;
        m["purity"] = scores.purity;
      }
      if (mt.probe) {
        auto rows_of = [&](corpus::Partition p) {
          const auto idx = corpus.indices_of(p);
          Eigen::MatrixXd x(static_cast<Eigen::Index>(idx.size()), theta.cols());
          std::vector<int> y;
          for (std::size_t i = 0; i < idx.size(); ++i) {
            x.row(static_cast<Eigen::Index>(i)) = theta.row(static_cast<Eigen::Index>(idx[i]));
            y.push_back(corpus.labels[idx[i]]);
          }
          return std::pair{x, y};
        };
        const auto [x_train, y_train] = rows_of(corpus::Partition::Train);
        const auto [x_test, y_test] = rows_of(corpus::Partition::Test);
        if (!y_train.empty() && !y_test.empty())
          m["probe_accuracy"] = eval::linear_probe(x_train, y_train, x_test, y_test, seed);
      }
    }
    if (mt.collapse) {
      const fs::path ckpt = dir / "checkpoint.bin";
      if (!fs::exists(ckpt)) throw DataError("missing file " + ckpt.string());
      model::ModelConfig mc = config.model;
      mc.seed = seed;
      const auto params = model::ModelParams::from_named(load_checkpoint(ckpt));
      const Eigen::MatrixXd z = model::encode(params, mc, bow.dense(), Mode::Eval);
      RngStream rng = RngStream(seed).split("collapse");
      RngStream prior_rng = rng.split("prior");
      const Eigen::MatrixXd prior = priors::sample_prior(mc.prior, z.rows(), prior_rng);
      const auto report =
          eval::collapse_diagnostic(z, prior, mc.projections, rng.split("projections"), spherical, mt.collapse_thresholds);
      std::vector<double> variance(report.variance.data(), report.variance.data() + report.variance.size());
      m["collapse"] = {{"collapsed", report.collapsed},
                       {"variance", variance},
                       {"mean_pairwise_distance", report.mean_pairwise_distance},
                       {"ot_to_prior", report.ot_to_prior}};
    }
    write_json(dir / "metrics.json", m);
    progress << "seed " << seed << ": " << m.dump() << '\n';
    all.push_back(std::move(m));
  }
  write_json(config.output / "metrics_median.json", median_json(all));
}

void cmd_align(const fs::path& topics_a, const fs::path& topics_b, const fs::path& out_file) {
  const auto a = read_topics_json(topics_a);
  const auto b = read_topics_json(topics_b);
  if (a.size() != b.size())
    throw DataError("cannot align " + std::to_string(a.size()) + " topics with " + std::to_string(b.size()));
  // Shared word ids over both files so rbo compares words.
  std::map<std::string, int> index;
  auto encode = [&](const std::vector<std::vector<std::string>>& topics) {
    std::vector<std::vector<int>> out;
    for (const auto& t : topics) {
      std::vector<int> ids;
      for (const auto& w : t) ids.push_back(index.try_emplace(w, static_cast<int>(index.size())).first->second);
      out.push_back(std::move(ids));
    }
    return out;
  };
  const auto ia = encode(a);
  const auto ib = encode(b);
  auto out = open_out(out_file);
  for (const auto& p : eval::align_topics(ia, ib)) out << p.i << '\t' << p.j << '\t' << format_double(p.score) << '\n';
}

std::vector<BenchRow> cmd_bench(RunConfig config, const std::vector<std::uint64_t>& m_list, std::ostream& progress) {
  if (m_list.empty()) throw ConfigError("--m-list: at least one projection count is required");
  for (auto m : m_list)
    if (m < 1) throw ConfigError("--m-list: projection counts must be >= 1");
  const corpus::Corpus corpus = load_config_corpus(config);
  const corpus::BowMatrix bow = corpus::build_bow(corpus);
  std::vector<BenchRow> rows;
  for (auto m : m_list) {
    model::ModelConfig mc = config.model;
    mc.projections = static_cast<Eigen::Index>(m);
    const TrainedRun run = train_seed(corpus, bow, mc, config.seeds.front(), {}, &progress);
    double seconds = 0;
    for (const auto& e : run.log) seconds += e.seconds;
    rows.push_back({mc.projections, mean_npmi(corpus, run.topics, config.metrics.window),
                    run.log.empty() ? 0.0 : seconds / static_cast<double>(run.log.size())});
  }
  if (!config.output.empty()) {
    auto out = open_out(config.output / "bench.csv");
    out << "M,npmi,seconds_per_epoch\n";
    for (const auto& r : rows)
      out << r.projections << ',' << format_double(r.npmi) << ',' << format_double(r.seconds_per_epoch) << '\n';
  }
  return rows;
}

std::vector<AblationRow> cmd_ablate(RunConfig config, std::ostream& progress) {
  if (config.model.geometry != model::Geometry::Spherical || !priors::is_spherical(config.model.prior))
    throw ConfigError("ablate: the config must describe the spherical model (spherical geometry, spherical prior)");
  const corpus::Corpus corpus = load_config_corpus(config);
  const corpus::BowMatrix bow = corpus::build_bow(corpus);
  model::ModelConfig euclid = config.model;
  euclid.geometry = model::Geometry::Euclidean;
  euclid.prior = priors::default_prior("dirichlet", euclid.topics);

  std::vector<double> npmi_s, npmi_e, irbo_s, irbo_e;
  for (std::uint64_t seed : config.seeds) {
    for (const bool spherical : {true, false}) {
      const model::ModelConfig& mc = spherical ? config.model : euclid;
      fs::path dir;
      if (!config.output.empty()) dir = seed_dir(config.output / (spherical ? "spherical" : "euclidean"), seed);
      const TrainedRun run = train_seed(corpus, bow, mc, seed, dir, &progress);
      (spherical ? npmi_s : npmi_e).push_back(mean_npmi(corpus, run.topics, config.metrics.window));
      (spherical ? irbo_s : irbo_e).push_back(eval::irbo(run.topics.top_words));
    }
  }
  std::vector<AblationRow> rows{{"npmi", median(npmi_e), median(npmi_s)}, {"irbo", median(irbo_e), median(irbo_s)}};
  if (!config.output.empty()) {
    auto out = open_out(config.output / "ablation.tsv");
    out << "metric\teuclidean\tspherical\n";
    for (const auto& r : rows) out << r.metric << '\t' << format_double(r.euclidean) << '\t' << format_double(r.spherical) << '\n';
  }
  return rows;
}

void cmd_synth(const synthetic::PlantedOptions& options, const fs::path& out) {
  const synthetic::PlantedCorpus planted = synthetic::make_planted_corpus(options);
  corpus::save_corpus(planted.corpus, out);
  write_topics_json(out / "planted_topics.json", words_of(planted.top_words, planted.corpus.vocabulary), options.seed);
}

void write_topics_json(const fs::path& path, const std::vector<std::vector<std::string>>& topics, std::uint64_t seed) {
  json j;
  j["topics"] = topics;
  j["k"] = topics.size();
  j["seed"] = seed;
  write_json(path, j);
}

std::vector<std::vector<std::string>> read_topics_json(const fs::path& path) {
  const json j = read_json(path);
  if (!j.is_object() || !j.contains("topics") || !j.at("topics").is_array())
    throw DataError(path.string() + ": expected an object with a \"topics\" array");
  std::vector<std::vector<std::string>> topics;
  for (const json& t : j.at("topics")) {
    if (!t.is_array()) throw DataError(path.string() + ": every topic must be an array of words");
    std::vector<std::string> words;
    for (const json& w : t) {
      if (!w.is_string()) throw DataError(path.string() + ": topic words must be strings");
      words.push_back(w.get<std::string>());
    }
    if (words.empty()) throw DataError(path.string() + ": empty topic");
    topics.push_back(std::move(words));
  }
  if (j.contains("k") && (!j.at("k").is_number_integer() || j.at("k").get<std::size_t>() != topics.size()))
    throw DataError(path.string() + ": \"k\" does not match the number of topics");
  return topics;
}

void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m) {
  auto out = open_out(path);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t end = std::min(line.find(',', start), line.size());
      const std::string cell = line.substr(start, end - start);
      char* stop = nullptr;
      const double v = std::strtod(cell.c_str(), &stop);
      if (cell.empty() || stop != cell.c_str() + cell.size())
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": '" + cell + "' is not a number");
      row.push_back(v);
      start = end + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

}  // namespace s2wtm::cli
