#include "s2wtm/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "s2wtm/errors.hpp"

namespace s2wtm::cli {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<std::string_view> known) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  const std::set<std::string_view> allowed(known);
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw ConfigError((path.empty() ? key : path + "." + key) + ": unknown key");
}

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

double get_number(const json& obj, const std::string& path, std::string_view key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(std::string(key));
  if (!v.is_number()) throw ConfigError(join(path, key) + ": expected a number");
  return v.get<double>();
}

std::int64_t get_int(const json& obj, const std::string& path, std::string_view key, std::int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(std::string(key));
  if (!v.is_number_integer()) throw ConfigError(join(path, key) + ": expected an integer");
  return v.get<std::int64_t>();
}

bool get_bool(const json& obj, const std::string& path, std::string_view key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(std::string(key));
  if (!v.is_boolean()) throw ConfigError(join(path, key) + ": expected true or false");
  return v.get<bool>();
}

std::string get_string(const json& obj, const std::string& path, std::string_view key) {
  const json& v = obj.at(std::string(key));
  if (!v.is_string()) throw ConfigError(join(path, key) + ": expected a string");
  return v.get<std::string>();
}

Eigen::VectorXd get_vector(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path + ": expected an array of numbers");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(path + ": expected an array of numbers");
    out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  return out;
}

Eigen::VectorXd get_direction(const json& v, const std::string& path, Eigen::Index dim) {
  Eigen::VectorXd mu = get_vector(v, path);
  if (mu.size() != dim) throw ConfigError(path + ": expected " + std::to_string(dim) + " entries");
  const double norm = mu.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw ConfigError(path + ": must be a nonzero finite vector");
  return mu / norm;
}

priors::PriorSpec parse_prior(const json& obj, Eigen::Index dim) {
  const std::string path = "prior";
  if (!obj.is_object()) throw ConfigError("prior: expected an object");
  if (!obj.contains("type")) throw ConfigError("prior.type: missing");
  const std::string type = get_string(obj, path, "type");
  if (type == "uniform") {
    reject_unknown(obj, path, {"type"});
    return priors::UniformSphere{dim};
  }
  if (type == "vmf") {
    reject_unknown(obj, path, {"type", "kappa", "mu"});
    const double kappa = get_number(obj, path, "kappa", 10.0);
    auto spec = std::get<priors::VmfParams>(priors::default_prior("vmf", dim, kappa));
    if (obj.contains("mu")) spec.mu = get_direction(obj.at("mu"), "prior.mu", dim);
    return spec;
  }
  if (type == "mvmf") {
    reject_unknown(obj, path, {"type", "kappa", "components", "weights"});
    const double kappa = get_number(obj, path, "kappa", 10.0);
    auto spec = std::get<priors::MvmfParams>(priors::default_prior("mvmf", dim, kappa));
    if (obj.contains("components")) {
      const json& comps = obj.at("components");
      if (!comps.is_array() || comps.empty()) throw ConfigError("prior.components: expected a non-empty array");
      spec.components.clear();
      for (std::size_t i = 0; i < comps.size(); ++i) {
        const std::string cpath = "prior.components[" + std::to_string(i) + "]";
        reject_unknown(comps[i], cpath, {"mu", "kappa"});
        if (!comps[i].contains("mu")) throw ConfigError(cpath + ".mu: missing");
        spec.components.push_back(
            {get_direction(comps[i].at("mu"), cpath + ".mu", dim), get_number(comps[i], cpath, "kappa", kappa)});
      }
      spec.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(spec.components.size()),
                                               1.0 / static_cast<double>(spec.components.size()));
    }
    if (obj.contains("weights")) spec.weights = get_vector(obj.at("weights"), "prior.weights");
    return spec;
  }
  if (type == "dirichlet") {
    reject_unknown(obj, path, {"type", "alpha"});
    auto spec = std::get<priors::Dirichlet>(priors::default_prior("dirichlet", dim));
    if (obj.contains("alpha")) {
      const json& a = obj.at("alpha");
      if (a.is_number())
        spec.concentration = Eigen::VectorXd::Constant(dim, a.get<double>());
      else
        spec.concentration = get_vector(a, "prior.alpha");
      if (spec.concentration.size() != dim) throw ConfigError("prior.alpha: expected " + std::to_string(dim) + " entries");
      if (!(spec.concentration.array() > 0.0).all()) throw ConfigError("prior.alpha: entries must be positive");
    }
    return spec;
  }
  throw ConfigError("prior.type: unknown prior '" + type + "' (expected uniform, vmf, mvmf or dirichlet)");
}

}  // namespace

std::vector<std::uint64_t> parse_u64_list(std::string_view text, std::string_view what) {
  std::vector<std::uint64_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    const std::string_view item = text.substr(start, end - start);
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (item.empty() || ec != std::errc{} || ptr != item.data() + item.size())
      throw ConfigError(std::string(what) + ": '" + std::string(item) + "' is not a nonnegative integer");
    out.push_back(value);
    start = end + 1;
  }
  if (out.empty()) throw ConfigError(std::string(what) + ": list is empty");
  return out;
}

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(root, "", {"corpus", "output", "seeds", "model", "prior", "metrics"});
  RunConfig cfg;
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  if (!root.contains("corpus")) throw ConfigError("corpus: missing");
  cfg.corpus = resolve(get_string(root, "", "corpus"));
  if (root.contains("output")) cfg.output = resolve(get_string(root, "", "output"));

  if (root.contains("seeds")) {
    const json& seeds = root.at("seeds");
    if (!seeds.is_array() || seeds.empty()) throw ConfigError("seeds: expected a non-empty array");
    cfg.seeds.clear();
    for (const json& s : seeds) {
      if (!s.is_number_unsigned()) throw ConfigError("seeds: entries must be nonnegative integers");
      cfg.seeds.push_back(s.get<std::uint64_t>());
    }
  }

  if (!root.contains("model")) throw ConfigError("model: missing");
  const json& m = root.at("model");
  reject_unknown(m, "model",
                 {"topics", "vocab", "encoder_hidden", "decoder_hidden", "dropout", "projections", "lambda",
                  "batch_size", "epochs", "learning_rate", "fresh_projections", "geometry", "workers"});
  model::ModelConfig& mc = cfg.model;
  if (!m.contains("topics")) throw ConfigError("model.topics: missing");
  mc.topics = get_int(m, "model", "topics", 0);
  if (m.contains("vocab")) cfg.vocab = get_int(m, "model", "vocab", 0);
  if (m.contains("encoder_hidden")) {
    const json& h = m.at("encoder_hidden");
    if (!h.is_array() || h.size() != 2 || !h[0].is_number_integer() || !h[1].is_number_integer())
      throw ConfigError("model.encoder_hidden: expected two integers");
    mc.encoder_hidden1 = h[0].get<Eigen::Index>();
    mc.encoder_hidden2 = h[1].get<Eigen::Index>();
  }
  mc.decoder_hidden = get_int(m, "model", "decoder_hidden", mc.decoder_hidden);
  mc.dropout = get_number(m, "model", "dropout", mc.dropout);
  mc.projections = get_int(m, "model", "projections", mc.projections);
  mc.lambda = get_number(m, "model", "lambda", mc.lambda);
  mc.batch_size = get_int(m, "model", "batch_size", mc.batch_size);
  mc.epochs = static_cast<int>(get_int(m, "model", "epochs", mc.epochs));
  mc.learning_rate = get_number(m, "model", "learning_rate", mc.learning_rate);
  mc.fresh_projections = get_bool(m, "model", "fresh_projections", mc.fresh_projections);
  mc.workers = static_cast<int>(get_int(m, "model", "workers", mc.workers));
  if (m.contains("geometry")) {
    const std::string g = get_string(m, "model", "geometry");
    if (g == "spherical")
      mc.geometry = model::Geometry::Spherical;
    else if (g == "euclidean")
      mc.geometry = model::Geometry::Euclidean;
    else
      throw ConfigError("model.geometry: expected 'spherical' or 'euclidean', got '" + g + "'");
  }
  if (mc.topics < 2) throw ConfigError("model.topics: must be >= 2");

  if (root.contains("prior"))
    mc.prior = parse_prior(root.at("prior"), mc.topics);
  else
    mc.prior = mc.geometry == model::Geometry::Spherical ? priors::PriorSpec{priors::UniformSphere{mc.topics}}
                                                          : priors::default_prior("dirichlet", mc.topics);

  if (root.contains("metrics")) {
    const json& t = root.at("metrics");
    reject_unknown(t, "metrics",
                   {"npmi", "irbo", "clustering", "probe", "collapse", "window", "collapse_variance",
                    "collapse_distance"});
    MetricToggles& mt = cfg.metrics;
    mt.npmi = get_bool(t, "metrics", "npmi", mt.npmi);
    mt.irbo = get_bool(t, "metrics", "irbo", mt.irbo);
    mt.clustering = get_bool(t, "metrics", "clustering", mt.clustering);
    mt.probe = get_bool(t, "metrics", "probe", mt.probe);
    mt.collapse = get_bool(t, "metrics", "collapse", mt.collapse);
    mt.window = static_cast<int>(get_int(t, "metrics", "window", mt.window));
    mt.collapse_thresholds.variance = get_number(t, "metrics", "collapse_variance", mt.collapse_thresholds.variance);
    mt.collapse_thresholds.mean_distance =
        get_number(t, "metrics", "collapse_distance", mt.collapse_thresholds.mean_distance);
    if (mt.window < 1) throw ConfigError("metrics.window: must be >= 1");
  }

  // Invariants that do not depend on the corpus are checked now.
  model::ModelConfig probe = mc;
  probe.vocab = cfg.vocab.value_or(std::max<Eigen::Index>(mc.topics, 1));
  try {
    probe.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  } catch (const std::exception& e) {
    throw ConfigError(std::string("prior: ") + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path.parent_path());
}

}  // namespace s2wtm::cli
