#include "s2wtm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "s2wtm/errors.hpp"
#include "s2wtm/spherical_ot.hpp"
#include "s2wtm/tensor.hpp"

namespace s2wtm::eval {

double npmi_pair(double p_i, double p_j, double p_ij, double eps) {
  if (p_i <= 0.0 || p_j <= 0.0) return -1.0;
  if (p_ij >= 1.0) return 1.0;
  const double joint = p_ij > 0.0 ? p_ij : eps;
  const double value = std::log(joint / (p_i * p_j)) / -std::log(joint);
  return std::clamp(value, -1.0, 1.0);
}

NpmiResult npmi(const std::vector<RankedList>& topics, const corpus::Corpus& reference, const NpmiOptions& options) {
  if (options.window < 1) throw ConfigError("npmi window must be >= 1");
  if (topics.empty()) throw DataError("npmi needs at least one topic");

  // Dense slots for the words that appear in some topic.
  std::unordered_map<int, int> slot;
  std::vector<std::vector<int>> topic_slots;
  for (const auto& topic : topics) {
    std::vector<int> slots;
    const auto n = std::min<std::size_t>(topic.size(), static_cast<std::size_t>(options.top_n));
    for (std::size_t r = 0; r < n; ++r) {
      const int w = topic[r];
      if (w < 0 || w >= reference.vocab_size())
        throw DataError("topic word id " + std::to_string(w) + " is not in the reference vocabulary");
      slots.push_back(slot.try_emplace(w, static_cast<int>(slot.size())).first->second);
    }
    topic_slots.push_back(std::move(slots));
  }
  const auto s = slot.size();
  std::vector<double> single(s, 0.0);
  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s));
  double windows = 0;

  std::vector<int> present_count(s, 0);
  std::vector<int> present;
  auto tally = [&] {
    windows += 1;
    present.clear();
    for (std::size_t k = 0; k < s; ++k)
      if (present_count[k] > 0) present.push_back(static_cast<int>(k));
    for (std::size_t a = 0; a < present.size(); ++a) {
      single[static_cast<std::size_t>(present[a])] += 1;
      for (std::size_t b = a + 1; b < present.size(); ++b) {
        joint(present[a], present[b]) += 1;
        joint(present[b], present[a]) += 1;
      }
    }
  };
  // Present slots are tracked incrementally; the per-window scan over s slots
  // is only paid for windows touching at least one topic word.
  for (const auto& doc : reference.documents) {
    if (doc.empty()) continue;
    const auto w = static_cast<std::size_t>(options.window);
    std::vector<int> doc_slots(doc.size(), -1);
    for (std::size_t t = 0; t < doc.size(); ++t)
      if (auto it = slot.find(doc[t]); it != slot.end()) doc_slots[t] = it->second;
    int live = 0;
    auto add = [&](std::size_t t, int delta) {
      if (doc_slots[t] < 0) return;
      auto& c = present_count[static_cast<std::size_t>(doc_slots[t])];
      if (c == 0 && delta > 0) ++live;
      c += delta;
      if (c == 0 && delta < 0) --live;
    };
    const std::size_t first = std::min(w, doc.size());
    for (std::size_t t = 0; t < first; ++t) add(t, 1);
    auto step = [&] {
      if (live > 0)
        tally();
      else
        windows += 1;
    };
    step();
    for (std::size_t t = first; t < doc.size(); ++t) {
      add(t - w, -1);
      add(t, 1);
      step();
    }
    for (std::size_t t = doc.size() - first; t < doc.size(); ++t) add(t, -1);
  }

  NpmiResult result;
  for (const auto& slots : topic_slots) {
    double total = 0;
    int pairs = 0;
    for (std::size_t a = 0; a < slots.size(); ++a)
      for (std::size_t b = a + 1; b < slots.size(); ++b) {
        const auto i = static_cast<std::size_t>(slots[a]), j = static_cast<std::size_t>(slots[b]);
        const double p_ij = i == j ? single[i] / windows : joint(slots[a], slots[b]) / windows;
        total += npmi_pair(single[i] / windows, single[j] / windows, p_ij, options.eps);
        ++pairs;
      }
    result.per_topic.push_back(pairs ? total / pairs : 0.0);
  }
  double sum = 0;
  for (double v : result.per_topic) sum += v;
  result.mean = sum / static_cast<double>(result.per_topic.size());
  return result;
}

double rbo(const RankedList& a, const RankedList& b, double p, int depth) {
  if (a.empty() || b.empty()) throw DataError("rbo needs non-empty lists");
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("rbo persistence must lie in (0, 1)");
  const auto& shorter = a.size() <= b.size() ? a : b;
  const auto& longer = a.size() <= b.size() ? b : a;
  const int s = std::min<int>(static_cast<int>(shorter.size()), depth);
  const int l = std::min<int>(static_cast<int>(longer.size()), depth);

  std::set<int> seen_s, seen_l;
  double overlap = 0, sum = 0, x_s = 0;
  for (int d = 1; d <= l; ++d) {
    const int wl = longer[static_cast<std::size_t>(d - 1)];
    if (d <= s) {
      const int ws = shorter[static_cast<std::size_t>(d - 1)];
      if (ws == wl) {
        overlap += 1;
      } else {
        overlap += static_cast<double>(seen_l.count(ws)) + static_cast<double>(seen_s.count(wl));
      }
      seen_s.insert(ws);
    } else {
      overlap += static_cast<double>(seen_s.count(wl));
    }
    seen_l.insert(wl);
    if (d == s) x_s = overlap;
    sum += overlap / d * std::pow(p, d);
    if (d > s) sum += x_s * (d - s) / (static_cast<double>(s) * d) * std::pow(p, d);
  }
  const double x_l = overlap;
  return (1.0 - p) / p * sum + ((x_l - x_s) / l + x_s / s) * std::pow(p, l);
}

double irbo(const std::vector<RankedList>& topics, double p, int depth) {
  if (topics.size() < 2) throw DataError("irbo needs at least two topics");
  double total = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < topics.size(); ++i)
    for (std::size_t j = i + 1; j < topics.size(); ++j) {
      total += rbo(topics[i], topics[j], p, depth);
      ++pairs;
    }
  return 1.0 - total / static_cast<double>(pairs);
}

std::vector<AlignedPair> align_matrix(const Eigen::MatrixXd& scores) {
  if (scores.rows() != scores.cols()) throw DataError("alignment needs equal topic counts");
  const Eigen::Index k = scores.rows();
  std::vector<bool> used_i(static_cast<std::size_t>(k), false), used_j(static_cast<std::size_t>(k), false);
  std::vector<AlignedPair> pairs;
  for (Eigen::Index round = 0; round < k; ++round) {
    AlignedPair best{-1, -1, 0.0};
    for (Eigen::Index i = 0; i < k; ++i) {
      if (used_i[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = 0; j < k; ++j) {
        if (used_j[static_cast<std::size_t>(j)]) continue;
        // Row-major scan keeps the first (smallest i, then j) maximum.
        if (best.i < 0 || scores(i, j) > best.score) best = {static_cast<int>(i), static_cast<int>(j), scores(i, j)};
      }
    }
    used_i[static_cast<std::size_t>(best.i)] = true;
    used_j[static_cast<std::size_t>(best.j)] = true;
    pairs.push_back(best);
  }
  return pairs;
}

std::vector<AlignedPair> align_topics(const std::vector<RankedList>& p, const std::vector<RankedList>& q,
                                      double persistence, int depth) {
  if (p.size() != q.size())
    throw DataError("cannot align " + std::to_string(p.size()) + " topics with " + std::to_string(q.size()));
  const auto k = static_cast<Eigen::Index>(p.size());
  Eigen::MatrixXd scores(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      scores(i, j) = rbo(p[static_cast<std::size_t>(i)], q[static_cast<std::size_t>(j)], persistence, depth);
  return align_matrix(scores);
}

ClusterScores cluster_metrics(const std::vector<int>& labels, const std::vector<int>& clusters) {
  if (labels.empty()) throw DataError("cluster metrics need at least one document");
  if (labels.size() != clusters.size()) throw DataError("label and cluster counts differ");
  std::map<int, double> nl, nc;
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t d = 0; d < labels.size(); ++d) {
    nl[labels[d]] += 1;
    nc[clusters[d]] += 1;
    joint[{labels[d], clusters[d]}] += 1;
  }
  const auto n = static_cast<double>(labels.size());
  auto entropy = [&](const std::map<int, double>& counts) {
    double h = 0;
    for (const auto& [_, c] : counts) h -= c / n * std::log(c / n);
    return h;
  };
  double mi = 0;
  for (const auto& [key, c] : joint) mi += c / n * std::log(c * n / (nl[key.first] * nc[key.second]));
  const double hl = entropy(nl), hc = entropy(nc);
  ClusterScores out;
  if (hl == 0.0 && hc == 0.0)
    out.nmi = 1.0;
  else if (hl == 0.0 || hc == 0.0)
    out.nmi = 0.0;
  else
    out.nmi = std::clamp(mi / std::sqrt(hl * hc), 0.0, 1.0);

  std::map<int, double> best;
  for (const auto& [key, c] : joint) best[key.second] = std::max(best[key.second], c);
  double covered = 0;
  for (const auto& [_, c] : best) covered += c;
  out.purity = covered / n;
  return out;
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& theta) {
  std::vector<int> out(static_cast<std::size_t>(theta.rows()));
  for (Eigen::Index r = 0; r < theta.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < theta.cols(); ++c)
      if (theta(r, c) > theta(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

double linear_probe(const Eigen::MatrixXd& theta_train, const std::vector<int>& labels_train,
                    const Eigen::MatrixXd& theta_test, const std::vector<int>& labels_test, std::uint64_t seed,
                    const ProbeOptions& options) {
  if (theta_train.rows() != static_cast<Eigen::Index>(labels_train.size()) ||
      theta_test.rows() != static_cast<Eigen::Index>(labels_test.size()))
    throw DataError("probe features and labels differ in length");
  if (theta_train.rows() == 0 || theta_test.rows() == 0) throw DataError("probe needs train and test documents");
  if (theta_train.cols() != theta_test.cols()) throw DataError("probe train and test widths differ");
  const std::set<int> train_classes(labels_train.begin(), labels_train.end());
  for (int y : labels_test)
    if (!train_classes.count(y)) throw DataError("class " + std::to_string(y) + " appears in test but not in train");
  const int classes = *train_classes.rbegin() + 1;
  if (*train_classes.begin() < 0) throw DataError("probe labels must be nonnegative");

  const Eigen::Index k = theta_train.cols();
  RngStream rng = RngStream(seed).split("probe");
  Eigen::MatrixXd w_init(k, classes);
  for (Eigen::Index c = 0; c < classes; ++c)
    for (Eigen::Index r = 0; r < k; ++r) w_init(r, c) = 0.01 * rng.normal();

  Graph g;
  const Var x = g.input("x");
  const Var y = g.input("y");
  const Var w = g.parameter("weight", w_init);
  const Var b = g.parameter("bias", Eigen::MatrixXd::Zero(1, classes));
  const Var probs = softmax(add_bias(matmul(x, w), b));
  const Var loss = cross_entropy(y, probs) + scale(sum(w * w), options.l2);

  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(theta_train.rows(), classes);
  for (std::size_t d = 0; d < labels_train.size(); ++d) onehot(static_cast<Eigen::Index>(d), labels_train[d]) = 1.0;
  const Bindings inputs{{"x", theta_train}, {"y", onehot}};
  for (int step = 0; step < options.steps; ++step) {
    g.forward(inputs, {});
    g.backward(loss);
    g.parameter_value(w) -= options.learning_rate * g.grad(w);
    g.parameter_value(b) -= options.learning_rate * g.grad(b);
  }
  const Eigen::MatrixXd logits =
      (theta_test * g.parameter_value(w)).rowwise() + g.parameter_value(b).row(0);
  const std::vector<int> predicted = argmax_rows(logits);
  double correct = 0;
  for (std::size_t d = 0; d < labels_test.size(); ++d) correct += predicted[d] == labels_test[d] ? 1.0 : 0.0;
  return correct / static_cast<double>(labels_test.size());
}

CollapseReport collapse_diagnostic(const Eigen::MatrixXd& z, const Eigen::MatrixXd& prior_samples,
                                   Eigen::Index projections, const RngStream& rng, bool spherical,
                                   const CollapseThresholds& thresholds) {
  if (z.rows() < 2) throw DataError("collapse diagnostic needs at least two latent codes");
  if (prior_samples.rows() != z.rows() || prior_samples.cols() != z.cols())
    throw DataError("prior samples must match the latent matrix shape");
  CollapseReport report;
  const Eigen::RowVectorXd mean = z.colwise().mean();
  report.variance = (z.rowwise() - mean).array().square().colwise().sum().transpose() / static_cast<double>(z.rows());

  double total = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = i + 1; j < z.rows(); ++j) total += (z.row(i) - z.row(j)).norm();
  const double pairs = static_cast<double>(z.rows()) * static_cast<double>(z.rows() - 1) / 2.0;
  report.mean_pairwise_distance = total / pairs;
  report.ot_to_prior = spherical ? ot::ssw2(z, prior_samples, projections, rng) : ot::sliced_w2(z, prior_samples, projections, rng);
  report.collapsed = (report.variance.array() < thresholds.variance).all() ||
                     report.mean_pairwise_distance < thresholds.mean_distance;
  return report;
}

}  // namespace s2wtm::eval
