#pragma once

// Translation metrics (acc@k, avg-rank, avg-log-rank, hard-win), V-measure
// via K-means, confusion matrices and Spearman correlation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "langsub/error.hpp"
#include "langsub/linalg.hpp"
#include "langsub/repr_store.hpp"

namespace langsub {

// ---------------------------------------------------------------------------
// Translation rankings

struct MetricSummary {
  std::map<std::size_t, double> acc_at;
  double avg_rank = std::numeric_limits<double>::quiet_NaN();
  double avg_log_rank = std::numeric_limits<double>::quiet_NaN();  // natural log
  std::optional<double> hard_win;
  std::size_t n = 0;
  std::size_t missing = 0;  // targets absent from their candidate list
  bool low_support = false;
};

struct TranslationEvalReport {
  MetricSummary overall;
  std::map<std::string, MetricSummary> per_pos;
  std::map<std::string, MetricSummary> per_language;
};

struct EvalOptions {
  std::vector<std::size_t> ks = {1, 10, 100};
  // Rank assigned to a missing target is universe_size + 1; 0 means "the
  // record's own candidate count".
  std::size_t universe_size = 0;
  std::size_t min_pos_count = 200;
};

struct RankedPair {
  std::size_t rank = 0;
  bool missing = false;
  std::optional<std::size_t> baseline_rank;
};

/// 1-based rank of `target` in the record; nullopt when absent.
inline std::optional<std::size_t> target_rank(const RankingRecord& r, const std::string& target) {
  const std::string t = unicode::nfc(target);
  for (std::size_t i = 0; i < r.candidates.size(); ++i)
    if (unicode::nfc(r.candidates[i].token) == t) return i + 1;
  return std::nullopt;
}

inline MetricSummary summarize(std::span<const RankedPair> pairs, std::span<const std::size_t> ks) {
  MetricSummary s;
  s.n = pairs.size();
  for (auto k : ks) s.acc_at[k] = std::numeric_limits<double>::quiet_NaN();
  if (pairs.empty()) return s;
  const auto n = static_cast<double>(pairs.size());
  double sum = 0.0;
  double log_sum = 0.0;
  std::size_t wins = 0;
  std::size_t compared = 0;
  for (const auto& p : pairs) {
    sum += static_cast<double>(p.rank);
    log_sum += std::log(static_cast<double>(p.rank));
    s.missing += p.missing;
    if (p.baseline_rank) {
      ++compared;
      wins += p.rank < *p.baseline_rank;
    }
  }
  for (auto k : ks) {
    std::size_t hits = 0;
    for (const auto& p : pairs) hits += p.rank <= k;
    s.acc_at[k] = static_cast<double>(hits) / n;
  }
  s.avg_rank = sum / n;
  s.avg_log_rank = log_sum / n;
  if (compared > 0) s.hard_win = static_cast<double>(wins) / static_cast<double>(compared);
  return s;
}

namespace detail {

using PairKey = std::tuple<std::string, std::string, std::string>;

inline PairKey pair_key(const std::string& source, const std::string& language, const std::string& target) {
  return {unicode::nfc(source), language, unicode::nfc(target)};
}

inline std::map<PairKey, std::size_t> index_records(std::span<const RankingRecord> records, const char* what) {
  std::map<PairKey, std::size_t> index;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!index.emplace(pair_key(r.source, r.language, r.target), i).second)
      fail(ErrorCode::duplicate, std::string(what) + " has two records for (" + r.source + ", " + r.language + ", " +
                                     r.target + ")");
  }
  return index;
}

}  // namespace detail

/// Evaluates rankings against a lexicon. Each record must match a lexicon
/// entry on (source, language, target); hard-win is filled only when a
/// baseline covering every evaluated pair is given.
inline TranslationEvalReport evaluate_rankings(std::span<const RankingRecord> records, const Lexicon& lexicon,
                                               const std::vector<RankingRecord>* baseline,
                                               const EvalOptions& options = {}) {
  std::map<detail::PairKey, const LexiconEntry*> entries;
  for (const auto& e : lexicon.entries) entries.emplace(detail::pair_key(e.source, e.language, e.target), &e);

  const auto record_index = detail::index_records(records, "ranking dump");
  std::map<detail::PairKey, std::size_t> baseline_index;
  if (baseline) baseline_index = detail::index_records(*baseline, "baseline dump");

  auto rank_in = [&](const RankingRecord& r) {
    RankedPair p;
    if (auto rank = target_rank(r, r.target)) {
      p.rank = *rank;
    } else {
      p.missing = true;
      p.rank = (options.universe_size ? options.universe_size : r.candidates.size()) + 1;
    }
    return p;
  };

  std::vector<RankedPair> all;
  std::map<std::string, std::vector<RankedPair>> by_pos;
  std::map<std::string, std::vector<RankedPair>> by_language;
  for (const auto& [key, idx] : record_index) {
    const auto& r = records[idx];
    auto entry = entries.find(key);
    if (entry == entries.end())
      fail(ErrorCode::not_found, "record (" + r.source + ", " + r.language + ", " + r.target + ") has no lexicon entry");
    RankedPair p = rank_in(r);
    if (baseline) {
      auto b = baseline_index.find(key);
      if (b == baseline_index.end())
        fail(ErrorCode::not_found, "baseline lacks (" + r.source + ", " + r.language + ", " + r.target + ")");
      p.baseline_rank = rank_in((*baseline)[b->second]).rank;
    }
    all.push_back(p);
    by_pos[entry->second->pos].push_back(p);
    by_language[r.language].push_back(p);
  }

  TranslationEvalReport report;
  report.overall = summarize(all, options.ks);
  for (const auto& [pos, pairs] : by_pos) {
    auto s = summarize(pairs, options.ks);
    s.low_support = pairs.size() < options.min_pos_count;
    report.per_pos[pos] = std::move(s);
  }
  for (const auto& [lang, pairs] : by_language) report.per_language[lang] = summarize(pairs, options.ks);
  return report;
}

/// Per-POS breakdown; groups smaller than `min_pos_count` are flagged
/// low-support.
inline std::map<std::string, MetricSummary> per_pos_report(std::span<const RankingRecord> records,
                                                           const Lexicon& lexicon,
                                                           const std::vector<RankingRecord>* baseline,
                                                           const EvalOptions& options = {}) {
  return evaluate_rankings(records, lexicon, baseline, options).per_pos;
}

inline json to_json(const MetricSummary& s) {
  json acc = json::object();
  for (const auto& [k, v] : s.acc_at) acc[std::to_string(k)] = v;
  json j = {{"acc_at", acc},           {"avg_rank", s.avg_rank}, {"avg_log_rank", s.avg_log_rank},
            {"n", s.n},                {"missing", s.missing},   {"low_support", s.low_support}};
  j["hard_win"] = s.hard_win ? json(*s.hard_win) : json(nullptr);
  return j;
}

inline json to_json(const TranslationEvalReport& r) {
  json j = to_json(r.overall);
  j["per_pos"] = json::object();
  for (const auto& [pos, s] : r.per_pos) j["per_pos"][pos] = to_json(s);
  j["per_language"] = json::object();
  for (const auto& [lang, s] : r.per_language) j["per_language"][lang] = to_json(s);
  return j;
}

inline MetricSummary summary_from_json(const json& j) {
  MetricSummary s;
  for (const auto& [k, v] : j.at("acc_at").items())
    s.acc_at[std::stoul(k)] = v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  auto num = [](const json& v) { return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>(); };
  s.avg_rank = num(j.at("avg_rank"));
  s.avg_log_rank = num(j.at("avg_log_rank"));
  if (j.contains("hard_win") && !j["hard_win"].is_null()) s.hard_win = j["hard_win"].get<double>();
  s.n = j.value("n", std::size_t{0});
  s.missing = j.value("missing", std::size_t{0});
  s.low_support = j.value("low_support", false);
  return s;
}

inline TranslationEvalReport report_from_json(const json& j) {
  TranslationEvalReport r;
  r.overall = summary_from_json(j);
  if (j.contains("per_pos"))
    for (const auto& [k, v] : j["per_pos"].items()) r.per_pos[k] = summary_from_json(v);
  if (j.contains("per_language"))
    for (const auto& [k, v] : j["per_language"].items()) r.per_language[k] = summary_from_json(v);
  return r;
}

namespace detail {

inline std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "--";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], row[c].size());
    }
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      if (c) out += " | ";
      out += rows[r][c];
      if (c + 1 < rows[r].size()) out += std::string(width[c] - rows[r][c].size(), ' ');
    }
    out += "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 3;
      out += std::string(total > 3 ? total - 3 : 0, '-') + "\n";
    }
  }
  return out;
}

}  // namespace detail

/// Method x (acc@k..., rank, log, win) table.
inline std::string format_translation_table(const std::vector<std::pair<std::string, MetricSummary>>& rows,
                                            std::span<const std::size_t> ks) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> head = {""};
  for (auto k : ks) head.push_back("@" + std::to_string(k));
  head.insert(head.end(), {"rank", "log", "win", "n"});
  cells.push_back(head);
  for (const auto& [name, s] : rows) {
    std::vector<std::string> row = {name};
    for (auto k : ks) row.push_back(s.acc_at.contains(k) ? detail::fixed(s.acc_at.at(k), 3) : "--");
    row.push_back(detail::fixed(s.avg_rank, 1));
    row.push_back(detail::fixed(s.avg_log_rank, 2));
    row.push_back(s.hard_win ? detail::fixed(100.0 * *s.hard_win, 1) + "%" : "--");
    row.push_back(std::to_string(s.n) + (s.low_support ? "*" : ""));
    cells.push_back(std::move(row));
  }
  return detail::render_table(cells);
}

/// Row label x (top-k...) table of fractions.
inline std::string format_topk_table(const std::vector<std::pair<std::string, std::map<std::size_t, double>>>& rows) {
  std::set<std::size_t> ks;
  for (const auto& [_, m] : rows)
    for (const auto& [k, __] : m) ks.insert(k);
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> head = {""};
  for (auto k : ks) head.push_back("top-" + std::to_string(k));
  cells.push_back(head);
  for (const auto& [name, m] : rows) {
    std::vector<std::string> row = {name};
    for (auto k : ks) row.push_back(m.contains(k) ? detail::fixed(m.at(k), 3) : "--");
    cells.push_back(std::move(row));
  }
  return detail::render_table(cells);
}

// ---------------------------------------------------------------------------
// Clustering

struct VMeasure {
  double homogeneity = 0.0;
  double completeness = 0.0;
  double v = 0.0;
};

/// V-measure from two labelings (classes, clusters) via contingency
/// entropies, natural log.
inline VMeasure v_measure(std::span<const int> classes, std::span<const int> clusters) {
  require(classes.size() == clusters.size(), "labelings must have equal length");
  VMeasure out;
  const auto n = static_cast<double>(classes.size());
  if (classes.empty()) {
    out.homogeneity = out.completeness = out.v = 1.0;
    return out;
  }
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> class_count;
  std::map<int, double> cluster_count;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    joint[{classes[i], clusters[i]}] += 1.0;
    class_count[classes[i]] += 1.0;
    cluster_count[clusters[i]] += 1.0;
  }
  auto entropy = [n](const std::map<int, double>& counts) {
    double h = 0.0;
    for (const auto& [_, c] : counts) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double h_class = entropy(class_count);
  const double h_cluster = entropy(cluster_count);
  double h_class_given_cluster = 0.0;
  double h_cluster_given_class = 0.0;
  for (const auto& [key, c] : joint) {
    h_class_given_cluster -= (c / n) * std::log(c / cluster_count[key.second]);
    h_cluster_given_class -= (c / n) * std::log(c / class_count[key.first]);
  }
  out.homogeneity = h_class == 0.0 ? 1.0 : std::clamp(1.0 - h_class_given_cluster / h_class, 0.0, 1.0);
  out.completeness = h_cluster == 0.0 ? 1.0 : std::clamp(1.0 - h_cluster_given_class / h_cluster, 0.0, 1.0);
  const double sum = out.homogeneity + out.completeness;
  out.v = sum == 0.0 ? 0.0 : 2.0 * out.homogeneity * out.completeness / sum;
  return out;
}

struct KMeansConfig {
  int restarts = 10;
  int max_iterations = 300;
  double tolerance = 1e-6;  // relative inertia change
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct KMeansResult {
  std::vector<int> assignment;
  Matrix centers;
  double inertia = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline double assign(const Matrix& x, const Matrix& centers, std::vector<int>& assignment) {
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index best = 0;
    (centers.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
    assignment[static_cast<std::size_t>(i)] = static_cast<int>(best);
    inertia += (centers.row(best) - x.row(i)).squaredNorm();
  }
  return inertia;
}

inline KMeansResult lloyd(const Matrix& x, int k, const KMeansConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Eigen::Index n = x.rows();
  Matrix centers(k, x.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centers.row(0) = x.row(first(rng));
  Vector dist2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = dist2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      for (pick = 0; pick < n - 1; ++pick) {
        r -= dist2(pick);
        if (r < 0.0) break;
      }
    } else {
      pick = first(rng);
    }
    centers.row(c) = x.row(pick);
    dist2 = dist2.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  KMeansResult result;
  result.assignment.assign(static_cast<std::size_t>(n), 0);
  double inertia = assign(x, centers, result.assignment);
  int it = 0;
  for (; it < config.max_iterations; ++it) {
    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int a = result.assignment[static_cast<std::size_t>(i)];
      sums.row(a) += x.row(i);
      ++counts[static_cast<std::size_t>(a)];
    }
    for (int c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0)
        centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    const double next = assign(x, centers, result.assignment);
    const double change = inertia - next;
    inertia = next;
    if (change <= config.tolerance * std::max(inertia, std::numeric_limits<double>::min())) {
      ++it;
      break;
    }
  }
  result.centers = std::move(centers);
  result.inertia = inertia;
  result.iterations = it;
  return result;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding; best inertia over
/// `config.restarts` runs. Restart r is seeded from (seed, r), so the result
/// does not depend on the thread count.
inline KMeansResult kmeans(const Matrix& x, int k, const KMeansConfig& config = {}) {
  require(k >= 1, "k must be at least 1");
  require(x.rows() >= k, "k-means needs at least k rows");
  require(config.restarts >= 1, "at least one restart required");
  std::vector<KMeansResult> runs(static_cast<std::size_t>(config.restarts));
  auto run = [&](int r) {
    runs[static_cast<std::size_t>(r)] =
        detail::lloyd(x, k, config, detail::splitmix64(config.seed ^ detail::splitmix64(static_cast<std::uint64_t>(r))));
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(config.restarts)));
  if (threads == 1) {
    for (int r = 0; r < config.restarts; ++r) run(r);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (int r = static_cast<int>(t); r < config.restarts; r += static_cast<int>(threads)) run(r);
      });
  }
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].inertia < runs[best].inertia) best = r;
  return std::move(runs[best]);
}

struct ClusterReport {
  VMeasure score;
  double inertia = 0.0;
  int k = 0;
};

/// K-means with K = number of distinct labels, scored by V-measure against
/// the labels.
inline ClusterReport kmeans_vmeasure(const Matrix& x, std::span<const std::string> labels, std::uint64_t seed,
                                     int restarts = 10, unsigned threads = 1) {
  require(static_cast<Eigen::Index>(labels.size()) == x.rows(), "one label per row required");
  std::map<std::string, int> ids;
  std::vector<int> classes;
  for (const auto& l : labels) classes.push_back(ids.emplace(l, static_cast<int>(ids.size())).first->second);
  const int k = static_cast<int>(ids.size());
  require(x.rows() >= k, "need at least as many rows as languages");
  KMeansConfig config;
  config.seed = seed;
  config.restarts = restarts;
  config.threads = threads;
  const auto result = kmeans(x, k, config);
  return {v_measure(classes, result.assignment), result.inertia, k};
}

// ---------------------------------------------------------------------------
// Confusion matrix and rank correlation

struct ConfusionMatrix {
  std::vector<std::string> languages;  // row and column order
  Matrix values;                       // (true, predicted), sqrt-scaled if requested
  Matrix counts;                       // raw tallies
  std::vector<double> accuracy;        // acc@1 per row, NaN when the row is empty
};

/// Tally of (true, predicted) pairs over the languages they mention minus
/// `drop`; pairs touching a dropped language are discarded. Rows and columns
/// are ordered by descending per-language accuracy, ties by tag.
inline ConfusionMatrix confusion_matrix(std::span<const std::pair<std::string, std::string>> predictions,
                                        bool sqrt_scale, std::span<const std::string> drop = {}) {
  const std::set<std::string> dropped(drop.begin(), drop.end());
  std::set<std::string> langs;
  for (const auto& [t, p] : predictions) {
    if (!dropped.contains(t)) langs.insert(t);
    if (!dropped.contains(p)) langs.insert(p);
  }
  std::map<std::string, std::size_t> pos;
  for (const auto& l : langs) pos.emplace(l, pos.size());
  const auto n = static_cast<Eigen::Index>(langs.size());
  Matrix counts = Matrix::Zero(n, n);
  for (const auto& [t, p] : predictions) {
    if (dropped.contains(t) || dropped.contains(p)) continue;
    counts(static_cast<Eigen::Index>(pos[t]), static_cast<Eigen::Index>(pos[p])) += 1.0;
  }
  std::vector<std::string> order(langs.begin(), langs.end());
  std::vector<double> acc(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const double row = counts.row(static_cast<Eigen::Index>(i)).sum();
    acc[i] = row > 0 ? counts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) / row
                     : std::numeric_limits<double>::quiet_NaN();
  }
  std::vector<std::size_t> perm(order.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    const double va = std::isnan(acc[a]) ? -1.0 : acc[a];
    const double vb = std::isnan(acc[b]) ? -1.0 : acc[b];
    return va > vb;
  });
  ConfusionMatrix out;
  out.counts = Matrix(n, n);
  for (std::size_t r = 0; r < perm.size(); ++r) {
    out.languages.push_back(order[perm[r]]);
    out.accuracy.push_back(acc[perm[r]]);
    for (std::size_t c = 0; c < perm.size(); ++c)
      out.counts(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          counts(static_cast<Eigen::Index>(perm[r]), static_cast<Eigen::Index>(perm[c]));
  }
  out.values = sqrt_scale ? Matrix(out.counts.cwiseSqrt()) : out.counts;
  return out;
}

inline std::string confusion_csv(const ConfusionMatrix& m) {
  std::string out = "true\\predicted";
  for (const auto& l : m.languages) out += "," + l;
  out += "\n";
  for (std::size_t r = 0; r < m.languages.size(); ++r) {
    out += m.languages[r];
    for (std::size_t c = 0; c < m.languages.size(); ++c)
      out += "," + detail::format_double(m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
    out += "\n";
  }
  return out;
}

/// Fractional ranks (1-based, ties share their average rank).
inline std::vector<double> fractional_ranks(std::span<const double> xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) fail(ErrorCode::precondition, "correlation undefined for a constant list");
  return sab / std::sqrt(saa * sbb);
}

/// Spearman rank correlation: Pearson correlation of fractional ranks.
inline double spearman(std::span<const double> xs, std::span<const double> ys) {
  require(xs.size() == ys.size(), "spearman needs equal-length lists");
  require(xs.size() >= 3, "spearman needs at least 3 values");
  const auto rx = fractional_ranks(xs);
  const auto ry = fractional_ranks(ys);
  return pearson(rx, ry);
}

}  // namespace langsub
