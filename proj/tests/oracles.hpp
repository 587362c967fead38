#pragma once
// Brute-force reference computations. These deliberately avoid the library's
// own helpers so that tests compare two independent derivations.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

struct Summary {
  std::map<std::size_t, double> acc;
  double avg_rank = 0.0;
  double avg_log_rank = 0.0;
  double hard_win = -1.0;  // -1 when no baseline
  std::size_t n = 0;
};

// Position of `target` found by linear scan, or fallback when absent.
inline std::size_t scan_rank(const std::vector<std::string>& candidates, const std::string& target,
                             std::size_t fallback) {
  std::size_t pos = 1;
  for (const auto& c : candidates) {
    if (c == target) return pos;
    ++pos;
  }
  return fallback;
}

inline Summary summarize(const std::vector<std::size_t>& ranks, const std::vector<std::size_t>& ks,
                         const std::vector<std::size_t>* baseline = nullptr) {
  Summary s;
  s.n = ranks.size();
  if (ranks.empty()) return s;
  for (auto k : ks) {
    std::size_t c = 0;
    for (auto r : ranks)
      if (r <= k) ++c;
    s.acc[k] = double(c) / double(ranks.size());
  }
  long double sum = 0, lsum = 0;
  for (auto r : ranks) {
    sum += r;
    lsum += std::log(static_cast<long double>(r));
  }
  s.avg_rank = double(sum / ranks.size());
  s.avg_log_rank = double(lsum / ranks.size());
  if (baseline) {
    std::size_t w = 0;
    for (std::size_t i = 0; i < ranks.size(); ++i)
      if (ranks[i] < (*baseline)[i]) ++w;
    s.hard_win = double(w) / double(ranks.size());
  }
  return s;
}

// Entropy-based V-measure from a label/cluster list, written in terms of
// mutual information rather than conditional entropies.
struct V {
  double h, c, v;
};

inline V v_measure(const std::vector<int>& classes, const std::vector<int>& clusters) {
  const double n = double(classes.size());
  std::map<int, double> pc, pk;
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    pc[classes[i]] += 1;
    pk[clusters[i]] += 1;
    joint[{classes[i], clusters[i]}] += 1;
  }
  auto entropy = [n](const std::map<int, double>& m) {
    double h = 0;
    for (auto& [_, c] : m) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double hc = entropy(pc), hk = entropy(pk);
  double mi = 0;
  for (auto& [key, c] : joint) mi += (c / n) * std::log((c / n) / ((pc[key.first] / n) * (pk[key.second] / n)));
  const double h = hc == 0 ? 1.0 : mi / hc;
  const double comp = hk == 0 ? 1.0 : mi / hk;
  const double v = (h + comp) == 0 ? 0.0 : 2 * h * comp / (h + comp);
  return {h, comp, v};
}

// Same, starting from a contingency table (rows = classes, cols = clusters).
inline V v_measure_table(const std::vector<std::vector<int>>& table) {
  std::vector<int> classes, clusters;
  for (std::size_t r = 0; r < table.size(); ++r)
    for (std::size_t c = 0; c < table[r].size(); ++c)
      for (int i = 0; i < table[r][c]; ++i) {
        classes.push_back(int(r));
        clusters.push_back(int(c));
      }
  return v_measure(classes, clusters);
}

inline std::map<std::pair<std::string, std::string>, int> tally(
    const std::vector<std::pair<std::string, std::string>>& predictions) {
  std::map<std::pair<std::string, std::string>, int> out;
  for (const auto& p : predictions) ++out[p];
  return out;
}

// Average rank by counting: rank(x) = #(y < x) + (#(y == x) + 1) / 2.
inline std::vector<double> count_ranks(const std::vector<double>& xs) {
  std::vector<double> out;
  for (double x : xs) {
    double less = 0, equal = 0;
    for (double y : xs) {
      if (y < x) less += 1;
      if (y == x) equal += 1;
    }
    out.push_back(less + (equal + 1) / 2);
  }
  return out;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = double(a.size());
  double sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  const double ma = sa / n, mb = sb / n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  return pearson(count_ranks(xs), count_ranks(ys));
}

// Full stable sort of every eligible row by (score desc, index asc).
inline std::vector<std::size_t> full_order(const Eigen::VectorXd& scores, const std::vector<bool>& eligible) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < eligible.size(); ++i)
    if (eligible[i]) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores(Eigen::Index(a)) > scores(Eigen::Index(b));
  });
  return idx;
}

// Projection onto the orthogonal complement of span(rows of w), built by
// modified Gram-Schmidt instead of an SVD.
inline Eigen::MatrixXd complement_projector(const Eigen::MatrixXd& w, double tol = 1e-9) {
  const Eigen::Index d = w.cols();
  std::vector<Eigen::VectorXd> basis;
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    Eigen::VectorXd v = w.row(r).transpose();
    const double scale = v.norm();
    if (scale == 0) continue;
    v /= scale;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) v -= b.dot(v) * b;
    if (v.norm() > tol) basis.push_back(v.normalized());
  }
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(d, d);
  for (const auto& b : basis) p -= b * b.transpose();
  return p;
}

inline std::vector<std::size_t> random_ranks(std::mt19937_64& rng, std::size_t n, std::size_t max_rank) {
  std::uniform_int_distribution<std::size_t> pick(1, max_rank);
  std::vector<std::size_t> out(n);
  for (auto& r : out) r = pick(rng);
  return out;
}

}  // namespace oracle
