#pragma once

// Iterative nullspace projection: train a linear language classifier, remove
// its weight directions from the data, repeat. The accumulated nullspace
// projection P_N and its complement P_R = I - P_N are returned together with
// every classifier that contributed to them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "langsub/error.hpp"
#include "langsub/linalg.hpp"
#include "langsub/repr_store.hpp"

namespace langsub {

struct TrainConfig {
  double l2 = 1e-4;
  double gradient_tolerance = 1e-6;
  int max_steps = 1000;
};

/// Multinomial linear classifier: scores = weights * x + intercept.
struct LinearClassifier {
  Matrix weights;  // k x d
  Vector intercept;
  std::vector<std::string> classes;
  int steps = 0;
  double gradient_norm = 0.0;

  Eigen::Index num_classes() const { return weights.rows(); }

  Matrix scores(const Matrix& x) const { return (x * weights.transpose()).rowwise() + intercept.transpose(); }

  /// Predicted class index per row; ties go to the lower index.
  std::vector<Eigen::Index> predict(const Matrix& x) const {
    const Matrix s = scores(x);
    std::vector<Eigen::Index> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < s.rows(); ++i) s.row(i).maxCoeff(&out[static_cast<std::size_t>(i)]);
    return out;
  }

  std::vector<std::string> predict_labels(const Matrix& x) const {
    std::vector<std::string> out;
    for (auto c : predict(x)) out.push_back(classes[static_cast<std::size_t>(c)]);
    return out;
  }

  double accuracy(const Matrix& x, std::span<const std::string> labels) const {
    require(static_cast<Eigen::Index>(labels.size()) == x.rows(), "label count must match rows");
    if (labels.empty()) return 0.0;
    const auto pred = predict(x);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hits += classes[static_cast<std::size_t>(pred[i])] == labels[i];
    return static_cast<double>(hits) / static_cast<double>(labels.size());
  }
};

namespace detail {

struct SoftmaxObjective {
  const Matrix& x;
  const Matrix& onehot;
  double l2;

  // Returns the loss and fills probabilities for the gradient.
  double loss(const Matrix& w, const Vector& b, Matrix& prob) const {
    prob = (x * w.transpose()).rowwise() + b.transpose();
    double total = 0.0;
    for (Eigen::Index i = 0; i < prob.rows(); ++i) {
      const double m = prob.row(i).maxCoeff();
      const double true_logit = onehot.row(i).dot(prob.row(i));
      prob.row(i) = (prob.row(i).array() - m).exp();
      const double z = prob.row(i).sum();
      total += std::log(z) + m - true_logit;
      prob.row(i) /= z;
    }
    return total / static_cast<double>(x.rows()) + 0.5 * l2 * w.squaredNorm();
  }

  void gradient(const Matrix& w, const Matrix& prob, Matrix& gw, Vector& gb) const {
    const Matrix residual = (prob - onehot) / static_cast<double>(x.rows());
    gw = residual.transpose() * x + l2 * w;
    gb = residual.colwise().sum().transpose();
  }
};

}  // namespace detail

/// Multinomial logistic regression with an L2 penalty on the weights,
/// fitted by full-batch gradient descent (Nesterov momentum, backtracking
/// step size, restart on loss increase). Starts from zero, so the result
/// depends only on the data. Classes are the sorted distinct labels.
inline LinearClassifier train_linear_classifier(const Matrix& x, std::span<const std::string> labels,
                                                const TrainConfig& config = {}) {
  require(static_cast<Eigen::Index>(labels.size()) == x.rows(), "one label per row required");
  if (!x.allFinite()) fail(ErrorCode::invariant_violation, "non-finite classifier input");
  std::vector<std::string> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  require(classes.size() >= 2, "classifier needs at least two classes with samples");
  require(x.rows() >= static_cast<Eigen::Index>(classes.size()), "need at least as many rows as classes");

  const auto k = static_cast<Eigen::Index>(classes.size());
  const Eigen::Index d = x.cols();
  Matrix onehot = Matrix::Zero(x.rows(), k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto c = std::lower_bound(classes.begin(), classes.end(), labels[i]) - classes.begin();
    onehot(static_cast<Eigen::Index>(i), c) = 1.0;
  }

  detail::SoftmaxObjective f{x, onehot, config.l2};
  Matrix w = Matrix::Zero(k, d);
  Vector b = Vector::Zero(k);
  Matrix w_prev = w;
  Vector b_prev = b;
  Matrix prob, gw;
  Vector gb;
  double step = 1.0;
  double momentum = 1.0;

  LinearClassifier out;
  double loss = f.loss(w, b, prob);
  f.gradient(w, prob, gw, gb);
  double gnorm = std::sqrt(gw.squaredNorm() + gb.squaredNorm());
  int steps = 0;
  while (steps < config.max_steps && gnorm > config.gradient_tolerance) {
    ++steps;
    // Extrapolated point.
    const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    const double beta = (momentum - 1.0) / next_momentum;
    const Matrix wy = w + beta * (w - w_prev);
    const Vector by = b + beta * (b - b_prev);
    Matrix prob_y;
    const double loss_y = f.loss(wy, by, prob_y);
    Matrix gwy;
    Vector gby;
    f.gradient(wy, prob_y, gwy, gby);
    const double gy2 = gwy.squaredNorm() + gby.squaredNorm();

    Matrix w_new;
    Vector b_new;
    double loss_new = 0.0;
    while (true) {
      w_new = wy - step * gwy;
      b_new = by - step * gby;
      loss_new = f.loss(w_new, b_new, prob);
      if (loss_new <= loss_y - 0.5 * step * gy2 || step < 1e-12) break;
      step *= 0.5;
    }

    if (loss_new > loss) {
      // Momentum overshot: restart from a plain gradient step at w.
      momentum = 1.0;
      w_prev = w;
      b_prev = b;
      while (true) {
        w_new = w - step * gw;
        b_new = b - step * gb;
        loss_new = f.loss(w_new, b_new, prob);
        if (loss_new <= loss - 0.5 * step * gnorm * gnorm || step < 1e-12) break;
        step *= 0.5;
      }
    } else {
      momentum = next_momentum;
      w_prev = w;
      b_prev = b;
    }
    w = std::move(w_new);
    b = std::move(b_new);
    loss = loss_new;
    f.gradient(w, prob, gw, gb);
    gnorm = std::sqrt(gw.squaredNorm() + gb.squaredNorm());
    step = std::min(step * 1.5, 1e6);
  }

  out.weights = std::move(w);
  out.intercept = std::move(b);
  out.classes = std::move(classes);
  out.steps = steps;
  out.gradient_norm = gnorm;
  return out;
}

struct NullspaceResult {
  Matrix projection;
  Eigen::Index removed_rank = 0;
  bool zero_input = false;  // all-zero weights: identity returned
};

/// Orthogonal projection onto the nullspace of `w` (k x d). Rows are unit
/// normalized first; numerical rank uses a 1e-10 relative singular-value
/// threshold.
inline NullspaceResult nullspace_projection(const Matrix& w, double relative_threshold = 1e-10) {
  if (!w.allFinite()) fail(ErrorCode::invariant_violation, "non-finite weight matrix");
  const Eigen::Index d = w.cols();
  const Matrix unit = normalize_rows(w);
  NullspaceResult out;
  if (unit.rows() == 0) {
    out.projection = Matrix::Identity(d, d);
    out.zero_input = true;
    return out;
  }
  const Matrix basis = rowspace_basis(unit, relative_threshold);
  Matrix p = Matrix::Identity(d, d) - basis * basis.transpose();
  out.projection = 0.5 * (p + p.transpose());
  out.removed_rank = basis.cols();
  return out;
}

struct ProjectionPair {
  Matrix nullspace;  // P_N
  Matrix rowspace;   // P_R = I - P_N
  std::vector<LinearClassifier> classifiers;
  int iterations = 0;
  Layer source_layer = Layer::embedding;
  std::uint64_t seed = 0;

  Eigen::Index dim() const { return nullspace.rows(); }
};

struct InlpConfig {
  TrainConfig train;
  std::uint64_t seed = 0;  // recorded only; training is deterministic
  double rank_threshold = 1e-10;
};

struct InlpResult {
  ProjectionPair pair;
  int requested_iterations = 0;
  bool truncated = false;  // request exceeded the d/(k-1) budget
  bool exhausted = false;  // stopped early: zero classifier or empty nullspace
  std::vector<Eigen::Index> nullspace_rank;  // rank of P_N after each iteration
  std::vector<double> train_accuracy;        // classifier i on the data it saw
};

/// Runs INLP on rows `x` with language labels. The input is never modified;
/// each classifier is trained on the data projected by all previous ones.
inline InlpResult run_inlp(const Matrix& x, std::span<const std::string> labels, int iterations,
                           const InlpConfig& config = {}, Layer layer = Layer::embedding) {
  require(iterations >= 1, "INLP needs at least one iteration");
  require(static_cast<Eigen::Index>(labels.size()) == x.rows(), "one label per row required");
  std::vector<std::string> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  require(classes.size() >= 2, "INLP needs at least two languages");

  const Eigen::Index d = x.cols();
  const auto k = static_cast<Eigen::Index>(classes.size());
  const int budget = static_cast<int>(std::max<Eigen::Index>(1, d / (k - 1)));

  InlpResult result;
  result.requested_iterations = iterations;
  int planned = iterations;
  if (planned > budget) {
    planned = budget;
    result.truncated = true;
  }

  Matrix stacked(0, d);
  Matrix p_n = Matrix::Identity(d, d);
  Matrix projected = x;
  for (int it = 0; it < planned; ++it) {
    LinearClassifier clf = train_linear_classifier(projected, labels, config.train);
    const Matrix unit = normalize_rows(clf.weights);
    if (unit.rows() == 0) {
      // Nothing linearly predictable is left; the gradient at zero is
      // already below tolerance.
      result.exhausted = true;
      break;
    }
    result.train_accuracy.push_back(clf.accuracy(projected, labels));
    Matrix grown(stacked.rows() + unit.rows(), d);
    grown << stacked, unit;
    stacked = std::move(grown);
    auto ns = nullspace_projection(stacked, config.rank_threshold);
    p_n = std::move(ns.projection);
    result.nullspace_rank.push_back(d - ns.removed_rank);
    result.pair.classifiers.push_back(std::move(clf));
    projected = x * p_n;  // p_n is symmetric
    if (ns.removed_rank >= d) {
      result.exhausted = it + 1 < planned;
      break;
    }
  }

  result.pair.nullspace = p_n;
  result.pair.rowspace = Matrix::Identity(d, d) - p_n;
  result.pair.iterations = static_cast<int>(result.pair.classifiers.size());
  result.pair.source_layer = layer;
  result.pair.seed = config.seed;
  return result;
}

inline InlpResult run_inlp(const RepresentationSet& set, int iterations, const InlpConfig& config = {}) {
  validate(set);
  std::vector<std::string> labels;
  labels.reserve(set.labels.size());
  for (const auto& l : set.labels) labels.push_back(l.language);
  return run_inlp(to_double(set.vectors), labels, iterations, config, set.layer);
}

/// Largest |w . P_N . x| over stored classifiers (rows unit-normalized) and
/// the rows of `x`.
inline double max_guarantee_residual(const ProjectionPair& pair, const Matrix& x) {
  double worst = 0.0;
  const Matrix projected = x * pair.nullspace;
  for (const auto& clf : pair.classifiers) {
    const Matrix unit = normalize_rows(clf.weights);
    worst = std::max(worst, max_abs(projected * unit.transpose()));
  }
  return worst;
}

/// Applies a projection to every row of a representation set.
inline RepresentationSet project(const RepresentationSet& set, const Matrix& projection) {
  require(projection.rows() == set.dim() && projection.cols() == set.dim(), "projection dimension mismatch");
  RepresentationSet out = set;
  out.vectors = (to_double(set.vectors) * projection.transpose()).cast<float>();
  return out;
}

/// One random token per (language, sentence), at most `max_sentences` per
/// language, in original row order.
inline RepresentationSet sample_one_token_per_sentence(const RepresentationSet& set, std::size_t max_sentences,
                                                       std::uint64_t seed) {
  std::map<std::pair<std::string, std::int64_t>, std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < set.rows(); ++i) {
    const auto& l = set.labels[static_cast<std::size_t>(i)];
    groups[{l.language, l.sentence_id}].push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::map<std::string, std::vector<Eigen::Index>> per_language;
  for (const auto& [key, rows] : groups) {
    std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
    per_language[key.first].push_back(rows[pick(rng)]);
  }
  std::vector<Eigen::Index> chosen;
  for (auto& [lang, rows] : per_language) {
    if (max_sentences > 0 && rows.size() > max_sentences) {
      std::shuffle(rows.begin(), rows.end(), rng);
      rows.resize(max_sentences);
    }
    chosen.insert(chosen.end(), rows.begin(), rows.end());
  }
  std::sort(chosen.begin(), chosen.end());
  RepresentationSet out;
  out.layer = set.layer;
  out.languages = set.languages;
  out.vectors.resize(static_cast<Eigen::Index>(chosen.size()), set.dim());
  for (std::size_t r = 0; r < chosen.size(); ++r) {
    out.vectors.row(static_cast<Eigen::Index>(r)) = set.vectors.row(chosen[r]);
    out.labels.push_back(set.labels[static_cast<std::size_t>(chosen[r])]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// .proj bundle

inline void write_projection_pair(const ProjectionPair& pair, const fs::path& dir, const json& manifest = nullptr) {
  detail::ensure_dir(dir);
  json classifiers = json::array();
  for (const auto& c : pair.classifiers)
    classifiers.push_back({{"classes", c.classes}, {"rows", c.weights.rows()}, {"steps", c.steps}});
  json meta = {{"d", pair.dim()},
               {"iterations", pair.iterations},
               {"layer", std::string(to_string(pair.source_layer))},
               {"seed", pair.seed},
               {"classifier_count", pair.classifiers.size()},
               {"classifiers", classifiers}};
  if (!manifest.is_null()) meta["manifest"] = manifest;
  detail::write_text(dir / "meta.json", meta.dump(2) + "\n");
  auto dump = [&](const fs::path& p, const Matrix& m) {
    const FloatMatrix f = m.cast<float>();
    detail::write_f32(p, f.data(), static_cast<std::size_t>(f.size()));
  };
  dump(dir / "p_n.f32", pair.nullspace);
  dump(dir / "p_r.f32", pair.rowspace);
  for (std::size_t i = 0; i < pair.classifiers.size(); ++i) {
    dump(dir / ("w_" + std::to_string(i) + ".f32"), pair.classifiers[i].weights);
    dump(dir / ("b_" + std::to_string(i) + ".f32"), pair.classifiers[i].intercept.transpose());
  }
}

inline ProjectionPair read_projection_pair(const fs::path& dir) {
  const json meta = detail::read_meta(dir);
  const auto d = detail::positive_field(meta, "d");
  ProjectionPair pair;
  pair.iterations = detail::meta_field<int>(meta, "iterations");
  pair.source_layer = parse_layer(detail::meta_field<std::string>(meta, "layer"));
  pair.seed = detail::meta_field<std::uint64_t>(meta, "seed");
  pair.nullspace = to_double(detail::read_matrix(dir / "p_n.f32", d, d));
  pair.rowspace = to_double(detail::read_matrix(dir / "p_r.f32", d, d));
  const auto count = detail::meta_field<std::size_t>(meta, "classifier_count");
  const json classifiers = meta.value("classifiers", json::array());
  if (classifiers.size() != count) fail(ErrorCode::malformed_header, "classifier list length != classifier_count");
  for (std::size_t i = 0; i < count; ++i) {
    LinearClassifier c;
    c.classes = classifiers[i].at("classes").get<std::vector<std::string>>();
    const auto k = static_cast<std::int64_t>(c.classes.size());
    c.weights = to_double(detail::read_matrix(dir / ("w_" + std::to_string(i) + ".f32"), k, d));
    c.intercept = to_double(detail::read_matrix(dir / ("b_" + std::to_string(i) + ".f32"), 1, k)).transpose();
    c.steps = classifiers[i].value("steps", 0);
    pair.classifiers.push_back(std::move(c));
  }
  if (!pair.nullspace.allFinite() || !pair.rowspace.allFinite())
    fail(ErrorCode::invariant_violation, "non-finite projection entry");
  return pair;
}

}  // namespace langsub
