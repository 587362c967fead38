#include <random>

#include <gtest/gtest.h>

#include "langsub/langsub.hpp"
#include "oracles.hpp"
#include "planted.hpp"
#include "test_util.hpp"

using namespace langsub;

namespace {

Matrix gaussian(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// Two classes at (+1, 0, ...) and (-1, 0, ...) with small jitter elsewhere.
void axis_data(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d, Matrix& x, std::vector<std::string>& y) {
  std::normal_distribution<double> g(0.0, 0.3);
  x = Matrix::Zero(n, d);
  y.clear();
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool pos = i % 2 == 0;
    x(i, 0) = pos ? 1.0 : -1.0;
    for (Eigen::Index j = 1; j < d; ++j) x(i, j) = g(rng);
    y.push_back(pos ? "a" : "b");
  }
}

}  // namespace

TEST(TrainLinearClassifier, SeparableAxis) {
  std::mt19937_64 rng(3);
  Matrix x;
  std::vector<std::string> y;
  axis_data(rng, 200, 4, x, y);
  const auto clf = train_linear_classifier(x, y);
  EXPECT_DOUBLE_EQ(clf.accuracy(x, y), 1.0);
  EXPECT_EQ(clf.classes, (std::vector<std::string>{"a", "b"}));
}

TEST(TrainLinearClassifier, RandomLabelsStayNearChance) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const Matrix x = gaussian(rng, 400, 8);
    std::bernoulli_distribution coin(0.5);
    std::vector<std::string> y;
    for (int i = 0; i < 400; ++i) y.push_back(coin(rng) ? "a" : "b");
    EXPECT_LE(train_linear_classifier(x, y).accuracy(x, y), 0.65) << "seed " << seed;
  }
}

TEST(TrainLinearClassifier, ThreeSeparatedBlobs) {
  std::mt19937_64 rng(5);
  const Matrix noise = gaussian(rng, 300, 3);
  Matrix x(300, 3);
  std::vector<std::string> y;
  const Matrix means = 10.0 * Matrix::Identity(3, 3);
  for (Eigen::Index i = 0; i < 300; ++i) {
    x.row(i) = means.row(i % 3) + noise.row(i);
    y.push_back("c" + std::to_string(i % 3));
  }
  EXPECT_GE(train_linear_classifier(x, y).accuracy(x, y), 0.99);
}

TEST(TrainLinearClassifier, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  const Matrix x = gaussian(rng, 30, 4);
  std::vector<std::string> y;
  for (int i = 0; i < 30; ++i) y.push_back(std::string(1, char('a' + i % 3)));
  TrainConfig cfg;
  cfg.max_steps = 3;  // stop early so the gradient is far from zero
  const auto clf = train_linear_classifier(x, y, cfg);

  // Independent softmax cross-entropy + L2 on the weights only.
  auto loss = [&](const Matrix& w, const Vector& b) {
    double total = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      Vector z = w * x.row(i).transpose() + b;
      const double m = z.maxCoeff();
      double s = 0;
      for (Eigen::Index c = 0; c < z.size(); ++c) s += std::exp(z(c) - m);
      const int t = y[static_cast<std::size_t>(i)][0] - 'a';
      total += std::log(s) + m - z(t);
    }
    return total / double(x.rows()) + 0.5 * cfg.l2 * w.squaredNorm();
  };
  const double h = 1e-6;
  double fd_norm2 = 0;
  Matrix w = clf.weights;
  Vector b = clf.intercept;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    Matrix wp = w, wm = w;
    wp.data()[i] += h;
    wm.data()[i] -= h;
    const double g = (loss(wp, b) - loss(wm, b)) / (2 * h);
    fd_norm2 += g * g;
  }
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    Vector bp = b, bm = b;
    bp(i) += h;
    bm(i) -= h;
    const double g = (loss(w, bp) - loss(w, bm)) / (2 * h);
    fd_norm2 += g * g;
  }
  EXPECT_NEAR(std::sqrt(fd_norm2), clf.gradient_norm, 1e-5);
}

TEST(TrainLinearClassifier, Preconditions) {
  Matrix x = Matrix::Ones(3, 2);
  const std::vector<std::string> one = {"a", "a", "a"};
  EXPECT_THROW(train_linear_classifier(x, one), Error);
  x(0, 0) = std::numeric_limits<double>::infinity();
  const std::vector<std::string> two = {"a", "b", "a"};
  EXPECT_THROW(train_linear_classifier(x, two), Error);
}

TEST(NullspaceProjection, AxisAligned) {
  Matrix w(1, 3);
  w << 1, 0, 0;
  const auto ns = nullspace_projection(w);
  EXPECT_LE(max_abs(ns.projection - Eigen::Vector3d(0, 1, 1).asDiagonal().toDenseMatrix()), 1e-15);
  EXPECT_EQ(ns.removed_rank, 1);
}

TEST(NullspaceProjection, FullRankGivesZero) {
  const auto ns = nullspace_projection(Matrix::Identity(5, 5));
  EXPECT_LE(max_abs(ns.projection), 1e-15);
}

TEST(NullspaceProjection, ZeroInputIsIdentityWithStatus) {
  const auto ns = nullspace_projection(Matrix::Zero(2, 4));
  EXPECT_TRUE(ns.zero_input);
  EXPECT_EQ(ns.projection, Matrix::Identity(4, 4));
}

TEST(NullspaceProjection, RandomMatchesGramSchmidtOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    Matrix w = gaussian(rng, 4, 16);
    if (seed % 4 == 0) w.row(3) = w.row(0) * 2.0 - w.row(1);  // rank deficient
    const auto ns = nullspace_projection(w);
    const Matrix& p = ns.projection;
    EXPECT_LE(max_abs(normalize_rows(w) * p), 1e-8);
    EXPECT_LE(max_abs(p * p - p), 1e-12);
    EXPECT_LE(max_abs(p - p.transpose()), 1e-15);
    EXPECT_LE(max_abs(p - oracle::complement_projector(w)), 1e-10);
    EXPECT_EQ(numerical_rank(p), 16 - numerical_rank(w));
  }
}

TEST(RunInlp, ZeroIterationsRejected) {
  Matrix x = Matrix::Identity(4, 4);
  const std::vector<std::string> y = {"a", "b", "a", "b"};
  EXPECT_THROW(run_inlp(x, y, 0), Error);
  const std::vector<std::string> one = {"a", "a", "a", "a"};
  EXPECT_THROW(run_inlp(x, one, 1), Error);
}

TEST(RunInlp, OneIterationRemovesSeparatingAxis) {
  std::mt19937_64 rng(7);
  Matrix x;
  std::vector<std::string> y;
  axis_data(rng, 400, 4, x, y);
  const auto res = run_inlp(x, y, 1);
  const Matrix& p = res.pair.nullspace;
  EXPECT_EQ(numerical_rank(p), 3);
  // The learned direction is mostly the first axis.
  EXPECT_LE(p(0, 0), 0.05);
  const Matrix px = x * p;
  EXPECT_LE(planted::fresh_accuracy(px, y, 1), planted::chance(y) + 0.05);
}

TEST(RunInlp, AlgebraAndGuaranteeOnPlantedData) {
  synth::PlantedConfig c;
  c.d = 32;
  c.lang_dim = 3;
  c.vocab_size = 60;
  c.seed = 4;
  const auto world = synth::generate_world(c);
  const auto data = synth::emit_dataset(world, 150, 0.1);
  const Matrix x = to_double(data.samples.vectors);
  const Matrix x_before = x;
  const auto res = run_inlp(data.samples, 20);
  const auto& pair = res.pair;
  const Matrix eye = Matrix::Identity(32, 32);
  EXPECT_EQ(pair.nullspace + pair.rowspace, eye);
  EXPECT_LE(max_abs(pair.nullspace * pair.nullspace - pair.nullspace), 1e-6);
  EXPECT_LE(max_abs(pair.nullspace - pair.nullspace.transpose()), 1e-6);
  EXPECT_LE(max_abs(pair.rowspace * pair.nullspace), 1e-6);
  EXPECT_EQ(numerical_rank(pair.nullspace) + numerical_rank(pair.rowspace), 32);
  EXPECT_LE(max_guarantee_residual(pair, x), 1e-4);
  EXPECT_EQ(to_double(data.samples.vectors), x_before);

  // Rank decreases by 1..k-1 per iteration.
  Eigen::Index prev = 32;
  for (auto r : res.nullspace_rank) {
    EXPECT_GE(prev - r, 1);
    EXPECT_LE(prev - r, 4);
    prev = r;
  }
}

TEST(RunInlp, Deterministic) {
  synth::PlantedConfig c;
  c.d = 16;
  c.lang_dim = 2;
  c.languages = {"a", "b", "c"};
  c.vocab_size = 30;
  const auto data = synth::emit_dataset(synth::generate_world(c), 90, 0.2);
  const auto r1 = run_inlp(data.samples, 5);
  const auto r2 = run_inlp(data.samples, 5);
  EXPECT_EQ(r1.pair.nullspace, r2.pair.nullspace);
  ASSERT_EQ(r1.pair.classifiers.size(), r2.pair.classifiers.size());
  for (std::size_t i = 0; i < r1.pair.classifiers.size(); ++i)
    EXPECT_EQ(r1.pair.classifiers[i].weights, r2.pair.classifiers[i].weights);
}

TEST(RunInlp, BudgetTruncates) {
  std::mt19937_64 rng(2);
  const Matrix x = gaussian(rng, 60, 6);
  std::vector<std::string> y;
  for (int i = 0; i < 60; ++i) y.push_back(std::string(1, char('a' + i % 4)));
  const auto res = run_inlp(x, y, 20);
  EXPECT_TRUE(res.truncated);
  EXPECT_LE(res.pair.iterations, 2);  // floor(6 / 3)
}

TEST(RunInlp, ExhaustsWhenNothingIsLeft) {
  synth::PlantedConfig c;
  c.d = 24;
  c.lang_dim = 3;
  c.vocab_size = 40;
  const auto data = synth::emit_dataset(synth::generate_world(c), 80, 0.0);
  const auto res = run_inlp(data.samples, 6);  // the full budget, floor(24 / 4)
  EXPECT_TRUE(res.exhausted);
  EXPECT_FALSE(res.truncated);
  EXPECT_EQ(res.pair.iterations, 1);
  // Exact data: the centered language vectors span 4 directions.
  EXPECT_EQ(numerical_rank(res.pair.rowspace), 4);
}

TEST(RunInlp, FreshAccuracyDoesNotGrowWithIterations) {
  std::vector<double> mean(4, 0.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    synth::PlantedConfig c;
    c.d = 32;
    c.lang_dim = 4;
    c.vocab_size = 80;
    c.seed = seed;
    const auto data = synth::emit_dataset(synth::generate_world(c), 200, 0.1);
    const Matrix x = to_double(data.samples.vectors);
    const auto y = planted::languages_of(data.samples);
    for (int m = 1; m <= 4; ++m) {
      const auto res = run_inlp(data.samples, m);
      mean[static_cast<std::size_t>(m - 1)] += planted::fresh_accuracy(x * res.pair.nullspace, y, seed) / 5.0;
    }
  }
  for (std::size_t i = 1; i < mean.size(); ++i) EXPECT_LE(mean[i], mean[i - 1] + 0.03);
}

TEST(ProjectionBundle, RoundTrip) {
  testutil::TempDir tmp;
  synth::PlantedConfig c;
  c.d = 12;
  c.lang_dim = 2;
  c.languages = {"x", "y", "z"};
  c.vocab_size = 20;
  const auto data = synth::emit_dataset(synth::generate_world(c), 40, 0.1, Layer::mlm_head_output);
  auto pair = run_inlp(data.samples, 3).pair;
  write_projection_pair(pair, tmp / "p.proj");
  const auto back = read_projection_pair(tmp / "p.proj");
  EXPECT_EQ(back.nullspace, pair.nullspace.cast<float>().cast<double>());
  EXPECT_EQ(back.source_layer, Layer::mlm_head_output);
  ASSERT_EQ(back.classifiers.size(), pair.classifiers.size());
  EXPECT_EQ(back.classifiers[0].classes, pair.classifiers[0].classes);
  EXPECT_EQ(back.classifiers[0].weights, pair.classifiers[0].weights.cast<float>().cast<double>());
}

TEST(SampleOneTokenPerSentence, OnePerSentenceAndCapped) {
  RepresentationSet s;
  s.languages = {"en", "fr"};
  s.vectors = FloatMatrix::Zero(12, 2);
  for (int i = 0; i < 12; ++i) s.labels.push_back({i < 6 ? "en" : "fr", "t" + std::to_string(i), (i % 6) / 2, i % 2});
  const auto out = sample_one_token_per_sentence(s, 0, 1);
  EXPECT_EQ(out.rows(), 6);
  std::set<std::pair<std::string, std::int64_t>> seen;
  for (const auto& l : out.labels) EXPECT_TRUE(seen.emplace(l.language, l.sentence_id).second);
  EXPECT_EQ(sample_one_token_per_sentence(s, 2, 1).rows(), 4);
}
