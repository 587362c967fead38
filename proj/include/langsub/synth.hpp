#pragma once

// Planted-subspace generator. Every vector is lex(w) + lang(L) (+ noise)
// with lang(L) inside a random lang_dim-dimensional subspace and lex(w) in
// its orthogonal complement, so erasure and translation have known answers.

#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "langsub/error.hpp"
#include "langsub/linalg.hpp"
#include "langsub/repr_store.hpp"

namespace langsub::synth {

struct PlantedConfig {
  int d = 64;
  int lang_dim = 5;
  std::vector<std::string> languages = {"en", "fr", "de", "es", "ru"};
  int vocab_size = 100;  // words per language
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  double lang_norm = 1.0;
  double lex_norm = 1.0;
  // Optional semantic structure: words are grouped round-robin into
  // `topics` clusters whose members share a common direction.
  int topics = 0;
  double topic_spread = 0.5;
};

inline void validate(const PlantedConfig& c) {
  require(c.d >= 2, "d must be at least 2");
  require(c.lang_dim >= 1 && c.lang_dim < c.d, "need 1 <= lang_dim < d");
  require(c.vocab_size >= 2, "vocab_size must be at least 2");
  require(c.languages.size() >= 2, "need at least two languages");
  require(c.noise_sigma >= 0.0, "noise_sigma must be non-negative");
  require(c.lang_norm > 0.0 && c.lex_norm > 0.0, "component norms must be positive");
  require(c.topics >= 0, "topics must be non-negative");
}

struct PlantedWorld {
  PlantedConfig config;
  Matrix lang_basis;        // d x lang_dim, orthonormal
  Matrix complement_basis;  // d x (d - lang_dim), orthonormal
  std::map<std::string, Vector> lang_vectors;
  std::vector<Vector> lex_vectors;  // indexed by word id
  std::vector<std::string> pos;     // per word id
  std::vector<int> topic;           // per word id, -1 without topics
  Lexicon parallel_lexicon;         // first language is the pivot

  const std::vector<std::string>& languages() const { return config.languages; }
  const std::string& pivot() const { return config.languages.front(); }
  int vocab_size() const { return static_cast<int>(lex_vectors.size()); }
};

inline std::string word_token(int word, const std::string& language) {
  return "w" + std::to_string(word) + "_" + language;
}

namespace detail {

inline Matrix gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

// Alternately centers the columns' mean and rescales each column to `norm`
// until both hold to ~1e-13.
inline void center_and_equalize(Matrix& cols, double norm) {
  for (int round = 0; round < 200; ++round) {
    const Vector mean = cols.rowwise().mean();
    cols.colwise() -= mean;
    for (Eigen::Index j = 0; j < cols.cols(); ++j) cols.col(j) *= norm / cols.col(j).norm();
    if (cols.rowwise().mean().norm() < 1e-13 * norm) return;
  }
}

}  // namespace detail

inline PlantedWorld generate_world(const PlantedConfig& config) {
  validate(config);
  std::mt19937_64 rng(config.seed);
  const Eigen::Index d = config.d;
  const Eigen::Index ld = config.lang_dim;

  Eigen::HouseholderQR<Matrix> qr(detail::gaussian(rng, d, d));
  const Matrix q = qr.householderQ() * Matrix::Identity(d, d);

  PlantedWorld world;
  world.config = config;
  world.lang_basis = q.leftCols(ld);
  world.complement_basis = q.rightCols(d - ld);

  const auto num_lang = static_cast<Eigen::Index>(config.languages.size());
  Matrix lang_coords;
  bool distinct = false;
  for (int attempt = 0; attempt < 64 && !distinct; ++attempt) {
    lang_coords = detail::gaussian(rng, ld, num_lang);
    lang_coords.colwise() -= lang_coords.rowwise().mean();
    distinct = true;
    for (Eigen::Index j = 0; j < num_lang; ++j) {
      const double n = lang_coords.col(j).norm();
      if (n < 1e-12) distinct = false;
      else lang_coords.col(j) *= config.lang_norm / n;
    }
    for (Eigen::Index a = 0; a < num_lang && distinct; ++a)
      for (Eigen::Index b = a + 1; b < num_lang; ++b)
        if ((lang_coords.col(a) - lang_coords.col(b)).norm() < 1e-6 * config.lang_norm) distinct = false;
  }
  if (!distinct) fail(ErrorCode::precondition, "cannot place pairwise distinct language vectors in lang_dim");
  for (Eigen::Index j = 0; j < num_lang; ++j)
    world.lang_vectors[config.languages[static_cast<std::size_t>(j)]] = world.lang_basis * lang_coords.col(j);

  const Eigen::Index cd = d - ld;
  const Eigen::Index v = config.vocab_size;
  Matrix lex_coords = detail::gaussian(rng, cd, v);
  world.topic.assign(static_cast<std::size_t>(v), -1);
  if (config.topics > 0) {
    Matrix centers = detail::gaussian(rng, cd, config.topics);
    for (Eigen::Index t = 0; t < centers.cols(); ++t) centers.col(t).normalize();
    for (Eigen::Index w = 0; w < v; ++w) {
      const auto t = static_cast<int>(w % config.topics);
      world.topic[static_cast<std::size_t>(w)] = t;
      lex_coords.col(w) = centers.col(t) + config.topic_spread * lex_coords.col(w) / std::sqrt(static_cast<double>(cd));
    }
  }
  detail::center_and_equalize(lex_coords, config.lex_norm);
  for (Eigen::Index w = 0; w < v; ++w) world.lex_vectors.push_back(world.complement_basis * lex_coords.col(w));

  static const char* const kPos[] = {"N", "V", "A"};
  for (Eigen::Index w = 0; w < v; ++w) world.pos.emplace_back(kPos[w % 3]);

  for (int w = 0; w < config.vocab_size; ++w)
    for (std::size_t l = 1; l < config.languages.size(); ++l)
      world.parallel_lexicon.entries.push_back({word_token(w, world.pivot()), word_token(w, config.languages[l]),
                                                config.languages[l], world.pos[static_cast<std::size_t>(w)]});
  return world;
}

struct PlantedDataset {
  RepresentationSet samples;
  VocabEmbedding vocab;
  Lexicon lexicon;
};

/// Samples `n_per_language` rows per language plus the full vocabulary
/// (one row per word and language). Every language sees the same word
/// sequence, a concatenation of shuffled passes over the vocabulary, so
/// per-language means differ only by their language components. Noise is
/// isotropic Gaussian scaled so its expected norm is `noise_sigma`.
inline PlantedDataset emit_dataset(const PlantedWorld& world, int n_per_language, double noise_sigma,
                                   Layer layer = Layer::embedding, std::uint64_t stream = 1) {
  require(n_per_language >= 1, "n_per_language must be at least 1");
  require(noise_sigma >= 0.0, "noise_sigma must be non-negative");
  std::mt19937_64 rng(world.config.seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index d = world.config.d;
  const double scale = noise_sigma / std::sqrt(static_cast<double>(d));
  auto noisy = [&](const Vector& clean) {
    if (noise_sigma == 0.0) return clean;
    Vector out = clean;
    for (Eigen::Index i = 0; i < d; ++i) out(i) += scale * normal(rng);
    return out;
  };

  std::vector<int> sequence;
  std::vector<int> pass(static_cast<std::size_t>(world.vocab_size()));
  std::iota(pass.begin(), pass.end(), 0);
  while (static_cast<int>(sequence.size()) < n_per_language) {
    std::shuffle(pass.begin(), pass.end(), rng);
    sequence.insert(sequence.end(), pass.begin(), pass.end());
  }
  sequence.resize(static_cast<std::size_t>(n_per_language));

  PlantedDataset out;
  const auto& langs = world.languages();
  out.samples.layer = layer;
  out.samples.languages = langs;
  out.samples.vectors.resize(static_cast<Eigen::Index>(langs.size()) * n_per_language, d);
  Eigen::Index row = 0;
  for (const auto& lang : langs) {
    const Vector& lv = world.lang_vectors.at(lang);
    for (int i = 0; i < n_per_language; ++i, ++row) {
      const int w = sequence[static_cast<std::size_t>(i)];
      out.samples.vectors.row(row) = noisy(world.lex_vectors[static_cast<std::size_t>(w)] + lv).cast<float>().transpose();
      out.samples.labels.push_back({lang, word_token(w, lang), i, 0});
    }
  }

  FloatMatrix vocab_matrix(static_cast<Eigen::Index>(langs.size()) * world.vocab_size(), d);
  std::vector<std::string> tokens;
  row = 0;
  for (const auto& lang : langs) {
    const Vector& lv = world.lang_vectors.at(lang);
    for (int w = 0; w < world.vocab_size(); ++w, ++row) {
      vocab_matrix.row(row) = noisy(world.lex_vectors[static_cast<std::size_t>(w)] + lv).cast<float>().transpose();
      tokens.push_back(word_token(w, lang));
    }
  }
  std::vector<bool> flags(tokens.size(), false);
  out.vocab = VocabEmbedding(std::move(vocab_matrix), std::move(tokens), std::move(flags));
  out.lexicon = world.parallel_lexicon;
  return out;
}

}  // namespace langsub::synth
