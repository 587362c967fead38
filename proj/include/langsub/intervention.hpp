#pragma once

// Nullspace interventions on masked-LM prediction: project the hidden state,
// the output embeddings, or both before computing logits, then measure how
// English the top-k predictions are and how semantically close they stay.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "langsub/error.hpp"
#include "langsub/inlp.hpp"
#include "langsub/linalg.hpp"
#include "langsub/repr_store.hpp"
#include "langsub/unicode.hpp"

namespace langsub {

enum class Variant { none, inlp_embed, inlp_repr, inlp_both };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::none: return "none";
    case Variant::inlp_embed: return "inlp_embed";
    case Variant::inlp_repr: return "inlp_repr";
    case Variant::inlp_both: return "inlp_both";
  }
  return "none";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "none") return Variant::none;
  if (s == "embed" || s == "inlp_embed") return Variant::inlp_embed;
  if (s == "repr" || s == "inlp_repr") return Variant::inlp_repr;
  if (s == "both" || s == "inlp_both") return Variant::inlp_both;
  fail(ErrorCode::precondition, "unknown variant '" + std::string(s) + "'");
}

inline bool projects_representation(Variant v) { return v == Variant::inlp_repr || v == Variant::inlp_both; }
inline bool projects_embeddings(Variant v) { return v == Variant::inlp_embed || v == Variant::inlp_both; }

/// Precomputed logit model for one variant. Because P_N is symmetric and
/// idempotent, projecting embeddings and states with the *same* P_N gives
/// identical logits for every variant; pass `embedding_pair` (fitted on
/// embedding-layer samples) to make the variants differ as intended.
class Intervener {
 public:
  Intervener(const VocabEmbedding& vocab, const ProjectionPair& representation_pair, Variant variant,
             const ProjectionPair* embedding_pair = nullptr)
      : vocab_(&vocab), repr_(&representation_pair), variant_(variant) {
    const Eigen::Index d = vocab.dim();
    if (representation_pair.dim() != d)
      fail(ErrorCode::dimension_mismatch, "projection dimension differs from the embeddings");
    const ProjectionPair& emb = embedding_pair ? *embedding_pair : representation_pair;
    if (embedding_pair) {
      if (embedding_pair->dim() != d) fail(ErrorCode::dimension_mismatch, "embedding projection dimension mismatch");
      if (embedding_pair->source_layer != Layer::embedding)
        fail(ErrorCode::precondition, "embedding projection must be fitted on the embedding layer");
    }
    if (projects_embeddings(variant))
      embeddings_ = (vocab.matrix().cast<double>() * emb.nullspace).cast<float>();
    if (projects_representation(variant)) state_projection_ = representation_pair.nullspace;
  }

  Variant variant() const { return variant_; }

  Vector logits(const Vector& h) const {
    if (h.size() != vocab_->dim()) fail(ErrorCode::dimension_mismatch, "hidden state dimension mismatch");
    const Eigen::VectorXf state =
        (state_projection_ ? Vector(*state_projection_ * h) : h).cast<float>();
    const FloatMatrix& e = embeddings_ ? *embeddings_ : vocab_->matrix();
    Vector out = (e * state).cast<double>();
    if (vocab_->bias())
      out += Eigen::Map<const Eigen::VectorXf>(vocab_->bias()->data(), vocab_->size()).cast<double>();
    return out;
  }

  /// Top-k vocabulary tokens for a hidden state taken from `h_layer`. The
  /// record's target holds `original` and its source is left empty, since
  /// MLM predictions legitimately include the original token.
  RankingRecord predict(const Vector& h, Layer h_layer, std::size_t k, const std::string& original = {},
                        const std::string& language = {}) const {
    if (h_layer != repr_->source_layer)
      fail(ErrorCode::precondition, "hidden state from layer '" + std::string(to_string(h_layer)) +
                                        "' but projection fitted on '" + std::string(to_string(repr_->source_layer)) +
                                        "'");
    RankingRecord r;
    r.language = language;
    r.target = original;
    r.candidates = rank_rows(logits(h), vocab_->tokens(), [](std::size_t) { return true; }, k);
    return r;
  }

 private:
  const VocabEmbedding* vocab_;
  const ProjectionPair* repr_;
  Variant variant_;
  std::optional<FloatMatrix> embeddings_;
  std::optional<Matrix> state_projection_;
};

inline RankingRecord predict_topk(const Vector& h, Layer h_layer, const VocabEmbedding& vocab,
                                  const ProjectionPair& pair, Variant variant, std::size_t k,
                                  const ProjectionPair* embedding_pair = nullptr) {
  return Intervener(vocab, pair, variant, embedding_pair).predict(h, h_layer, k);
}

inline constexpr const char* kEnglishTag = "en";
inline constexpr const char* kOtherTag = "other";

/// Binary English / non-English classifier over output-embedding rows.
/// Positives are whole-word vocabulary rows listed in `english_words`;
/// negatives are sampled from the remaining whole-word rows,
/// `negatives_per_positive` times as many.
inline LinearClassifier train_english_classifier(const VocabEmbedding& vocab, std::span<const std::string> english_words,
                                                 std::uint64_t seed, double negatives_per_positive = 1.0,
                                                 const TrainConfig& config = {}) {
  std::vector<bool> is_english(static_cast<std::size_t>(vocab.size()), false);
  std::vector<std::size_t> positives;
  for (const auto& w : english_words)
    if (auto i = vocab.find_word(w); i && !is_english[*i]) {
      is_english[*i] = true;
      positives.push_back(*i);
    }
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < is_english.size(); ++i)
    if (!is_english[i] && !vocab.is_subword(i)) pool.push_back(i);
  require(!positives.empty() && !pool.empty(), "English classifier needs English and non-English vocabulary rows");
  std::sort(positives.begin(), positives.end());
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  const auto want = static_cast<std::size_t>(std::max(1.0, std::round(negatives_per_positive * positives.size())));
  pool.resize(std::min(pool.size(), want));
  std::sort(pool.begin(), pool.end());

  Matrix x(static_cast<Eigen::Index>(positives.size() + pool.size()), vocab.dim());
  std::vector<std::string> labels;
  Eigen::Index r = 0;
  for (auto i : positives) {
    x.row(r++) = vocab.matrix().row(static_cast<Eigen::Index>(i)).cast<double>();
    labels.emplace_back(kEnglishTag);
  }
  for (auto i : pool) {
    x.row(r++) = vocab.matrix().row(static_cast<Eigen::Index>(i)).cast<double>();
    labels.emplace_back(kOtherTag);
  }
  return train_linear_classifier(x, labels, config);
}

/// For each k, the mean over records of the fraction of top-k candidates the
/// classifier labels English (class `english_tag`).
inline std::map<std::size_t, double> english_proportion(std::span<const RankingRecord> records,
                                                        const LinearClassifier& english_classifier,
                                                        const VocabEmbedding& vocab, std::span<const std::size_t> ks,
                                                        const std::string& english_tag = kEnglishTag) {
  auto tag = std::find(english_classifier.classes.begin(), english_classifier.classes.end(), english_tag);
  require(tag != english_classifier.classes.end(), "classifier has no '" + english_tag + "' class");
  const auto english_class = tag - english_classifier.classes.begin();
  require(!records.empty(), "english_proportion needs at least one record");

  std::unordered_map<std::size_t, bool> cache;
  auto english = [&](const std::string& token) {
    auto i = vocab.find(token);
    if (!i) fail(ErrorCode::not_found, "candidate '" + token + "' not in vocabulary");
    auto it = cache.find(*i);
    if (it != cache.end()) return it->second;
    const Matrix row = vocab.matrix().row(static_cast<Eigen::Index>(*i)).cast<double>();
    const bool yes = english_classifier.predict(row)[0] == english_class;
    cache.emplace(*i, yes);
    return yes;
  };

  std::map<std::size_t, double> out;
  for (auto k : ks) {
    require(k >= 1, "k must be at least 1");
    double total = 0.0;
    for (const auto& r : records) {
      if (k > r.candidates.size())
        fail(ErrorCode::precondition, "k=" + std::to_string(k) + " exceeds a record of length " +
                                          std::to_string(r.candidates.size()));
      std::size_t hits = 0;
      for (std::size_t i = 0; i < k; ++i) hits += english(r.candidates[i].token);
      total += static_cast<double>(hits) / static_cast<double>(k);
    }
    out[k] = total / static_cast<double>(records.size());
  }
  return out;
}

/// Word vectors in one space shared by several languages. Keys are
/// lowercased and NFC-normalized; the first occurrence of a key wins.
class CrossLingualTable {
 public:
  CrossLingualTable() = default;
  explicit CrossLingualTable(Eigen::Index dim) : dim_(dim) {}

  Eigen::Index dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  std::size_t duplicates() const { return duplicates_; }

  void add(const std::string& word, Vector v) {
    if (dim_ == 0) dim_ = v.size();
    if (v.size() != dim_) fail(ErrorCode::dimension_mismatch, "vector for '" + word + "' has the wrong dimension");
    if (!v.allFinite()) fail(ErrorCode::invariant_violation, "non-finite vector for '" + word + "'");
    if (!vectors_.emplace(unicode::lower(word), std::move(v)).second) ++duplicates_;
  }

  const Vector* find(const std::string& word) const {
    auto it = vectors_.find(unicode::lower(word));
    return it == vectors_.end() ? nullptr : &it->second;
  }

 private:
  Eigen::Index dim_ = 0;
  std::unordered_map<std::string, Vector> vectors_;
  std::size_t duplicates_ = 0;
};

/// Reads text word vectors (`word v1 ... vm` per line, optional
/// `count dim` header). Several files may be merged into one table.
inline void read_word_vectors(const fs::path& path, CrossLingualTable& table) {
  std::size_t line_no = 0;
  for (const auto& line : detail::read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> cols;
    for (auto piece : detail::split(line, ' '))
      if (!piece.empty()) cols.push_back(piece);
    if (cols.empty()) continue;
    const std::string where = path.string() + " line " + std::to_string(line_no);
    if (line_no == 1 && cols.size() == 2) {
      std::int64_t a = 0, b = 0;
      auto r1 = std::from_chars(cols[0].data(), cols[0].data() + cols[0].size(), a);
      auto r2 = std::from_chars(cols[1].data(), cols[1].data() + cols[1].size(), b);
      if (r1.ec == std::errc() && r2.ec == std::errc() && r1.ptr == cols[0].data() + cols[0].size() &&
          r2.ptr == cols[1].data() + cols[1].size()) {
        if (table.dim() != 0 && table.dim() != b)
          fail(ErrorCode::dimension_mismatch, where + ": header dimension differs from table");
        continue;
      }
    }
    if (cols.size() < 2) fail(ErrorCode::invariant_violation, where + ": word without vector");
    Vector v(static_cast<Eigen::Index>(cols.size() - 1));
    for (std::size_t i = 1; i < cols.size(); ++i) v(static_cast<Eigen::Index>(i - 1)) = detail::parse_double(cols[i], where);
    table.add(std::string(cols[0]), std::move(v));
  }
}

struct CoherenceResult {
  double mean = 0.0;
  std::size_t pairs = 0;    // (original, candidate) pairs scored
  std::size_t skipped = 0;  // pairs with a word missing from the table
};

/// Mean cosine between each record's original word and its top-k
/// candidates in the cross-lingual space. Pairs with a word missing from
/// the table are skipped and counted; no coverage at all is an error.
inline CoherenceResult semantic_coherence(std::span<const RankingRecord> records, std::span<const std::string> originals,
                                          const CrossLingualTable& table, std::size_t k) {
  require(records.size() == originals.size(), "one original word per record required");
  CoherenceResult out;
  double sum = 0.0;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (k > rec.candidates.size())
      fail(ErrorCode::precondition, "k=" + std::to_string(k) + " exceeds a record of length " +
                                        std::to_string(rec.candidates.size()));
    const Vector* o = table.find(originals[r]);
    for (std::size_t i = 0; i < k; ++i) {
      const Vector* c = table.find(rec.candidates[i].token);
      if (!o || !c || o->norm() == 0.0 || c->norm() == 0.0) {
        ++out.skipped;
        continue;
      }
      sum += o->dot(*c) / (o->norm() * c->norm());
      ++out.pairs;
    }
  }
  if (out.pairs == 0) fail(ErrorCode::precondition, "no (original, candidate) pair is covered by the table");
  out.mean = sum / static_cast<double>(out.pairs);
  return out;
}

}  // namespace langsub
