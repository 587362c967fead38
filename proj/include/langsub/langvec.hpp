#pragma once

// Language vectors (per-language means of token embeddings), analogy
// translation and the nearest-neighbour baseline.

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "langsub/error.hpp"
#include "langsub/linalg.hpp"
#include "langsub/repr_store.hpp"

namespace langsub {

struct LanguageVectorTable {
  std::map<std::string, Vector> vectors;
  std::map<std::string, std::size_t> sample_count;

  Eigen::Index dim() const { return vectors.empty() ? 0 : vectors.begin()->second.size(); }
  bool contains(const std::string& lang) const { return vectors.contains(lang); }

  const Vector& at(const std::string& lang) const {
    auto it = vectors.find(lang);
    if (it == vectors.end()) fail(ErrorCode::unknown_language, "no language vector for '" + lang + "'");
    return it->second;
  }
};

/// Mean row per declared language.
inline LanguageVectorTable build_language_vectors(const RepresentationSet& samples) {
  validate(samples);
  std::map<std::string, Vector> sums;
  std::map<std::string, std::size_t> counts;
  for (const auto& lang : samples.languages) {
    sums[lang] = Vector::Zero(samples.dim());
    counts[lang] = 0;
  }
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const auto& lang = samples.labels[static_cast<std::size_t>(i)].language;
    sums[lang] += samples.vectors.row(i).cast<double>().transpose();
    ++counts[lang];
  }
  LanguageVectorTable table;
  for (auto& [lang, sum] : sums) {
    if (counts[lang] == 0) fail(ErrorCode::precondition, "language '" + lang + "' has no rows");
    table.vectors[lang] = sum / static_cast<double>(counts[lang]);
    table.sample_count[lang] = counts[lang];
  }
  return table;
}

inline void write_language_vectors(const LanguageVectorTable& table, const fs::path& path,
                                   const json& manifest = nullptr) {
  json j = {{"d", table.dim()}, {"languages", json::object()}};
  for (const auto& [lang, v] : table.vectors)
    j["languages"][lang] = {{"count", table.sample_count.at(lang)},
                            {"vector", std::vector<double>(v.data(), v.data() + v.size())}};
  if (!manifest.is_null()) j["manifest"] = manifest;
  detail::write_text(path, j.dump(1) + "\n");
}

inline LanguageVectorTable read_language_vectors(const fs::path& path) {
  json j = json::parse(detail::read_text(path), nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("languages"))
    fail(ErrorCode::malformed_header, "'" + path.string() + "' is not a language-vector table");
  LanguageVectorTable table;
  const auto d = j.value("d", 0);
  for (const auto& [lang, entry] : j["languages"].items()) {
    auto values = entry.at("vector").get<std::vector<double>>();
    if (static_cast<int>(values.size()) != d)
      fail(ErrorCode::dimension_mismatch, "vector for '" + lang + "' has wrong length");
    table.vectors[lang] = Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
    table.sample_count[lang] = entry.at("count").get<std::size_t>();
    if (table.sample_count[lang] < 1) fail(ErrorCode::invariant_violation, "sample_count must be >= 1");
  }
  return table;
}

namespace detail {

inline Vector dot_scores(const VocabEmbedding& vocab, const Vector& q) {
  Vector s(vocab.size());
  for (Eigen::Index i = 0; i < vocab.size(); ++i) s(i) = vocab.matrix().row(i).cast<double>().dot(q);
  return s;
}

inline Vector cosine_scores(const VocabEmbedding& vocab, const Vector& q) {
  const double qn = q.norm();
  Vector s(vocab.size());
  for (Eigen::Index i = 0; i < vocab.size(); ++i) {
    const auto row = vocab.matrix().row(i).cast<double>();
    const double rn = row.norm();
    s(i) = rn == 0.0 ? 0.0 : row.dot(q) / (rn * qn);
  }
  return s;
}

// Candidate filter: whole-word rows other than the excluded token.
struct Eligible {
  const VocabEmbedding& vocab;
  std::optional<std::size_t> excluded;
  bool operator()(std::size_t i) const { return !vocab.is_subword(i) && (!excluded || *excluded != i); }
};

inline void check_dim(const VocabEmbedding& vocab, const Vector& v) {
  if (v.size() != vocab.dim())
    fail(ErrorCode::dimension_mismatch, "vector of length " + std::to_string(v.size()) +
                                            " against embeddings of dimension " + std::to_string(vocab.dim()));
}

/// 1-based rank of row `target` among eligible rows under (score desc, index asc).
inline std::size_t rank_of(const Vector& scores, const Eligible& keep, std::size_t target) {
  std::size_t rank = 1;
  const double t = scores(static_cast<Eigen::Index>(target));
  for (std::size_t i = 0; i < static_cast<std::size_t>(scores.size()); ++i) {
    if (i == target || !keep(i)) continue;
    const double s = scores(static_cast<Eigen::Index>(i));
    if (s > t || (s == t && i < target)) ++rank;
  }
  return rank;
}

}  // namespace detail

/// Analogy query vector: source - v(src) + v(tgt).
inline Vector analogy_query(const Vector& source_vec, const std::string& src, const std::string& tgt,
                            const LanguageVectorTable& table) {
  return source_vec - table.at(src) + table.at(tgt);
}

/// Ranks vocabulary rows by dot product with source - v(src) + v(tgt).
/// `top_k` = 0 keeps every eligible row.
inline RankingRecord analogy_translate(const Vector& source_vec, const std::string& src, const std::string& tgt,
                                       const LanguageVectorTable& table, const VocabEmbedding& vocab,
                                       const std::string& exclude, std::size_t top_k = 0) {
  detail::check_dim(vocab, source_vec);
  const Vector q = analogy_query(source_vec, src, tgt, table);
  const Vector scores = detail::dot_scores(vocab, q);
  RankingRecord r;
  r.source = exclude;
  r.language = tgt;
  r.method = Method::analogy;
  r.candidates = rank_rows(scores, vocab.tokens(), detail::Eligible{vocab, vocab.find(exclude)}, top_k);
  return r;
}

/// Ranks vocabulary rows by cosine similarity to the source vector.
inline RankingRecord baseline_translate(const Vector& source_vec, const VocabEmbedding& vocab,
                                        const std::string& exclude, std::size_t top_k = 0) {
  detail::check_dim(vocab, source_vec);
  if (source_vec.norm() == 0.0) fail(ErrorCode::precondition, "zero-norm source vector");
  const Vector scores = detail::cosine_scores(vocab, source_vec);
  RankingRecord r;
  r.source = exclude;
  r.method = Method::baseline;
  r.candidates = rank_rows(scores, vocab.tokens(), detail::Eligible{vocab, vocab.find(exclude)}, top_k);
  return r;
}

inline Vector vocab_row(const VocabEmbedding& vocab, const std::string& token) {
  auto i = vocab.find(token);
  if (!i) fail(ErrorCode::not_found, "token '" + token + "' not in vocabulary");
  return vocab.matrix().row(static_cast<Eigen::Index>(*i)).cast<double>().transpose();
}

/// Translates every lexicon entry whose source is in `source_language`,
/// producing one ranking per entry with the gold target filled in. Entries
/// must already be single-token filtered.
inline std::vector<RankingRecord> translate_lexicon(const Lexicon& lexicon, const std::string& source_language,
                                                    Method method, const LanguageVectorTable* table,
                                                    const VocabEmbedding& vocab, std::size_t top_k) {
  require(method != Method::template_query, "template rankings come from the exporter, not from translate");
  require(method != Method::analogy || table != nullptr, "analogy translation needs language vectors");
  std::vector<RankingRecord> out;
  out.reserve(lexicon.entries.size());
  for (const auto& e : lexicon.entries) {
    const Vector src = vocab_row(vocab, e.source);
    RankingRecord r = method == Method::analogy
                          ? analogy_translate(src, source_language, e.language, *table, vocab, e.source, top_k)
                          : baseline_translate(src, vocab, e.source, top_k);
    r.language = e.language;
    r.target = e.target;
    out.push_back(std::move(r));
  }
  return out;
}

/// Word pairs between two languages obtained by pivoting a lexicon whose
/// sources are in `pivot`: concepts sharing a pivot word are aligned.
struct PivotedPair {
  std::string source;
  std::string target;
  std::string concept_word;  // the pivot word
  std::string pos;
};

inline std::vector<PivotedPair> pivot_pairs(const Lexicon& lexicon, const std::string& pivot,
                                            const std::string& src, const std::string& tgt,
                                            const VocabEmbedding& vocab) {
  // concept -> language -> words
  std::map<std::string, std::map<std::string, std::vector<std::string>>> concepts;
  std::map<std::string, std::string> concept_pos;
  for (const auto& e : lexicon.entries) {
    auto& langs = concepts[e.source];
    if (langs[pivot].empty()) langs[pivot].push_back(e.source);
    auto& words = langs[e.language];
    if (std::find(words.begin(), words.end(), e.target) == words.end()) words.push_back(e.target);
    concept_pos.emplace(e.source, e.pos);
  }
  std::vector<PivotedPair> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& [concept_word, langs] : concepts) {
    auto s = langs.find(src);
    auto t = langs.find(tgt);
    if (s == langs.end() || t == langs.end()) continue;
    for (const auto& a : s->second)
      for (const auto& b : t->second) {
        if (!vocab.find_word(a) || !vocab.find_word(b)) continue;
        if (unicode::nfc(a) == unicode::nfc(b)) continue;  // target would be excluded as the source
        if (seen.emplace(a, b).second) out.push_back({a, b, concept_word, concept_pos[concept_word]});
      }
  }
  return out;
}

struct AllPairsResult {
  std::vector<std::string> languages;
  Matrix accuracy;  // NaN where no pairs or on the diagonal
  Eigen::MatrixXi counts;
  std::size_t k = 0;
};

/// acc@k of analogy translation for every ordered language pair.
inline AllPairsResult all_pairs_matrix(const Lexicon& lexicon, const std::string& pivot,
                                       const LanguageVectorTable& table, const VocabEmbedding& vocab, std::size_t k) {
  require(k >= 1, "k must be at least 1");
  AllPairsResult out;
  out.k = k;
  std::set<std::string> seen;
  auto add = [&](const std::string& lang) {
    if (table.contains(lang) && seen.insert(lang).second) out.languages.push_back(lang);
  };
  add(pivot);
  for (const auto& e : lexicon.entries) add(e.language);
  const auto n = static_cast<Eigen::Index>(out.languages.size());
  out.accuracy = Matrix::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  out.counts = Eigen::MatrixXi::Zero(n, n);
  for (Eigen::Index s = 0; s < n; ++s)
    for (Eigen::Index t = 0; t < n; ++t) {
      if (s == t) continue;
      const auto& src = out.languages[static_cast<std::size_t>(s)];
      const auto& tgt = out.languages[static_cast<std::size_t>(t)];
      const auto pairs = pivot_pairs(lexicon, pivot, src, tgt, vocab);
      if (pairs.empty()) continue;
      std::size_t hits = 0;
      for (const auto& p : pairs) {
        const std::size_t source_row = *vocab.find(p.source);
        const std::size_t target_row = *vocab.find(p.target);
        const Vector q = analogy_query(vocab_row(vocab, p.source), src, tgt, table);
        const Vector scores = detail::dot_scores(vocab, q);
        hits += detail::rank_of(scores, detail::Eligible{vocab, source_row}, target_row) <= k;
      }
      out.counts(s, t) = static_cast<int>(pairs.size());
      out.accuracy(s, t) = static_cast<double>(hits) / static_cast<double>(pairs.size());
    }
  return out;
}

/// Heatmap CSV: header row of target languages, one row per source
/// language, `NA` for missing cells and the diagonal.
inline std::string heatmap_csv(const AllPairsResult& r) {
  std::string out = "source";
  for (const auto& l : r.languages) out += "," + l;
  out += "\n";
  for (std::size_t s = 0; s < r.languages.size(); ++s) {
    out += r.languages[s];
    for (std::size_t t = 0; t < r.languages.size(); ++t) {
      const double v = r.accuracy(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
      out += ",";
      out += std::isnan(v) ? std::string("NA") : detail::format_double(v);
    }
    out += "\n";
  }
  return out;
}

}  // namespace langsub
