#pragma once

// Data model and on-disk formats shared by every stage of the toolkit:
//
//   <name>.reprset/  meta.json, matrix.f32, labels.tsv
//   <name>.vocab/    meta.json, matrix.f32, vocab.tsv, [bias.f32]
//   lexicon TSV      source \t target \t language \t pos
//   ranking dump     "# top_k=K" header, then
//                    source \t language \t target \t method \t tok:score;tok:score...
//
// Matrix payloads are little-endian float32, row-major, no padding.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "langsub/error.hpp"
#include "langsub/unicode.hpp"

namespace langsub {

namespace fs = std::filesystem;
using json = nlohmann::json;

using FloatMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Layer { embedding, last_hidden, mlm_head_output };

inline std::string_view to_string(Layer layer) {
  switch (layer) {
    case Layer::embedding: return "embedding";
    case Layer::last_hidden: return "last_hidden";
    case Layer::mlm_head_output: return "mlm_head_output";
  }
  return "embedding";
}

inline Layer parse_layer(std::string_view s) {
  if (s == "embedding") return Layer::embedding;
  if (s == "last_hidden") return Layer::last_hidden;
  if (s == "mlm_head_output") return Layer::mlm_head_output;
  fail(ErrorCode::malformed_header, "unknown layer '" + std::string(s) + "'");
}

struct TokenLabel {
  std::string language;
  std::string token;
  std::int64_t sentence_id = 0;
  std::int64_t position = 0;

  friend bool operator==(const TokenLabel&, const TokenLabel&) = default;
};

/// Labeled n x d matrix of token vectors. `languages` is the declared tag
/// inventory; every label must draw from it.
struct RepresentationSet {
  FloatMatrix vectors;
  std::vector<TokenLabel> labels;
  Layer layer = Layer::embedding;
  std::vector<std::string> languages;

  Eigen::Index rows() const { return vectors.rows(); }
  Eigen::Index dim() const { return vectors.cols(); }
};

/// Language tags in first-appearance order of the labels.
inline std::vector<std::string> observed_languages(const RepresentationSet& set) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& label : set.labels)
    if (seen.insert(label.language).second) out.push_back(label.language);
  return out;
}

inline bool all_finite(const FloatMatrix& m) { return m.allFinite(); }

inline void validate(const RepresentationSet& set) {
  if (set.rows() < 1 || set.dim() < 1)
    fail(ErrorCode::invariant_violation, "representation set must be at least 1x1");
  if (static_cast<Eigen::Index>(set.labels.size()) != set.rows())
    fail(ErrorCode::label_count_mismatch, std::to_string(set.labels.size()) + " labels for " +
                                              std::to_string(set.rows()) + " rows");
  std::unordered_set<std::string> inventory(set.languages.begin(), set.languages.end());
  for (const auto& label : set.labels)
    if (!inventory.contains(label.language))
      fail(ErrorCode::unknown_language, "'" + label.language + "' not in declared inventory");
  if (!all_finite(set.vectors)) fail(ErrorCode::invariant_violation, "non-finite matrix entry");
}

/// Output-embedding matrix with its vocabulary. Token lookup is exact byte
/// equality after NFC normalization.
class VocabEmbedding {
 public:
  VocabEmbedding() = default;

  VocabEmbedding(FloatMatrix matrix, std::vector<std::string> tokens, std::vector<bool> subword_flags,
                 std::optional<std::vector<float>> bias = std::nullopt)
      : matrix_(std::move(matrix)),
        tokens_(std::move(tokens)),
        subword_(std::move(subword_flags)),
        bias_(std::move(bias)) {
    const auto v = static_cast<std::size_t>(matrix_.rows());
    if (tokens_.size() != v)
      fail(ErrorCode::label_count_mismatch,
           std::to_string(tokens_.size()) + " vocab strings for " + std::to_string(v) + " rows");
    if (subword_.size() != v) fail(ErrorCode::label_count_mismatch, "subword flag count != V");
    if (bias_ && bias_->size() != v) fail(ErrorCode::dimension_mismatch, "bias length != V");
    if (!matrix_.allFinite()) fail(ErrorCode::invariant_violation, "non-finite embedding entry");
    if (bias_)
      for (float b : *bias_)
        if (!std::isfinite(b)) fail(ErrorCode::invariant_violation, "non-finite bias entry");
    std::unordered_set<std::string_view> raw;
    index_.reserve(v);
    for (std::size_t i = 0; i < v; ++i) {
      if (!raw.insert(tokens_[i]).second) fail(ErrorCode::duplicate, "vocab token '" + tokens_[i] + "'");
      index_.emplace(unicode::nfc(tokens_[i]), i);
    }
  }

  const FloatMatrix& matrix() const { return matrix_; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<bool>& subword_flags() const { return subword_; }
  const std::optional<std::vector<float>>& bias() const { return bias_; }
  Eigen::Index size() const { return matrix_.rows(); }
  Eigen::Index dim() const { return matrix_.cols(); }
  bool is_subword(std::size_t i) const { return subword_[i]; }

  std::optional<std::size_t> find(std::string_view token) const {
    auto it = index_.find(unicode::nfc(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Index of `token` when it is a whole-word vocabulary entry.
  std::optional<std::size_t> find_word(std::string_view token) const {
    auto i = find(token);
    if (i && subword_[*i]) return std::nullopt;
    return i;
  }

 private:
  FloatMatrix matrix_;
  std::vector<std::string> tokens_;
  std::vector<bool> subword_;
  std::optional<std::vector<float>> bias_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct LexiconEntry {
  std::string source;
  std::string target;
  std::string language;  // target language
  std::string pos;

  friend bool operator==(const LexiconEntry&, const LexiconEntry&) = default;
};

struct Lexicon {
  std::vector<LexiconEntry> entries;

  friend bool operator==(const Lexicon&, const Lexicon&) = default;
};

enum class Method { template_query, analogy, baseline };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::template_query: return "template";
    case Method::analogy: return "analogy";
    case Method::baseline: return "baseline";
  }
  return "template";
}

inline Method parse_method(std::string_view s) {
  if (s == "template") return Method::template_query;
  if (s == "analogy") return Method::analogy;
  if (s == "baseline") return Method::baseline;
  fail(ErrorCode::malformed_header, "unknown ranking method '" + std::string(s) + "'");
}

struct Candidate {
  std::string token;
  double score = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Ranked candidates for one (source, target-language) query.
struct RankingRecord {
  std::string source;
  std::string language;
  std::string target;
  std::vector<Candidate> candidates;
  Method method = Method::template_query;

  friend bool operator==(const RankingRecord&, const RankingRecord&) = default;
};

inline void validate(const RankingRecord& r) {
  std::unordered_set<std::string> seen;
  const std::string source = unicode::nfc(r.source);
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    const auto& c = r.candidates[i];
    if (!std::isfinite(c.score)) fail(ErrorCode::invariant_violation, "non-finite candidate score");
    if (i > 0 && c.score > r.candidates[i - 1].score)
      fail(ErrorCode::invariant_violation, "candidate scores increase at position " + std::to_string(i) +
                                               " for source '" + r.source + "'");
    std::string norm = unicode::nfc(c.token);
    if (norm == source) fail(ErrorCode::invariant_violation, "source token '" + r.source + "' among candidates");
    if (!seen.insert(std::move(norm)).second)
      fail(ErrorCode::duplicate, "candidate '" + c.token + "' repeated for source '" + r.source + "'");
  }
}

struct RankingDump {
  std::size_t top_k = 0;
  std::vector<RankingRecord> records;
  std::map<std::string, std::string> header;  // extra "# key=value" lines
};

namespace detail {

inline std::uint32_t bswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

inline void write_f32(const fs::path& path, const float* data, std::size_t count) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(float)));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t bits = bswap32(std::bit_cast<std::uint32_t>(data[i]));
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  if (!out) fail(ErrorCode::io, "write failed for '" + path.string() + "'");
}

inline std::vector<float> read_f32(const fs::path& path) {
  std::error_code ec;
  auto bytes = fs::file_size(path, ec);
  if (ec) fail(ErrorCode::io, "cannot stat '" + path.string() + "'");
  if (bytes % sizeof(float) != 0)
    fail(ErrorCode::dimension_mismatch, "'" + path.string() + "' is not a whole number of float32 values");
  std::vector<float> values(bytes / sizeof(float));
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
  if (!in) fail(ErrorCode::io, "short read on '" + path.string() + "'");
  if constexpr (std::endian::native == std::endian::big)
    for (auto& v : values) v = std::bit_cast<float>(bswap32(std::bit_cast<std::uint32_t>(v)));
  return values;
}

inline FloatMatrix read_matrix(const fs::path& path, std::int64_t rows, std::int64_t cols) {
  auto values = read_f32(path);
  const auto width = static_cast<std::size_t>(cols);
  if (values.size() % width != 0)
    fail(ErrorCode::dimension_mismatch, "payload of " + std::to_string(values.size() * 4) +
                                            " bytes is not divisible by row width d=" + std::to_string(cols));
  if (values.size() / width != static_cast<std::size_t>(rows))
    fail(ErrorCode::dimension_mismatch, "payload holds " + std::to_string(values.size() / width) +
                                            " rows, header declares " + std::to_string(rows));
  FloatMatrix m(rows, cols);
  std::memcpy(m.data(), values.data(), values.size() * sizeof(float));
  return m;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) fail(ErrorCode::io, "write failed for '" + path.string() + "'");
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_meta(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::io, "bundle '" + dir.string() + "' does not exist");
  const auto text = read_text(dir / "meta.json");
  json meta = json::parse(text, nullptr, false);
  if (meta.is_discarded() || !meta.is_object())
    fail(ErrorCode::malformed_header, "'" + (dir / "meta.json").string() + "' is not a JSON object");
  return meta;
}

template <typename T>
T meta_field(const json& meta, const char* key) {
  auto it = meta.find(key);
  if (it == meta.end()) fail(ErrorCode::malformed_header, std::string("meta.json lacks '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::malformed_header, std::string("meta.json field '") + key + "' has the wrong type");
  }
}

inline std::int64_t positive_field(const json& meta, const char* key) {
  auto v = meta_field<std::int64_t>(meta, key);
  if (v < 1) fail(ErrorCode::malformed_header, std::string("meta.json field '") + key + "' must be >= 1");
  return v;
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) fail(ErrorCode::io, "cannot create directory '" + dir.string() + "'");
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

/// Lines of a text file with a trailing '\r' stripped; '#' lines and blank
/// lines are returned too so callers can decide.
inline std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

inline std::int64_t parse_int(std::string_view s, const std::string& context) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    fail(ErrorCode::invariant_violation, "bad integer '" + std::string(s) + "' in " + context);
  return v;
}

inline double parse_double(std::string_view s, const std::string& context) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    fail(ErrorCode::invariant_violation, "bad number '" + std::string(s) + "' in " + context);
  return v;
}

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline void check_field(std::string_view s, const char* what) {
  if (s.find_first_of("\t\n\r") != std::string_view::npos)
    fail(ErrorCode::invariant_violation, std::string(what) + " contains a tab or newline");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// RepresentationSet bundles

inline void write_representation_set(const RepresentationSet& set, const fs::path& dir,
                                     const json& manifest = nullptr) {
  validate(set);
  for (const auto& l : set.labels) {
    detail::check_field(l.token, "token");
    detail::check_field(l.language, "language tag");
  }
  detail::ensure_dir(dir);
  json meta = {{"n", set.rows()},
               {"d", set.dim()},
               {"dtype", "f32"},
               {"layer", std::string(to_string(set.layer))},
               {"languages", set.languages}};
  if (!manifest.is_null()) meta["manifest"] = manifest;
  detail::write_text(dir / "meta.json", meta.dump(2) + "\n");
  detail::write_f32(dir / "matrix.f32", set.vectors.data(), static_cast<std::size_t>(set.vectors.size()));
  std::string labels;
  for (const auto& l : set.labels) {
    labels += l.token;
    labels += '\t';
    labels += l.language;
    labels += '\t';
    labels += std::to_string(l.sentence_id);
    labels += '\t';
    labels += std::to_string(l.position);
    labels += '\n';
  }
  detail::write_text(dir / "labels.tsv", labels);
}

inline RepresentationSet read_representation_set(const fs::path& dir) {
  const json meta = detail::read_meta(dir);
  const auto n = detail::positive_field(meta, "n");
  const auto d = detail::positive_field(meta, "d");
  if (detail::meta_field<std::string>(meta, "dtype") != "f32")
    fail(ErrorCode::malformed_header, "only dtype \"f32\" is supported");
  RepresentationSet set;
  set.layer = parse_layer(detail::meta_field<std::string>(meta, "layer"));
  set.languages = detail::meta_field<std::vector<std::string>>(meta, "languages");
  set.vectors = detail::read_matrix(dir / "matrix.f32", n, d);

  const auto lines = detail::read_lines(dir / "labels.tsv");
  std::size_t line_no = 0;
  for (const auto& line : lines) {
    ++line_no;
    if (line.empty()) continue;
    auto cols = detail::split(line, '\t');
    const std::string where = "labels.tsv line " + std::to_string(line_no);
    if (cols.size() != 4) fail(ErrorCode::invariant_violation, where + " does not have 4 columns");
    set.labels.push_back({std::string(cols[1]), std::string(cols[0]), detail::parse_int(cols[2], where),
                          detail::parse_int(cols[3], where)});
  }
  validate(set);
  return set;
}

// ---------------------------------------------------------------------------
// VocabEmbedding bundles

inline void write_vocab_embedding(const VocabEmbedding& vocab, const fs::path& dir,
                                  const json& manifest = nullptr) {
  detail::ensure_dir(dir);
  json meta = {{"V", vocab.size()}, {"d", vocab.dim()}, {"has_bias", vocab.bias().has_value()}};
  if (!manifest.is_null()) meta["manifest"] = manifest;
  detail::write_text(dir / "meta.json", meta.dump(2) + "\n");
  detail::write_f32(dir / "matrix.f32", vocab.matrix().data(), static_cast<std::size_t>(vocab.matrix().size()));
  if (vocab.bias()) {
    detail::write_f32(dir / "bias.f32", vocab.bias()->data(), vocab.bias()->size());
  } else {
    std::error_code ec;
    fs::remove(dir / "bias.f32", ec);
  }
  std::string text;
  for (std::size_t i = 0; i < vocab.tokens().size(); ++i) {
    detail::check_field(vocab.tokens()[i], "vocab token");
    text += vocab.tokens()[i];
    text += vocab.is_subword(i) ? "\t1\n" : "\t0\n";
  }
  detail::write_text(dir / "vocab.tsv", text);
}

inline VocabEmbedding read_vocab_embedding(const fs::path& dir) {
  const json meta = detail::read_meta(dir);
  const auto v = detail::positive_field(meta, "V");
  const auto d = detail::positive_field(meta, "d");
  const bool has_bias = detail::meta_field<bool>(meta, "has_bias");
  FloatMatrix matrix = detail::read_matrix(dir / "matrix.f32", v, d);
  std::optional<std::vector<float>> bias;
  if (has_bias) {
    bias = detail::read_f32(dir / "bias.f32");
    if (bias->size() != static_cast<std::size_t>(v))
      fail(ErrorCode::dimension_mismatch, "bias.f32 holds " + std::to_string(bias->size()) + " values, V=" +
                                              std::to_string(v));
  }
  std::vector<std::string> tokens;
  std::vector<bool> flags;
  std::size_t line_no = 0;
  for (const auto& line : detail::read_lines(dir / "vocab.tsv")) {
    ++line_no;
    if (line.empty()) continue;
    auto cols = detail::split(line, '\t');
    const std::string where = "vocab.tsv line " + std::to_string(line_no);
    if (cols.size() != 2 || (cols[1] != "0" && cols[1] != "1"))
      fail(ErrorCode::invariant_violation, where + " must be token<TAB>0|1");
    tokens.emplace_back(cols[0]);
    flags.push_back(cols[1] == "1");
  }
  return VocabEmbedding(std::move(matrix), std::move(tokens), std::move(flags), std::move(bias));
}

/// meta.json of any bundle, for tools that need its manifest or layer.
inline json read_bundle_meta(const fs::path& dir) { return detail::read_meta(dir); }

// ---------------------------------------------------------------------------
// Lexicon TSV

inline void validate(const Lexicon& lexicon) {
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (const auto& e : lexicon.entries)
    if (!seen.emplace(e.source, e.language, e.target).second)
      fail(ErrorCode::duplicate, "lexicon entry (" + e.source + ", " + e.language + ", " + e.target + ")");
}

inline Lexicon read_lexicon(const fs::path& path) {
  Lexicon lexicon;
  std::size_t line_no = 0;
  for (const auto& line : detail::read_lines(path)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto cols = detail::split(line, '\t');
    if (cols.size() != 4)
      fail(ErrorCode::invariant_violation, path.string() + " line " + std::to_string(line_no) +
                                               ": expected source, target, language, pos");
    lexicon.entries.push_back({std::string(cols[0]), std::string(cols[1]), std::string(cols[2]),
                               std::string(cols[3])});
  }
  validate(lexicon);
  return lexicon;
}

inline void write_lexicon(const Lexicon& lexicon, const fs::path& path, const std::string& comment = {}) {
  std::string text;
  if (!comment.empty()) text += "# " + comment + "\n";
  for (const auto& e : lexicon.entries) {
    for (auto* f : {&e.source, &e.target, &e.language, &e.pos}) detail::check_field(*f, "lexicon field");
    text += e.source + '\t' + e.target + '\t' + e.language + '\t' + e.pos + '\n';
  }
  detail::write_text(path, text);
}

/// Entries whose source and target are each one whole-word vocabulary token.
inline Lexicon filter_single_token(const Lexicon& lexicon, const VocabEmbedding& vocab) {
  Lexicon out;
  for (const auto& e : lexicon.entries)
    if (vocab.find_word(e.source) && vocab.find_word(e.target)) out.entries.push_back(e);
  return out;
}

// ---------------------------------------------------------------------------
// Ranking dump TSV

namespace detail {

inline std::string escape_token(std::string_view token) {
  std::string out;
  out.reserve(token.size());
  for (char c : token) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case ';': out += "\\;"; break;
      case ':': out += "\\:"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

/// Splits an escaped `tok:score;tok:score` list.
inline std::vector<Candidate> parse_candidates(std::string_view list, const std::string& where) {
  std::vector<Candidate> out;
  if (list.empty()) return out;
  std::string token;
  std::string score;
  bool in_score = false;
  auto flush = [&] {
    if (!in_score) fail(ErrorCode::invariant_violation, where + ": candidate '" + token + "' lacks a score");
    out.push_back({token, parse_double(score, where)});
    token.clear();
    score.clear();
    in_score = false;
  };
  for (std::size_t i = 0; i < list.size(); ++i) {
    char c = list[i];
    if (c == '\\') {
      if (i + 1 >= list.size()) fail(ErrorCode::invariant_violation, where + ": dangling escape");
      char e = list[++i];
      char lit = e == 't' ? '\t' : e == 'n' ? '\n' : e == 'r' ? '\r' : e;
      (in_score ? score : token) += lit;
    } else if (c == ':' && !in_score) {
      in_score = true;
    } else if (c == ';') {
      flush();
    } else {
      (in_score ? score : token) += c;
    }
  }
  flush();
  return out;
}

}  // namespace detail

inline void write_ranking_dump(const RankingDump& dump, const fs::path& path) {
  std::string text = "# top_k=" + std::to_string(dump.top_k) + "\n";
  for (const auto& [key, value] : dump.header) {
    detail::check_field(value, "header value");
    text += "# " + key + "=" + value + "\n";
  }
  for (const auto& r : dump.records) {
    validate(r);
    if (r.candidates.size() > dump.top_k)
      fail(ErrorCode::invariant_violation, "record for '" + r.source + "' exceeds declared top_k");
    for (auto* f : {&r.source, &r.language, &r.target}) detail::check_field(*f, "ranking field");
    text += r.source + '\t' + r.language + '\t' + r.target + '\t' + std::string(to_string(r.method)) + '\t';
    for (std::size_t i = 0; i < r.candidates.size(); ++i) {
      if (i) text += ';';
      text += detail::escape_token(r.candidates[i].token);
      text += ':';
      text += detail::format_double(r.candidates[i].score);
    }
    text += '\n';
  }
  detail::write_text(path, text);
}

inline RankingDump read_ranking_dump(const fs::path& path) {
  const auto lines = detail::read_lines(path);
  RankingDump dump;
  bool have_k = false;
  std::size_t line_no = 0;
  for (const auto& line : lines) {
    ++line_no;
    const std::string where = path.string() + " line " + std::to_string(line_no);
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::string_view body = std::string_view(line).substr(1);
      while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      auto key = body.substr(0, eq);
      auto value = body.substr(eq + 1);
      if (key == "top_k") {
        auto k = detail::parse_int(value, where);
        if (k < 1) fail(ErrorCode::malformed_header, where + ": top_k must be >= 1");
        dump.top_k = static_cast<std::size_t>(k);
        have_k = true;
      } else {
        dump.header.emplace(std::string(key), std::string(value));
      }
      continue;
    }
    if (!have_k) fail(ErrorCode::malformed_header, path.string() + ": missing '# top_k=K' header line");
    auto cols = detail::split(line, '\t');
    if (cols.size() != 5) fail(ErrorCode::invariant_violation, where + ": expected 5 tab-separated columns");
    RankingRecord r{std::string(cols[0]), std::string(cols[1]), std::string(cols[2]),
                    detail::parse_candidates(cols[4], where), parse_method(cols[3])};
    if (r.candidates.size() > dump.top_k)
      fail(ErrorCode::invariant_violation, where + ": more candidates than declared top_k");
    validate(r);
    dump.records.push_back(std::move(r));
  }
  if (!have_k) fail(ErrorCode::malformed_header, path.string() + ": missing '# top_k=K' header line");
  return dump;
}

/// Sorts scored vocabulary rows into a candidate list: descending score,
/// ties by ascending row index. `keep(i)` filters rows; at most `top_k`
/// candidates are returned (0 means all).
template <typename Scores, typename Keep>
std::vector<Candidate> rank_rows(const Scores& scores, const std::vector<std::string>& tokens, Keep keep,
                                 std::size_t top_k) {
  std::vector<std::size_t> order;
  order.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (keep(i)) order.push_back(i);
  auto better = [&](std::size_t a, std::size_t b) {
    const double sa = scores[static_cast<Eigen::Index>(a)];
    const double sb = scores[static_cast<Eigen::Index>(b)];
    return sa > sb || (sa == sb && a < b);
  };
  const std::size_t k = top_k == 0 ? order.size() : std::min(top_k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
  std::vector<Candidate> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i)
    out.push_back({tokens[order[i]], static_cast<double>(scores[static_cast<Eigen::Index>(order[i])])});
  return out;
}

}  // namespace langsub
