#include <bit>
#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "langsub/repr_store.hpp"
#include "test_util.hpp"

using namespace langsub;
using testutil::TempDir;

namespace {

RepresentationSet small_set(Eigen::Index n, Eigen::Index d, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  RepresentationSet s;
  s.languages = {"en", "fr"};
  s.layer = Layer::last_hidden;
  s.vectors.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) s.vectors(i, j) = g(rng);
    s.labels.push_back({i % 2 ? "fr" : "en", "tok" + std::to_string(i), i / 2, i % 3});
  }
  return s;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::io;
}

VocabEmbedding toy_vocab(const std::vector<std::string>& tokens, std::vector<bool> flags = {}) {
  if (flags.empty()) flags.assign(tokens.size(), false);
  FloatMatrix m = FloatMatrix::Zero(static_cast<Eigen::Index>(tokens.size()), 2);
  for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, 0) = static_cast<float>(i);
  return VocabEmbedding(m, tokens, flags);
}

}  // namespace

TEST(RepresentationSet, RoundTripKnownValues) {
  TempDir tmp;
  RepresentationSet s;
  s.languages = {"en"};
  s.vectors.resize(3, 4);
  for (int i = 0; i < 12; ++i) s.vectors.data()[i] = 0.25f * static_cast<float>(i) - 1.0f;
  for (int i = 0; i < 3; ++i) s.labels.push_back({"en", "w" + std::to_string(i), i, 0});
  write_representation_set(s, tmp / "a.reprset");
  const auto back = read_representation_set(tmp / "a.reprset");
  EXPECT_EQ(back.vectors, s.vectors);
  EXPECT_EQ(back.labels, s.labels);
  EXPECT_EQ(back.layer, s.layer);
}

TEST(RepresentationSet, RoundTripIsBitExactForRandomSets) {
  TempDir tmp;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = small_set(1 + static_cast<Eigen::Index>(seed % 7), 1 + static_cast<Eigen::Index>(seed % 5), seed);
    s.vectors(0, 0) = -0.0f;
    s.vectors(s.rows() - 1, s.dim() - 1) = std::numeric_limits<float>::denorm_min();
    write_representation_set(s, tmp / "r.reprset");
    const auto back = read_representation_set(tmp / "r.reprset");
    ASSERT_EQ(back.vectors.size(), s.vectors.size());
    EXPECT_EQ(std::memcmp(back.vectors.data(), s.vectors.data(), sizeof(float) * s.vectors.size()), 0);
    EXPECT_EQ(back.labels, s.labels);
    EXPECT_EQ(back.languages, s.languages);
  }
}

TEST(RepresentationSet, SingleZeroIsFourZeroBytes) {
  TempDir tmp;
  RepresentationSet s;
  s.languages = {"en"};
  s.vectors = FloatMatrix::Zero(1, 1);
  s.labels = {{"en", "x", 0, 0}};
  write_representation_set(s, tmp / "z.reprset");
  EXPECT_EQ(testutil::slurp(tmp / "z.reprset" / "matrix.f32"), std::string(4, '\0'));
}

TEST(RepresentationSet, IdentityPayloadIsLittleEndianFloat32) {
  TempDir tmp;
  RepresentationSet s;
  s.languages = {"en"};
  s.vectors = FloatMatrix::Identity(2, 2);
  s.labels = {{"en", "a", 0, 0}, {"en", "b", 1, 0}};
  write_representation_set(s, tmp / "i.reprset");
  const std::string one("\x00\x00\x80\x3f", 4), zero(4, '\0');
  EXPECT_EQ(testutil::slurp(tmp / "i.reprset" / "matrix.f32"), one + zero + zero + one);
}

TEST(RepresentationSet, NaNIsRejectedOnWrite) {
  TempDir tmp;
  auto s = small_set(2, 2);
  s.vectors(1, 1) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_EQ(code_of([&] { write_representation_set(s, tmp / "n.reprset"); }), ErrorCode::invariant_violation);
}

TEST(RepresentationSet, DistinctDiagnostics) {
  TempDir tmp;
  const auto s = small_set(4, 3);
  const auto dir = tmp / "s.reprset";
  write_representation_set(s, dir);
  const std::string labels = testutil::slurp(dir / "labels.tsv");
  const std::string meta = testutil::slurp(dir / "meta.json");

  testutil::spit(dir / "labels.tsv", labels + "extra\ten\t9\t0\n");
  EXPECT_EQ(code_of([&] { read_representation_set(dir); }), ErrorCode::label_count_mismatch);
  testutil::spit(dir / "labels.tsv", labels);

  auto bad_lang = labels;
  bad_lang.replace(bad_lang.find("\ten\t"), 4, "\tde\t");
  testutil::spit(dir / "labels.tsv", bad_lang);
  EXPECT_EQ(code_of([&] { read_representation_set(dir); }), ErrorCode::unknown_language);
  testutil::spit(dir / "labels.tsv", labels);

  testutil::spit(dir / "meta.json", "{\"n\": 4, \"d\": ");
  EXPECT_EQ(code_of([&] { read_representation_set(dir); }), ErrorCode::malformed_header);
  testutil::spit(dir / "meta.json", meta);

  testutil::spit(dir / "matrix.f32", testutil::slurp(dir / "matrix.f32") + std::string(4, '\0'));
  EXPECT_EQ(code_of([&] { read_representation_set(dir); }), ErrorCode::dimension_mismatch);

  EXPECT_EQ(code_of([&] { read_representation_set(tmp / "missing.reprset"); }), ErrorCode::io);
}

TEST(RepresentationSet, PayloadNotDivisibleByRowWidth) {
  TempDir tmp;
  RepresentationSet s;
  s.languages = {"en"};
  s.vectors = FloatMatrix::Zero(2, 768);
  s.labels = {{"en", "a", 0, 0}, {"en", "b", 1, 0}};
  const auto dir = tmp / "wide.reprset";
  write_representation_set(s, dir);
  testutil::spit(dir / "matrix.f32", std::string(768 * 4 + 8, '\0'));
  try {
    read_representation_set(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::dimension_mismatch);
    EXPECT_NE(std::string(e.what()).find("not divisible"), std::string::npos);
  }
}

TEST(VocabEmbedding, RoundTripWithBias) {
  TempDir tmp;
  FloatMatrix m(3, 2);
  m << 1, 2, 3, 4, 5, 6;
  VocabEmbedding v(m, {"a", "##b", "c"}, {false, true, false}, std::vector<float>{0.5f, -1.f, 2.f});
  write_vocab_embedding(v, tmp / "v.vocab");
  const auto back = read_vocab_embedding(tmp / "v.vocab");
  EXPECT_EQ(back.matrix(), m);
  EXPECT_EQ(back.tokens(), v.tokens());
  EXPECT_EQ(back.subword_flags(), v.subword_flags());
  ASSERT_TRUE(back.bias());
  EXPECT_EQ(*back.bias(), *v.bias());
}

TEST(VocabEmbedding, RejectsDuplicatesAndBadBias) {
  FloatMatrix m = FloatMatrix::Zero(2, 2);
  EXPECT_EQ(code_of([&] { VocabEmbedding(m, {"a", "a"}, {false, false}); }), ErrorCode::duplicate);
  EXPECT_EQ(code_of([&] { VocabEmbedding(m, {"a", "b"}, {false, false}, std::vector<float>{1.f}); }),
            ErrorCode::dimension_mismatch);
  EXPECT_EQ(code_of([&] { VocabEmbedding(m, {"a"}, {false}); }), ErrorCode::label_count_mismatch);
}

TEST(VocabEmbedding, LookupNormalizesToNfc) {
  // "é" precomposed vs. e + combining acute.
  const auto v = toy_vocab({"caf\xC3\xA9", "x"});
  EXPECT_EQ(v.find("cafe\xCC\x81"), std::optional<std::size_t>(0));
  EXPECT_FALSE(v.find("cafe"));
}

TEST(FilterSingleToken, DropsSplitTargetsAndKeepsWholeWords) {
  const auto vocab = toy_vocab({"dog", "chien", "##ien", "cat", "ch"}, {false, false, true, false, false});
  Lexicon lex;
  lex.entries = {{"dog", "chien", "fr", "N"}, {"cat", "chat", "fr", "N"}, {"dog", "##ien", "fr", "N"}};
  const auto out = filter_single_token(lex, vocab);
  ASSERT_EQ(out.entries.size(), 1u);
  EXPECT_EQ(out.entries[0].target, "chien");
}

TEST(FilterSingleToken, CountsMatchSetMembership) {
  std::vector<std::string> tokens;
  for (int i = 0; i < 10; ++i) tokens.push_back("s" + std::to_string(i));
  for (int i = 0; i < 10; ++i)
    if (i % 3 != 1) tokens.push_back("t" + std::to_string(i));  // drops t1, t4, t7
  tokens.push_back("t9x");
  const auto vocab = toy_vocab(tokens);
  Lexicon lex;
  for (int i = 0; i < 10; ++i) lex.entries.push_back({"s" + std::to_string(i), "t" + std::to_string(i), "xx", "N"});
  lex.entries[9].target = "t10";  // fourth absent target

  const std::set<std::string> present(tokens.begin(), tokens.end());
  std::size_t expected = 0;
  for (const auto& e : lex.entries) expected += present.contains(e.source) && present.contains(e.target);
  ASSERT_EQ(expected, 6u);
  const auto once = filter_single_token(lex, vocab);
  EXPECT_EQ(once.entries.size(), expected);
  EXPECT_EQ(filter_single_token(once, vocab), once);
}

TEST(Lexicon, RoundTripAndDuplicates) {
  TempDir tmp;
  Lexicon lex;
  lex.entries = {{"dog", "chien", "fr", "N"}, {"dog", "Hund", "de", "N"}, {"run", "courir", "fr", "V"}};
  write_lexicon(lex, tmp / "lex.tsv", "toy");
  EXPECT_EQ(read_lexicon(tmp / "lex.tsv"), lex);
  testutil::spit(tmp / "dup.tsv", "a\tb\tfr\tN\na\tb\tfr\tV\n");
  EXPECT_EQ(code_of([&] { read_lexicon(tmp / "dup.tsv"); }), ErrorCode::duplicate);
}

TEST(RankingDump, RoundTripWithAwkwardTokens) {
  TempDir tmp;
  RankingDump dump;
  dump.top_k = 4;
  dump.header["method"] = "analogy";
  RankingRecord r{"src", "fr", "a:b", {{"a:b", 3.5}, {"x;y", 1.0 / 3.0}, {"back\\slash", 1e-300}, {"tab\tnl\n", -2}},
                  Method::analogy};
  dump.records.push_back(r);
  write_ranking_dump(dump, tmp / "d.tsv");
  const auto back = read_ranking_dump(tmp / "d.tsv");
  EXPECT_EQ(back.top_k, 4u);
  EXPECT_EQ(back.header.at("method"), "analogy");
  ASSERT_EQ(back.records.size(), 1u);
  EXPECT_EQ(back.records[0], r);  // scores survive exactly
}

TEST(RankingDump, RejectsInvariantViolations) {
  TempDir tmp;
  testutil::spit(tmp / "noheader.tsv", "s\tfr\tt\tanalogy\ta:1\n");
  EXPECT_EQ(code_of([&] { read_ranking_dump(tmp / "noheader.tsv"); }), ErrorCode::malformed_header);
  testutil::spit(tmp / "inc.tsv", "# top_k=2\ns\tfr\tt\tanalogy\ta:1;b:2\n");
  EXPECT_EQ(code_of([&] { read_ranking_dump(tmp / "inc.tsv"); }), ErrorCode::invariant_violation);
  testutil::spit(tmp / "dup.tsv", "# top_k=2\ns\tfr\tt\tanalogy\ta:2;a:1\n");
  EXPECT_EQ(code_of([&] { read_ranking_dump(tmp / "dup.tsv"); }), ErrorCode::duplicate);
  testutil::spit(tmp / "src.tsv", "# top_k=2\ns\tfr\tt\tanalogy\ts:2;a:1\n");
  EXPECT_EQ(code_of([&] { read_ranking_dump(tmp / "src.tsv"); }), ErrorCode::invariant_violation);
  testutil::spit(tmp / "long.tsv", "# top_k=1\ns\tfr\tt\tanalogy\ta:2;b:1\n");
  EXPECT_EQ(code_of([&] { read_ranking_dump(tmp / "long.tsv"); }), ErrorCode::invariant_violation);
}

TEST(RankRows, OrdersByScoreThenIndex) {
  Eigen::VectorXd s(5);
  s << 1.0, 3.0, 1.0, 3.0, 0.5;
  const std::vector<std::string> toks = {"a", "b", "c", "d", "e"};
  const auto out = rank_rows(s, toks, [](std::size_t i) { return i != 3; }, 0);
  std::vector<std::string> got;
  for (const auto& c : out) got.push_back(c.token);
  EXPECT_EQ(got, (std::vector<std::string>{"b", "a", "c", "e"}));
  EXPECT_EQ(rank_rows(s, toks, [](std::size_t) { return true; }, 2).size(), 2u);
}
