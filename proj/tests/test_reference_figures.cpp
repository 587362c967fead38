// Consistency checks on published reference figures. The numbers come from
// full-model runs and cannot be regenerated here; these tests only pin the
// conventions our metrics must share with them.

#include <cmath>

#include <gtest/gtest.h>

#include "langsub/langsub.hpp"

using namespace langsub;

namespace {

struct TranslationRow {
  const char* name;
  double acc1, acc10, acc100, rank, log_rank, win;  // win < 0: not reported
};

const TranslationRow kTranslation[] = {
    {"Baseline", 0.036, 0.244, 0.575, 4303.4, 4.58, -1},
    {"Analogies", 0.105, 0.463, 0.737, 2458.1, 3.19, 0.898},
    {"Template", 0.449, 0.703, 0.845, 243.4, 1.68, 0.916},
};

const std::size_t kTopK[] = {1, 5, 10, 20, 50};
// English share of the top-k predictions per variant.
const double kEnglishShare[4][5] = {
    {0.921, 0.807, 0.783, 0.773, 0.767},  // none
    {0.906, 0.584, 0.520, 0.477, 0.437},  // embed
    {0.908, 0.550, 0.484, 0.441, 0.403},  // repr
    {0.868, 0.488, 0.414, 0.366, 0.325},  // both
};
const double kCoherence[4] = {0.471, 0.443, 0.460, 0.438};

}  // namespace

TEST(ReferenceFigures, LogRankIsNaturalLog) {
  for (const auto& row : kTranslation) {
    // Mean of logs never exceeds log of the mean.
    EXPECT_LE(std::exp(row.log_rank), row.rank) << row.name;
    EXPECT_LE(row.acc1, row.acc10);
    EXPECT_LE(row.acc10, row.acc100);
  }
  // Under base 10 the baseline row would need avg rank >= 10^4.58.
  EXPECT_GT(std::pow(10.0, kTranslation[0].log_rank), kTranslation[0].rank);
}

TEST(ReferenceFigures, TableRendersAtPublishedPrecision) {
  MetricSummary s;
  const auto& t = kTranslation[2];
  s.acc_at = {{1, t.acc1}, {10, t.acc10}, {100, t.acc100}};
  s.avg_rank = t.rank;
  s.avg_log_rank = t.log_rank;
  s.hard_win = t.win;
  s.n = 2451;
  const std::vector<std::size_t> ks = {1, 10, 100};
  const auto table = format_translation_table({{"Template", s}}, ks);
  for (const char* cell : {"0.449", "0.703", "0.845", "243.4", "1.68", "91.6%"})
    EXPECT_NE(table.find(cell), std::string::npos) << cell << "\n" << table;
}

TEST(ReferenceFigures, PerPosRowsMonotoneInK) {
  const double method[3][5] = {{0.113, 0.379, 0.494, 0.696, 0.741},
                               {0.105, 0.310, 0.418, 0.666, 0.706},
                               {0.039, 0.201, 0.317, 0.576, 0.645}};
  const double baseline[3][5] = {{0.044, 0.189, 0.279, 0.520, 0.593},
                                 {0.037, 0.102, 0.183, 0.474, 0.567},
                                 {0.006, 0.105, 0.168, 0.355, 0.427}};
  for (int p = 0; p < 3; ++p)
    for (int k = 0; k < 5; ++k) {
      if (k > 0) {
        EXPECT_LE(method[p][k - 1], method[p][k]);
        EXPECT_LE(baseline[p][k - 1], baseline[p][k]);
      }
      EXPECT_GT(method[p][k], baseline[p][k]);
    }
}

TEST(ReferenceFigures, EnglishShareFallsFromNoneToBoth) {
  for (int k = 0; k < 5; ++k) {
    EXPECT_LT(kEnglishShare[3][k], kEnglishShare[0][k]) << "top-" << kTopK[k];
    for (int v : {1, 2}) {
      EXPECT_LT(kEnglishShare[v][k], kEnglishShare[0][k]);
      EXPECT_GT(kEnglishShare[v][k], kEnglishShare[3][k]);
    }
  }
}

TEST(ReferenceFigures, CoherenceGapWithinTolerance) {
  EXPECT_LE(std::abs(kCoherence[0] - kCoherence[3]), 0.1);
  for (double c : kCoherence) EXPECT_LE(std::abs(c - kCoherence[0]), 0.1);
}

TEST(ReferenceFigures, ClusteringImprovesOnRowspace) {
  // Original vs language-identity subspace, two layers.
  EXPECT_GE(0.618 - 0.355, 0.05);
  EXPECT_GE(0.9035 - 0.805, 0.05);
}

TEST(ReferenceFigures, LanguageRowsSortedByAccuracy) {
  const std::vector<std::pair<std::string, double>> published = {
      {"greek", 0.986},   {"russian", 0.943}, {"arabic", 0.794},  {"hebrew", 0.761},    {"german", 0.758},
      {"japanese", 0.716}, {"korean", 0.664},  {"french", 0.637},  {"latin", 0.626},     {"polish", 0.576},
      {"italian", 0.572}, {"spanish", 0.503}, {"finnish", 0.404}, {"turkish", 0.399},   {"dutch", 0.315},
      {"welsh", 0.262},   {"swedish", 0.262}, {"hungarian", 0.254}, {"portuguese", 0.236}, {"danish", 0.231}};
  // Rebuild predictions with those acc@1 values over 1000 items each, in
  // reverse order so the input order cannot leak into the output.
  std::vector<std::pair<std::string, std::string>> preds;
  for (auto it = published.rbegin(); it != published.rend(); ++it) {
    const int hits = static_cast<int>(std::lround(it->second * 1000));
    for (int i = 0; i < 1000; ++i) preds.emplace_back(it->first, i < hits ? it->first : "other");
  }
  const auto m = confusion_matrix(preds, true);
  ASSERT_EQ(m.languages.size(), published.size() + 1);
  EXPECT_EQ(m.languages.back(), "other");
  for (std::size_t i = 0; i < published.size(); ++i) {
    EXPECT_NEAR(m.accuracy[i], published[i].second, 1e-12);
    const bool tied = (i > 0 && published[i - 1].second == published[i].second) ||
                      (i + 1 < published.size() && published[i + 1].second == published[i].second);
    if (!tied) EXPECT_EQ(m.languages[i], published[i].first);
  }
}
