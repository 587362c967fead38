// langsub command-line driver.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "langsub/langsub.hpp"

namespace fs = std::filesystem;
using namespace langsub;
using nlohmann::json;

namespace {

enum class Space { original, nullspace, rowspace };

Space parse_space(const std::string& s) {
  if (s == "original") return Space::original;
  if (s == "nullspace") return Space::nullspace;
  if (s == "rowspace") return Space::rowspace;
  fail(ErrorCode::precondition, "unknown space '" + s + "' (original, nullspace, rowspace)");
}

unsigned thread_count() {
  if (const char* env = std::getenv("LANGSUB_THREADS"); env && *env) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

json manifest(const std::string& subcommand, std::vector<std::string> inputs, std::uint64_t seed, json config) {
  RunManifest m;
  m.subcommand = subcommand;
  m.inputs = std::move(inputs);
  m.seed = seed;
  m.config = std::move(config);
  m.created = reproducible_timestamp();
  return to_json(m);
}

void write_json(const fs::path& path, const json& j) { detail::write_text(path, j.dump(2) + "\n"); }

// CSV outputs cannot carry a manifest, so it goes next to them.
void write_sidecar(const fs::path& path, const json& m) {
  write_json(path.string() + ".manifest.json", m);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

RepresentationSet load_in_space(const std::string& input, const std::string& projection, Space space) {
  RepresentationSet set = read_representation_set(input);
  if (space == Space::original) return set;
  require(!projection.empty(), "--space other than 'original' needs --projection");
  const ProjectionPair pair = read_projection_pair(projection);
  return project(set, space == Space::nullspace ? pair.nullspace : pair.rowspace);
}

std::vector<std::string> row_languages(const RepresentationSet& set) {
  std::vector<std::string> out;
  out.reserve(set.labels.size());
  for (const auto& l : set.labels) out.push_back(l.language);
  return out;
}

Lexicon restrict_languages(const Lexicon& lexicon, const std::vector<std::string>& languages) {
  if (languages.empty()) return lexicon;
  const std::set<std::string> keep(languages.begin(), languages.end());
  Lexicon out;
  for (const auto& e : lexicon.entries)
    if (keep.contains(e.language)) out.entries.push_back(e);
  return out;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string output;
  std::uint64_t seed = 0;
  std::vector<std::string> languages = {"en", "fr", "de", "es", "ru"};
  int d = 64;
  int lang_dim = 5;
  int vocab_size = 100;
  int samples = 400;
  double noise = 0.1;
  double lang_norm = 1.0;
  double lex_norm = 1.0;
  int topics = 0;
  double topic_spread = 0.5;
};

int run_synth(const SynthArgs& a) {
  synth::PlantedConfig c;
  c.d = a.d;
  c.lang_dim = a.lang_dim;
  c.languages = a.languages;
  c.vocab_size = a.vocab_size;
  c.noise_sigma = a.noise;
  c.seed = a.seed;
  c.lang_norm = a.lang_norm;
  c.lex_norm = a.lex_norm;
  c.topics = a.topics;
  c.topic_spread = a.topic_spread;
  const auto world = synth::generate_world(c);
  const auto embed = synth::emit_dataset(world, a.samples, a.noise, Layer::embedding, 1);
  const auto hidden = synth::emit_dataset(world, a.samples, a.noise, Layer::mlm_head_output, 2);

  json config = {{"d", a.d},          {"lang_dim", a.lang_dim},         {"languages", a.languages},
                 {"vocab_size", a.vocab_size}, {"samples_per_language", a.samples}, {"noise", a.noise},
                 {"lang_norm", a.lang_norm},   {"lex_norm", a.lex_norm},            {"topics", a.topics},
                 {"topic_spread", a.topic_spread}};
  const json m = manifest("synth-gen", {}, a.seed, config);
  const fs::path out(a.output);
  fs::create_directories(out);
  write_representation_set(embed.samples, out / "samples.reprset", m);
  write_representation_set(hidden.samples, out / "hidden.reprset", m);
  write_vocab_embedding(embed.vocab, out / "vocab.vocab", m);
  write_lexicon(embed.lexicon, out / "lexicon.tsv", "planted lexicon, config_hash=" + m["config_hash"].get<std::string>());

  // Noise-free meaning vectors, shared by all languages.
  std::string vectors = std::to_string(world.vocab_size() * static_cast<int>(a.languages.size())) + " " +
                        std::to_string(a.d - a.lang_dim) + "\n";
  for (int w = 0; w < world.vocab_size(); ++w) {
    const Vector coords = world.complement_basis.transpose() * world.lex_vectors[static_cast<std::size_t>(w)];
    std::string row;
    for (Eigen::Index j = 0; j < coords.size(); ++j) row += " " + detail::format_double(coords(j));
    for (const auto& lang : a.languages) vectors += synth::word_token(w, lang) + row + "\n";
  }
  detail::write_text(out / "word_vectors.txt", vectors);
  write_json(out / "manifest.json", m);
  return 0;
}

// ---------------------------------------------------------------------------

struct InlpArgs {
  std::string input, output;
  std::uint64_t seed = 0;
  int iterations = 20;
  std::size_t max_sentences = 0;
};

int run_inlp_fit(const InlpArgs& a) {
  RepresentationSet set = read_representation_set(a.input);
  if (a.max_sentences > 0) set = sample_one_token_per_sentence(set, a.max_sentences, a.seed);
  InlpConfig config;
  config.seed = a.seed;
  const auto result = run_inlp(set, a.iterations, config);
  const Matrix x = to_double(set.vectors);
  const double residual = max_guarantee_residual(result.pair, x);
  json summary = {{"rows", set.rows()},
                  {"d", set.dim()},
                  {"requested_iterations", result.requested_iterations},
                  {"iterations", result.pair.iterations},
                  {"truncated", result.truncated},
                  {"exhausted", result.exhausted},
                  {"nullspace_rank", result.nullspace_rank},
                  {"train_accuracy", result.train_accuracy},
                  {"guarantee_residual", residual}};
  json m = manifest("inlp-fit", {a.input}, a.seed,
                    {{"iterations", a.iterations}, {"max_sentences", a.max_sentences}});
  m["summary"] = summary;
  write_projection_pair(result.pair, a.output, m);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ProjectArgs {
  std::string input, projection, output, space = "nullspace";
};

int run_project(const ProjectArgs& a) {
  const Space space = parse_space(a.space);
  require(space != Space::original, "project needs --space nullspace or rowspace");
  const auto set = load_in_space(a.input, a.projection, space);
  write_representation_set(set, a.output, manifest("project", {a.input, a.projection}, 0, {{"space", a.space}}));
  return 0;
}

// ---------------------------------------------------------------------------

struct LangvecArgs {
  std::string input, output, projection, space = "original";
};

int run_langvec(const LangvecArgs& a) {
  const auto set = load_in_space(a.input, a.projection, parse_space(a.space));
  const auto table = build_language_vectors(set);
  std::vector<std::string> inputs = {a.input};
  if (!a.projection.empty()) inputs.push_back(a.projection);
  write_language_vectors(table, a.output, manifest("langvec", inputs, 0, {{"space", a.space}}));
  return 0;
}

// ---------------------------------------------------------------------------

struct TranslateArgs {
  std::string vocab, lexicon, langvec, output, method = "analogy", source_language = "en", heatmap;
  std::vector<std::string> languages;
  std::size_t topk = 100;
  std::size_t heatmap_k = 1;
};

int run_translate(const TranslateArgs& a) {
  const Method method = parse_method(a.method);
  const auto vocab = read_vocab_embedding(a.vocab);
  const auto raw = read_lexicon(a.lexicon);
  const auto lexicon = restrict_languages(filter_single_token(raw, vocab), a.languages);
  std::cerr << "lexicon: " << lexicon.entries.size() << " of " << raw.entries.size()
            << " pairs are single-token in the vocabulary\n";
  std::optional<LanguageVectorTable> table;
  if (!a.langvec.empty()) table = read_language_vectors(a.langvec);

  std::vector<std::string> inputs = {a.vocab, a.lexicon};
  if (table) inputs.push_back(a.langvec);
  const json m = manifest("translate", inputs, 0,
                          {{"method", a.method},
                           {"source_language", a.source_language},
                           {"languages", a.languages},
                           {"topk", a.topk}});
  RankingDump dump;
  dump.top_k = a.topk;
  dump.records = translate_lexicon(lexicon, a.source_language, method, table ? &*table : nullptr, vocab, a.topk);
  for (auto& r : dump.records) r.method = method;
  dump.header["method"] = a.method;
  dump.header["source_language"] = a.source_language;
  dump.header["manifest"] = m.dump();
  write_ranking_dump(dump, a.output);

  if (!a.heatmap.empty()) {
    require(table.has_value(), "--heatmap needs --langvec");
    const auto grid = all_pairs_matrix(restrict_languages(raw, a.languages), a.source_language, *table, vocab,
                                       a.heatmap_k);
    detail::write_text(a.heatmap, heatmap_csv(grid));
    write_sidecar(a.heatmap, m);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string input, lexicon, baseline, output;
  std::vector<std::size_t> ks = {1, 10, 100};
  std::size_t universe_size = 0;
  std::size_t min_pos_count = 200;
};

int run_eval(const EvalArgs& a) {
  const auto dump = read_ranking_dump(a.input);
  const auto lexicon = read_lexicon(a.lexicon);
  std::optional<RankingDump> baseline;
  if (!a.baseline.empty()) baseline = read_ranking_dump(a.baseline);
  EvalOptions options;
  options.ks = a.ks;
  options.universe_size = a.universe_size;
  options.min_pos_count = a.min_pos_count;
  const auto report = evaluate_rankings(dump.records, lexicon, baseline ? &baseline->records : nullptr, options);

  std::vector<std::string> inputs = {a.input, a.lexicon};
  if (baseline) inputs.push_back(a.baseline);
  json j = to_json(report);
  j["manifest"] = manifest("eval", inputs, 0,
                           {{"ks", a.ks}, {"universe_size", a.universe_size}, {"min_pos_count", a.min_pos_count}});
  if (!a.output.empty()) write_json(a.output, j);

  const auto it = dump.header.find("method");
  std::vector<std::pair<std::string, MetricSummary>> rows = {
      {it == dump.header.end() ? fs::path(a.input).stem().string() : it->second, report.overall}};
  for (const auto& [pos, s] : report.per_pos) rows.emplace_back("  " + pos, s);
  std::cout << format_translation_table(rows, a.ks);
  return 0;
}

// ---------------------------------------------------------------------------

struct ClusterArgs {
  std::string input, projection, output;
  std::uint64_t seed = 0;
  int restarts = 10;
  std::size_t max_sentences = 0;
};

int run_cluster_eval(const ClusterArgs& a) {
  RepresentationSet set = read_representation_set(a.input);
  if (a.max_sentences > 0) set = sample_one_token_per_sentence(set, a.max_sentences, a.seed);
  const auto labels = row_languages(set);
  const Matrix x = to_double(set.vectors);
  const unsigned threads = thread_count();

  json spaces = json::object();
  auto score = [&](const std::string& name, const Matrix& m) {
    const auto r = kmeans_vmeasure(m, labels, a.seed, a.restarts, threads);
    spaces[name] = {{"v_measure", r.score.v},
                    {"homogeneity", r.score.homogeneity},
                    {"completeness", r.score.completeness},
                    {"inertia", r.inertia}};
    std::cout << name << "\tv=" << detail::format_double(r.score.v) << "\n";
  };
  score("original", x);
  std::vector<std::string> inputs = {a.input};
  if (!a.projection.empty()) {
    const auto pair = read_projection_pair(a.projection);
    require(pair.dim() == set.dim(), "projection dimension differs from the representations");
    score("nullspace", x * pair.nullspace);
    score("rowspace", x * pair.rowspace);
    inputs.push_back(a.projection);
  }
  json j = {{"k", set.languages.size()}, {"rows", set.rows()}, {"spaces", spaces}};
  j["manifest"] = manifest("cluster-eval", inputs, a.seed,
                           {{"restarts", a.restarts}, {"max_sentences", a.max_sentences}});
  if (!a.output.empty()) write_json(a.output, j);
  return 0;
}

// ---------------------------------------------------------------------------

struct IntervenArgs {
  std::string input, vocab, projection, embedding_projection, lexicon, output, variant = "none";
  std::string english = "en";
  std::vector<std::string> word_vectors;
  std::size_t topk = 50;
  std::size_t coherence_k = 10;
  std::uint64_t seed = 0;
};

int run_intervene(const IntervenArgs& a) {
  const Variant variant = parse_variant(a.variant);
  const auto states = read_representation_set(a.input);
  const auto vocab = read_vocab_embedding(a.vocab);
  const auto pair = read_projection_pair(a.projection);
  std::optional<ProjectionPair> embedding_pair;
  if (!a.embedding_projection.empty()) embedding_pair = read_projection_pair(a.embedding_projection);
  const Intervener intervener(vocab, pair, variant, embedding_pair ? &*embedding_pair : nullptr);

  RankingDump dump;
  dump.top_k = a.topk;
  std::vector<std::string> originals;
  for (Eigen::Index i = 0; i < states.rows(); ++i) {
    const auto& label = states.labels[static_cast<std::size_t>(i)];
    if (label.language != a.english) continue;
    const Vector h = states.vectors.row(i).cast<double>().transpose();
    dump.records.push_back(intervener.predict(h, states.layer, a.topk, label.token, label.language));
    originals.push_back(label.token);
  }
  require(!dump.records.empty(), "no rows labelled '" + a.english + "' in " + a.input);

  std::vector<std::string> english_words;
  {
    std::set<std::string> seen;
    for (const auto& e : read_lexicon(a.lexicon).entries)
      if (seen.insert(e.source).second) english_words.push_back(e.source);
  }
  const auto clf = train_english_classifier(vocab, english_words, a.seed);
  std::vector<std::size_t> ks;
  for (std::size_t k : {1, 5, 10, 20, 50})
    if (k <= a.topk) ks.push_back(k);
  if (ks.empty() || ks.back() != a.topk) ks.push_back(a.topk);
  const auto proportion = english_proportion(dump.records, clf, vocab, ks);

  std::vector<std::string> inputs = {a.input, a.vocab, a.projection, a.lexicon};
  if (embedding_pair) inputs.push_back(a.embedding_projection);
  inputs.insert(inputs.end(), a.word_vectors.begin(), a.word_vectors.end());
  const json m = manifest("intervene", inputs, a.seed,
                          {{"variant", std::string(to_string(variant))},
                           {"topk", a.topk},
                           {"coherence_k", a.coherence_k},
                           {"english", a.english}});
  json summary = {{"variant", std::string(to_string(variant))},
                  {"records", dump.records.size()},
                  {"english_proportion", json::object()},
                  {"manifest", m}};
  for (const auto& [k, p] : proportion) summary["english_proportion"][std::to_string(k)] = p;
  if (!a.word_vectors.empty()) {
    CrossLingualTable table;
    for (const auto& path : a.word_vectors) read_word_vectors(path, table);
    const auto coh = semantic_coherence(dump.records, originals, table, std::min(a.coherence_k, a.topk));
    summary["semantic_coherence"] = {{"mean", coh.mean}, {"pairs", coh.pairs}, {"skipped", coh.skipped}};
  }

  const fs::path out(a.output);
  fs::create_directories(out);
  dump.header["kind"] = "mlm_prediction";
  dump.header["variant"] = std::string(to_string(variant));
  dump.header["manifest"] = m.dump();
  write_ranking_dump(dump, out / "predictions.tsv");
  write_json(out / "summary.json", summary);
  std::cout << summary["english_proportion"].dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ConfusionArgs {
  std::string input, output;
  std::vector<std::string> drop = {"en"};
  std::vector<std::size_t> ks = {1, 5, 10};
  std::size_t top_languages = 0;
  bool raw_counts = false;
};

// Input is a language-prediction dump: each record's language is the true
// tag and its target is that language's name token.
int run_confusion(const ConfusionArgs& a) {
  const auto dump = read_ranking_dump(a.input);
  std::map<std::string, std::string> name_to_tag;
  for (const auto& r : dump.records) {
    auto [it, fresh] = name_to_tag.emplace(unicode::nfc(r.target), r.language);
    if (!fresh && it->second != r.language)
      fail(ErrorCode::invariant_violation, "name '" + r.target + "' used for two languages");
  }

  std::map<std::string, std::vector<std::size_t>> ranks;  // 0 = not found
  std::vector<std::pair<std::string, std::string>> predictions;
  for (const auto& r : dump.records) {
    std::string predicted = "other";
    for (const auto& c : r.candidates)
      if (auto it = name_to_tag.find(unicode::nfc(c.token)); it != name_to_tag.end()) {
        predicted = it->second;
        break;
      }
    predictions.emplace_back(r.language, predicted);
    ranks[r.language].push_back(target_rank(r, r.target).value_or(0));
  }

  json accuracy = json::object();
  std::vector<std::pair<double, std::string>> by_acc1;
  for (const auto& [lang, rs] : ranks) {
    json row = {{"n", rs.size()}};
    for (std::size_t k : a.ks) {
      const auto hits = std::count_if(rs.begin(), rs.end(), [k](std::size_t r) { return r >= 1 && r <= k; });
      row["acc@" + std::to_string(k)] = static_cast<double>(hits) / static_cast<double>(rs.size());
    }
    const auto hits1 = std::count(rs.begin(), rs.end(), std::size_t{1});
    by_acc1.emplace_back(static_cast<double>(hits1) / static_cast<double>(rs.size()), lang);
    accuracy[lang] = row;
  }

  std::vector<std::string> drop = a.drop;
  if (a.top_languages > 0) {
    std::sort(by_acc1.begin(), by_acc1.end(), [](const auto& x, const auto& y) {
      return x.first != y.first ? x.first > y.first : x.second < y.second;
    });
    std::set<std::string> kept;
    for (const auto& [acc, lang] : by_acc1) {
      if (std::find(a.drop.begin(), a.drop.end(), lang) != a.drop.end()) continue;
      if (kept.size() < a.top_languages) kept.insert(lang);
    }
    for (const auto& [acc, lang] : by_acc1)
      if (!kept.contains(lang)) drop.push_back(lang);
    drop.push_back("other");
  }
  const auto matrix = confusion_matrix(predictions, !a.raw_counts, drop);

  const json m = manifest("confusion", {a.input}, 0,
                          {{"drop", a.drop}, {"top_languages", a.top_languages}, {"sqrt_scale", !a.raw_counts}});
  const fs::path out(a.output);
  fs::create_directories(out);
  detail::write_text(out / "confusion.csv", confusion_csv(matrix));
  write_json(out / "accuracy.json", {{"languages", accuracy}, {"manifest", m}});
  write_json(out / "manifest.json", m);
  return 0;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> reports, interventions;
  std::string accuracy, corpus_sizes, output;
  std::vector<std::size_t> ks = {1, 10, 100};
};

std::pair<std::string, std::string> named_path(const std::string& arg) {
  if (auto eq = arg.find('='); eq != std::string::npos) return {arg.substr(0, eq), arg.substr(eq + 1)};
  return {fs::path(arg).stem().string(), arg};
}

json read_json_file(const std::string& path) {
  json j = json::parse(detail::read_text(path), nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::malformed_header, "'" + path + "' is not valid JSON");
  return j;
}

int run_report(const ReportArgs& a) {
  std::string text;
  json out = json::object();
  std::vector<std::string> inputs;

  if (!a.reports.empty()) {
    std::vector<std::pair<std::string, MetricSummary>> rows;
    for (const auto& arg : a.reports) {
      const auto [name, path] = named_path(arg);
      inputs.push_back(path);
      rows.emplace_back(name, report_from_json(read_json_file(path)).overall);
    }
    text += format_translation_table(rows, a.ks) + "\n";
  }

  if (!a.interventions.empty()) {
    std::vector<std::pair<std::string, std::map<std::size_t, double>>> rows;
    std::vector<std::vector<std::string>> coherence = {{"", "avg-cos-sim"}};
    for (const auto& arg : a.interventions) {
      const auto [name, path] = named_path(arg);
      inputs.push_back(path);
      const json j = read_json_file(path);
      std::map<std::size_t, double> props;
      for (const auto& [k, v] : j.at("english_proportion").items()) props[std::stoul(k)] = v.get<double>();
      rows.emplace_back(name, props);
      if (j.contains("semantic_coherence")) {
        const double mean = j["semantic_coherence"]["mean"].get<double>();
        out["semantic_coherence"][name] = mean;
        coherence.push_back({name, detail::fixed(mean, 3)});
      }
    }
    text += format_topk_table(rows) + "\n";
    if (coherence.size() > 1) text += detail::render_table(coherence) + "\n";
  }

  if (!a.accuracy.empty() || !a.corpus_sizes.empty()) {
    require(!a.accuracy.empty() && !a.corpus_sizes.empty(), "--accuracy and --corpus-sizes go together");
    inputs.push_back(a.accuracy);
    inputs.push_back(a.corpus_sizes);
    const json acc = read_json_file(a.accuracy).at("languages");
    std::vector<double> xs, ys;
    std::vector<std::string> used;
    for (const auto& line : detail::read_lines(a.corpus_sizes)) {
      if (line.empty() || line.front() == '#') continue;
      const auto cols = detail::split(line, '\t');
      if (cols.size() != 2) fail(ErrorCode::invariant_violation, a.corpus_sizes + ": expected 'language<TAB>size'");
      const std::string lang(cols[0]);
      if (!acc.contains(lang)) continue;
      xs.push_back(acc[lang].at("acc@1").get<double>());
      ys.push_back(detail::parse_double(cols[1], a.corpus_sizes));
      used.push_back(lang);
    }
    require(xs.size() >= 3, "need at least three languages with both accuracy and corpus size");
    const double rho = spearman(xs, ys);
    out["spearman"] = {{"rho", rho}, {"languages", used}};
    text += "spearman(acc@1, corpus size) = " + detail::fixed(rho, 3) + " over " + std::to_string(used.size()) +
            " languages\n";
  }

  require(!inputs.empty(), "nothing to report: pass --reports, --interventions or --accuracy");
  out["text"] = text;
  out["manifest"] = manifest("report", inputs, 0, {{"ks", a.ks}});
  std::cout << text;
  if (!a.output.empty()) {
    const fs::path dir(a.output);
    fs::create_directories(dir);
    detail::write_text(dir / "report.txt", text);
    write_json(dir / "report.json", out);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct PlotArgs {
  std::string input, projection, output, space = "original";
  std::size_t max_sentences = 0;
  std::uint64_t seed = 0;
};

int run_plotdata(const PlotArgs& a) {
  RepresentationSet set = load_in_space(a.input, a.projection, parse_space(a.space));
  if (a.max_sentences > 0) set = sample_one_token_per_sentence(set, a.max_sentences, a.seed);
  const Matrix coords = pca_2d(to_double(set.vectors));

  std::string pca = "x,y,language,token\n";
  std::string raw;
  for (Eigen::Index i = 0; i < set.rows(); ++i) {
    const auto& l = set.labels[static_cast<std::size_t>(i)];
    pca += detail::format_double(coords(i, 0)) + "," + detail::format_double(coords(i, 1)) + "," +
           csv_field(l.language) + "," + csv_field(l.token) + "\n";
    raw += l.language + "\t" + detail::escape_token(l.token);
    for (Eigen::Index j = 0; j < set.dim(); ++j) raw += "\t" + detail::format_double(set.vectors(i, j));
    raw += "\n";
  }
  std::vector<std::string> inputs = {a.input};
  if (!a.projection.empty()) inputs.push_back(a.projection);
  const json m = manifest("plotdata", inputs, a.seed, {{"space", a.space}, {"max_sentences", a.max_sentences}});
  const fs::path out(a.output);
  fs::create_directories(out);
  detail::write_text(out / "pca.csv", pca);
  detail::write_text(out / "vectors.tsv", raw);
  write_json(out / "manifest.json", m);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Language-identity subspaces in multilingual representations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth-gen", "Generate planted synthetic bundles");
  synth_cmd->add_option("--output,-o", synth_args.output, "Output directory")->required();
  synth_cmd->add_option("--seed", synth_args.seed);
  synth_cmd->add_option("--languages", synth_args.languages)->delimiter(',');
  synth_cmd->add_option("--dim", synth_args.d)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--lang-dim", synth_args.lang_dim)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--vocab-size", synth_args.vocab_size)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--samples-per-language", synth_args.samples)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--noise", synth_args.noise)->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--lang-norm", synth_args.lang_norm);
  synth_cmd->add_option("--lex-norm", synth_args.lex_norm);
  synth_cmd->add_option("--topics", synth_args.topics)->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--topic-spread", synth_args.topic_spread);

  InlpArgs inlp_args;
  auto* inlp_cmd = app.add_subcommand("inlp-fit", "Fit nullspace/rowspace projections");
  inlp_cmd->add_option("--input,-i", inlp_args.input, ".reprset bundle")->required();
  inlp_cmd->add_option("--output,-o", inlp_args.output, ".proj bundle")->required();
  inlp_cmd->add_option("--seed", inlp_args.seed);
  inlp_cmd->add_option("--iterations", inlp_args.iterations)->check(CLI::PositiveNumber);
  inlp_cmd->add_option("--max-sentences", inlp_args.max_sentences, "Sample one token per sentence, 0 keeps all rows");

  ProjectArgs project_args;
  auto* project_cmd = app.add_subcommand("project", "Apply P_N or P_R to a representation set");
  project_cmd->add_option("--input,-i", project_args.input)->required();
  project_cmd->add_option("--projection,-p", project_args.projection)->required();
  project_cmd->add_option("--output,-o", project_args.output)->required();
  project_cmd->add_option("--space", project_args.space, "nullspace or rowspace");

  LangvecArgs langvec_args;
  auto* langvec_cmd = app.add_subcommand("langvec", "Average representation per language");
  langvec_cmd->add_option("--input,-i", langvec_args.input)->required();
  langvec_cmd->add_option("--output,-o", langvec_args.output)->required();
  langvec_cmd->add_option("--projection,-p", langvec_args.projection);
  langvec_cmd->add_option("--space", langvec_args.space, "original, nullspace or rowspace");

  TranslateArgs tr_args;
  auto* tr_cmd = app.add_subcommand("translate", "Rank translations with the analogy or baseline method");
  tr_cmd->add_option("--vocab", tr_args.vocab)->required();
  tr_cmd->add_option("--lexicon", tr_args.lexicon)->required();
  tr_cmd->add_option("--output,-o", tr_args.output)->required();
  tr_cmd->add_option("--langvec", tr_args.langvec);
  tr_cmd->add_option("--method", tr_args.method, "analogy or baseline");
  tr_cmd->add_option("--source-language", tr_args.source_language);
  tr_cmd->add_option("--languages", tr_args.languages, "Target languages to keep")->delimiter(',');
  tr_cmd->add_option("--topk", tr_args.topk)->check(CLI::PositiveNumber);
  tr_cmd->add_option("--heatmap", tr_args.heatmap, "Also write the all-pairs acc@k grid as CSV");
  tr_cmd->add_option("--heatmap-k", tr_args.heatmap_k)->check(CLI::PositiveNumber);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Score a ranking dump against a lexicon");
  eval_cmd->add_option("--input,-i", eval_args.input)->required();
  eval_cmd->add_option("--lexicon", eval_args.lexicon)->required();
  eval_cmd->add_option("--baseline", eval_args.baseline, "Ranking dump for hard-win comparison");
  eval_cmd->add_option("--output,-o", eval_args.output, "Report JSON");
  eval_cmd->add_option("--ks", eval_args.ks)->delimiter(',');
  eval_cmd->add_option("--universe-size", eval_args.universe_size, "Rank assigned to absent targets is this + 1");
  eval_cmd->add_option("--min-pos-count", eval_args.min_pos_count);

  ClusterArgs cl_args;
  auto* cl_cmd = app.add_subcommand("cluster-eval", "K-means V-measure in the original and projected spaces");
  cl_cmd->add_option("--input,-i", cl_args.input)->required();
  cl_cmd->add_option("--projection,-p", cl_args.projection);
  cl_cmd->add_option("--output,-o", cl_args.output);
  cl_cmd->add_option("--seed", cl_args.seed);
  cl_cmd->add_option("--restarts", cl_args.restarts)->check(CLI::PositiveNumber);
  cl_cmd->add_option("--max-sentences", cl_args.max_sentences);

  IntervenArgs iv_args;
  auto* iv_cmd = app.add_subcommand("intervene", "Top-k MLM predictions under a projection variant");
  iv_cmd->add_option("--input,-i", iv_args.input, "Hidden states (.reprset)")->required();
  iv_cmd->add_option("--vocab", iv_args.vocab)->required();
  iv_cmd->add_option("--projection,-p", iv_args.projection, "Projection fitted on the hidden-state layer")->required();
  iv_cmd->add_option("--embedding-projection", iv_args.embedding_projection, "Projection fitted on the embedding layer");
  iv_cmd->add_option("--lexicon", iv_args.lexicon, "Sources are the English words")->required();
  iv_cmd->add_option("--output,-o", iv_args.output)->required();
  iv_cmd->add_option("--variant", iv_args.variant, "none, embed, repr or both");
  iv_cmd->add_option("--english", iv_args.english, "Language tag of the states to predict from");
  iv_cmd->add_option("--word-vectors", iv_args.word_vectors, "Cross-lingual word vectors for coherence");
  iv_cmd->add_option("--topk", iv_args.topk)->check(CLI::PositiveNumber);
  iv_cmd->add_option("--coherence-k", iv_args.coherence_k)->check(CLI::PositiveNumber);
  iv_cmd->add_option("--seed", iv_args.seed);

  ConfusionArgs cf_args;
  auto* cf_cmd = app.add_subcommand("confusion", "Language-prediction accuracy and confusion matrix");
  cf_cmd->add_option("--input,-i", cf_args.input, "Language-prediction ranking dump")->required();
  cf_cmd->add_option("--output,-o", cf_args.output)->required();
  cf_cmd->add_option("--drop", cf_args.drop)->delimiter(',');
  cf_cmd->add_option("--ks", cf_args.ks)->delimiter(',');
  cf_cmd->add_option("--top-languages", cf_args.top_languages, "Keep the N most accurate languages, 0 keeps all");
  cf_cmd->add_flag("--raw-counts", cf_args.raw_counts, "Disable square-root scaling");

  ReportArgs rp_args;
  auto* rp_cmd = app.add_subcommand("report", "Text tables and rank correlation");
  rp_cmd->add_option("--reports", rp_args.reports, "[name=]eval report JSON");
  rp_cmd->add_option("--interventions", rp_args.interventions, "[name=]intervene summary JSON");
  rp_cmd->add_option("--accuracy", rp_args.accuracy, "accuracy.json from confusion");
  rp_cmd->add_option("--corpus-sizes", rp_args.corpus_sizes, "TSV: language, size");
  rp_cmd->add_option("--ks", rp_args.ks)->delimiter(',');
  rp_cmd->add_option("--output,-o", rp_args.output);

  PlotArgs pl_args;
  auto* pl_cmd = app.add_subcommand("plotdata", "PCA-2D coordinates and raw vectors for plotting");
  pl_cmd->add_option("--input,-i", pl_args.input)->required();
  pl_cmd->add_option("--output,-o", pl_args.output)->required();
  pl_cmd->add_option("--projection,-p", pl_args.projection);
  pl_cmd->add_option("--space", pl_args.space);
  pl_cmd->add_option("--max-sentences", pl_args.max_sentences);
  pl_cmd->add_option("--seed", pl_args.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth_cmd) return run_synth(synth_args);
    if (*inlp_cmd) return run_inlp_fit(inlp_args);
    if (*project_cmd) return run_project(project_args);
    if (*langvec_cmd) return run_langvec(langvec_args);
    if (*tr_cmd) return run_translate(tr_args);
    if (*eval_cmd) return run_eval(eval_args);
    if (*cl_cmd) return run_cluster_eval(cl_args);
    if (*iv_cmd) return run_intervene(iv_args);
    if (*cf_cmd) return run_confusion(cf_args);
    if (*rp_cmd) return run_report(rp_args);
    if (*pl_cmd) return run_plotdata(pl_args);
  } catch (const Error& e) {
    std::cerr << "langsub: " << e.what() << "\n";
    return e.is_io() ? 2 : 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "langsub: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "langsub: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
