#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "citespan/corpus.hpp"
#include "citespan/discourse.hpp"
#include "citespan/eval.hpp"
#include "citespan/features.hpp"
#include "citespan/synth.hpp"

using namespace citespan;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string write_temp(const std::string& name, const std::string& content) {
  std::string path = "/tmp/" + name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

const std::string kDataDir = CITESPAN_DATA_DIR;

}  // namespace

TEST_CASE("datasets round trip through jsonl files") {
  SynthConfig cfg;
  cfg.entity_count = 8;
  cfg.paragraphs_per_entity = 3;
  auto data = generate_synthetic(cfg, 11);
  REQUIRE(data.size() == 24);

  const std::string path = "/tmp/citespan_test_corpus_rt.jsonl";
  save_dataset(data, path);
  auto loaded = load_dataset(path);
  REQUIRE(loaded.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(loaded[i].entity_id == data[i].entity_id);
    CHECK(loaded[i].paragraph_id == data[i].paragraph_id);
    CHECK(loaded[i].paragraph_text == data[i].paragraph_text);
    CHECK(loaded[i].citation_offset == data[i].citation_offset);
    CHECK(loaded[i].citation_type == data[i].citation_type);
    CHECK(loaded[i].citation.id == data[i].citation.id);
    CHECK(loaded[i].citation.paragraphs == data[i].citation.paragraphs);
    REQUIRE(loaded[i].gold_labels.has_value());
    CHECK(*loaded[i].gold_labels == *data[i].gold_labels);
    CHECK(loaded[i].fragments == data[i].fragments);
    REQUIRE(loaded[i].other_citation_offsets.size() ==
            data[i].other_citation_offsets.size());
    for (std::size_t o = 0; o < data[i].other_citation_offsets.size(); ++o) {
      CHECK(loaded[i].other_citation_offsets[o].id ==
            data[i].other_citation_offsets[o].id);
      CHECK(loaded[i].other_citation_offsets[o].offset ==
            data[i].other_citation_offsets[o].offset);
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("load_dataset reports precise validation errors") {
  // Gold label count disagrees with the segmentation: names the instance.
  auto bad_gold = write_temp(
      "citespan_test_bad_gold.jsonl",
      R"({"entity_id":"e1","paragraph_id":"p1","paragraph_text":"Alpha runs fast.","citation_offset":16,"other_citation_offsets":[],"citation_type":"web","citation":{"id":"c","paragraphs":[]},"gold_labels":[true,false]})"
      "\n");
  CHECK_THROWS_WITH(load_dataset(bad_gold), ContainsSubstring("e1/p1"));
  std::remove(bad_gold.c_str());

  // Malformed JSON names the line.
  auto bad_json = write_temp("citespan_test_bad_json.jsonl",
                             "{\"entity_id\": \"e1\"\nnot json\n");
  CHECK_THROWS_WITH(load_dataset(bad_json), ContainsSubstring("line 1"));
  std::remove(bad_json.c_str());

  // Missing fields name the line; blank lines do not shift numbering.
  auto missing = write_temp("citespan_test_missing.jsonl",
                            "\n{\"entity_id\":\"e1\"}\n");
  CHECK_THROWS_WITH(load_dataset(missing),
                    ContainsSubstring("line 2") &&
                        ContainsSubstring("paragraph_id"));
  std::remove(missing.c_str());

  // Offsets beyond the text name the instance.
  auto bad_offset = write_temp(
      "citespan_test_bad_offset.jsonl",
      R"({"entity_id":"e1","paragraph_id":"p1","paragraph_text":"Alpha runs fast.","citation_offset":99,"other_citation_offsets":[],"citation_type":"web","citation":{"id":"c","paragraphs":[]}})"
      "\n");
  CHECK_THROWS_WITH(load_dataset(bad_offset),
                    ContainsSubstring("citation_offset"));
  std::remove(bad_offset.c_str());

  CHECK_THROWS_AS(load_dataset("/nonexistent/citespan.jsonl"),
                  std::runtime_error);
}

TEST_CASE("fold splitting is deterministic and balanced") {
  SynthConfig cfg;
  cfg.entity_count = 134;
  cfg.paragraphs_per_entity = 1;
  auto data = generate_synthetic(cfg, 3);

  auto folds = split_folds(data, 5, 9);
  auto again = split_folds(data, 5, 9);
  CHECK(folds.entity_to_fold == again.entity_to_fold);
  CHECK(folds.k == 5);

  std::array<int, 5> sizes{};
  for (const auto& [entity, fold] : folds.entity_to_fold) {
    REQUIRE(fold >= 0);
    REQUIRE(fold < 5);
    ++sizes[fold];
  }
  int lo = 134, hi = 0;
  for (int s : sizes) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  // 134 = 5*26 + 4: four folds of 27 and one of 26.
  CHECK(lo == 26);
  CHECK(hi == 27);

  // A different seed shuffles entities differently.
  auto other = split_folds(data, 5, 10);
  CHECK(folds.entity_to_fold != other.entity_to_fold);

  CHECK(folds.fold_of(data[0].entity_id) ==
        folds.entity_to_fold.at(data[0].entity_id));
  CHECK_THROWS_AS(folds.fold_of("no-such-entity"), std::runtime_error);

  CHECK_THROWS_AS(split_folds(data, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(split_folds(data, 200, 0), std::invalid_argument);
}

TEST_CASE("ten entities in five folds land two each") {
  SynthConfig cfg;
  cfg.entity_count = 10;
  cfg.paragraphs_per_entity = 2;
  auto data = generate_synthetic(cfg, 4);
  auto folds = split_folds(data, 5, 21);
  std::array<int, 5> sizes{};
  for (const auto& [entity, fold] : folds.entity_to_fold) ++sizes[fold];
  for (int s : sizes) CHECK(s == 2);
}

TEST_CASE("fold assignments round trip through json") {
  SynthConfig cfg;
  cfg.entity_count = 9;
  cfg.paragraphs_per_entity = 1;
  auto data = generate_synthetic(cfg, 5);
  auto folds = split_folds(data, 3, 2);
  auto back = folds_from_json(folds_to_json(folds));
  CHECK(back.k == folds.k);
  CHECK(back.entity_to_fold == folds.entity_to_fold);
}

TEST_CASE("synthetic generation is byte identical per seed") {
  SynthConfig cfg;
  cfg.entity_count = 15;
  cfg.paragraphs_per_entity = 2;
  auto a = generate_synthetic(cfg, 123);
  auto b = generate_synthetic(cfg, 123);
  const std::string pa = "/tmp/citespan_test_synth_a.jsonl";
  const std::string pb = "/tmp/citespan_test_synth_b.jsonl";
  save_dataset(a, pa);
  save_dataset(b, pb);
  CHECK(slurp(pa) == slurp(pb));
  std::remove(pa.c_str());
  std::remove(pb.c_str());

  auto c = generate_synthetic(cfg, 124);
  REQUIRE(c.size() == a.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    differs |= a[i].paragraph_text != c[i].paragraph_text;
  CHECK(differs);
}

TEST_CASE("synthetic mixture is realized within five points") {
  SynthConfig cfg;
  cfg.entity_count = 100;
  cfg.paragraphs_per_entity = 5;
  auto data = generate_synthetic(cfg, 42);
  REQUIRE(data.size() == 500);

  std::array<double, kBucketCount> share{};
  for (const auto& inst : data) {
    auto gold = gold_covered_set(inst);
    auto bucket = bucketize(span_length(inst.fragments, gold));
    share[static_cast<std::size_t>(bucket)] += 1.0;
  }
  for (std::size_t b = 0; b < kBucketCount; ++b) {
    share[b] /= static_cast<double>(data.size());
    CHECK(std::abs(share[b] - cfg.mixture[b]) < 0.05);
  }
}

TEST_CASE("synthetic instances satisfy the corpus invariants") {
  SynthConfig cfg;
  cfg.entity_count = 30;
  cfg.paragraphs_per_entity = 2;
  auto data = generate_synthetic(cfg, 271);
  FeatureConfig fc;
  const auto& lexicon = ConnectiveLexicon::builtin();

  double covered_distance = 0.0, uncovered_distance = 0.0;
  std::size_t covered_n = 0, uncovered_n = 0;
  for (const auto& inst : data) {
    // Exactly one fragment carries the target marker.
    std::size_t markers = 0;
    for (const auto& f : inst.fragments.fragments)
      if (f.contains_target_citation) ++markers;
    CHECK(markers == 1);

    REQUIRE(inst.gold_labels.has_value());
    REQUIRE_FALSE(inst.citation.paragraphs.empty());
    REQUIRE_FALSE(gold_covered_set(inst).empty());

    auto feats = featurize(inst, fc, lexicon);
    for (std::size_t i = 0; i < feats.bundles.size(); ++i) {
      double d = feats.bundles[i].get("f_cite_distance");
      if ((*inst.gold_labels)[i]) {
        // Covered fragments share vocabulary with the citation document.
        CHECK(feats.bundles[i].get("f_jaccard") > 0.0);
        covered_distance += std::abs(d);
        ++covered_n;
      } else {
        uncovered_distance += std::abs(d);
        ++uncovered_n;
      }
    }
  }
  REQUIRE(covered_n > 0);
  REQUIRE(uncovered_n > 0);
  // Covered fragments sit closer to the marker on average.
  CHECK(covered_distance / covered_n < uncovered_distance / uncovered_n);
}

TEST_CASE("an all-citing-sentence mixture covers exactly that sentence") {
  SynthConfig cfg;
  cfg.entity_count = 20;
  cfg.paragraphs_per_entity = 2;
  cfg.mixture = {0.0, 1.0, 0.0, 0.0, 0.0};
  for (const auto& inst : generate_synthetic(cfg, 55)) {
    std::size_t citing =
        inst.fragments.sentence_of(inst.citing_index());
    auto [fb, fe] = inst.fragments.sentence_boundaries[citing];
    std::vector<std::size_t> expect;
    for (std::size_t i = fb; i < fe; ++i) expect.push_back(i);
    CHECK(gold_covered_set(inst) == expect);
  }
}

TEST_CASE("degenerate synthetic configurations are rejected") {
  SynthConfig cfg;
  cfg.entity_count = 0;
  CHECK_THROWS_AS(generate_synthetic(cfg, 0), std::invalid_argument);
  cfg = SynthConfig{};
  cfg.paragraphs_per_entity = 0;
  CHECK_THROWS_AS(generate_synthetic(cfg, 0), std::invalid_argument);
  cfg = SynthConfig{};
  cfg.vocabulary_size = 3;
  CHECK_THROWS_AS(generate_synthetic(cfg, 0), std::invalid_argument);
  cfg = SynthConfig{};
  cfg.mixture = {0.0, 0.0, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(generate_synthetic(cfg, 0), std::invalid_argument);
  cfg = SynthConfig{};
  cfg.mixture[1] = -0.2;
  CHECK_THROWS_AS(generate_synthetic(cfg, 0), std::invalid_argument);
}

TEST_CASE("abbreviation data file matches the builtin set") {
  auto file = AbbreviationSet::from_file(kDataDir + "/abbreviations.txt");
  auto builtin = AbbreviationSet::builtin();
  CHECK(file.size() == builtin.size());

  std::ifstream in(kDataDir + "/abbreviations.txt");
  REQUIRE(in.good());
  std::string line;
  std::size_t entries = 0;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    ++entries;
    CHECK(builtin.contains(std::string(t)));
  }
  CHECK(entries == builtin.size());
}

TEST_CASE("connective data file matches the builtin lexicon") {
  auto file = ConnectiveLexicon::from_file(kDataDir + "/connectives.txt");
  CHECK(file.canonical_text() ==
        ConnectiveLexicon::builtin().canonical_text());
}
