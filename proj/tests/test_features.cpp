#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "citespan/corpus.hpp"
#include "citespan/dates.hpp"
#include "citespan/discourse.hpp"
#include "citespan/features.hpp"

using namespace citespan;
using Catch::Approx;

namespace {

const std::string kRow1 =
    "Obama was born on August 4, 1961, at Kapi'olani Maternity and "
    "Gynecological Hospital in Honolulu; he is the first president of the "
    "United States to have been born in Hawaii.";

SpanInstance make_instance(const std::string& paragraph_text,
                           std::size_t citation_offset,
                           std::vector<std::string> citation_paragraphs,
                           std::vector<CitationMark> others = {}) {
  SpanInstance inst;
  inst.entity_id = "e1";
  inst.paragraph_id = "p1";
  inst.paragraph_text = paragraph_text;
  inst.citation_offset = citation_offset;
  inst.other_citation_offsets = std::move(others);
  inst.citation_type = CitationType::news;
  inst.citation.id = "c1";
  inst.citation.paragraphs = std::move(citation_paragraphs);
  rebuild_fragments(inst, AbbreviationSet::builtin());
  return inst;
}

}  // namespace

TEST_CASE("window_model normalizes term frequencies") {
  std::vector<std::string> seven = {"t0", "t1", "t2", "t3", "t4", "t5", "t6"};
  auto m = window_model(seven, 3);
  REQUIRE(m.distribution.size() == 7);
  for (const auto& [_, p] : m.distribution) CHECK(p == Approx(1.0 / 7.0));

  std::vector<std::string> aab = {"a", "a", "b"};
  m = window_model(aab, 0);
  CHECK(m.prob("a") == Approx(2.0 / 3.0));
  CHECK(m.prob("b") == Approx(1.0 / 3.0));
}

TEST_CASE("window_model truncates at boundaries") {
  std::vector<std::string> tokens = {"w0", "w1", "w2", "w3", "w4",
                                     "w5", "w6", "w7", "w8"};
  auto m = window_model(tokens, 0);
  std::set<std::string> support;
  for (const auto& [t, _] : m.distribution) support.insert(t);
  CHECK(support == std::set<std::string>{"w0", "w1", "w2", "w3"});

  m = window_model(tokens, 4);
  CHECK(m.distribution.size() == 7);
}

TEST_CASE("window_model smoothing keeps a strictly positive distribution") {
  std::vector<std::string> tokens = {"a", "a", "b", "c"};
  auto m = window_model(tokens, 1, 3, 1e-6);
  CHECK(m.total() == Approx(1.0).margin(1e-9));
  for (const auto& [_, p] : m.distribution) CHECK(p > 0.0);
}

TEST_CASE("lm_divergence is zero on identical text") {
  CitationDocument cite{"c", {"the quick brown fox jumps"}};
  auto kl = lm_divergence("the quick brown fox jumps", cite);
  REQUIRE(kl.has_value());
  CHECK(*kl >= 0.0);
  CHECK(*kl <= 1e-6);
}

TEST_CASE("lm_divergence picks the most similar paragraph") {
  // Hand evaluation for 3-token texts: every +/-3 window spans the whole
  // text, so the aggregate model is the uniform unigram distribution.
  const double eps = 1e-6;
  auto uniform_kl = [eps](int shared, int only_a, int only_b) {
    // KL between uniform distributions over 3 tokens with the given
    // overlap pattern, smoothed over the union vocabulary.
    double v = static_cast<double>(shared + only_a + only_b);
    double z = 1.0 + eps * v;
    double in_a = (1.0 / 3.0 + eps) / z;
    double out = eps / z;
    double kl = 0.0;
    for (int i = 0; i < shared; ++i) kl += in_a * std::log(1.0);
    for (int i = 0; i < only_a; ++i) kl += in_a * std::log(in_a / out);
    for (int i = 0; i < only_b; ++i) kl += out * std::log(out / in_a);
    return kl;
  };

  CitationDocument cite{"c", {"x y z", "a b d"}};
  auto kl = lm_divergence("a b c", cite, eps);
  REQUIRE(kl.has_value());
  double kl_disjoint = uniform_kl(0, 3, 3);
  double kl_shared = uniform_kl(2, 1, 1);
  CHECK(kl_shared < kl_disjoint);
  CHECK(*kl == Approx(kl_shared).epsilon(1e-9));
}

TEST_CASE("smoothed_kl is asymmetric") {
  auto a = aggregate_window_model(tokenize("a a a b"));
  auto b = aggregate_window_model(tokenize("a b"));
  double ab = smoothed_kl(a, b, 1e-6);
  double ba = smoothed_kl(b, a, 1e-6);
  CHECK(ab > 0.0);
  CHECK(ba > 0.0);
  CHECK(ab != Approx(ba).epsilon(1e-6));
}

TEST_CASE("lm_divergence missing cases") {
  CitationDocument cite{"c", {"some words here"}};
  CHECK_FALSE(lm_divergence("...", cite).has_value());
  CitationDocument empty{"c", {}};
  CHECK_FALSE(lm_divergence("words", empty).has_value());
  CitationDocument blank{"c", {"   "}};
  CHECK_FALSE(lm_divergence("words", blank).has_value());
}

TEST_CASE("jaccard_feature set arithmetic") {
  CHECK(jaccard_feature("b a", CitationDocument{"c", {"a b"}}) == Approx(1.0));
  CHECK(jaccard_feature("a b", CitationDocument{"c", {"b c", "x"}}) ==
        Approx(1.0 / 3.0));
  CHECK(jaccard_feature("a b", CitationDocument{"c", {"a b c d"}}) ==
        Approx(0.5));
  CHECK(jaccard_feature("a b", CitationDocument{"c", {""}}) == 0.0);
  CHECK(jaccard_feature("", CitationDocument{"c", {"a"}}) == 0.0);
}

TEST_CASE("jaccard_feature bounds and symmetry") {
  std::vector<std::string> texts = {"a b c", "c d", "x", "a a a", "b c d e"};
  for (const auto& t1 : texts)
    for (const auto& t2 : texts) {
      double j12 = jaccard_feature(t1, CitationDocument{"c", {t2}});
      double j21 = jaccard_feature(t2, CitationDocument{"c", {t1}});
      CHECK(j12 >= 0.0);
      CHECK(j12 <= 1.0);
      CHECK(j12 == Approx(j21));
    }
}

TEST_CASE("citation_length_feature counts sentences over paragraphs") {
  auto abbrevs = AbbreviationSet::builtin();
  CitationDocument cite{"c", {"Apples grow. Botany is neat. Cedar too."}};
  auto len = citation_length_feature(cite, abbrevs);
  REQUIRE(len.has_value());
  CHECK(*len == 3.0);

  cite.paragraphs = {"One sentence here.", "Two more. Follow here."};
  CHECK(*citation_length_feature(cite, abbrevs) == 3.0);

  CHECK_FALSE(citation_length_feature({"c", {}}, abbrevs).has_value());
  CHECK_FALSE(citation_length_feature({"c", {" ", ""}}, abbrevs).has_value());
}

TEST_CASE("structural_features emits the six layout features") {
  std::size_t c1 = kRow1.find("1961") + 4;
  std::size_t c2 = kRow1.find("Honolulu") + 8;
  auto inst = make_instance(kRow1, c2, {"content"}, {{"c1", c1}});
  const auto& seq = inst.fragments;
  std::size_t cite_idx = inst.citing_index();
  REQUIRE(cite_idx == 2);

  auto self = structural_features(seq, 2, cite_idx);
  CHECK(self.get("f_cite_distance") == 0.0);
  CHECK(self.get("f_same_sent_as_cite") == 1.0);
  CHECK(self.get("f_num_sentences") == 1.0);
  CHECK(self.get("f_frag_len") ==
        static_cast<double>(seq.fragments[2].text.size()));
  CHECK(self.get("f_other_cite") == 0.0);

  auto before = structural_features(seq, 0, cite_idx);
  CHECK(before.get("f_cite_distance") == -2.0);
  CHECK(before.get("f_same_sent_as_prev") == 0.0);

  auto marker_frag = structural_features(seq, 1, cite_idx);
  CHECK(marker_frag.get("f_other_cite") == 1.0);
  CHECK(marker_frag.get("f_same_sent_as_prev") == 1.0);
}

TEST_CASE("discourse connective lookup") {
  const auto& lex = ConnectiveLexicon::builtin();
  CHECK(lex.match_fragment("However, things changed") ==
        DiscourseClass::comparison);
  CHECK(lex.match_fragment("In addition, more came") ==
        DiscourseClass::expansion);
  CHECK(lex.match_fragment("as soon as the war ended") ==
        DiscourseClass::temporal);
  CHECK(lex.match_fragment("because of that outcome") ==
        DiscourseClass::contingency);
  CHECK(lex.match_fragment("plain narrative text") == DiscourseClass::none);
  // Longest match wins over a shorter prefix entry.
  CHECK(lex.match_fragment("even though it rained") ==
        DiscourseClass::comparison);
  // Connectives embedded mid-fragment do not count.
  CHECK(lex.match_fragment("they watched however long") ==
        DiscourseClass::none);
}

TEST_CASE("date extraction covers the four patterns") {
  auto one = extract_dates("met on 4 August 1961 there");
  REQUIRE(one.size() == 1);
  CHECK(one[0].date == CalendarDate{1961, 8, 4});
  CHECK(one[0].pattern == 1);

  auto two = extract_dates("logged 04 08 1961 as received");
  REQUIRE(two.size() == 1);
  CHECK(two[0].date == CalendarDate{1961, 8, 4});
  CHECK(two[0].pattern == 2);

  auto two_dots = extract_dates("4.8.1961");
  REQUIRE(two_dots.size() == 1);
  CHECK(two_dots[0].date == CalendarDate{1961, 8, 4});

  auto three = extract_dates("born on August 4, 1961, in town");
  REQUIRE(three.size() == 1);
  CHECK(three[0].date == CalendarDate{1961, 8, 4});
  CHECK(three[0].pattern == 3);

  auto four = extract_dates("the 1961 campaign");
  REQUIRE(four.size() == 1);
  CHECK(four[0].date == CalendarDate{1961, 1, 1});
  CHECK(four[0].pattern == 4);

  CHECK(extract_dates("no dates here").empty());
}

TEST_CASE("date extraction handles partial and two-digit forms") {
  auto partial = extract_dates("during August 2016 only");
  REQUIRE(partial.size() == 1);
  CHECK(partial[0].date == CalendarDate{2016, 8, 1});

  auto pivot_old = extract_dates("August 4, 61");
  REQUIRE(pivot_old.size() == 1);
  CHECK(pivot_old[0].date == CalendarDate{1961, 8, 4});

  auto pivot_new = extract_dates("March 5, 07");
  REQUIRE(pivot_new.size() == 1);
  CHECK(pivot_new[0].date == CalendarDate{2007, 3, 5});
}

TEST_CASE("date extraction validates days") {
  auto feb = extract_dates("February 30, 2001");
  REQUIRE(feb.size() == 1);  // the year still matches on its own
  CHECK(feb[0].date == CalendarDate{2001, 1, 1});

  auto leap = extract_dates("February 29, 2000");
  REQUIRE(leap.size() == 1);
  CHECK(leap[0].date == CalendarDate{2000, 2, 29});

  auto nonleap = extract_dates("February 29, 1900");
  REQUIRE(nonleap.size() == 1);
  CHECK(nonleap[0].date == CalendarDate{1900, 1, 1});
}

TEST_CASE("date extraction precedence and ordering") {
  // DD MM YYYY outranks MM DD YY(YY) on ambiguous all-numeric triples.
  auto ambiguous = extract_dates("04 05 1961");
  REQUIRE(ambiguous.size() == 1);
  CHECK(ambiguous[0].date == CalendarDate{1961, 5, 4});
  CHECK(ambiguous[0].pattern == 2);

  // The full date consumes its words; the standalone year rule cannot
  // re-match inside it.
  auto seq = extract_dates("from 1998, and 4 August 1961, to 2002.");
  REQUIRE(seq.size() == 3);
  CHECK(seq[0].date == CalendarDate{1998, 1, 1});
  CHECK(seq[1].date == CalendarDate{1961, 8, 4});
  CHECK(seq[2].date == CalendarDate{2002, 1, 1});
  CHECK(seq[0].position < seq[1].position);
  CHECK(seq[1].position < seq[2].position);

  auto sentence_row = extract_dates(
      "He was reelected to the Illinois Senate in 1998, and again in 2002.");
  REQUIRE(sentence_row.size() == 2);
  CHECK(sentence_row[0].date == CalendarDate{1998, 1, 1});
  CHECK(sentence_row[1].date == CalendarDate{2002, 1, 1});

  auto multi_row = extract_dates("On May 25, 2011, Obama spoke");
  REQUIRE(multi_row.size() == 1);
  CHECK(multi_row[0].date == CalendarDate{2011, 5, 25});
}

TEST_CASE("serial dates and temporal gaps") {
  CHECK(days_from_civil(1970, 1, 1) == 0);
  CHECK(days_from_civil(1970, 1, 2) == 1);
  // 1961-08-04 to 1962-01-01: 27 + 30 + 31 + 30 + 31 + 1 days.
  CHECK(serial_day({1962, 1, 1}) - serial_day({1961, 8, 4}) == 150);

  auto zero = temporal_gap("on August 4, 1961 it began",
                           "dated 4 August 1961 exactly");
  REQUIRE(zero.has_value());
  CHECK(*zero == 0.0);

  auto gap = temporal_gap("August 4, 1961", "then in 1962");
  REQUIRE(gap.has_value());
  CHECK(*gap == 150.0);

  CHECK_FALSE(temporal_gap("August 4, 1961", "no date").has_value());
  CHECK_FALSE(temporal_gap("no date", "August 4, 1961").has_value());

  // Minimum over all pairs.
  auto min_gap = temporal_gap("in 1998 and 2002", "late 2002");
  REQUIRE(min_gap.has_value());
  CHECK(*min_gap == 0.0);
}

TEST_CASE("featurize produces aligned bundles with a shared key set") {
  std::size_t c2 = kRow1.find("Honolulu") + 8;
  auto inst = make_instance(kRow1, c2,
                            {"Obama was born in Honolulu in 1961.",
                             "Unrelated trivia paragraph."});
  FeatureConfig config;
  auto feats = featurize(inst, config, ConnectiveLexicon::builtin());
  REQUIRE(feats.bundles.size() == inst.fragments.size());

  std::set<std::string> keys;
  for (const auto& [k, _] : feats.bundles[0].values) keys.insert(k);
  auto registry = feature_registry(config);
  CHECK(keys == std::set<std::string>(registry.begin(), registry.end()));
  for (const auto& b : feats.bundles) {
    std::set<std::string> other;
    for (const auto& [k, _] : b.values) other.insert(k);
    CHECK(other == keys);
  }

  // Determinism: same inputs, same bundles.
  auto again = featurize(inst, config, ConnectiveLexicon::builtin());
  CHECK(again.bundles == feats.bundles);
  CHECK(again.config_fingerprint == feats.config_fingerprint);
}

TEST_CASE("featurize ablation drops the citation family") {
  std::size_t c2 = kRow1.find("Honolulu") + 8;
  auto inst = make_instance(kRow1, c2, {"Some cited content."});
  FeatureConfig config;
  config.citation = false;
  auto feats = featurize(inst, config, ConnectiveLexicon::builtin());
  for (const auto& b : feats.bundles) {
    CHECK(b.values.find("f_lm") == b.values.end());
    CHECK(b.values.find("f_jaccard") == b.values.end());
    CHECK(b.values.find("f_cite_len") == b.values.end());
  }
  FeatureConfig full;
  CHECK(config_fingerprint(config, ConnectiveLexicon::builtin()) !=
        config_fingerprint(full, ConnectiveLexicon::builtin()));
}

TEST_CASE("featurize single-fragment instance") {
  auto inst = make_instance("One single fragment only", 3, {"content here"});
  auto feats = featurize(inst, FeatureConfig{}, ConnectiveLexicon::builtin());
  REQUIRE(feats.bundles.size() == 1);
  CHECK(feats.bundles[0].get("f_cite_distance") == 0.0);
  CHECK(feats.bundles[0].get("f_temporal_gap_missing") == 1.0);
}

TEST_CASE("quantile binner fits edges on given data only") {
  FeaturizedSequence seq;
  for (int i = 0; i < 16; ++i) {
    FeatureBundle b;
    b.set("f_frag_len", static_cast<double>(i));
    seq.bundles.push_back(b);
  }
  QuantileBinner binner(8);
  binner.fit({&seq}, {"f_frag_len"});
  REQUIRE(binner.fitted());

  // 16 sorted values 0..15, 8 bins: edges at ranks 2,4,...,14.
  CHECK(binner.bin_of("f_frag_len", 0.0) == 0);
  CHECK(binner.bin_of("f_frag_len", 15.0) == 7);
  CHECK(binner.bin_of("f_frag_len", -100.0) == 0);
  CHECK(binner.bin_of("f_frag_len", 1e9) == 7);
  CHECK(binner.bin_of("unknown", 1.0) == -1);

  FeatureBundle b;
  b.set("f_frag_len", 5.0);
  binner.apply(b);
  double indicator_sum = 0.0;
  for (int q = 0; q < 8; ++q)
    indicator_sum += b.get(QuantileBinner::indicator_name("f_frag_len", q));
  CHECK(indicator_sum == 1.0);
  CHECK(b.get(QuantileBinner::indicator_name(
            "f_frag_len", binner.bin_of("f_frag_len", 5.0))) == 1.0);

  auto round_trip = QuantileBinner::from_json_value(binner.to_json_value());
  CHECK(round_trip == binner);
}

TEST_CASE("binned feature list follows the active families") {
  FeatureConfig config;
  auto all = binned_feature_names(config);
  CHECK(std::find(all.begin(), all.end(), "f_lm") != all.end());
  config.citation = false;
  auto ablated = binned_feature_names(config);
  CHECK(std::find(ablated.begin(), ablated.end(), "f_lm") == ablated.end());
  CHECK(std::find(ablated.begin(), ablated.end(), "f_frag_len") !=
        ablated.end());
}
