#pragma once

// Span evaluation: per-instance precision/recall, entity-first averaged MAP
// and recall, erroneous-span ratios, span-length buckets, skip and locality
// statistics, and report documents in machine- and human-readable form.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "citespan/corpus.hpp"

namespace citespan {

inline constexpr std::size_t kBucketCount = 5;

enum class SpanBucket {
  le_half = 0,     // <= 0.5
  half_to_one,     // (0.5, 1]
  one_to_two,      // (1, 2]
  two_to_five,     // (2, 5]
  over_five,       // > 5
};

inline const char* bucket_name(SpanBucket b) {
  switch (b) {
    case SpanBucket::le_half: return "<=0.5";
    case SpanBucket::half_to_one: return "(0.5,1]";
    case SpanBucket::one_to_two: return "(1,2]";
    case SpanBucket::two_to_five: return "(2,5]";
    case SpanBucket::over_five: return ">5";
  }
  return "?";
}

inline SpanBucket bucketize(double span) {
  if (span < 0.0) throw std::invalid_argument("bucketize: negative span");
  if (span <= 0.5) return SpanBucket::le_half;
  if (span <= 1.0) return SpanBucket::half_to_one;
  if (span <= 2.0) return SpanBucket::one_to_two;
  if (span <= 5.0) return SpanBucket::two_to_five;
  return SpanBucket::over_five;
}

// Sum over sentences of the covered fraction of that sentence's fragments.
inline double span_length(const FragmentSequence& seq,
                          const std::vector<std::size_t>& covered) {
  std::vector<double> total(seq.sentence_count(), 0.0);
  std::vector<double> hit(seq.sentence_count(), 0.0);
  for (const auto& frag : seq.fragments) total[frag.sentence_index] += 1.0;
  for (auto idx : covered)
    hit[seq.fragments.at(idx).sentence_index] += 1.0;
  double span = 0.0;
  for (std::size_t s = 0; s < total.size(); ++s)
    if (total[s] > 0.0) span += hit[s] / total[s];
  return span;
}

inline std::vector<std::size_t> gold_covered_set(const SpanInstance& inst) {
  if (!inst.gold_labels)
    throw std::invalid_argument("gold_covered_set: instance " +
                                inst.instance_id() + " has no gold labels");
  std::vector<std::size_t> covered;
  for (std::size_t i = 0; i < inst.gold_labels->size(); ++i)
    if ((*inst.gold_labels)[i]) covered.push_back(i);
  return covered;
}

inline std::pair<double, double> instance_precision_recall(
    const std::vector<std::size_t>& pred, const std::vector<std::size_t>& gold) {
  std::vector<std::size_t> inter;
  std::set_intersection(pred.begin(), pred.end(), gold.begin(), gold.end(),
                        std::back_inserter(inter));
  double precision;
  if (pred.empty())
    precision = gold.empty() ? 1.0 : 0.0;
  else
    precision = static_cast<double>(inter.size()) / pred.size();
  double recall =
      gold.empty() ? 0.0 : static_cast<double>(inter.size()) / gold.size();
  return {precision, recall};
}

struct InstanceResult {
  std::string entity_id;
  std::string instance_id;
  std::vector<std::size_t> predicted;
  std::vector<std::size_t> gold;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double extra_words = 0.0;      // (words in S' \ St) / words in St
  double extra_fragments = 0.0;  // |S' \ St| / |St|
  bool words_valid = true;       // false when the gold span has no words
  double span = 0.0;             // gold span length
  SpanBucket bucket = SpanBucket::le_half;
  std::size_t errors_before = 0;  // erroneous fragments before the marker
  std::size_t errors_after = 0;
  bool fragment_skip = false;
  bool sentence_skip = false;

  bool operator==(const InstanceResult&) const = default;
};

namespace detail {

inline std::size_t word_count_of(const std::vector<std::size_t>& set,
                                 const FragmentSequence& seq) {
  std::size_t words = 0;
  for (auto idx : set) words += tokenize(seq.fragments[idx].text).size();
  return words;
}

}  // namespace detail

inline InstanceResult evaluate_instance(const SpanInstance& inst,
                                        std::vector<std::size_t> predicted) {
  std::sort(predicted.begin(), predicted.end());
  predicted.erase(std::unique(predicted.begin(), predicted.end()),
                  predicted.end());
  InstanceResult r;
  r.entity_id = inst.entity_id;
  r.instance_id = inst.instance_id();
  r.predicted = std::move(predicted);
  r.gold = gold_covered_set(inst);
  for (auto idx : r.predicted)
    if (idx >= inst.fragments.size())
      throw std::out_of_range("evaluate_instance: predicted index " +
                              std::to_string(idx) + " out of range for " +
                              r.instance_id);

  auto [p, rec] = instance_precision_recall(r.predicted, r.gold);
  r.precision = p;
  r.recall = rec;
  r.f1 = p + rec > 0.0 ? 2.0 * p * rec / (p + rec) : 0.0;

  std::vector<std::size_t> extra;
  std::set_difference(r.predicted.begin(), r.predicted.end(), r.gold.begin(),
                      r.gold.end(), std::back_inserter(extra));
  std::size_t gold_words = detail::word_count_of(r.gold, inst.fragments);
  r.words_valid = gold_words > 0;
  if (r.words_valid)
    r.extra_words =
        static_cast<double>(detail::word_count_of(extra, inst.fragments)) /
        static_cast<double>(gold_words);
  if (!r.gold.empty())
    r.extra_fragments =
        static_cast<double>(extra.size()) / static_cast<double>(r.gold.size());

  r.span = span_length(inst.fragments, r.gold);
  r.bucket = bucketize(r.span);

  std::size_t citing = inst.citing_index();
  for (auto idx : extra) {
    if (idx < citing) ++r.errors_before;
    if (idx > citing) ++r.errors_after;
  }

  // Gold skip structure: gaps inside one sentence's covered fragment range,
  // and whole uncovered sentences between covered ones.
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> range;  // min,max
  std::map<std::size_t, std::size_t> count;
  for (auto idx : r.gold) {
    std::size_t s = inst.fragments.fragments[idx].sentence_index;
    auto it = range.find(s);
    if (it == range.end())
      range[s] = {idx, idx};
    else
      it->second = {std::min(it->second.first, idx),
                    std::max(it->second.second, idx)};
    ++count[s];
  }
  for (const auto& [s, mm] : range)
    if (mm.second - mm.first + 1 > count[s]) r.fragment_skip = true;
  if (!range.empty()) {
    std::size_t first = range.begin()->first, last = range.rbegin()->first;
    r.sentence_skip = last - first + 1 > range.size();
  }
  return r;
}

namespace detail {

inline std::map<std::string, std::vector<const InstanceResult*>>
group_by_entity(const std::vector<InstanceResult>& results) {
  std::map<std::string, std::vector<const InstanceResult*>> groups;
  for (const auto& r : results) groups[r.entity_id].push_back(&r);
  return groups;
}

// Entity-first double average of a per-instance value, with an optional
// validity filter; entities with no valid instances drop out.
template <typename Value, typename Valid>
double double_average(const std::vector<InstanceResult>& results, Value value,
                      Valid valid, std::size_t* entities_used = nullptr) {
  auto groups = group_by_entity(results);
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& [entity, items] : groups) {
    double inner = 0.0;
    std::size_t n = 0;
    for (const auto* r : items) {
      if (!valid(*r)) continue;
      inner += value(*r);
      ++n;
    }
    if (n == 0) continue;
    sum += inner / static_cast<double>(n);
    ++used;
  }
  if (entities_used) *entities_used = used;
  if (used == 0) throw std::invalid_argument("metric over empty result set");
  return sum / static_cast<double>(used);
}

inline bool always_valid(const InstanceResult&) { return true; }

}  // namespace detail

inline double map_score(const std::vector<InstanceResult>& results) {
  return detail::double_average(
      results, [](const InstanceResult& r) { return r.precision; },
      detail::always_valid);
}

inline double recall_score(const std::vector<InstanceResult>& results) {
  return detail::double_average(
      results, [](const InstanceResult& r) { return r.recall; },
      detail::always_valid);
}

inline double macro_f1(double map, double recall) {
  return map + recall > 0.0 ? 2.0 * map * recall / (map + recall) : 0.0;
}

struct ErroneousSpan {
  double delta_w_pct = 0.0;
  double delta_delta_pct = 0.0;
  std::size_t excluded_word_instances = 0;  // gold spans with zero words
};

inline ErroneousSpan erroneous_span(
    const std::vector<InstanceResult>& results) {
  ErroneousSpan out;
  std::size_t usable = 0;
  for (const auto& r : results)
    r.words_valid ? ++usable : ++out.excluded_word_instances;
  // Every instance excluded leaves nothing to average; report 0, and the
  // exclusion count carries the warning.
  out.delta_w_pct =
      usable == 0
          ? 0.0
          : 100.0 *
                detail::double_average(
                    results,
                    [](const InstanceResult& r) { return r.extra_words; },
                    [](const InstanceResult& r) { return r.words_valid; });
  out.delta_delta_pct =
      100.0 *
      detail::double_average(
          results, [](const InstanceResult& r) { return r.extra_fragments; },
          detail::always_valid);
  return out;
}

struct SkipRow {
  std::size_t instances = 0;
  double fragment_skip_pct = 0.0;
  double sentence_skip_pct = 0.0;
};

// Per bucket plus an overall row at the end. Gold-derived, system-agnostic.
inline std::array<SkipRow, kBucketCount + 1> skip_stats(
    const std::vector<InstanceResult>& results) {
  std::array<SkipRow, kBucketCount + 1> rows{};
  std::array<std::size_t, kBucketCount + 1> frag{}, sent{};
  for (const auto& r : results) {
    for (std::size_t row : {static_cast<std::size_t>(r.bucket), kBucketCount}) {
      ++rows[row].instances;
      frag[row] += r.fragment_skip;
      sent[row] += r.sentence_skip;
    }
  }
  for (std::size_t i = 0; i <= kBucketCount; ++i) {
    if (rows[i].instances == 0) continue;
    rows[i].fragment_skip_pct = 100.0 * frag[i] / rows[i].instances;
    rows[i].sentence_skip_pct = 100.0 * sent[i] / rows[i].instances;
  }
  return rows;
}

struct LocalityStats {
  double pct_before = 0.0;
  double pct_after = 0.0;
  bool zero_errors = true;
};

inline LocalityStats locality_stats(const std::vector<InstanceResult>& results) {
  std::size_t before = 0, after = 0;
  for (const auto& r : results) {
    before += r.errors_before;
    after += r.errors_after;
  }
  LocalityStats out;
  if (before + after == 0) return out;
  out.zero_errors = false;
  out.pct_before = 100.0 * before / static_cast<double>(before + after);
  out.pct_after = 100.0 * after / static_cast<double>(before + after);
  return out;
}

struct BucketMetrics {
  std::size_t instances = 0;
  double map = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double delta_w_pct = 0.0;
  double delta_delta_pct = 0.0;
};

inline BucketMetrics metrics_over(const std::vector<InstanceResult>& results) {
  BucketMetrics m;
  m.instances = results.size();
  if (results.empty()) return m;
  m.map = map_score(results);
  m.recall = recall_score(results);
  m.f1 = macro_f1(m.map, m.recall);
  ErroneousSpan err = erroneous_span(results);
  m.delta_w_pct = err.delta_w_pct;
  m.delta_delta_pct = err.delta_delta_pct;
  return m;
}

struct SystemEval {
  BucketMetrics overall;
  std::array<BucketMetrics, kBucketCount> buckets{};
  LocalityStats locality;
  std::size_t excluded_word_instances = 0;
  std::vector<InstanceResult> instances;
};

inline SystemEval build_system_eval(std::vector<InstanceResult> results) {
  if (results.empty())
    throw std::invalid_argument("build_system_eval: no results");
  std::sort(results.begin(), results.end(),
            [](const InstanceResult& a, const InstanceResult& b) {
              return a.instance_id < b.instance_id;
            });
  SystemEval eval;
  eval.overall = metrics_over(results);
  eval.excluded_word_instances =
      erroneous_span(results).excluded_word_instances;
  for (std::size_t b = 0; b < kBucketCount; ++b) {
    std::vector<InstanceResult> subset;
    for (const auto& r : results)
      if (static_cast<std::size_t>(r.bucket) == b) subset.push_back(r);
    if (!subset.empty()) eval.buckets[b] = metrics_over(subset);
  }
  eval.locality = locality_stats(results);
  eval.instances = std::move(results);
  return eval;
}

// Mean per-entity F1 values, keyed by entity, for significance testing.
inline std::map<std::string, double> per_entity_f1(
    const std::vector<InstanceResult>& results) {
  std::map<std::string, double> out;
  for (const auto& [entity, items] : detail::group_by_entity(results)) {
    double p = 0.0, r = 0.0;
    for (const auto* item : items) {
      p += item->precision;
      r += item->recall;
    }
    p /= items.size();
    r /= items.size();
    out[entity] = macro_f1(p, r);
  }
  return out;
}

namespace detail {

// Regularized incomplete beta via Lentz's continued fraction.
inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double log_beta = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                    a * std::log(x) + b * std::log(1.0 - x);
  bool swap = x > (a + 1.0) / (a + b + 2.0);
  if (swap) {
    std::swap(a, b);
    x = 1.0 - x;
    log_beta = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
               a * std::log(x) + b * std::log(1.0 - x);
  }
  const double tiny = 1e-300;
  double c = 1.0, d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    double m2 = 2.0 * m;
    double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + num * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + num * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-12) break;
  }
  double value = std::exp(log_beta) * h / a;
  return swap ? 1.0 - value : value;
}

}  // namespace detail

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t n = 0;
  bool degenerate = false;  // zero variance in the differences
};

// Approximate paired t-test over aligned per-entity scores.
inline TTestResult paired_t_test(const std::vector<double>& a,
                                 const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("paired_t_test: length mismatch");
  if (a.size() < 2)
    throw std::invalid_argument("paired_t_test: needs at least 2 pairs");
  TTestResult out;
  out.n = a.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(a.size());
  double var = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(a.size() - 1);
  if (var <= 0.0) {
    out.degenerate = true;
    out.p = mean == 0.0 ? 1.0 : 0.0;
    out.t = 0.0;
    return out;
  }
  double df = static_cast<double>(a.size() - 1);
  out.t = mean / std::sqrt(var / static_cast<double>(a.size()));
  out.p = detail::incomplete_beta(df / 2.0, 0.5, df / (df + out.t * out.t));
  return out;
}

struct SignificanceRow {
  std::string system_a;
  std::string system_b;
  TTestResult test;
};

struct AggregateReport {
  std::size_t entity_count = 0;
  std::size_t instance_count = 0;
  std::size_t skipped_empty_gold = 0;
  std::array<std::size_t, kBucketCount> bucket_counts{};
  std::array<SkipRow, kBucketCount + 1> skips{};
  std::map<std::string, SystemEval> systems;
  std::vector<SignificanceRow> significance;
};

inline AggregateReport build_report(
    const std::map<std::string, std::vector<InstanceResult>>& system_results,
    std::size_t skipped_empty_gold = 0) {
  if (system_results.empty())
    throw std::invalid_argument("build_report: no systems");
  AggregateReport report;
  report.skipped_empty_gold = skipped_empty_gold;

  const auto& first = system_results.begin()->second;
  report.instance_count = first.size();
  report.entity_count = detail::group_by_entity(first).size();
  for (const auto& r : first)
    ++report.bucket_counts[static_cast<std::size_t>(r.bucket)];
  report.skips = skip_stats(first);

  for (const auto& [name, results] : system_results) {
    if (results.size() != report.instance_count)
      throw std::invalid_argument("build_report: system " + name +
                                  " has mismatched instance count");
    report.systems[name] = build_system_eval(results);
  }

  if (report.systems.size() >= 2 && report.entity_count >= 2) {
    std::vector<std::string> names;
    for (const auto& [name, _] : report.systems) names.push_back(name);
    std::map<std::string, std::map<std::string, double>> entity_f1;
    for (const auto& name : names)
      entity_f1[name] = per_entity_f1(report.systems[name].instances);
    for (std::size_t i = 0; i < names.size(); ++i)
      for (std::size_t j = i + 1; j < names.size(); ++j) {
        std::vector<double> a, b;
        for (const auto& [entity, f1] : entity_f1[names[i]]) {
          auto it = entity_f1[names[j]].find(entity);
          if (it == entity_f1[names[j]].end()) continue;
          a.push_back(f1);
          b.push_back(it->second);
        }
        if (a.size() < 2) continue;
        report.significance.push_back(
            {names[i], names[j], paired_t_test(a, b)});
      }
  }
  return report;
}

// Serialization. Reports round-trip exactly so re-rendering is byte-stable.

inline json instance_result_to_json(const InstanceResult& r) {
  return json{{"entity_id", r.entity_id},
              {"instance_id", r.instance_id},
              {"predicted", r.predicted},
              {"gold", r.gold},
              {"precision", r.precision},
              {"recall", r.recall},
              {"f1", r.f1},
              {"extra_words", r.extra_words},
              {"extra_fragments", r.extra_fragments},
              {"words_valid", r.words_valid},
              {"span", r.span},
              {"bucket", bucket_name(r.bucket)},
              {"errors_before", r.errors_before},
              {"errors_after", r.errors_after},
              {"fragment_skip", r.fragment_skip},
              {"sentence_skip", r.sentence_skip}};
}

inline SpanBucket bucket_from_name(const std::string& name) {
  for (std::size_t b = 0; b < kBucketCount; ++b)
    if (name == bucket_name(static_cast<SpanBucket>(b)))
      return static_cast<SpanBucket>(b);
  throw std::runtime_error("unknown bucket name: " + name);
}

inline InstanceResult instance_result_from_json(const json& j) {
  InstanceResult r;
  r.entity_id = j.at("entity_id").get<std::string>();
  r.instance_id = j.at("instance_id").get<std::string>();
  r.predicted = j.at("predicted").get<std::vector<std::size_t>>();
  r.gold = j.at("gold").get<std::vector<std::size_t>>();
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.extra_words = j.at("extra_words").get<double>();
  r.extra_fragments = j.at("extra_fragments").get<double>();
  r.words_valid = j.at("words_valid").get<bool>();
  r.span = j.at("span").get<double>();
  r.bucket = bucket_from_name(j.at("bucket").get<std::string>());
  r.errors_before = j.at("errors_before").get<std::size_t>();
  r.errors_after = j.at("errors_after").get<std::size_t>();
  r.fragment_skip = j.at("fragment_skip").get<bool>();
  r.sentence_skip = j.at("sentence_skip").get<bool>();
  return r;
}

inline json bucket_metrics_to_json(const BucketMetrics& m) {
  return json{{"instances", m.instances},     {"map", m.map},
              {"recall", m.recall},           {"f1", m.f1},
              {"delta_w_pct", m.delta_w_pct}, {"delta_delta_pct",
                                               m.delta_delta_pct}};
}

inline BucketMetrics bucket_metrics_from_json(const json& j) {
  BucketMetrics m;
  m.instances = j.at("instances").get<std::size_t>();
  m.map = j.at("map").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.delta_w_pct = j.at("delta_w_pct").get<double>();
  m.delta_delta_pct = j.at("delta_delta_pct").get<double>();
  return m;
}

inline json report_to_json(const AggregateReport& report) {
  json j;
  j["format"] = "citespan-report";
  j["version"] = 1;
  j["entity_count"] = report.entity_count;
  j["instance_count"] = report.instance_count;
  j["skipped_empty_gold"] = report.skipped_empty_gold;
  json buckets = json::object();
  for (std::size_t b = 0; b < kBucketCount; ++b)
    buckets[bucket_name(static_cast<SpanBucket>(b))] = report.bucket_counts[b];
  j["bucket_counts"] = std::move(buckets);
  json skips = json::object();
  for (std::size_t b = 0; b <= kBucketCount; ++b) {
    const char* key =
        b == kBucketCount ? "overall" : bucket_name(static_cast<SpanBucket>(b));
    skips[key] = {{"instances", report.skips[b].instances},
                  {"fragment_skip_pct", report.skips[b].fragment_skip_pct},
                  {"sentence_skip_pct", report.skips[b].sentence_skip_pct}};
  }
  j["skips"] = std::move(skips);
  json systems = json::object();
  for (const auto& [name, eval] : report.systems) {
    json s;
    s["overall"] = bucket_metrics_to_json(eval.overall);
    json per_bucket = json::object();
    for (std::size_t b = 0; b < kBucketCount; ++b)
      per_bucket[bucket_name(static_cast<SpanBucket>(b))] =
          bucket_metrics_to_json(eval.buckets[b]);
    s["buckets"] = std::move(per_bucket);
    s["locality"] = {{"pct_before", eval.locality.pct_before},
                     {"pct_after", eval.locality.pct_after},
                     {"zero_errors", eval.locality.zero_errors}};
    s["excluded_word_instances"] = eval.excluded_word_instances;
    json instances = json::array();
    for (const auto& r : eval.instances)
      instances.push_back(instance_result_to_json(r));
    s["instances"] = std::move(instances);
    systems[name] = std::move(s);
  }
  j["systems"] = std::move(systems);
  json significance = json::array();
  for (const auto& row : report.significance)
    significance.push_back({{"system_a", row.system_a},
                            {"system_b", row.system_b},
                            {"t", row.test.t},
                            {"p", row.test.p},
                            {"n", row.test.n},
                            {"degenerate", row.test.degenerate},
                            {"note", "approximate"}});
  j["significance"] = std::move(significance);
  return j;
}

inline AggregateReport report_from_json(const json& j) {
  if (j.value("format", "") != "citespan-report")
    throw std::runtime_error("not a report file (missing format tag)");
  if (j.value("version", 0) != 1)
    throw std::runtime_error("unsupported report version");
  AggregateReport report;
  report.entity_count = j.at("entity_count").get<std::size_t>();
  report.instance_count = j.at("instance_count").get<std::size_t>();
  report.skipped_empty_gold = j.at("skipped_empty_gold").get<std::size_t>();
  for (std::size_t b = 0; b < kBucketCount; ++b)
    report.bucket_counts[b] =
        j.at("bucket_counts").at(bucket_name(static_cast<SpanBucket>(b)))
            .get<std::size_t>();
  for (std::size_t b = 0; b <= kBucketCount; ++b) {
    const char* key =
        b == kBucketCount ? "overall" : bucket_name(static_cast<SpanBucket>(b));
    const auto& row = j.at("skips").at(key);
    report.skips[b].instances = row.at("instances").get<std::size_t>();
    report.skips[b].fragment_skip_pct =
        row.at("fragment_skip_pct").get<double>();
    report.skips[b].sentence_skip_pct =
        row.at("sentence_skip_pct").get<double>();
  }
  for (const auto& [name, s] : j.at("systems").items()) {
    SystemEval eval;
    eval.overall = bucket_metrics_from_json(s.at("overall"));
    for (std::size_t b = 0; b < kBucketCount; ++b)
      eval.buckets[b] = bucket_metrics_from_json(
          s.at("buckets").at(bucket_name(static_cast<SpanBucket>(b))));
    eval.locality.pct_before = s.at("locality").at("pct_before").get<double>();
    eval.locality.pct_after = s.at("locality").at("pct_after").get<double>();
    eval.locality.zero_errors =
        s.at("locality").at("zero_errors").get<bool>();
    eval.excluded_word_instances =
        s.at("excluded_word_instances").get<std::size_t>();
    for (const auto& r : s.at("instances"))
      eval.instances.push_back(instance_result_from_json(r));
    report.systems[name] = std::move(eval);
  }
  for (const auto& row : j.at("significance")) {
    SignificanceRow s;
    s.system_a = row.at("system_a").get<std::string>();
    s.system_b = row.at("system_b").get<std::string>();
    s.test.t = row.at("t").get<double>();
    s.test.p = row.at("p").get<double>();
    s.test.n = row.at("n").get<std::size_t>();
    s.test.degenerate = row.at("degenerate").get<bool>();
    report.significance.push_back(std::move(s));
  }
  return report;
}

namespace detail {

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

inline std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace detail

// Plain-text tables. With merge_tail the (2,5] and >5 columns collapse into
// one ">2" row recomputed from the stored per-instance results.
inline std::string render_report_text(const AggregateReport& report,
                                      bool merge_tail = false) {
  using detail::fixed;
  using detail::pad;
  std::string out;
  out += "citation span evaluation\n";
  out += "entities: " + std::to_string(report.entity_count) +
         "  instances: " + std::to_string(report.instance_count) +
         "  skipped (empty gold): " +
         std::to_string(report.skipped_empty_gold) + "\n\n";

  std::vector<std::pair<std::string, std::vector<std::size_t>>> bucket_rows;
  for (std::size_t b = 0; b < kBucketCount; ++b)
    bucket_rows.push_back({bucket_name(static_cast<SpanBucket>(b)), {b}});
  if (merge_tail) {
    bucket_rows.resize(3);
    bucket_rows.push_back({">2", {3, 4}});
  }

  out += "gold span distribution\n";
  out += pad("bucket", 10) + pad("count", 8) + "share\n";
  for (const auto& [label, ids] : bucket_rows) {
    std::size_t count = 0;
    for (auto b : ids) count += report.bucket_counts[b];
    double share = report.instance_count
                       ? 100.0 * count / report.instance_count
                       : 0.0;
    out += pad(label, 10) + pad(std::to_string(count), 8) +
           fixed(share, 1) + "%\n";
  }
  out += "\n";

  out += "gold skip statistics\n";
  out += pad("bucket", 10) + pad("instances", 11) + pad("frag-skip%", 12) +
         "sent-skip%\n";
  for (std::size_t b = 0; b <= kBucketCount; ++b) {
    const char* key =
        b == kBucketCount ? "overall" : bucket_name(static_cast<SpanBucket>(b));
    out += pad(key, 10) + pad(std::to_string(report.skips[b].instances), 11) +
           pad(fixed(report.skips[b].fragment_skip_pct, 1), 12) +
           fixed(report.skips[b].sentence_skip_pct, 1) + "\n";
  }
  out += "\n";

  out += "system results\n";
  out += pad("system", 9) + pad("MAP", 8) + pad("R", 8) + pad("F1", 8) +
         pad("dW%", 9) + "dD%\n";
  for (const auto& [name, eval] : report.systems) {
    out += pad(name, 9) + pad(fixed(eval.overall.map, 4), 8) +
           pad(fixed(eval.overall.recall, 4), 8) +
           pad(fixed(eval.overall.f1, 4), 8) +
           pad(fixed(eval.overall.delta_w_pct, 1), 9) +
           fixed(eval.overall.delta_delta_pct, 1) + "\n";
  }
  out += "\n";

  for (const auto& [name, eval] : report.systems) {
    out += "per-bucket results: " + name + "\n";
    out += pad("bucket", 10) + pad("n", 6) + pad("MAP", 8) + pad("R", 8) +
           pad("F1", 8) + pad("dW%", 9) + "dD%\n";
    for (const auto& [label, ids] : bucket_rows) {
      BucketMetrics m;
      if (ids.size() == 1) {
        m = eval.buckets[ids[0]];
      } else {
        std::vector<InstanceResult> subset;
        for (const auto& r : eval.instances)
          if (std::find(ids.begin(), ids.end(),
                        static_cast<std::size_t>(r.bucket)) != ids.end())
            subset.push_back(r);
        if (!subset.empty()) m = metrics_over(subset);
      }
      out += pad(label, 10) + pad(std::to_string(m.instances), 6);
      if (m.instances == 0) {
        out += "-\n";
        continue;
      }
      out += pad(fixed(m.map, 4), 8) + pad(fixed(m.recall, 4), 8) +
             pad(fixed(m.f1, 4), 8) + pad(fixed(m.delta_w_pct, 1), 9) +
             fixed(m.delta_delta_pct, 1) + "\n";
    }
    out += "\n";
  }

  out += "error locality (share of erroneous fragments)\n";
  out += pad("system", 9) + pad("before%", 9) + "after%\n";
  for (const auto& [name, eval] : report.systems) {
    if (eval.locality.zero_errors) {
      out += pad(name, 9) + "no errors\n";
    } else {
      out += pad(name, 9) + pad(fixed(eval.locality.pct_before, 1), 9) +
             fixed(eval.locality.pct_after, 1) + "\n";
    }
  }

  if (!report.significance.empty()) {
    out += "\nsignificance (approximate paired t-test, per-entity F1)\n";
    out += pad("pair", 18) + pad("t", 10) + pad("p", 10) + "n\n";
    for (const auto& row : report.significance) {
      out += pad(row.system_a + " vs " + row.system_b, 18) +
             pad(fixed(row.test.t, 3), 10) + pad(fixed(row.test.p, 4), 10) +
             std::to_string(row.test.n) + "\n";
    }
  }
  return out;
}

inline void save_report(const AggregateReport& report,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << report_to_json(report).dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline AggregateReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("report file " + path + ": " + e.what());
  }
  return report_from_json(j);
}

}  // namespace citespan
