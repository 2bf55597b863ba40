#pragma once

// Synthetic corpus generator for desk-scale experiments. Paragraphs are
// built from pseudo-word vocabularies so that covered fragments share tokens
// and nearby dates with one citation paragraph while uncovered fragments
// draw from a disjoint distractor vocabulary. Gold labels are exact by
// construction and every paragraph is verified to round-trip through the
// segmenter before it is emitted.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "citespan/corpus.hpp"
#include "citespan/dates.hpp"
#include "citespan/eval.hpp"

namespace citespan {

struct SynthConfig {
  int entity_count = 100;
  int paragraphs_per_entity = 5;
  // Share of instances per span bucket: <=0.5, (0.5,1], (1,2], (2,5], >5.
  std::array<double, kBucketCount> mixture{0.10, 0.63, 0.16, 0.08, 0.03};
  int vocabulary_size = 12;  // word count for each of topic and distractor
};

namespace detail {

struct SentencePlan {
  std::size_t fragments = 1;
  std::size_t covered_suffix = 0;  // trailing fragments that are covered
  bool citing = false;
};

inline std::string pseudo_word(std::mt19937_64& rng) {
  static constexpr char consonants[] = "bcdfghjklmnprstvz";
  static constexpr char vowels[] = "aeiou";
  std::size_t syllables = 2 + bounded_draw(rng, 2);
  std::string w;
  for (std::size_t s = 0; s < syllables; ++s) {
    w += consonants[bounded_draw(rng, sizeof(consonants) - 1)];
    w += vowels[bounded_draw(rng, sizeof(vowels) - 1)];
  }
  return w;
}

inline std::string format_date(std::int64_t serial) {
  static const char* kMonths[] = {"January",   "February", "March",
                                  "April",     "May",      "June",
                                  "July",      "August",   "September",
                                  "October",   "November", "December"};
  CalendarDate d = civil_from_days(serial);
  return std::to_string(d.day) + " " + std::string(kMonths[d.month - 1]) +
         " " + std::to_string(d.year);
}

inline const char* pick(const std::vector<const char*>& pool,
                        std::mt19937_64& rng) {
  return pool[bounded_draw(rng, pool.size())];
}

inline std::string zero_padded(const char* prefix, std::size_t value,
                               int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, value);
  return buf;
}

}  // namespace detail

inline std::vector<SpanInstance> generate_synthetic(const SynthConfig& config,
                                                    std::uint64_t seed) {
  using detail::bounded_draw;
  if (config.entity_count < 1 || config.paragraphs_per_entity < 1)
    throw std::invalid_argument("generate_synthetic: empty corpus requested");
  if (config.vocabulary_size < 4)
    throw std::invalid_argument("generate_synthetic: vocabulary too small");
  double mixture_sum = 0.0;
  for (double w : config.mixture) {
    if (w < 0.0)
      throw std::invalid_argument("generate_synthetic: negative mixture");
    mixture_sum += w;
  }
  if (mixture_sum <= 0.0)
    throw std::invalid_argument("generate_synthetic: zero mixture");

  const AbbreviationSet abbrevs = AbbreviationSet::builtin();
  const std::size_t total = static_cast<std::size_t>(config.entity_count) *
                            static_cast<std::size_t>(config.paragraphs_per_entity);

  // Largest-remainder allocation of instances to buckets, then a
  // deterministic shuffle so buckets interleave across entities.
  std::array<std::size_t, kBucketCount> counts{};
  std::array<double, kBucketCount> remainder{};
  std::size_t assigned = 0;
  for (std::size_t b = 0; b < kBucketCount; ++b) {
    double exact = static_cast<double>(total) * config.mixture[b] / mixture_sum;
    counts[b] = static_cast<std::size_t>(exact);
    remainder[b] = exact - static_cast<double>(counts[b]);
    assigned += counts[b];
  }
  std::vector<std::size_t> order(kBucketCount);
  for (std::size_t b = 0; b < kBucketCount; ++b) order[b] = b;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
    return a < b;
  });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned)
    ++counts[order[i % kBucketCount]];

  std::vector<std::size_t> bucket_of;
  bucket_of.reserve(total);
  for (std::size_t b = 0; b < kBucketCount; ++b)
    bucket_of.insert(bucket_of.end(), counts[b], b);
  std::mt19937_64 alloc_rng(mix_seed(seed, 0xa110c));
  detail::deterministic_shuffle(bucket_of, alloc_rng);

  static const std::vector<const char*> kOpenPool = {
      "previously", "earlier", "initially", "at that time"};
  static const std::vector<const char*> kContinuePool = {
      "in addition", "moreover", "furthermore", "afterwards", "subsequently",
      "also"};
  static const std::vector<const char*> kBreakPool = {
      "however", "in contrast", "nevertheless", "on the other hand",
      "as a result"};

  std::vector<SpanInstance> corpus;
  corpus.reserve(total);

  for (std::size_t idx = 0; idx < total; ++idx) {
    std::mt19937_64 rng(mix_seed(seed, 0x1000000 + idx));
    const std::size_t bucket = bucket_of[idx];

    using detail::SentencePlan;

    // Covered structure: optional half-covered sentence, then fully covered
    // sentences, ending with the citing sentence. The citation marker sits
    // at the end of the citing sentence.
    std::size_t citing_fragments, citing_covered;
    std::size_t full_prev = 0;
    bool half_prev = false;
    switch (bucket) {
      case 0: {
        static constexpr std::size_t plans[][2] = {{2, 1}, {3, 1}, {4, 1},
                                                   {4, 2}};
        const auto& plan = plans[bounded_draw(rng, 4)];
        citing_fragments = plan[0];
        citing_covered = plan[1];
        break;
      }
      case 1:
        citing_fragments = 2 + bounded_draw(rng, 3);
        citing_covered = citing_fragments;
        break;
      case 2:
        citing_fragments = 2 + bounded_draw(rng, 3);
        citing_covered = citing_fragments;
        if (bounded_draw(rng, 2))
          full_prev = 1;
        else
          half_prev = true;
        break;
      case 3: {
        static constexpr std::size_t full_for[] = {1, 2, 2, 3, 3, 4};
        static constexpr bool half_for[] = {true, false, true,
                                            false, true, false};
        std::size_t combo = bounded_draw(rng, 6);
        citing_fragments = 2 + bounded_draw(rng, 3);
        citing_covered = citing_fragments;
        full_prev = full_for[combo];
        half_prev = half_for[combo];
        break;
      }
      default: {
        citing_fragments = 2 + bounded_draw(rng, 3);
        citing_covered = citing_fragments;
        full_prev = 5;
        half_prev = bounded_draw(rng, 2) == 1;
        break;
      }
    }

    std::vector<SentencePlan> plan;
    std::size_t before = bucket == 0 ? 1 + bounded_draw(rng, 2)
                                     : bounded_draw(rng, 2);
    std::size_t after = 1 + bounded_draw(rng, 2);
    for (std::size_t s = 0; s < before; ++s)
      plan.push_back({1 + bounded_draw(rng, 3), 0, false});
    if (half_prev) {
      if (bounded_draw(rng, 2))
        plan.push_back({2, 1, false});
      else
        plan.push_back({4, 2, false});
    }
    for (std::size_t s = 0; s < full_prev; ++s) {
      std::size_t f = 1 + bounded_draw(rng, 3);
      plan.push_back({f, f, false});
    }
    plan.push_back({citing_fragments, citing_covered, true});
    const std::size_t citing_sentence = plan.size() - 1;
    for (std::size_t s = 0; s < after; ++s)
      plan.push_back({1 + bounded_draw(rng, 3), 0, false});

    // Disjoint vocabularies, avoiding anything the segmenter could read as
    // an abbreviation at a sentence end.
    const std::size_t vocab = static_cast<std::size_t>(config.vocabulary_size);
    std::vector<std::string> pool;
    std::set<std::string> seen;
    while (pool.size() < 2 * vocab) {
      std::string w = detail::pseudo_word(rng);
      if (seen.count(w) || abbrevs.contains(w + ".")) continue;
      seen.insert(w);
      pool.push_back(std::move(w));
    }
    const auto topic_word = [&](std::mt19937_64& r) {
      return pool[bounded_draw(r, vocab)];
    };
    const auto distractor_word = [&](std::mt19937_64& r) {
      return pool[vocab + bounded_draw(r, vocab)];
    };

    const std::int64_t anchor =
        days_from_civil(1955 + static_cast<int>(bounded_draw(rng, 60)),
                        1 + static_cast<unsigned>(bounded_draw(rng, 12)),
                        1 + static_cast<unsigned>(bounded_draw(rng, 28)));

    // Fragment texts, in paragraph order.
    std::vector<std::vector<std::string>> sentence_fragments(plan.size());
    std::vector<int> gold;
    bool block_opened = false;
    bool block_closed = false;
    for (std::size_t s = 0; s < plan.size(); ++s) {
      for (std::size_t f = 0; f < plan[s].fragments; ++f) {
        bool covered = f + plan[s].covered_suffix >= plan[s].fragments &&
                       plan[s].covered_suffix > 0;
        gold.push_back(covered ? 1 : 0);

        std::string text;
        if (covered && !block_opened) {
          block_opened = true;
          if (bounded_draw(rng, 10) < 3)
            text = detail::pick(kOpenPool, rng);
        } else if (covered) {
          if (bounded_draw(rng, 100) < 25)
            text = detail::pick(kContinuePool, rng);
        } else if (block_opened && !block_closed) {
          block_closed = true;
          if (bounded_draw(rng, 2))
            text = detail::pick(kBreakPool, rng);
        } else if (bounded_draw(rng, 10) < 2) {
          switch (bounded_draw(rng, 3)) {
            case 0: text = detail::pick(kOpenPool, rng); break;
            case 1: text = detail::pick(kContinuePool, rng); break;
            default: text = detail::pick(kBreakPool, rng); break;
          }
        }

        std::size_t words = 3 + bounded_draw(rng, 4);
        for (std::size_t w = 0; w < words; ++w) {
          if (!text.empty()) text += ' ';
          text += covered ? topic_word(rng) : distractor_word(rng);
        }

        if (covered) {
          if (bounded_draw(rng, 10) < 9) {
            std::int64_t offset = static_cast<std::int64_t>(bounded_draw(rng, 7)) - 3;
            text += ' ' + detail::format_date(anchor + offset);
          }
        } else if (bounded_draw(rng, 2)) {
          std::int64_t away = 300 + static_cast<std::int64_t>(bounded_draw(rng, 2701));
          if (bounded_draw(rng, 2)) away = -away;
          text += ' ' + detail::format_date(anchor + away);
        }
        sentence_fragments[s].push_back(std::move(text));
      }
    }

    // Assemble the paragraph, tracking sentence end offsets.
    std::string paragraph;
    std::vector<std::size_t> sentence_end(plan.size(), 0);
    for (std::size_t s = 0; s < plan.size(); ++s) {
      if (s) paragraph += ' ';
      for (std::size_t f = 0; f < sentence_fragments[s].size(); ++f) {
        std::string piece = sentence_fragments[s][f];
        if (f == 0) piece[0] = static_cast<char>(std::toupper(
            static_cast<unsigned char>(piece[0])));
        paragraph += piece;
        if (f + 1 < sentence_fragments[s].size())
          paragraph += bounded_draw(rng, 10) < 2 ? "; " : ", ";
        else
          paragraph += '.';
      }
      sentence_end[s] = paragraph.size();
    }

    SpanInstance inst;
    inst.entity_id = detail::zero_padded(
        "e", idx / static_cast<std::size_t>(config.paragraphs_per_entity), 4);
    inst.paragraph_id = detail::zero_padded(
        "p", idx % static_cast<std::size_t>(config.paragraphs_per_entity), 2);
    inst.paragraph_text = paragraph;
    inst.citation_offset = sentence_end[citing_sentence];
    inst.citation_type = idx % 2 ? CitationType::news : CitationType::web;
    inst.gold_labels = gold;

    std::vector<std::size_t> uncovered_sentences;
    for (std::size_t s = 0; s < plan.size(); ++s)
      if (plan[s].covered_suffix == 0 && !plan[s].citing)
        uncovered_sentences.push_back(s);
    if (!uncovered_sentences.empty() && bounded_draw(rng, 4) == 0) {
      std::size_t s = uncovered_sentences[bounded_draw(
          rng, uncovered_sentences.size())];
      inst.other_citation_offsets.push_back(
          {"x" + std::to_string(idx), sentence_end[s]});
    }

    // Citation document: the first paragraph spells out the whole topic
    // vocabulary (guaranteeing token overlap with every covered fragment)
    // plus the anchor date; a second paragraph adds more topic text.
    inst.citation.id = "src" + std::to_string(idx);
    std::vector<std::string> shuffled(pool.begin(), pool.begin() + vocab);
    detail::deterministic_shuffle(shuffled, rng);
    std::string p0;
    std::size_t half = shuffled.size() / 2;
    for (std::size_t w = 0; w < half; ++w) {
      p0 += w ? " " : "";
      p0 += shuffled[w];
    }
    p0 += ". ";
    for (std::size_t w = half; w < shuffled.size(); ++w) {
      p0 += shuffled[w];
      p0 += ' ';
    }
    p0 += detail::format_date(anchor) + ".";
    p0[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(p0[0])));
    std::size_t cap = 0;
    while (p0[cap] != '.') ++cap;
    p0[cap + 2] = static_cast<char>(std::toupper(
        static_cast<unsigned char>(p0[cap + 2])));
    std::string p1;
    std::size_t extra = 4 + bounded_draw(rng, 5);
    for (std::size_t w = 0; w < extra; ++w) {
      if (w) p1 += ' ';
      p1 += topic_word(rng);
    }
    p1 += '.';
    p1[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(p1[0])));
    inst.citation.paragraphs = {p0, p1};

    rebuild_fragments(inst, abbrevs);

    // The generator must agree with the segmenter exactly.
    std::size_t planned_fragments = gold.size();
    if (inst.fragments.size() != planned_fragments ||
        inst.fragments.sentence_count() != plan.size())
      throw std::logic_error("generate_synthetic: segmentation mismatch in " +
                             inst.instance_id());
    std::size_t cursor = 0;
    for (std::size_t s = 0; s < plan.size(); ++s)
      for (std::size_t f = 0; f < plan[s].fragments; ++f, ++cursor)
        if (inst.fragments.fragments[cursor].sentence_index != s)
          throw std::logic_error(
              "generate_synthetic: sentence structure mismatch in " +
              inst.instance_id());
    std::size_t marker = 0;
    for (std::size_t s = 0; s <= citing_sentence; ++s)
      marker += plan[s].fragments;
    if (inst.citing_index() != marker - 1)
      throw std::logic_error("generate_synthetic: marker mismatch in " +
                             inst.instance_id());
    double span = span_length(inst.fragments, gold_covered_set(inst));
    if (static_cast<std::size_t>(bucketize(span)) != bucket)
      throw std::logic_error("generate_synthetic: bucket mismatch in " +
                             inst.instance_id());

    corpus.push_back(std::move(inst));
  }
  return corpus;
}

}  // namespace citespan
