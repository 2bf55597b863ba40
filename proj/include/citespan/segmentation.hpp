#pragma once

// Rule-based decomposition of a citing paragraph into sentences and
// sub-sentence fragments, and location of citation markers within the
// resulting sequence.
//
// Sentences end at '.', '!' or '?' followed by whitespace and an uppercase
// letter (or end of text); '.' boundaries are suppressed after known
// abbreviations. Sentences are then split into fragments at the delimiters
// , ! ; : ? with each delimiter attached to the fragment it terminates.
// Fragment offsets tile the paragraph: every non-whitespace character lies
// in exactly one fragment, and only whitespace separates fragments.

#include <cctype>
#include <cstddef>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "citespan/text.hpp"

namespace citespan {

struct Fragment {
  std::string text;
  std::size_t char_start = 0;
  std::size_t char_end = 0;  // half-open
  std::size_t sentence_index = 0;
  std::size_t fragment_index = 0;
  bool contains_target_citation = false;
  std::vector<std::string> other_citation_ids;

  bool operator==(const Fragment&) const = default;
};

struct FragmentSequence {
  std::vector<Fragment> fragments;
  // Half-open fragment-index range per sentence, in sentence order.
  std::vector<std::pair<std::size_t, std::size_t>> sentence_boundaries;
  std::size_t text_length = 0;

  std::size_t size() const { return fragments.size(); }
  std::size_t sentence_count() const { return sentence_boundaries.size(); }

  std::size_t sentence_of(std::size_t fragment_index) const {
    return fragments.at(fragment_index).sentence_index;
  }

  bool operator==(const FragmentSequence&) const = default;
};

// Tokens that suppress a sentence boundary at a following period. Stored
// lowercased, including the trailing period.
class AbbreviationSet {
 public:
  AbbreviationSet() = default;

  explicit AbbreviationSet(const std::vector<std::string>& entries) {
    for (const auto& e : entries) add(e);
  }

  static AbbreviationSet builtin() {
    return AbbreviationSet(std::vector<std::string>{
        "mr.", "mrs.", "ms.", "dr.", "prof.", "rev.", "gen.", "sen.",
        "rep.", "gov.", "lt.", "sgt.", "col.", "capt.", "st.", "jr.",
        "sr.", "hon.", "u.s.", "u.k.", "u.n.", "e.g.", "i.e.", "etc.",
        "vs.", "cf.", "al.", "no.", "op.", "pp.", "vol.", "fig.", "ca.",
        "approx.", "dept.", "univ.", "assn.", "bros.", "co.", "corp.",
        "inc.", "ltd.", "jan.", "feb.", "mar.", "apr.", "jun.", "jul.",
        "aug.", "sep.", "sept.", "oct.", "nov.", "dec.", "mt.", "ft.",
        "rd.", "ave.", "blvd."});
  }

  static AbbreviationSet from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open abbreviation list: " + path);
    AbbreviationSet set;
    std::string line;
    while (std::getline(in, line)) {
      auto t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      set.add(std::string(t));
    }
    return set;
  }

  void add(std::string_view entry) {
    std::string e = to_lower_ascii(trim(entry));
    if (e.empty()) return;
    if (e.back() != '.') e.push_back('.');
    entries_.insert(std::move(e));
  }

  // `word` is the whitespace-bounded token ending with the period.
  bool contains(std::string_view word) const {
    return entries_.count(to_lower_ascii(word)) > 0;
  }

  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_set<std::string> entries_;
};

namespace detail {

inline bool is_sentence_terminal(char c) {
  return c == '.' || c == '!' || c == '?';
}

inline bool is_fragment_delimiter(char c) {
  return c == ',' || c == '!' || c == ';' || c == ':' || c == '?';
}

// The whitespace-bounded word ending at (and including) text[dot].
inline std::string_view word_ending_at(std::string_view text, std::size_t dot) {
  std::size_t b = dot;
  while (b > 0 && !is_space(static_cast<unsigned char>(text[b - 1]))) --b;
  return text.substr(b, dot - b + 1);
}

}  // namespace detail

// Sentence spans: ordered, non-overlapping, covering all non-whitespace
// text. Empty or all-whitespace input yields no spans.
inline std::vector<std::pair<std::size_t, std::size_t>> split_sentences(
    std::string_view text, const AbbreviationSet& abbreviations) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  const std::size_t n = text.size();

  std::size_t start = 0;
  while (start < n && is_space(static_cast<unsigned char>(text[start]))) ++start;
  if (start == n) return spans;

  for (std::size_t i = start; i < n; ++i) {
    if (!detail::is_sentence_terminal(text[i])) continue;

    std::size_t next = i + 1;
    while (next < n && is_space(static_cast<unsigned char>(text[next]))) ++next;
    bool boundary;
    if (next == n) {
      boundary = true;  // end of text
    } else if (next == i + 1) {
      boundary = false;  // no whitespace after the terminal
    } else {
      boundary = std::isupper(static_cast<unsigned char>(text[next])) != 0;
    }
    if (boundary && text[i] == '.' &&
        abbreviations.contains(detail::word_ending_at(text, i))) {
      boundary = false;
    }
    if (!boundary) continue;

    spans.emplace_back(start, i + 1);
    start = next;
    if (start == n) return spans;
    i = start - 1;  // loop increment moves to `start`
  }

  // Trailing material without a terminal: close at the last non-whitespace.
  std::size_t last = n;
  while (last > start && is_space(static_cast<unsigned char>(text[last - 1]))) --last;
  if (last > start) spans.emplace_back(start, last);
  return spans;
}

inline std::vector<std::pair<std::size_t, std::size_t>> split_sentences(
    std::string_view text) {
  static const AbbreviationSet kBuiltin = AbbreviationSet::builtin();
  return split_sentences(text, kBuiltin);
}

// Fragments of one sentence, with offsets in paragraph coordinates.
// `sentence_start` is the sentence's offset within the paragraph.
// A piece between delimiters that carries no content (only whitespace
// and delimiter characters) is absorbed into its neighbor instead of
// becoming a fragment of its own.
inline std::vector<Fragment> split_fragments(std::string_view sentence_text,
                                             std::size_t sentence_index,
                                             std::size_t sentence_start = 0) {
  std::vector<Fragment> fragments;
  const std::size_t n = sentence_text.size();

  auto has_content = [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      char c = sentence_text[i];
      if (!is_space(static_cast<unsigned char>(c)) &&
          !detail::is_fragment_delimiter(c))
        return true;
    }
    return false;
  };

  auto emit = [&](std::size_t b, std::size_t e) {
    while (b < e && is_space(static_cast<unsigned char>(sentence_text[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(sentence_text[e - 1]))) --e;
    if (b == e) return;
    if (!has_content(b, e) && !fragments.empty()) {
      // Orphan delimiter run: extend the previous fragment so offsets
      // keep tiling the text.
      Fragment& prev = fragments.back();
      prev.char_end = sentence_start + e;
      prev.text = std::string(
          sentence_text.substr(prev.char_start - sentence_start,
                               e - (prev.char_start - sentence_start)));
      return;
    }
    Fragment f;
    f.text = std::string(sentence_text.substr(b, e - b));
    f.char_start = sentence_start + b;
    f.char_end = sentence_start + e;
    f.sentence_index = sentence_index;
    fragments.push_back(std::move(f));
  };

  std::size_t piece_start = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (detail::is_fragment_delimiter(sentence_text[i])) {
      if (!has_content(piece_start, i + 1) && !fragments.empty()) {
        emit(piece_start, i + 1);  // merges into previous
        piece_start = i + 1;
        continue;
      }
      if (has_content(piece_start, i + 1)) {
        emit(piece_start, i + 1);
        piece_start = i + 1;
      }
      // else: leading delimiter with no previous fragment; keep
      // accumulating so it attaches to the first real piece.
    }
  }
  if (piece_start < n) emit(piece_start, n);
  return fragments;
}

// Index of the fragment owning a character offset. An offset exactly at a
// fragment boundary (or in an inter-fragment gap) resolves to the preceding
// fragment: the marker follows the text it cites. Equivalently, the answer
// is the last fragment starting strictly before the offset.
inline std::size_t locate_citation(const FragmentSequence& seq,
                                   std::size_t offset) {
  if (seq.fragments.empty())
    throw std::invalid_argument("locate_citation: empty fragment sequence");
  if (offset > seq.text_length)
    throw std::out_of_range("locate_citation: offset " + std::to_string(offset) +
                            " beyond text length " +
                            std::to_string(seq.text_length));
  const auto& frags = seq.fragments;
  std::size_t best = 0;
  for (std::size_t i = 0; i < frags.size(); ++i)
    if (frags[i].char_start < offset) best = i;
  return best;
}

struct CitationMark {
  std::string id;
  std::size_t offset = 0;

  bool operator==(const CitationMark&) const = default;
};

// Full segmentation of a paragraph: sentences, fragments, and citation
// flags. Exactly one fragment gets contains_target_citation.
inline FragmentSequence build_sequence(std::string_view paragraph_text,
                                       std::size_t citation_offset,
                                       const std::vector<CitationMark>& others,
                                       const AbbreviationSet& abbreviations) {
  FragmentSequence seq;
  seq.text_length = paragraph_text.size();
  auto sentences = split_sentences(paragraph_text, abbreviations);
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    auto [b, e] = sentences[s];
    auto frags = split_fragments(paragraph_text.substr(b, e - b), s, b);
    std::size_t first = seq.fragments.size();
    for (auto& f : frags) {
      f.fragment_index = seq.fragments.size();
      seq.fragments.push_back(std::move(f));
    }
    seq.sentence_boundaries.emplace_back(first, seq.fragments.size());
  }
  if (seq.fragments.empty())
    throw std::invalid_argument("build_sequence: paragraph has no content");

  seq.fragments[locate_citation(seq, citation_offset)].contains_target_citation =
      true;
  for (const auto& other : others) {
    seq.fragments[locate_citation(seq, other.offset)].other_citation_ids
        .push_back(other.id);
  }
  return seq;
}

inline FragmentSequence build_sequence(std::string_view paragraph_text,
                                       std::size_t citation_offset,
                                       const std::vector<CitationMark>& others =
                                           {}) {
  return build_sequence(paragraph_text, citation_offset, others,
                        AbbreviationSet::builtin());
}

// Fragment index that carries the target marker.
inline std::size_t citing_fragment_index(const FragmentSequence& seq) {
  for (const auto& f : seq.fragments)
    if (f.contains_target_citation) return f.fragment_index;
  throw std::logic_error("sequence has no citing fragment");
}

}  // namespace citespan
