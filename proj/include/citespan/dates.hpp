#pragma once

// Temporal expression extraction. Four hand-crafted patterns over
// alphanumeric words, with whitespace / '-' / '.' delimiters between the
// parts (a comma followed by whitespace is also accepted, for the common
// "Month D, YYYY" rendering):
//
//   (1) DD Month YYYY
//   (2) DD MM YYYY
//   (3) MM DD YY(YY)   month slot may be a name or a number
//   (4) YYYY
//
// Partial dates are completed to January 1 (pattern 4) / day 1. Two-digit
// years pivot at 50 (>= 50 is 19xx, else 20xx). Matching is greedy left to
// right: at each word, the longest match wins, ties going to the lower
// pattern number; matched words are consumed so matches never overlap.

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "citespan/text.hpp"

namespace citespan {

struct CalendarDate {
  int year = 0;
  int month = 1;
  int day = 1;

  bool operator==(const CalendarDate&) const = default;
};

// Serial day number, 1970-01-01 = 0 (Howard Hinnant's civil-date algorithm).
inline std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline std::int64_t serial_day(const CalendarDate& d) {
  return days_from_civil(d.year, static_cast<unsigned>(d.month),
                         static_cast<unsigned>(d.day));
}

inline CalendarDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {static_cast<int>(y + (m <= 2)), static_cast<int>(m),
          static_cast<int>(d)};
}

struct ExtractedDate {
  CalendarDate date;
  std::size_t position = 0;  // char offset of the match within the text
  std::size_t length = 0;    // chars covered, first word start to last word end
  int pattern = 0;           // 1..4

  bool operator==(const ExtractedDate&) const = default;
};

namespace detail {

inline bool is_leap(int y) {
  return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

inline int days_in_month(int y, int m) {
  static const int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap(y)) return 29;
  return kDays[m - 1];
}

inline int month_from_name(std::string_view word) {
  std::string w = to_lower_ascii(word);
  static const std::pair<const char*, int> kMonths[] = {
      {"january", 1},  {"jan", 1},  {"february", 2}, {"feb", 2},
      {"march", 3},    {"mar", 3},  {"april", 4},    {"apr", 4},
      {"may", 5},      {"june", 6}, {"jun", 6},      {"july", 7},
      {"jul", 7},      {"august", 8},   {"aug", 8},  {"september", 9},
      {"sep", 9},      {"sept", 9}, {"october", 10}, {"oct", 10},
      {"november", 11},{"nov", 11}, {"december", 12},{"dec", 12}};
  for (const auto& [name, num] : kMonths)
    if (w == name) return num;
  return 0;
}

struct Word {
  std::string_view text;
  std::size_t start = 0;
  std::size_t end = 0;

  bool all_digits() const {
    for (char c : text)
      if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return !text.empty();
  }
  int as_int() const { return std::atoi(std::string(text).c_str()); }
};

inline std::vector<Word> scan_words(std::string_view text) {
  std::vector<Word> words;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isalnum(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t b = i;
    while (i < text.size() && std::isalnum(static_cast<unsigned char>(text[i])))
      ++i;
    words.push_back({text.substr(b, i - b), b, i});
  }
  return words;
}

// Text between two adjacent matched words must be a date-part delimiter:
// whitespace, or a single '-' / '.' (whitespace around it allowed), or a
// comma followed by whitespace.
inline bool valid_gap(std::string_view text, std::size_t from, std::size_t to) {
  if (from >= to) return false;
  std::string_view gap = text.substr(from, to - from);
  int punct = 0;
  char punct_char = 0;
  bool ws_after_punct = false;
  for (char c : gap) {
    if (is_space(static_cast<unsigned char>(c))) {
      if (punct) ws_after_punct = true;
      continue;
    }
    if (c == '-' || c == '.' || c == ',') {
      if (++punct > 1) return false;
      punct_char = c;
      continue;
    }
    return false;
  }
  if (punct_char == ',' && !ws_after_punct) return false;
  return true;
}

inline int pivot_year(int yy) { return yy >= 50 ? 1900 + yy : 2000 + yy; }

struct Candidate {
  CalendarDate date;
  int pattern = 0;
  std::size_t words_used = 0;
  std::size_t end_offset = 0;
};

// Try every pattern anchored at words[w]; return the winning candidate.
inline std::optional<Candidate> match_at(std::string_view text,
                                         const std::vector<Word>& words,
                                         std::size_t w) {
  auto gap_ok = [&](std::size_t a, std::size_t b) {
    return valid_gap(text, words[a].end, words[b].start);
  };
  std::optional<Candidate> best;
  auto consider = [&](const Candidate& c) {
    if (!best || c.words_used > best->words_used ||
        (c.words_used == best->words_used && c.pattern < best->pattern))
      best = c;
  };

  const Word& w0 = words[w];
  bool have1 = w + 1 < words.size() && gap_ok(w, w + 1);
  bool have2 = have1 && w + 2 < words.size() && gap_ok(w + 1, w + 2);

  // (1) DD Month YYYY
  if (have2 && w0.all_digits() && w0.text.size() <= 2) {
    int day = w0.as_int();
    int month = month_from_name(words[w + 1].text);
    const Word& yw = words[w + 2];
    if (month && yw.all_digits() && yw.text.size() == 4) {
      int year = yw.as_int();
      if (day >= 1 && day <= days_in_month(year, month))
        consider({{year, month, day}, 1, 3, yw.end});
    }
  }
  // (2) DD MM YYYY
  if (have2 && w0.all_digits() && w0.text.size() <= 2) {
    int day = w0.as_int();
    const Word& mw = words[w + 1];
    const Word& yw = words[w + 2];
    if (mw.all_digits() && mw.text.size() <= 2 && yw.all_digits() &&
        yw.text.size() == 4) {
      int month = mw.as_int();
      int year = yw.as_int();
      if (month >= 1 && month <= 12 && day >= 1 &&
          day <= days_in_month(year, month))
        consider({{year, month, day}, 2, 3, yw.end});
    }
  }
  // (3) MM DD YY(YY), month by name or number; the day may be omitted
  // (MM YYYY completes to day 1)
  {
    int month = month_from_name(w0.text);
    if (!month && w0.all_digits() && w0.text.size() <= 2) {
      int m = w0.as_int();
      if (m >= 1 && m <= 12) month = m;
    }
    if (month && have2) {
      const Word& dw = words[w + 1];
      const Word& yw = words[w + 2];
      if (dw.all_digits() && dw.text.size() <= 2 && yw.all_digits() &&
          (yw.text.size() == 2 || yw.text.size() == 4)) {
        int year = yw.text.size() == 2 ? pivot_year(yw.as_int()) : yw.as_int();
        int day = dw.as_int();
        if (day >= 1 && day <= days_in_month(year, month))
          consider({{year, month, day}, 3, 3, yw.end});
      }
    }
    if (month && have1) {
      const Word& yw = words[w + 1];
      if (yw.all_digits() && yw.text.size() == 4)
        consider({{yw.as_int(), month, 1}, 3, 2, yw.end});
    }
  }
  // (4) YYYY
  if (w0.all_digits() && w0.text.size() == 4)
    consider({{w0.as_int(), 1, 1}, 4, 1, w0.end});

  return best;
}

}  // namespace detail

// All non-overlapping date matches in `text`, positions strictly increasing.
inline std::vector<ExtractedDate> extract_dates(std::string_view text) {
  std::vector<ExtractedDate> out;
  auto words = detail::scan_words(text);
  std::size_t w = 0;
  while (w < words.size()) {
    auto m = detail::match_at(text, words, w);
    if (!m) {
      ++w;
      continue;
    }
    out.push_back({m->date, words[w].start, m->end_offset - words[w].start,
                   m->pattern});
    w += m->words_used;
  }
  return out;
}

// Minimum absolute day difference between any date pair of the two texts;
// empty if either side has no dates.
inline std::optional<double> temporal_gap(std::string_view text_i,
                                          std::string_view text_prev) {
  auto a = extract_dates(text_i);
  auto b = extract_dates(text_prev);
  if (a.empty() || b.empty()) return std::nullopt;
  std::int64_t best = -1;
  for (const auto& da : a)
    for (const auto& db : b) {
      std::int64_t diff = serial_day(da.date) - serial_day(db.date);
      if (diff < 0) diff = -diff;
      if (best < 0 || diff < best) best = diff;
    }
  return static_cast<double>(best);
}

}  // namespace citespan
