#pragma once

// Explicit discourse connectives mapped to the four top-level relation
// classes (temporal, contingency, expansion, comparison). A fragment is
// marked when a connective is a token prefix of it; fragments begin at a
// sentence start or right after a delimiter, which is where explicit
// connectives attach. Longest token sequence wins. Ambiguous connectives
// carry their most frequent class.

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "citespan/text.hpp"

namespace citespan {

enum class DiscourseClass { none, temporal, contingency, expansion, comparison };

inline std::string to_string(DiscourseClass c) {
  switch (c) {
    case DiscourseClass::temporal: return "temporal";
    case DiscourseClass::contingency: return "contingency";
    case DiscourseClass::expansion: return "expansion";
    case DiscourseClass::comparison: return "comparison";
    default: return "none";
  }
}

inline DiscourseClass discourse_class_from_string(const std::string& s) {
  if (s == "temporal") return DiscourseClass::temporal;
  if (s == "contingency") return DiscourseClass::contingency;
  if (s == "expansion") return DiscourseClass::expansion;
  if (s == "comparison") return DiscourseClass::comparison;
  if (s == "none") return DiscourseClass::none;
  throw std::runtime_error("unknown discourse class: " + s);
}

class ConnectiveLexicon {
 public:
  ConnectiveLexicon() = default;

  void add(std::string_view connective, DiscourseClass cls) {
    auto tokens = tokenize(connective);
    if (tokens.empty()) return;
    std::string key;
    for (const auto& t : tokens) {
      if (!key.empty()) key.push_back(' ');
      key += t;
    }
    entries_[key] = cls;
    if (tokens.size() > max_tokens_) max_tokens_ = tokens.size();
  }

  // Class of the longest connective forming a token prefix of `tokens`.
  DiscourseClass match_prefix(const std::vector<std::string>& tokens) const {
    std::size_t limit = std::min(max_tokens_, tokens.size());
    std::string key;
    for (std::size_t n = limit; n >= 1; --n) {
      key.clear();
      for (std::size_t i = 0; i < n; ++i) {
        if (i) key.push_back(' ');
        key += tokens[i];
      }
      auto it = entries_.find(key);
      if (it != entries_.end()) return it->second;
    }
    return DiscourseClass::none;
  }

  DiscourseClass match_fragment(std::string_view fragment_text) const {
    return match_prefix(tokenize(fragment_text));
  }

  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, DiscourseClass>& entries() const {
    return entries_;
  }

  // Content digest input: one canonical line per entry, sorted.
  std::string canonical_text() const {
    std::string out;
    for (const auto& [conn, cls] : entries_) {
      out += conn;
      out += '\t';
      out += to_string(cls);
      out += '\n';
    }
    return out;
  }

  // Tab-separated file: connective<TAB>class, '#' comments allowed.
  static ConnectiveLexicon from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open connective lexicon: " + path);
    ConnectiveLexicon lex;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      auto tab = t.find('\t');
      if (tab == std::string_view::npos)
        throw std::runtime_error("connective lexicon line " +
                                 std::to_string(line_no) +
                                 ": expected connective<TAB>class");
      lex.add(t.substr(0, tab),
              discourse_class_from_string(std::string(trim(t.substr(tab + 1)))));
    }
    return lex;
  }

  static const ConnectiveLexicon& builtin() {
    static const ConnectiveLexicon lex = [] {
      ConnectiveLexicon l;
      const auto T = DiscourseClass::temporal;
      const auto C = DiscourseClass::contingency;
      const auto E = DiscourseClass::expansion;
      const auto P = DiscourseClass::comparison;
      struct Entry { const char* text; DiscourseClass cls; };
      static const Entry kEntries[] = {
          {"after", T}, {"afterward", T}, {"afterwards", T}, {"as soon as", T},
          {"at last", T}, {"at that time", T}, {"at the same time", T},
          {"before", T}, {"before that", T}, {"during", T}, {"earlier", T},
          {"eventually", T}, {"finally", T}, {"in the meantime", T},
          {"initially", T}, {"later", T}, {"meanwhile", T}, {"next", T},
          {"now", T}, {"once", T}, {"previously", T}, {"simultaneously", T},
          {"since", T}, {"soon", T}, {"subsequently", T}, {"then", T},
          {"thereafter", T}, {"thereupon", T}, {"till", T}, {"until", T},
          {"when", T}, {"whenever", T}, {"while", T},
          {"accordingly", C}, {"as a consequence", C}, {"as a result", C},
          {"as long as", C}, {"because", C}, {"because of that", C},
          {"consequently", C}, {"due to", C}, {"for this reason", C},
          {"given that", C}, {"hence", C}, {"if", C}, {"in order that", C},
          {"in response", C}, {"in that case", C}, {"in turn", C},
          {"lest", C}, {"on condition that", C}, {"owing to", C},
          {"provided that", C}, {"so", C}, {"so that", C}, {"therefore", C},
          {"thereby", C}, {"thus", C}, {"unless", C},
          {"additionally", E}, {"also", E}, {"alternatively", E}, {"and", E},
          {"as well", E}, {"besides", E}, {"first", E}, {"for example", E},
          {"for instance", E}, {"further", E}, {"furthermore", E},
          {"in addition", E}, {"in detail", E}, {"in fact", E},
          {"in other words", E}, {"in particular", E}, {"in short", E},
          {"in sum", E}, {"indeed", E}, {"instead", E}, {"lastly", E},
          {"likewise", E}, {"moreover", E}, {"namely", E}, {"notably", E},
          {"on the whole", E}, {"or", E}, {"overall", E}, {"rather", E},
          {"second", E}, {"separately", E}, {"similarly", E},
          {"specifically", E}, {"that is", E}, {"third", E},
          {"what is more", E},
          {"all the same", P}, {"although", P}, {"but", P},
          {"by comparison", P}, {"by contrast", P}, {"conversely", P},
          {"despite that", P}, {"even if", P}, {"even so", P},
          {"even though", P}, {"however", P}, {"in contrast", P},
          {"in spite of that", P}, {"nevertheless", P}, {"nonetheless", P},
          {"on the contrary", P}, {"on the one hand", P},
          {"on the other hand", P}, {"regardless", P}, {"still", P},
          {"though", P}, {"whereas", P}, {"yet", P},
      };
      for (const auto& e : kEntries) l.add(e.text, e.cls);
      return l;
    }();
    return lex;
  }

 private:
  std::map<std::string, DiscourseClass> entries_;
  std::size_t max_tokens_ = 0;
};

}  // namespace citespan
