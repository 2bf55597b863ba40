#pragma once

// The four feature families computed per fragment relative to the cited
// document: structural layout, citation-content similarity (window language
// models + Jaccard), discourse connectives, and temporal distance. Bundles
// map stable feature names to finite values; every bundle of a sequence
// carries the same key set.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "citespan/corpus.hpp"
#include "citespan/dates.hpp"
#include "citespan/discourse.hpp"
#include "citespan/hash.hpp"
#include "citespan/segmentation.hpp"
#include "citespan/text.hpp"

namespace citespan {

struct FeatureBundle {
  std::map<std::string, double> values;

  double get(const std::string& name) const {
    auto it = values.find(name);
    return it == values.end() ? 0.0 : it->second;
  }
  void set(const std::string& name, double v) { values[name] = v; }

  bool operator==(const FeatureBundle&) const = default;
};

struct FeatureConfig {
  bool structural = true;
  bool citation = true;
  bool discourse = true;
  bool temporal = true;
  double epsilon = 1e-6;
  int bin_count = 8;
  std::size_t window_half_width = 3;
  std::string lexicon_path;  // empty = builtin connective lexicon

  bool operator==(const FeatureConfig&) const = default;
};

inline void to_json(json& j, const FeatureConfig& c) {
  j = json{{"structural", c.structural}, {"citation", c.citation},
           {"discourse", c.discourse},   {"temporal", c.temporal},
           {"epsilon", c.epsilon},       {"bin_count", c.bin_count},
           {"window_half_width", c.window_half_width},
           {"lexicon_path", c.lexicon_path}};
}

inline void from_json(const json& j, FeatureConfig& c) {
  c.structural = j.value("structural", true);
  c.citation = j.value("citation", true);
  c.discourse = j.value("discourse", true);
  c.temporal = j.value("temporal", true);
  c.epsilon = j.value("epsilon", 1e-6);
  c.bin_count = j.value("bin_count", 8);
  c.window_half_width = j.value("window_half_width", std::size_t{3});
  c.lexicon_path = j.value("lexicon_path", std::string());
}

// Ordered names of the raw (pre-binning) features for a config.
inline std::vector<std::string> feature_registry(const FeatureConfig& config) {
  std::vector<std::string> names;
  if (config.structural) {
    names.insert(names.end(),
                 {"f_other_cite", "f_num_sentences", "f_frag_len",
                  "f_same_sent_as_cite", "f_same_sent_as_prev",
                  "f_cite_distance"});
  }
  if (config.citation) {
    names.insert(names.end(), {"f_lm", "f_lm_missing", "f_jaccard",
                               "f_cite_len", "f_cite_missing"});
  }
  if (config.discourse) {
    names.insert(names.end(), {"f_disc_temporal", "f_disc_contingency",
                               "f_disc_expansion", "f_disc_comparison"});
  }
  if (config.temporal) {
    names.insert(names.end(), {"f_temporal_gap", "f_temporal_gap_missing"});
  }
  return names;
}

// The real-valued features that additionally get quantile-bin indicators.
inline std::vector<std::string> binned_feature_names(
    const FeatureConfig& config) {
  static const char* kRealValued[] = {"f_num_sentences", "f_frag_len",
                                      "f_cite_distance", "f_lm", "f_jaccard",
                                      "f_cite_len", "f_temporal_gap"};
  auto registry = feature_registry(config);
  std::vector<std::string> out;
  for (const char* name : kRealValued)
    if (std::find(registry.begin(), registry.end(), name) != registry.end())
      out.push_back(name);
  return out;
}

struct WindowModel {
  std::map<std::string, double> distribution;

  double prob(const std::string& token) const {
    auto it = distribution.find(token);
    return it == distribution.end() ? 0.0 : it->second;
  }

  double total() const {
    double s = 0.0;
    for (const auto& [_, p] : distribution) s += p;
    return s;
  }
};

// Term-frequency distribution over the +/- half_width token window around
// `center`, truncated at the ends; tf normalized by window size. With
// epsilon > 0 the model's own support is smoothed and renormalized.
inline WindowModel window_model(const std::vector<std::string>& tokens,
                                std::size_t center,
                                std::size_t half_width = 3,
                                double epsilon = 0.0) {
  if (tokens.empty()) throw std::invalid_argument("window_model: no tokens");
  if (center >= tokens.size())
    throw std::out_of_range("window_model: center out of range");
  std::size_t lo = center >= half_width ? center - half_width : 0;
  std::size_t hi = std::min(tokens.size(), center + half_width + 1);
  WindowModel m;
  for (std::size_t i = lo; i < hi; ++i) m.distribution[tokens[i]] += 1.0;
  double total = static_cast<double>(hi - lo);
  for (auto& [_, v] : m.distribution) v /= total;
  if (epsilon > 0.0) {
    double mass = 1.0 + epsilon * static_cast<double>(m.distribution.size());
    for (auto& [_, v] : m.distribution) v = (v + epsilon) / mass;
  }
  return m;
}

// Average of the per-position window models over all token positions,
// renormalized: the overall model for a fragment or paragraph.
inline WindowModel aggregate_window_model(const std::vector<std::string>& tokens,
                                          std::size_t half_width = 3) {
  WindowModel agg;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    WindowModel w = window_model(tokens, i, half_width);
    for (const auto& [tok, p] : w.distribution) agg.distribution[tok] += p;
  }
  double total = agg.total();
  for (auto& [_, v] : agg.distribution) v /= total;
  return agg;
}

// KL(a || b) with both sides epsilon-smoothed over the union vocabulary.
inline double smoothed_kl(const WindowModel& a, const WindowModel& b,
                          double epsilon) {
  std::set<std::string> vocab;
  for (const auto& [t, _] : a.distribution) vocab.insert(t);
  for (const auto& [t, _] : b.distribution) vocab.insert(t);
  if (vocab.empty()) return 0.0;
  const double v = static_cast<double>(vocab.size());
  const double za = 1.0 + epsilon * v;
  const double zb = 1.0 + epsilon * v;
  double kl = 0.0;
  for (const auto& tok : vocab) {
    double pa = (a.prob(tok) + epsilon) / za;
    double pb = (b.prob(tok) + epsilon) / zb;
    kl += pa * std::log(pa / pb);
  }
  return kl;
}

// Minimum over citation paragraphs of KL(M_fragment || M_paragraph); the
// most similar paragraph decides the score. Empty token sets on either
// side yield no value (the caller emits the missing indicator).
inline std::optional<double> lm_divergence(std::string_view fragment_text,
                                           const CitationDocument& citation,
                                           double epsilon = 1e-6,
                                           std::size_t half_width = 3) {
  auto frag_tokens = tokenize(fragment_text);
  if (frag_tokens.empty()) return std::nullopt;
  WindowModel m_frag = aggregate_window_model(frag_tokens, half_width);
  std::optional<double> best;
  for (const auto& para : citation.paragraphs) {
    auto para_tokens = tokenize(para);
    if (para_tokens.empty()) continue;
    WindowModel m_para = aggregate_window_model(para_tokens, half_width);
    double kl = smoothed_kl(m_frag, m_para, epsilon);
    if (!best || kl < *best) best = kl;
  }
  return best;
}

// Maximal Jaccard similarity between the fragment's token set and any
// citation paragraph's token set.
inline double jaccard_feature(std::string_view fragment_text,
                              const CitationDocument& citation) {
  auto ft = tokenize(fragment_text);
  std::set<std::string> fset(ft.begin(), ft.end());
  double best = 0.0;
  for (const auto& para : citation.paragraphs) {
    auto pt = tokenize(para);
    std::set<std::string> pset(pt.begin(), pt.end());
    std::size_t inter = 0;
    for (const auto& t : fset) inter += pset.count(t);
    std::size_t uni = fset.size() + pset.size() - inter;
    double j = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
    if (j > best) best = j;
  }
  return best;
}

// Number of sentences across all citation paragraphs; no value when the
// citation carries no text.
inline std::optional<double> citation_length_feature(
    const CitationDocument& citation, const AbbreviationSet& abbrevs) {
  bool any_content = false;
  for (const auto& p : citation.paragraphs)
    if (!all_whitespace(p)) any_content = true;
  if (!any_content) return std::nullopt;
  return static_cast<double>(citation.sentence_count(abbrevs));
}

struct FeaturizedSequence {
  std::vector<FeatureBundle> bundles;
  std::string config_fingerprint;
};

// Digest of everything that shapes feature values: canonical config,
// registry order, and lexicon content. Stored in model files so a model
// is never applied on top of differently-configured features.
inline std::string config_fingerprint(const FeatureConfig& config,
                                      const ConnectiveLexicon& lexicon) {
  json canon;
  to_json(canon, config);
  Sha256 h;
  h.update(canon.dump());
  h.update("\x1f");
  for (const auto& name : feature_registry(config)) {
    h.update(name);
    h.update("\x1f");
  }
  h.update(lexicon.canonical_text());
  return h.hex_digest().substr(0, 16);
}

inline FeatureBundle structural_features(const FragmentSequence& seq,
                                         std::size_t i,
                                         std::size_t citation_index) {
  const Fragment& frag = seq.fragments.at(i);
  FeatureBundle b;
  b.set("f_other_cite", frag.other_citation_ids.empty() ? 0.0 : 1.0);
  b.set("f_num_sentences", static_cast<double>(seq.sentence_count()));
  b.set("f_frag_len", static_cast<double>(frag.text.size()));
  b.set("f_same_sent_as_cite",
        frag.sentence_index == seq.fragments.at(citation_index).sentence_index
            ? 1.0
            : 0.0);
  b.set("f_same_sent_as_prev",
        i > 0 && frag.sentence_index == seq.fragments[i - 1].sentence_index
            ? 1.0
            : 0.0);
  b.set("f_cite_distance", static_cast<double>(i) -
                               static_cast<double>(citation_index));
  return b;
}

inline void discourse_features(FeatureBundle& b, const Fragment& frag,
                               const ConnectiveLexicon& lexicon) {
  DiscourseClass cls = lexicon.match_fragment(frag.text);
  b.set("f_disc_temporal", cls == DiscourseClass::temporal ? 1.0 : 0.0);
  b.set("f_disc_contingency", cls == DiscourseClass::contingency ? 1.0 : 0.0);
  b.set("f_disc_expansion", cls == DiscourseClass::expansion ? 1.0 : 0.0);
  b.set("f_disc_comparison", cls == DiscourseClass::comparison ? 1.0 : 0.0);
}

inline FeaturizedSequence featurize(
    const SpanInstance& instance, const FeatureConfig& config,
    const ConnectiveLexicon& lexicon,
    const AbbreviationSet& abbrevs = AbbreviationSet::builtin()) {
  const FragmentSequence& seq = instance.fragments;
  if (seq.fragments.empty())
    throw std::invalid_argument("featurize: instance has no fragments");
  const std::size_t citation_index = citing_fragment_index(seq);

  std::optional<double> cite_len;
  if (config.citation)
    cite_len = citation_length_feature(instance.citation, abbrevs);

  FeaturizedSequence out;
  out.config_fingerprint = config_fingerprint(config, lexicon);
  out.bundles.reserve(seq.fragments.size());
  for (std::size_t i = 0; i < seq.fragments.size(); ++i) {
    const Fragment& frag = seq.fragments[i];
    FeatureBundle b;
    if (config.structural) {
      FeatureBundle s = structural_features(seq, i, citation_index);
      for (const auto& [k, v] : s.values) b.set(k, v);
    }
    if (config.citation) {
      auto lm = lm_divergence(frag.text, instance.citation, config.epsilon,
                              config.window_half_width);
      b.set("f_lm", lm.value_or(0.0));
      b.set("f_lm_missing", lm ? 0.0 : 1.0);
      b.set("f_jaccard", jaccard_feature(frag.text, instance.citation));
      b.set("f_cite_len", cite_len.value_or(0.0));
      b.set("f_cite_missing", cite_len ? 0.0 : 1.0);
    }
    if (config.discourse) discourse_features(b, frag, lexicon);
    if (config.temporal) {
      std::optional<double> gap;
      if (i > 0) gap = temporal_gap(frag.text, seq.fragments[i - 1].text);
      b.set("f_temporal_gap", gap.value_or(0.0));
      b.set("f_temporal_gap_missing", gap ? 0.0 : 1.0);
    }
    out.bundles.push_back(std::move(b));
  }
  return out;
}

// Per-feature quantile bin edges, fit on training data only and stored in
// the model file; application adds one indicator per bin.
class QuantileBinner {
 public:
  QuantileBinner() = default;
  explicit QuantileBinner(int bin_count) : bin_count_(bin_count) {}

  int bin_count() const { return bin_count_; }
  bool fitted() const { return !edges_.empty(); }

  void fit(const std::vector<const FeaturizedSequence*>& sequences,
           const std::vector<std::string>& feature_names) {
    edges_.clear();
    for (const auto& name : feature_names) {
      std::vector<double> values;
      for (const auto* seq : sequences)
        for (const auto& b : seq->bundles) values.push_back(b.get(name));
      std::sort(values.begin(), values.end());
      std::vector<double> edges;
      if (!values.empty()) {
        for (int q = 1; q < bin_count_; ++q) {
          std::size_t idx = static_cast<std::size_t>(
              (static_cast<double>(q) * static_cast<double>(values.size())) /
              static_cast<double>(bin_count_));
          if (idx >= values.size()) idx = values.size() - 1;
          edges.push_back(values[idx]);
        }
      }
      edges_[name] = std::move(edges);
    }
  }

  int bin_of(const std::string& name, double value) const {
    auto it = edges_.find(name);
    if (it == edges_.end()) return -1;
    const auto& edges = it->second;
    return static_cast<int>(
        std::upper_bound(edges.begin(), edges.end(), value) - edges.begin());
  }

  static std::string indicator_name(const std::string& feature, int bin) {
    return feature + "_q" + std::to_string(bin);
  }

  void apply(FeatureBundle& bundle) const {
    for (const auto& [name, edges] : edges_) {
      int bin = bin_of(name, bundle.get(name));
      for (int q = 0; q < bin_count_; ++q)
        bundle.set(indicator_name(name, q), q == bin ? 1.0 : 0.0);
    }
  }

  void apply(FeaturizedSequence& seq) const {
    for (auto& b : seq.bundles) apply(b);
  }

  json to_json_value() const {
    json j;
    j["bin_count"] = bin_count_;
    json edges = json::object();
    for (const auto& [name, e] : edges_) edges[name] = e;
    j["edges"] = std::move(edges);
    return j;
  }

  static QuantileBinner from_json_value(const json& j) {
    QuantileBinner binner(j.at("bin_count").get<int>());
    for (const auto& [name, e] : j.at("edges").items())
      binner.edges_[name] = e.get<std::vector<double>>();
    return binner;
  }

  bool operator==(const QuantileBinner&) const = default;

 private:
  int bin_count_ = 8;
  std::map<std::string, std::vector<double>> edges_;
};

}  // namespace citespan
