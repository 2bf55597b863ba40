#pragma once

// Competitor systems: CS (citing sentence), IC (paragraph start or previous
// citation through the citing sentence), CSW (±2 sentence window plus cue-word
// sentences), and CSPC (per-fragment random forest, no sequence structure).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "citespan/corpus.hpp"
#include "citespan/features.hpp"

namespace citespan {

// Sentence-initial cue words that extend the CSW window.
class CueLexicon {
 public:
  void add(const std::string& cue) {
    auto tokens = tokenize(cue);
    if (tokens.empty()) return;
    max_tokens_ = std::max(max_tokens_, tokens.size());
    entries_.insert(tokens);
  }

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  // True when the sentence's initial tokens spell out one of the cues.
  bool matches_sentence_start(const std::string& sentence_text) const {
    auto tokens = tokenize(sentence_text);
    std::vector<std::string> prefix;
    for (std::size_t n = 1; n <= std::min(max_tokens_, tokens.size()); ++n) {
      prefix.assign(tokens.begin(), tokens.begin() + n);
      if (entries_.count(prefix)) return true;
    }
    return false;
  }

  std::string canonical_text() const {
    std::string out;
    for (const auto& cue : entries_) {
      for (std::size_t i = 0; i < cue.size(); ++i) {
        if (i) out += ' ';
        out += cue[i];
      }
      out += '\n';
    }
    return out;
  }

  static CueLexicon from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open cue lexicon: " + path);
    CueLexicon lex;
    std::string line;
    while (std::getline(in, line)) {
      auto trimmed = trim(line);
      if (trimmed.empty() || trimmed.front() == '#') continue;
      lex.add(std::string(trimmed));
    }
    return lex;
  }

  static CueLexicon builtin() {
    CueLexicon lex;
    for (const char* cue :
         {"this", "these", "those", "that", "such", "it", "its", "they",
          "their", "he", "she", "his", "her", "here", "above-mentioned",
          "aforementioned", "the above", "the former", "the latter",
          "the same"})
      lex.add(cue);
    return lex;
  }

 private:
  std::set<std::vector<std::string>> entries_;
  std::size_t max_tokens_ = 0;
};

namespace detail {

inline std::vector<std::size_t> fragments_of_sentences(
    const FragmentSequence& seq, std::size_t first, std::size_t last) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < seq.fragments.size(); ++i) {
    std::size_t s = seq.fragments[i].sentence_index;
    if (s >= first && s <= last) out.push_back(i);
  }
  return out;
}

}  // namespace detail

// All fragments of the sentence holding the citation marker.
inline std::vector<std::size_t> baseline_cs(const SpanInstance& instance) {
  const FragmentSequence& seq = instance.fragments;
  std::size_t citing = seq.fragments[instance.citing_index()].sentence_index;
  return detail::fragments_of_sentences(seq, citing, citing);
}

// Sentences from the paragraph start, or from just after the nearest
// preceding citation marker, through the citing sentence.
inline std::vector<std::size_t> baseline_ic(const SpanInstance& instance) {
  const FragmentSequence& seq = instance.fragments;
  std::size_t citing = seq.fragments[instance.citing_index()].sentence_index;
  std::size_t start = 0;
  bool found = false;
  std::size_t best_offset = 0;
  for (const auto& mark : instance.other_citation_offsets) {
    if (mark.offset < instance.citation_offset &&
        (!found || mark.offset > best_offset)) {
      best_offset = mark.offset;
      found = true;
    }
  }
  if (found) {
    std::size_t frag = locate_citation(seq, best_offset);
    start = std::min(seq.fragments[frag].sentence_index + 1, citing);
  }
  return detail::fragments_of_sentences(seq, start, citing);
}

// ±2 sentences around the citing sentence, clipped to the paragraph, plus any
// sentence outside the window that opens with a cue word.
inline std::vector<std::size_t> baseline_csw(const SpanInstance& instance,
                                             const CueLexicon& cues) {
  const FragmentSequence& seq = instance.fragments;
  std::size_t citing = seq.fragments[instance.citing_index()].sentence_index;
  std::size_t lo = citing >= 2 ? citing - 2 : 0;
  std::size_t hi = std::min(citing + 2, seq.sentence_count() - 1);

  std::vector<bool> include(seq.sentence_count(), false);
  for (std::size_t s = lo; s <= hi; ++s) include[s] = true;
  for (std::size_t s = 0; s < seq.sentence_count(); ++s) {
    if (include[s]) continue;
    auto [fb, fe] = seq.sentence_boundaries[s];
    std::size_t cb = seq.fragments[fb].char_start;
    std::size_t ce = seq.fragments[fe - 1].char_end;
    if (cues.matches_sentence_start(
            instance.paragraph_text.substr(cb, ce - cb)))
      include[s] = true;
  }

  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < seq.fragments.size(); ++i)
    if (include[seq.fragments[i].sentence_index]) out.push_back(i);
  return out;
}

// CSPC: a bagged decision-tree ensemble classifying fragments in isolation.

struct PlainConfig {
  int tree_count = 100;
  int max_depth = 12;
  std::uint64_t seed = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::array<double, 2> freq{0.0, 0.0};  // leaf class frequencies
};

struct PlainClassifierModel {
  std::vector<std::string> feature_names;  // raw registry order
  std::vector<std::vector<TreeNode>> trees;
  PlainConfig config;
  std::string fingerprint;
  FeatureConfig feature_config;

  int vote(const std::vector<TreeNode>& tree,
           const std::vector<double>& x) const {
    int node = 0;
    while (tree[node].feature >= 0)
      node = x[tree[node].feature] <= tree[node].threshold ? tree[node].left
                                                           : tree[node].right;
    return tree[node].freq[1] > tree[node].freq[0] ? 1 : 0;
  }

  int classify(const std::vector<double>& x) const {
    int covered_votes = 0;
    for (const auto& tree : trees) covered_votes += vote(tree, x);
    return 2 * covered_votes > static_cast<int>(trees.size()) ? 1 : 0;
  }
};

namespace detail {

inline double gini(double n0, double n1) {
  double n = n0 + n1;
  if (n == 0.0) return 0.0;
  double p0 = n0 / n, p1 = n1 / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

struct TreeBuilder {
  const std::vector<std::vector<double>>& x;
  const std::vector<int>& y;
  int max_depth;
  std::size_t feature_count;
  std::mt19937_64& rng;
  std::vector<TreeNode> nodes;

  int make_leaf(const std::vector<std::size_t>& samples) {
    TreeNode leaf;
    double counts[2] = {0.0, 0.0};
    for (auto s : samples) counts[y[s]] += 1.0;
    double total = counts[0] + counts[1];
    leaf.freq = {counts[0] / total, counts[1] / total};
    nodes.push_back(leaf);
    return static_cast<int>(nodes.size()) - 1;
  }

  int build(const std::vector<std::size_t>& samples, int depth) {
    double n0 = 0.0, n1 = 0.0;
    for (auto s : samples) (y[s] ? n1 : n0) += 1.0;
    if (n0 == 0.0 || n1 == 0.0 || depth >= max_depth || samples.size() < 2)
      return make_leaf(samples);

    // Candidate features: a deterministic sample of ceil(sqrt(F)).
    std::vector<std::size_t> order(feature_count);
    for (std::size_t i = 0; i < feature_count; ++i) order[i] = i;
    deterministic_shuffle(order, rng);
    std::size_t m = static_cast<std::size_t>(
        std::ceil(std::sqrt(static_cast<double>(feature_count))));

    double node_gini = gini(n0, n1);
    double best_score = node_gini - 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::pair<double, int>> column;
    for (std::size_t c = 0; c < m; ++c) {
      std::size_t f = order[c];
      column.clear();
      for (auto s : samples) column.emplace_back(x[s][f], y[s]);
      std::sort(column.begin(), column.end());

      double l0 = 0.0, l1 = 0.0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        (column[i].second ? l1 : l0) += 1.0;
        if (column[i].first == column[i + 1].first) continue;
        double nl = l0 + l1, nr = n0 + n1 - nl;
        double score =
            (nl * gini(l0, l1) + nr * gini(n0 - l0, n1 - l1)) / (n0 + n1);
        if (score < best_score) {
          best_score = score;
          best_feature = static_cast<int>(f);
          best_threshold = column[i].first +
                           0.5 * (column[i + 1].first - column[i].first);
        }
      }
    }
    if (best_feature < 0) return make_leaf(samples);

    std::vector<std::size_t> left, right;
    for (auto s : samples)
      (x[s][best_feature] <= best_threshold ? left : right).push_back(s);
    if (left.empty() || right.empty()) return make_leaf(samples);

    TreeNode split;
    split.feature = best_feature;
    split.threshold = best_threshold;
    nodes.push_back(split);
    int index = static_cast<int>(nodes.size()) - 1;
    nodes[index].left = build(left, depth + 1);
    nodes[index].right = build(right, depth + 1);
    return index;
  }
};

inline std::vector<double> dense_bundle(const FeatureBundle& bundle,
                                        const std::vector<std::string>& names) {
  std::vector<double> x(names.size(), 0.0);
  for (std::size_t f = 0; f < names.size(); ++f) x[f] = bundle.get(names[f]);
  return x;
}

}  // namespace detail

inline PlainClassifierModel train_plain(
    const std::vector<const SpanInstance*>& train_set,
    const FeatureConfig& feature_config, const ConnectiveLexicon& lexicon,
    const PlainConfig& config,
    const AbbreviationSet& abbrevs = AbbreviationSet::builtin()) {
  if (train_set.empty())
    throw std::invalid_argument("train_plain: empty training set");
  if (config.tree_count < 1 || config.max_depth < 1)
    throw std::invalid_argument("train_plain: bad tree_count or max_depth");

  PlainClassifierModel model;
  model.feature_names = feature_registry(feature_config);
  model.config = config;
  model.feature_config = feature_config;
  model.fingerprint = config_fingerprint(feature_config, lexicon);

  // Every fragment is an independent training example.
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (const auto* inst : train_set) {
    if (!inst->gold_labels)
      throw std::invalid_argument("train_plain: instance " +
                                  inst->instance_id() + " has no gold labels");
    FeaturizedSequence feats = featurize(*inst, feature_config, lexicon,
                                         abbrevs);
    for (std::size_t i = 0; i < feats.bundles.size(); ++i) {
      x.push_back(detail::dense_bundle(feats.bundles[i], model.feature_names));
      y.push_back((*inst->gold_labels)[i]);
    }
  }

  const std::size_t n = x.size();
  model.trees.reserve(config.tree_count);
  for (int t = 0; t < config.tree_count; ++t) {
    std::mt19937_64 rng(mix_seed(config.seed, 0x7265650ull + t));
    std::vector<std::size_t> bootstrap(n);
    for (std::size_t i = 0; i < n; ++i)
      bootstrap[i] = detail::bounded_draw(rng, n);
    std::sort(bootstrap.begin(), bootstrap.end());

    detail::TreeBuilder builder{x, y, config.max_depth,
                                model.feature_names.size(), rng, {}};
    builder.build(bootstrap, 0);
    model.trees.push_back(std::move(builder.nodes));
  }
  return model;
}

inline std::vector<std::size_t> predict_plain(
    const SpanInstance& instance, const PlainClassifierModel& model,
    const ConnectiveLexicon& lexicon,
    const AbbreviationSet& abbrevs = AbbreviationSet::builtin()) {
  FeaturizedSequence feats =
      featurize(instance, model.feature_config, lexicon, abbrevs);
  if (feats.config_fingerprint != model.fingerprint)
    throw std::runtime_error("feature fingerprint mismatch: sequence " +
                             feats.config_fingerprint + " vs model " +
                             model.fingerprint);
  std::vector<std::size_t> covered;
  for (std::size_t i = 0; i < feats.bundles.size(); ++i)
    if (model.classify(
            detail::dense_bundle(feats.bundles[i], model.feature_names)))
      covered.push_back(i);
  return covered;
}

inline json plain_model_to_json(const PlainClassifierModel& model) {
  json j;
  j["format"] = "citespan-plain-model";
  j["version"] = 1;
  j["fingerprint"] = model.fingerprint;
  json fc;
  to_json(fc, model.feature_config);
  j["feature_config"] = std::move(fc);
  j["feature_order"] = model.feature_names;
  j["tree_count"] = model.config.tree_count;
  j["max_depth"] = model.config.max_depth;
  j["seed"] = model.config.seed;
  json trees = json::array();
  for (const auto& tree : model.trees) {
    json nodes = json::array();
    for (const auto& node : tree) {
      if (node.feature < 0) {
        nodes.push_back({{"leaf", {node.freq[0], node.freq[1]}}});
      } else {
        nodes.push_back({{"split", model.feature_names[node.feature]},
                         {"threshold", node.threshold},
                         {"left", node.left},
                         {"right", node.right}});
      }
    }
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  return j;
}

inline PlainClassifierModel plain_model_from_json(const json& j) {
  if (j.value("format", "") != "citespan-plain-model")
    throw std::runtime_error("not a plain model file (missing format tag)");
  if (j.value("version", 0) != 1)
    throw std::runtime_error("unsupported plain model version");

  PlainClassifierModel model;
  model.fingerprint = j.at("fingerprint").get<std::string>();
  from_json(j.at("feature_config"), model.feature_config);
  model.feature_names = j.at("feature_order").get<std::vector<std::string>>();
  model.config.tree_count = j.at("tree_count").get<int>();
  model.config.max_depth = j.at("max_depth").get<int>();
  model.config.seed = j.at("seed").get<std::uint64_t>();

  std::map<std::string, int> index;
  for (std::size_t i = 0; i < model.feature_names.size(); ++i)
    index[model.feature_names[i]] = static_cast<int>(i);

  for (const auto& tree_json : j.at("trees")) {
    std::vector<TreeNode> tree;
    for (const auto& node_json : tree_json) {
      TreeNode node;
      if (node_json.contains("leaf")) {
        node.freq[0] = node_json.at("leaf").at(0).get<double>();
        node.freq[1] = node_json.at("leaf").at(1).get<double>();
      } else {
        auto name = node_json.at("split").get<std::string>();
        auto it = index.find(name);
        if (it == index.end())
          throw std::runtime_error("plain model split on unknown feature: " +
                                   name);
        node.feature = it->second;
        node.threshold = node_json.at("threshold").get<double>();
        node.left = node_json.at("left").get<int>();
        node.right = node_json.at("right").get<int>();
      }
      tree.push_back(node);
    }
    for (const auto& node : tree)
      if (node.feature >= 0 &&
          (node.left < 0 || node.right < 0 ||
           node.left >= static_cast<int>(tree.size()) ||
           node.right >= static_cast<int>(tree.size())))
        throw std::runtime_error("plain model has dangling tree links");
    model.trees.push_back(std::move(tree));
  }
  return model;
}

inline void save_plain_model(const PlainClassifierModel& model,
                             const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << plain_model_to_json(model).dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline PlainClassifierModel load_plain_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("model file " + path + ": " + e.what());
  }
  return plain_model_from_json(j);
}

}  // namespace citespan
