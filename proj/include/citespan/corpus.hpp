#pragma once

// Corpus model and JSONL (one record per line) serialization. Instances
// pair a citing paragraph with one target citation's content; fragments
// are recomputed from paragraph_text at load time so offsets can never
// drift from the stored text.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "citespan/segmentation.hpp"
#include "citespan/text.hpp"

namespace citespan {

using json = nlohmann::json;

// Schema or label problems in user-supplied data; the CLI maps these to a
// distinct exit code from ordinary runtime failures.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CitationType { news, web };

inline std::string to_string(CitationType t) {
  return t == CitationType::news ? "news" : "web";
}

inline CitationType citation_type_from_string(const std::string& s) {
  if (s == "news") return CitationType::news;
  if (s == "web") return CitationType::web;
  throw ValidationError("unknown citation_type: " + s);
}

struct CitationDocument {
  std::string id;
  std::vector<std::string> paragraphs;

  std::size_t sentence_count(const AbbreviationSet& abbrevs) const {
    std::size_t n = 0;
    for (const auto& p : paragraphs) n += split_sentences(p, abbrevs).size();
    return n;
  }

  bool operator==(const CitationDocument&) const = default;
};

struct SpanInstance {
  std::string entity_id;
  std::string paragraph_id;
  std::string paragraph_text;
  std::size_t citation_offset = 0;
  std::vector<CitationMark> other_citation_offsets;
  CitationType citation_type = CitationType::web;
  CitationDocument citation;
  std::optional<std::vector<int>> gold_labels;  // 1 = covered, per fragment

  FragmentSequence fragments;  // derived, not serialized

  std::string instance_id() const { return entity_id + "/" + paragraph_id; }

  std::size_t citing_index() const { return citing_fragment_index(fragments); }
};

inline void rebuild_fragments(SpanInstance& inst,
                              const AbbreviationSet& abbrevs) {
  inst.fragments = build_sequence(inst.paragraph_text, inst.citation_offset,
                                  inst.other_citation_offsets, abbrevs);
  if (inst.gold_labels &&
      inst.gold_labels->size() != inst.fragments.size()) {
    throw ValidationError("instance " + inst.instance_id() + ": gold_labels has " +
                          std::to_string(inst.gold_labels->size()) +
                          " entries but paragraph segments into " +
                          std::to_string(inst.fragments.size()) + " fragments");
  }
}

inline json instance_to_json(const SpanInstance& inst) {
  json rec;
  rec["entity_id"] = inst.entity_id;
  rec["paragraph_id"] = inst.paragraph_id;
  rec["paragraph_text"] = inst.paragraph_text;
  rec["citation_offset"] = inst.citation_offset;
  json others = json::array();
  for (const auto& o : inst.other_citation_offsets)
    others.push_back({{"id", o.id}, {"offset", o.offset}});
  rec["other_citation_offsets"] = std::move(others);
  rec["citation_type"] = to_string(inst.citation_type);
  rec["citation"] = {{"id", inst.citation.id},
                     {"paragraphs", inst.citation.paragraphs}};
  if (inst.gold_labels) {
    json labels = json::array();
    for (int v : *inst.gold_labels) labels.push_back(v != 0);
    rec["gold_labels"] = std::move(labels);
  }
  return rec;
}

namespace detail {

template <typename T>
T require_field(const json& rec, const char* key, std::size_t line_no) {
  auto it = rec.find(key);
  if (it == rec.end())
    throw ValidationError("corpus line " + std::to_string(line_no) +
                          ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ValidationError("corpus line " + std::to_string(line_no) +
                          ": field '" + key + "': " + e.what());
  }
}

}  // namespace detail

inline SpanInstance instance_from_json(const json& rec, std::size_t line_no,
                                       const AbbreviationSet& abbrevs) {
  SpanInstance inst;
  inst.entity_id = detail::require_field<std::string>(rec, "entity_id", line_no);
  inst.paragraph_id =
      detail::require_field<std::string>(rec, "paragraph_id", line_no);
  inst.paragraph_text =
      detail::require_field<std::string>(rec, "paragraph_text", line_no);
  inst.citation_offset =
      detail::require_field<std::size_t>(rec, "citation_offset", line_no);
  auto others = detail::require_field<json>(rec, "other_citation_offsets", line_no);
  if (!others.is_array())
    throw ValidationError("corpus line " + std::to_string(line_no) +
                          ": other_citation_offsets must be an array");
  for (const auto& o : others) {
    CitationMark mark;
    mark.id = detail::require_field<std::string>(o, "id", line_no);
    mark.offset = detail::require_field<std::size_t>(o, "offset", line_no);
    inst.other_citation_offsets.push_back(std::move(mark));
  }
  inst.citation_type = citation_type_from_string(
      detail::require_field<std::string>(rec, "citation_type", line_no));
  auto cite = detail::require_field<json>(rec, "citation", line_no);
  inst.citation.id = detail::require_field<std::string>(cite, "id", line_no);
  inst.citation.paragraphs =
      detail::require_field<std::vector<std::string>>(cite, "paragraphs", line_no);
  if (rec.contains("gold_labels")) {
    std::vector<int> gold;
    for (const auto& v : rec.at("gold_labels")) {
      if (!v.is_boolean())
        throw ValidationError("corpus line " + std::to_string(line_no) +
                              ": gold_labels entries must be booleans");
      gold.push_back(v.get<bool>() ? 1 : 0);
    }
    inst.gold_labels = std::move(gold);
  }
  if (inst.citation_offset > inst.paragraph_text.size())
    throw ValidationError("instance " + inst.instance_id() +
                          ": citation_offset beyond paragraph text");
  try {
    rebuild_fragments(inst, abbrevs);
  } catch (const std::invalid_argument& e) {
    throw ValidationError("corpus line " + std::to_string(line_no) + ": " +
                          e.what());
  } catch (const std::out_of_range& e) {
    throw ValidationError("instance " + inst.instance_id() + ": " + e.what());
  }
  return inst;
}

inline std::vector<SpanInstance> load_dataset(
    const std::string& path,
    const AbbreviationSet& abbrevs = AbbreviationSet::builtin()) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  std::vector<SpanInstance> instances;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError("corpus line " + std::to_string(line_no) +
                            ": invalid record: " + e.what());
    }
    instances.push_back(instance_from_json(rec, line_no, abbrevs));
  }
  return instances;
}

inline void save_dataset(const std::vector<SpanInstance>& instances,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  for (const auto& inst : instances) out << instance_to_json(inst).dump() << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

struct FoldAssignment {
  int k = 0;
  std::unordered_map<std::string, int> entity_to_fold;

  int fold_of(const std::string& entity_id) const {
    auto it = entity_to_fold.find(entity_id);
    if (it == entity_to_fold.end())
      throw std::runtime_error("entity not in fold assignment: " + entity_id);
    return it->second;
  }
};

namespace detail {

// Uniform draw in [0, n) by rejection, so results do not depend on the
// standard library's distribution implementation.
inline std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i)
    std::swap(items[i - 1], items[bounded_draw(rng, i)]);
}

}  // namespace detail

// Entity-level fold split: all paragraphs of one entity share a fold.
// Deterministic in (entity set, k, seed); independent of instance order.
inline FoldAssignment split_folds(const std::vector<SpanInstance>& instances,
                                  int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("split_folds: k must be at least 2");
  std::vector<std::string> entities;
  {
    std::unordered_map<std::string, bool> seen;
    for (const auto& inst : instances)
      if (!seen[inst.entity_id]) {
        seen[inst.entity_id] = true;
        entities.push_back(inst.entity_id);
      }
  }
  if (entities.size() < static_cast<std::size_t>(k))
    throw std::invalid_argument(
        "split_folds: " + std::to_string(entities.size()) +
        " entities cannot fill " + std::to_string(k) + " folds");
  std::sort(entities.begin(), entities.end());
  std::mt19937_64 rng(mix_seed(seed, 0xf01d5));
  detail::deterministic_shuffle(entities, rng);

  FoldAssignment folds;
  folds.k = k;
  for (std::size_t i = 0; i < entities.size(); ++i)
    folds.entity_to_fold[entities[i]] = static_cast<int>(i % k);
  return folds;
}

inline json folds_to_json(const FoldAssignment& folds) {
  json j;
  j["k"] = folds.k;
  json map = json::object();
  for (const auto& [entity, fold] : folds.entity_to_fold) map[entity] = fold;
  j["entity_to_fold"] = std::move(map);
  return j;
}

inline FoldAssignment folds_from_json(const json& j) {
  FoldAssignment folds;
  folds.k = j.at("k").get<int>();
  for (const auto& [entity, fold] : j.at("entity_to_fold").items())
    folds.entity_to_fold[entity] = fold.get<int>();
  return folds;
}

}  // namespace citespan
