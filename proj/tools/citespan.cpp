// citespan: single-binary CLI over the citation span library.
//
// Subcommands: validate, segment, synth, train, predict, evaluate, report.
// Every artifact-producing command writes a manifest next to its output so a
// run can be rehashed and replayed. Exit codes: 0 ok, 1 runtime error,
// 2 validation failure.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "citespan/baselines.hpp"
#include "citespan/corpus.hpp"
#include "citespan/crf.hpp"
#include "citespan/eval.hpp"
#include "citespan/manifest.hpp"
#include "citespan/synth.hpp"

namespace {

using citespan::json;

struct CliState {
  std::uint64_t seed = 0;
  std::string config_path;
  std::string format = "text";
  std::string connectives_path;
  std::string abbreviations_path;
  std::string cues_path;

  citespan::FeatureConfig features;
  citespan::TrainConfig crf_config;
  citespan::PlainConfig plain_config;
  int folds = 5;
  bool no_citation_features = false;
};

// Option handles needed later to decide whether a config-file value applies
// (explicit flags and environment variables win over the config file).
struct OptionRefs {
  CLI::Option* connectives = nullptr;
  CLI::Option* abbreviations = nullptr;
  CLI::Option* cues = nullptr;
  CLI::Option* l2 = nullptr;
  CLI::Option* max_iterations = nullptr;
  CLI::Option* gradient_tolerance = nullptr;
  CLI::Option* trees = nullptr;
  CLI::Option* depth = nullptr;
  CLI::Option* folds = nullptr;
};

bool unset(const CLI::Option* opt) { return opt == nullptr || opt->count() == 0; }

void apply_config_file(CliState& st, const OptionRefs& refs) {
  if (st.config_path.empty()) return;
  std::ifstream in(st.config_path);
  if (!in)
    throw std::runtime_error("cannot open config file: " + st.config_path);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    throw citespan::ValidationError("config file " + st.config_path + ": " +
                                    e.what());
  }
  try {
    if (cfg.contains("features")) cfg.at("features").get_to(st.features);
    if (cfg.contains("crf")) {
      const json& c = cfg.at("crf");
      if (c.contains("l2_strength") && unset(refs.l2))
        st.crf_config.l2_strength = c.at("l2_strength").get<double>();
      if (c.contains("max_iterations") && unset(refs.max_iterations))
        st.crf_config.max_iterations = c.at("max_iterations").get<int>();
      if (c.contains("gradient_tolerance") && unset(refs.gradient_tolerance))
        st.crf_config.gradient_tolerance =
            c.at("gradient_tolerance").get<double>();
    }
    if (cfg.contains("plain")) {
      const json& c = cfg.at("plain");
      if (c.contains("tree_count") && unset(refs.trees))
        st.plain_config.tree_count = c.at("tree_count").get<int>();
      if (c.contains("max_depth") && unset(refs.depth))
        st.plain_config.max_depth = c.at("max_depth").get<int>();
    }
    if (cfg.contains("folds") && unset(refs.folds))
      st.folds = cfg.at("folds").get<int>();
    if (cfg.contains("resources")) {
      const json& r = cfg.at("resources");
      if (r.contains("connectives") && unset(refs.connectives))
        st.connectives_path = r.at("connectives").get<std::string>();
      if (r.contains("abbreviations") && unset(refs.abbreviations))
        st.abbreviations_path = r.at("abbreviations").get<std::string>();
      if (r.contains("cues") && unset(refs.cues))
        st.cues_path = r.at("cues").get<std::string>();
    }
  } catch (const json::exception& e) {
    throw citespan::ValidationError("config file " + st.config_path + ": " +
                                    e.what());
  }
}

struct Resources {
  citespan::ConnectiveLexicon connectives;
  citespan::AbbreviationSet abbreviations;
  citespan::CueLexicon cues;
};

Resources load_resources(const CliState& st) {
  Resources r{citespan::ConnectiveLexicon::builtin(),
              citespan::AbbreviationSet::builtin(),
              citespan::CueLexicon::builtin()};
  if (!st.connectives_path.empty())
    r.connectives = citespan::ConnectiveLexicon::from_file(st.connectives_path);
  if (!st.abbreviations_path.empty())
    r.abbreviations =
        citespan::AbbreviationSet::from_file(st.abbreviations_path);
  if (!st.cues_path.empty())
    r.cues = citespan::CueLexicon::from_file(st.cues_path);
  return r;
}

// Models remember which connective lexicon they were trained with; prediction
// must use the same one or the feature fingerprint check fails.
citespan::ConnectiveLexicon lexicon_for(const citespan::FeatureConfig& fc,
                                        const CliState& st) {
  if (!st.connectives_path.empty())
    return citespan::ConnectiveLexicon::from_file(st.connectives_path);
  if (!fc.lexicon_path.empty())
    return citespan::ConnectiveLexicon::from_file(fc.lexicon_path);
  return citespan::ConnectiveLexicon::builtin();
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(csv);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write output file: " + path);
  return out;
}

std::size_t count_entities(const std::vector<citespan::SpanInstance>& data) {
  std::set<std::string> ids;
  for (const auto& inst : data) ids.insert(inst.entity_id);
  return ids.size();
}

//
// validate
//

int cmd_validate(const CliState& st, const std::string& corpus_path,
                 const std::string& output_path) {
  Resources res = load_resources(st);
  auto data = citespan::load_dataset(corpus_path, res.abbreviations);

  json instances = json::array();
  std::size_t with_gold = 0;
  for (const auto& inst : data) {
    bool has_gold = inst.gold_labels.has_value();
    if (has_gold) ++with_gold;
    if (st.format == "text") {
      std::cout << inst.instance_id() << ": " << inst.fragments.size()
                << " fragments, " << inst.fragments.sentence_count()
                << " sentences, gold=" << (has_gold ? "yes" : "no") << "\n";
    }
    instances.push_back({{"instance_id", inst.instance_id()},
                         {"fragments", inst.fragments.size()},
                         {"sentences", inst.fragments.sentence_count()},
                         {"has_gold", has_gold}});
  }
  json report{{"format", "citespan-validate-report"},
              {"version", 1},
              {"instances", instances},
              {"summary",
               {{"instances", data.size()},
                {"entities", count_entities(data)},
                {"with_gold", with_gold}}}};
  if (st.format == "json" && output_path.empty())
    std::cout << report.dump(2) << "\n";
  else
    std::cout << "ok: " << data.size() << " instances, " << count_entities(data)
              << " entities, " << with_gold << " with gold labels\n";

  if (!output_path.empty()) {
    open_output(output_path) << report.dump(2) << "\n";
    citespan::RunManifest m;
    m.command = "validate";
    m.config_fingerprint = "-";
    m.corpus = citespan::hash_artifact(corpus_path);
    m.outputs.push_back(citespan::hash_artifact(output_path));
    m.seed = st.seed;
    m.timestamp = citespan::utc_timestamp();
    citespan::save_manifest(m, output_path + ".manifest.json");
  }
  return 0;
}

//
// segment
//

json fragment_to_json(const citespan::Fragment& f, bool with_citing) {
  json rec{{"text", f.text},
           {"char_start", f.char_start},
           {"char_end", f.char_end},
           {"sentence_index", f.sentence_index}};
  if (with_citing) rec["citing"] = f.contains_target_citation;
  return rec;
}

void render_sequence_text(std::ostream& out, const std::string& header,
                          const citespan::FragmentSequence& seq,
                          bool with_citing) {
  out << header << ": " << seq.sentence_count() << " sentences, " << seq.size()
      << " fragments\n";
  for (const auto& f : seq.fragments) {
    out << "  [" << f.fragment_index << "] s" << f.sentence_index << " ["
        << f.char_start << "," << f.char_end << ")"
        << (with_citing && f.contains_target_citation ? " *" : "  ") << " "
        << f.text << "\n";
  }
}

int cmd_segment(const CliState& st, const std::string& corpus_path,
                const std::string& text, const std::string& output_path) {
  if (corpus_path.empty() == text.empty())
    throw citespan::ValidationError(
        "segment: exactly one of --corpus or --text is required");
  Resources res = load_resources(st);

  std::ostringstream body;
  if (!corpus_path.empty()) {
    auto data = citespan::load_dataset(corpus_path, res.abbreviations);
    for (const auto& inst : data) {
      if (st.format == "json") {
        json frags = json::array();
        for (const auto& f : inst.fragments.fragments)
          frags.push_back(fragment_to_json(f, true));
        body << json{{"instance_id", inst.instance_id()},
                     {"fragments", frags}}
                    .dump()
             << "\n";
      } else {
        render_sequence_text(body, inst.instance_id(), inst.fragments, true);
      }
    }
  } else {
    citespan::FragmentSequence seq;
    seq.text_length = text.size();
    auto sentences = citespan::split_sentences(text, res.abbreviations);
    for (std::size_t s = 0; s < sentences.size(); ++s) {
      auto [b, e] = sentences[s];
      auto frags = citespan::split_fragments(
          std::string_view(text).substr(b, e - b), s, b);
      std::size_t first = seq.fragments.size();
      for (auto& f : frags) {
        f.fragment_index = seq.fragments.size();
        seq.fragments.push_back(std::move(f));
      }
      seq.sentence_boundaries.emplace_back(first, seq.fragments.size());
    }
    if (st.format == "json") {
      json frags = json::array();
      for (const auto& f : seq.fragments)
        frags.push_back(fragment_to_json(f, false));
      body << json{{"fragments", frags}}.dump(2) << "\n";
    } else {
      render_sequence_text(body, "input", seq, false);
    }
  }

  if (output_path.empty()) {
    std::cout << body.str();
  } else {
    open_output(output_path) << body.str();
    citespan::RunManifest m;
    m.command = "segment";
    m.config_fingerprint = "-";
    m.corpus = corpus_path.empty()
                   ? citespan::ManifestArtifact{"-", "-"}
                   : citespan::hash_artifact(corpus_path);
    m.outputs.push_back(citespan::hash_artifact(output_path));
    m.seed = st.seed;
    m.timestamp = citespan::utc_timestamp();
    citespan::save_manifest(m, output_path + ".manifest.json");
  }
  return 0;
}

//
// synth
//

int cmd_synth(const CliState& st, const std::string& output_path,
              int entities, int paragraphs, const std::string& mixture_csv,
              int vocabulary) {
  citespan::SynthConfig config;
  config.entity_count = entities;
  config.paragraphs_per_entity = paragraphs;
  config.vocabulary_size = vocabulary;
  if (!mixture_csv.empty()) {
    auto parts = split_list(mixture_csv);
    if (parts.size() != config.mixture.size())
      throw citespan::ValidationError(
          "synth: --mixture needs " + std::to_string(config.mixture.size()) +
          " comma-separated shares, got " + std::to_string(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) {
      try {
        config.mixture[i] = std::stod(parts[i]);
      } catch (const std::exception&) {
        throw citespan::ValidationError("synth: bad mixture share: " +
                                        parts[i]);
      }
    }
  }

  auto data = citespan::generate_synthetic(config, st.seed);
  citespan::save_dataset(data, output_path);

  citespan::RunManifest m;
  m.command = "synth";
  m.config_fingerprint = "-";
  m.corpus = citespan::hash_artifact(output_path);
  m.outputs.push_back(m.corpus);
  m.seed = st.seed;
  m.timestamp = citespan::utc_timestamp();
  citespan::save_manifest(m, output_path + ".manifest.json");

  std::cout << "wrote " << data.size() << " instances ("
            << count_entities(data) << " entities) to " << output_path << "\n";
  return 0;
}

//
// train
//

int cmd_train(const CliState& st, const std::string& corpus_path,
              const std::string& output_dir, const std::string& system) {
  Resources res = load_resources(st);
  auto data = citespan::load_dataset(corpus_path, res.abbreviations);
  for (const auto& inst : data) {
    if (!inst.gold_labels)
      throw citespan::ValidationError("train: instance " + inst.instance_id() +
                                      " has no gold labels");
  }

  citespan::FeatureConfig fc = st.features;
  if (st.no_citation_features) fc.citation = false;
  if (!st.connectives_path.empty()) fc.lexicon_path = st.connectives_path;
  citespan::ConnectiveLexicon lexicon = lexicon_for(fc, st);

  std::filesystem::create_directories(output_dir);
  auto folds = citespan::split_folds(data, st.folds, st.seed);
  std::string folds_path = output_dir + "/folds.json";
  open_output(folds_path) << citespan::folds_to_json(folds).dump(2) << "\n";

  citespan::RunManifest m;
  m.command = "train";
  m.config_fingerprint = citespan::config_fingerprint(fc, lexicon);
  m.corpus = citespan::hash_artifact(corpus_path);
  m.seed = st.seed;

  for (int fold = 0; fold < folds.k; ++fold) {
    std::vector<const citespan::SpanInstance*> train_set;
    for (const auto& inst : data)
      if (folds.fold_of(inst.entity_id) != fold) train_set.push_back(&inst);

    std::string model_path = output_dir + "/" + system + ".fold" +
                             std::to_string(fold) + ".json";
    if (system == "crf") {
      citespan::TrainConfig tc = st.crf_config;
      tc.seed = st.seed;
      auto model =
          citespan::train_crf(train_set, fc, lexicon, tc, res.abbreviations);
      citespan::save_model(model, model_path);
    } else {
      citespan::PlainConfig pc = st.plain_config;
      pc.seed = st.seed;
      auto model =
          citespan::train_plain(train_set, fc, lexicon, pc, res.abbreviations);
      citespan::save_plain_model(model, model_path);
    }
    m.models.push_back(citespan::hash_artifact(model_path));
    std::cout << "fold " << fold << ": " << train_set.size()
              << " training instances -> " << model_path << "\n";
  }

  m.outputs.push_back(citespan::hash_artifact(folds_path));
  m.timestamp = citespan::utc_timestamp();
  citespan::save_manifest(m, output_dir + "/" + system + ".manifest.json");
  std::cout << "wrote " << folds.k << " " << system << " models to "
            << output_dir << "\n";
  return 0;
}

//
// predict
//

std::string model_format(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw citespan::ValidationError("model file " + path + ": " + e.what());
  }
  return j.value("format", "");
}

int cmd_predict(const CliState& st, const std::string& corpus_path,
                const std::string& model_path, std::string system,
                const std::string& output_path) {
  if (system == "auto") {
    std::string fmt = model_format(model_path);
    if (fmt == "citespan-crf-model")
      system = "crf";
    else if (fmt == "citespan-plain-model")
      system = "plain";
    else
      throw citespan::ValidationError("model file " + model_path +
                                      ": unrecognized format \"" + fmt + "\"");
  }
  Resources res = load_resources(st);
  auto data = citespan::load_dataset(corpus_path, res.abbreviations);

  std::ostringstream body;
  std::string fingerprint;
  if (system == "crf") {
    auto model = citespan::load_model(model_path);
    auto lexicon = lexicon_for(model.feature_config, st);
    fingerprint = model.fingerprint;
    for (const auto& inst : data) {
      auto covered =
          citespan::predict_span(inst, model, lexicon, res.abbreviations);
      body << json{{"instance_id", inst.instance_id()}, {"covered", covered}}
                  .dump()
           << "\n";
    }
  } else {
    auto model = citespan::load_plain_model(model_path);
    auto lexicon = lexicon_for(model.feature_config, st);
    fingerprint = model.fingerprint;
    for (const auto& inst : data) {
      auto covered =
          citespan::predict_plain(inst, model, lexicon, res.abbreviations);
      body << json{{"instance_id", inst.instance_id()}, {"covered", covered}}
                  .dump()
           << "\n";
    }
  }
  open_output(output_path) << body.str();

  citespan::RunManifest m;
  m.command = "predict";
  m.config_fingerprint = fingerprint;
  m.corpus = citespan::hash_artifact(corpus_path);
  m.models.push_back(citespan::hash_artifact(model_path));
  m.outputs.push_back(citespan::hash_artifact(output_path));
  m.seed = st.seed;
  m.timestamp = citespan::utc_timestamp();
  citespan::save_manifest(m, output_path + ".manifest.json");

  std::cout << "predicted " << data.size() << " instances -> " << output_path
            << "\n";
  return 0;
}

//
// evaluate
//

int cmd_evaluate(const CliState& st, const std::string& corpus_path,
                 const std::string& model_dir, const std::string& systems_csv,
                 const std::string& output_path, bool include_oracle) {
  static const std::set<std::string> kKnown{"cs", "ic", "csw", "cspc", "csps"};
  auto systems = split_list(systems_csv);
  if (systems.empty())
    throw citespan::ValidationError("evaluate: --systems list is empty");
  std::set<std::string> seen;
  bool wants_crf = false, wants_plain = false;
  for (const auto& s : systems) {
    if (!kKnown.count(s))
      throw citespan::ValidationError("evaluate: unknown system: " + s);
    if (!seen.insert(s).second)
      throw citespan::ValidationError("evaluate: duplicate system: " + s);
    wants_crf |= s == "csps";
    wants_plain |= s == "cspc";
  }

  Resources res = load_resources(st);
  auto data = citespan::load_dataset(corpus_path, res.abbreviations);
  for (const auto& inst : data) {
    if (!inst.gold_labels)
      throw citespan::ValidationError("evaluate: instance " +
                                      inst.instance_id() +
                                      " has no gold labels");
  }

  citespan::RunManifest m;
  m.command = "evaluate";
  m.config_fingerprint = "-";

  citespan::FoldAssignment folds;
  std::vector<citespan::CrfModel> crf_models;
  std::vector<citespan::PlainClassifierModel> plain_models;
  citespan::ConnectiveLexicon lexicon = res.connectives;
  if (wants_crf || wants_plain) {
    if (model_dir.empty())
      throw citespan::ValidationError(
          "evaluate: --model-dir is required for learned systems");
    std::string folds_path = model_dir + "/folds.json";
    std::ifstream in(folds_path);
    if (!in)
      throw std::runtime_error("missing fold assignment: " + folds_path);
    folds = citespan::folds_from_json(json::parse(in));
    m.models.push_back(citespan::hash_artifact(folds_path));
    for (int fold = 0; fold < folds.k; ++fold) {
      if (wants_crf) {
        std::string path =
            model_dir + "/crf.fold" + std::to_string(fold) + ".json";
        if (!std::filesystem::exists(path))
          throw std::runtime_error("missing model for fold " +
                                   std::to_string(fold) + ": " + path);
        crf_models.push_back(citespan::load_model(path));
        m.models.push_back(citespan::hash_artifact(path));
      }
      if (wants_plain) {
        std::string path =
            model_dir + "/plain.fold" + std::to_string(fold) + ".json";
        if (!std::filesystem::exists(path))
          throw std::runtime_error("missing model for fold " +
                                   std::to_string(fold) + ": " + path);
        plain_models.push_back(citespan::load_plain_model(path));
        m.models.push_back(citespan::hash_artifact(path));
      }
    }
    const citespan::FeatureConfig& fc = wants_crf
                                            ? crf_models[0].feature_config
                                            : plain_models[0].feature_config;
    lexicon = lexicon_for(fc, st);
    m.config_fingerprint = wants_crf ? crf_models[0].fingerprint
                                     : plain_models[0].fingerprint;
  }

  std::map<std::string, std::vector<citespan::InstanceResult>> results;
  for (const auto& s : systems) results[s];
  if (include_oracle) results["oracle"];

  std::size_t skipped_empty_gold = 0;
  for (const auto& inst : data) {
    auto gold = citespan::gold_covered_set(inst);
    if (gold.empty()) {
      ++skipped_empty_gold;
      continue;
    }
    for (const auto& s : systems) {
      std::vector<std::size_t> predicted;
      if (s == "cs") {
        predicted = citespan::baseline_cs(inst);
      } else if (s == "ic") {
        predicted = citespan::baseline_ic(inst);
      } else if (s == "csw") {
        predicted = citespan::baseline_csw(inst, res.cues);
      } else if (s == "csps") {
        const auto& model = crf_models[folds.fold_of(inst.entity_id)];
        predicted =
            citespan::predict_span(inst, model, lexicon, res.abbreviations);
      } else {
        const auto& model = plain_models[folds.fold_of(inst.entity_id)];
        predicted =
            citespan::predict_plain(inst, model, lexicon, res.abbreviations);
      }
      results[s].push_back(citespan::evaluate_instance(inst, predicted));
    }
    if (include_oracle)
      results["oracle"].push_back(citespan::evaluate_instance(inst, gold));
  }

  auto report = citespan::build_report(results, skipped_empty_gold);
  citespan::save_report(report, output_path);

  m.corpus = citespan::hash_artifact(corpus_path);
  m.outputs.push_back(citespan::hash_artifact(output_path));
  m.seed = st.seed;
  m.timestamp = citespan::utc_timestamp();
  citespan::save_manifest(m, output_path + ".manifest.json");

  if (st.format == "json")
    std::cout << citespan::report_to_json(report).dump(2) << "\n";
  else
    std::cout << citespan::render_report_text(report);
  return 0;
}

//
// report
//

int cmd_report(const CliState& st, const std::string& report_path,
               bool merge_tail) {
  auto report = citespan::load_report(report_path);
  if (st.format == "json")
    std::cout << citespan::report_to_json(report).dump(2) << "\n";
  else
    std::cout << citespan::render_report_text(report, merge_tail);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"citation span detection toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  CliState st;
  OptionRefs refs;
  app.add_option("--seed", st.seed, "random seed for all stochastic steps")
      ->envname("CITESPAN_SEED");
  app.add_option("--config", st.config_path, "JSON config file")
      ->envname("CITESPAN_CONFIG");
  app.add_option("--format", st.format, "output format")
      ->envname("CITESPAN_FORMAT")
      ->check(CLI::IsMember({"text", "json"}));
  refs.connectives =
      app.add_option("--connectives", st.connectives_path,
                     "connective lexicon file (default: builtin)")
          ->envname("CITESPAN_CONNECTIVES");
  refs.abbreviations =
      app.add_option("--abbreviations", st.abbreviations_path,
                     "abbreviation list file (default: builtin)")
          ->envname("CITESPAN_ABBREVIATIONS");
  refs.cues = app.add_option("--cues", st.cues_path,
                             "cue word list file (default: builtin)")
                  ->envname("CITESPAN_CUES");

  auto* validate_cmd =
      app.add_subcommand("validate", "check a corpus file and report on it");
  std::string v_corpus, v_output;
  validate_cmd->add_option("corpus", v_corpus, "corpus JSONL file")
      ->required();
  validate_cmd->add_option("--output", v_output, "write a JSON report here");

  auto* segment_cmd =
      app.add_subcommand("segment", "dump fragment boundaries");
  std::string s_corpus, s_text, s_output;
  segment_cmd->add_option("--corpus", s_corpus, "corpus JSONL file");
  segment_cmd->add_option("--text", s_text, "segment a single paragraph");
  segment_cmd->add_option("--output", s_output, "write here instead of stdout");

  auto* synth_cmd =
      app.add_subcommand("synth", "generate a synthetic labeled corpus");
  std::string y_output, y_mixture;
  int y_entities = 100, y_paragraphs = 5, y_vocabulary = 12;
  synth_cmd->add_option("--output", y_output, "corpus JSONL file to write")
      ->required();
  synth_cmd->add_option("--entities", y_entities, "number of entities")
      ->envname("CITESPAN_ENTITIES");
  synth_cmd
      ->add_option("--paragraphs", y_paragraphs, "paragraphs per entity")
      ->envname("CITESPAN_PARAGRAPHS");
  synth_cmd
      ->add_option("--mixture", y_mixture,
                   "span bucket shares: <=0.5,(0.5-1],(1-2],(2-5],>5")
      ->envname("CITESPAN_MIXTURE");
  synth_cmd
      ->add_option("--vocabulary", y_vocabulary, "words per topic vocabulary")
      ->envname("CITESPAN_VOCABULARY");

  auto* train_cmd =
      app.add_subcommand("train", "train per-fold models on a labeled corpus");
  std::string t_corpus, t_output_dir, t_system = "crf";
  train_cmd->add_option("corpus", t_corpus, "corpus JSONL file")->required();
  train_cmd->add_option("--output-dir", t_output_dir, "model directory")
      ->required();
  train_cmd->add_option("--system", t_system, "model family")
      ->check(CLI::IsMember({"crf", "plain"}));
  refs.folds = train_cmd->add_option("--folds", st.folds, "fold count")
                   ->envname("CITESPAN_FOLDS");
  refs.l2 = train_cmd
                ->add_option("--l2", st.crf_config.l2_strength,
                             "crf l2 regularization strength")
                ->envname("CITESPAN_L2");
  refs.max_iterations =
      train_cmd
          ->add_option("--max-iterations", st.crf_config.max_iterations,
                       "crf optimizer iteration cap")
          ->envname("CITESPAN_MAX_ITERATIONS");
  refs.gradient_tolerance =
      train_cmd
          ->add_option("--gradient-tolerance",
                       st.crf_config.gradient_tolerance,
                       "crf optimizer gradient tolerance")
          ->envname("CITESPAN_GRADIENT_TOLERANCE");
  refs.trees = train_cmd
                   ->add_option("--trees", st.plain_config.tree_count,
                                "plain classifier tree count")
                   ->envname("CITESPAN_TREES");
  refs.depth = train_cmd
                   ->add_option("--depth", st.plain_config.max_depth,
                                "plain classifier tree depth cap")
                   ->envname("CITESPAN_DEPTH");
  train_cmd->add_flag("--no-citation-features", st.no_citation_features,
                      "ablation: drop citation features");

  auto* predict_cmd =
      app.add_subcommand("predict", "predict covered fragments with one model");
  std::string p_corpus, p_model, p_system = "auto", p_output;
  predict_cmd->add_option("corpus", p_corpus, "corpus JSONL file")->required();
  predict_cmd->add_option("--model", p_model, "model file")->required();
  predict_cmd->add_option("--system", p_system, "model family")
      ->check(CLI::IsMember({"crf", "plain", "auto"}));
  predict_cmd->add_option("--output", p_output, "predictions JSONL file")
      ->required();

  auto* evaluate_cmd = app.add_subcommand(
      "evaluate", "score systems out-of-fold and write a report");
  std::string e_corpus, e_model_dir, e_systems = "cs,ic,csw,cspc,csps",
              e_output;
  bool e_oracle = false;
  evaluate_cmd->add_option("corpus", e_corpus, "corpus JSONL file")
      ->required();
  evaluate_cmd->add_option("--model-dir", e_model_dir,
                           "directory holding folds.json and fold models");
  evaluate_cmd->add_option("--systems", e_systems,
                           "comma-separated systems: cs,ic,csw,cspc,csps");
  evaluate_cmd->add_option("--output", e_output, "report JSON file")
      ->required();
  evaluate_cmd->add_flag(
      "--include-oracle", e_oracle,
      "also score gold labels fed back as predictions (debug)");

  auto* report_cmd =
      app.add_subcommand("report", "render a stored evaluation report");
  std::string r_report;
  bool r_merge_tail = false;
  report_cmd->add_option("report", r_report, "report JSON file")->required();
  report_cmd->add_flag("--merge-tail", r_merge_tail,
                       "merge the two widest span buckets into one >2 row");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    apply_config_file(st, refs);
    if (validate_cmd->parsed()) return cmd_validate(st, v_corpus, v_output);
    if (segment_cmd->parsed())
      return cmd_segment(st, s_corpus, s_text, s_output);
    if (synth_cmd->parsed())
      return cmd_synth(st, y_output, y_entities, y_paragraphs, y_mixture,
                       y_vocabulary);
    if (train_cmd->parsed())
      return cmd_train(st, t_corpus, t_output_dir, t_system);
    if (predict_cmd->parsed())
      return cmd_predict(st, p_corpus, p_model, p_system, p_output);
    if (evaluate_cmd->parsed())
      return cmd_evaluate(st, e_corpus, e_model_dir, e_systems, e_output,
                          e_oracle);
    if (report_cmd->parsed()) return cmd_report(st, r_report, r_merge_tail);
  } catch (const citespan::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
