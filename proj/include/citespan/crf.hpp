#pragma once

// Linear-chain CRF over fragment sequences with labels {not_covered,
// covered}. Observation features are conjoined with the current label;
// transitions are label-pair weights plus a per-label bias. Inference is
// exact: log-space forward-backward for marginals and the partition
// function, Viterbi for decoding. Training minimizes the L2-penalized
// negative log-likelihood with L-BFGS.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "citespan/corpus.hpp"
#include "citespan/features.hpp"
#include "citespan/lbfgs.hpp"

namespace citespan {

inline constexpr int kNotCovered = 0;
inline constexpr int kCovered = 1;
inline constexpr int kNumLabels = 2;

inline const char* label_name(int label) {
  return label == kCovered ? "covered" : "not_covered";
}

struct TrainConfig {
  double l2_strength = 1.0;
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;
  std::uint64_t seed = 0;
};

struct TrainMeta {
  double l2_strength = 1.0;
  int iterations = 0;
  std::uint64_t seed = 0;
  bool converged = false;
  double objective = 0.0;
  std::size_t train_instances = 0;
};

struct CrfModel {
  std::vector<std::string> feature_names;  // post-binning, fixed order
  std::vector<double> weights;             // obs F x 2, then trans 2x2, bias 2
  std::string fingerprint;
  FeatureConfig feature_config;
  QuantileBinner binner;
  TrainMeta metadata;

  std::size_t feature_count() const { return feature_names.size(); }
  std::size_t parameter_count() const { return 2 * feature_names.size() + 6; }

  double obs_weight(std::size_t feature, int label) const {
    return weights[2 * feature + label];
  }
  double trans_weight(int from, int to) const {
    return weights[2 * feature_names.size() + 2 * from + to];
  }
  double bias(int label) const {
    return weights[2 * feature_names.size() + 4 + label];
  }
};

// One sequence reduced to the model's feature indexing: per position, the
// active (index, value) pairs.
struct DenseSequence {
  std::vector<std::vector<std::pair<int, double>>> positions;
  std::vector<int> gold;  // empty when unlabeled

  std::size_t size() const { return positions.size(); }
};

inline DenseSequence to_dense(const FeaturizedSequence& feats,
                              const std::vector<std::string>& feature_names) {
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < feature_names.size(); ++i)
    index[feature_names[i]] = static_cast<int>(i);
  DenseSequence dense;
  dense.positions.reserve(feats.bundles.size());
  for (const auto& bundle : feats.bundles) {
    std::vector<std::pair<int, double>> active;
    for (const auto& [name, value] : bundle.values) {
      if (value == 0.0) continue;
      auto it = index.find(name);
      if (it != index.end()) active.emplace_back(it->second, value);
    }
    dense.positions.push_back(std::move(active));
  }
  return dense;
}

struct FactorTable {
  std::size_t n = 0;
  std::vector<std::array<double, kNumLabels>> unary;  // [position][label]
  std::array<std::array<double, kNumLabels>, kNumLabels> trans{};
};

namespace detail {

inline double logsumexp2(double a, double b) {
  double m = std::max(a, b);
  if (!std::isfinite(m)) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline void check_fingerprint(const FeaturizedSequence& seq,
                              const CrfModel& model) {
  if (seq.config_fingerprint != model.fingerprint)
    throw std::runtime_error(
        "feature fingerprint mismatch: sequence " + seq.config_fingerprint +
        " vs model " + model.fingerprint);
}

}  // namespace detail

inline FactorTable score_factors(const DenseSequence& seq,
                                 const CrfModel& model) {
  FactorTable table;
  table.n = seq.size();
  table.unary.resize(table.n);
  for (std::size_t i = 0; i < table.n; ++i) {
    for (int y = 0; y < kNumLabels; ++y) {
      double score = model.bias(y);
      for (const auto& [f, v] : seq.positions[i])
        score += model.obs_weight(f, y) * v;
      table.unary[i][y] = score;
    }
  }
  for (int a = 0; a < kNumLabels; ++a)
    for (int b = 0; b < kNumLabels; ++b)
      table.trans[a][b] = model.trans_weight(a, b);
  return table;
}

inline FactorTable score_factors(const FeaturizedSequence& seq,
                                 const CrfModel& model) {
  detail::check_fingerprint(seq, model);
  return score_factors(to_dense(seq, model.feature_names), model);
}

struct InferenceResult {
  double log_partition = 0.0;
  std::vector<std::array<double, kNumLabels>> unary_marginals;
  // pairwise_marginals[i][a][b] = P(y_i = a, y_{i+1} = b)
  std::vector<std::array<std::array<double, kNumLabels>, kNumLabels>>
      pairwise_marginals;
};

inline InferenceResult forward_backward(const FactorTable& factors) {
  const std::size_t n = factors.n;
  if (n == 0) throw std::invalid_argument("forward_backward: empty sequence");

  std::vector<std::array<double, kNumLabels>> alpha(n), beta(n);
  for (int y = 0; y < kNumLabels; ++y) alpha[0][y] = factors.unary[0][y];
  for (std::size_t i = 1; i < n; ++i)
    for (int y = 0; y < kNumLabels; ++y)
      alpha[i][y] = factors.unary[i][y] +
                    detail::logsumexp2(alpha[i - 1][0] + factors.trans[0][y],
                                       alpha[i - 1][1] + factors.trans[1][y]);
  for (int y = 0; y < kNumLabels; ++y) beta[n - 1][y] = 0.0;
  for (std::size_t i = n - 1; i-- > 0;)
    for (int y = 0; y < kNumLabels; ++y)
      beta[i][y] = detail::logsumexp2(
          factors.trans[y][0] + factors.unary[i + 1][0] + beta[i + 1][0],
          factors.trans[y][1] + factors.unary[i + 1][1] + beta[i + 1][1]);

  InferenceResult result;
  result.log_partition = detail::logsumexp2(alpha[n - 1][0], alpha[n - 1][1]);
  result.unary_marginals.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int y = 0; y < kNumLabels; ++y)
      result.unary_marginals[i][y] =
          std::exp(alpha[i][y] + beta[i][y] - result.log_partition);
  result.pairwise_marginals.resize(n > 0 ? n - 1 : 0);
  for (std::size_t i = 0; i + 1 < n; ++i)
    for (int a = 0; a < kNumLabels; ++a)
      for (int b = 0; b < kNumLabels; ++b)
        result.pairwise_marginals[i][a][b] =
            std::exp(alpha[i][a] + factors.trans[a][b] +
                     factors.unary[i + 1][b] + beta[i + 1][b] -
                     result.log_partition);
  return result;
}

// Penalized negative log-likelihood and its gradient over a batch. The
// parameter vector and gradient share the CrfModel weight layout.
inline double nll_and_gradient(const std::vector<DenseSequence>& batch,
                               const std::vector<double>& weights,
                               std::size_t feature_count, double l2,
                               std::vector<double>& gradient) {
  CrfModel scorer;
  scorer.feature_names.resize(feature_count);
  scorer.weights = weights;

  gradient.assign(weights.size(), 0.0);
  const std::size_t trans_base = 2 * feature_count;
  const std::size_t bias_base = trans_base + 4;
  double value = 0.0;

  for (const auto& seq : batch) {
    if (seq.gold.size() != seq.size())
      throw std::invalid_argument("nll_and_gradient: sequence without labels");
    FactorTable factors = score_factors(seq, scorer);
    InferenceResult inf = forward_backward(factors);

    double gold_score = 0.0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      gold_score += factors.unary[i][seq.gold[i]];
      if (i > 0) gold_score += factors.trans[seq.gold[i - 1]][seq.gold[i]];
    }
    value += inf.log_partition - gold_score;

    // Expected minus empirical counts.
    for (std::size_t i = 0; i < seq.size(); ++i) {
      for (int y = 0; y < kNumLabels; ++y) {
        double diff = inf.unary_marginals[i][y] - (seq.gold[i] == y ? 1.0 : 0.0);
        gradient[bias_base + y] += diff;
        for (const auto& [f, v] : seq.positions[i])
          gradient[2 * f + y] += diff * v;
      }
    }
    for (std::size_t i = 0; i + 1 < seq.size(); ++i)
      for (int a = 0; a < kNumLabels; ++a)
        for (int b = 0; b < kNumLabels; ++b)
          gradient[trans_base + 2 * a + b] +=
              inf.pairwise_marginals[i][a][b] -
              (seq.gold[i] == a && seq.gold[i + 1] == b ? 1.0 : 0.0);
  }

  for (std::size_t i = 0; i < weights.size(); ++i) {
    value += 0.5 * l2 * weights[i] * weights[i];
    gradient[i] += l2 * weights[i];
  }
  return value;
}

// Decodes an argmax labeling. Among ties the decoder prefers not_covered,
// resolving at earlier positions first: the DP runs from the end so the
// forward reconstruction can pick the preferred label at each step.
inline std::vector<int> viterbi(const FactorTable& factors) {
  const std::size_t n = factors.n;
  if (n == 0) return {};
  std::vector<std::array<double, kNumLabels>> delta(n);
  for (int y = 0; y < kNumLabels; ++y) delta[n - 1][y] = factors.unary[n - 1][y];
  for (std::size_t i = n - 1; i-- > 0;)
    for (int y = 0; y < kNumLabels; ++y)
      delta[i][y] = factors.unary[i][y] +
                    std::max(factors.trans[y][0] + delta[i + 1][0],
                             factors.trans[y][1] + delta[i + 1][1]);

  std::vector<int> labels(n);
  labels[0] = delta[0][kCovered] > delta[0][kNotCovered] ? kCovered
                                                         : kNotCovered;
  for (std::size_t i = 1; i < n; ++i) {
    int prev = labels[i - 1];
    double keep = factors.trans[prev][kNotCovered] + delta[i][kNotCovered];
    double take = factors.trans[prev][kCovered] + delta[i][kCovered];
    labels[i] = take > keep ? kCovered : kNotCovered;
  }
  return labels;
}

inline std::vector<int> viterbi(const FeaturizedSequence& seq,
                                const CrfModel& model) {
  detail::check_fingerprint(seq, model);
  return viterbi(score_factors(to_dense(seq, model.feature_names), model));
}

// Full feature-name list for a config: the raw registry plus the quantile
// indicator names the binner will add.
inline std::vector<std::string> expanded_feature_names(
    const FeatureConfig& config) {
  std::vector<std::string> names = feature_registry(config);
  for (const auto& base : binned_feature_names(config))
    for (int q = 0; q < config.bin_count; ++q)
      names.push_back(QuantileBinner::indicator_name(base, q));
  return names;
}

struct TrainedArtifacts {
  CrfModel model;
  LbfgsResult optimizer;
};

inline CrfModel train_crf(const std::vector<const SpanInstance*>& train_set,
                          const FeatureConfig& feature_config,
                          const ConnectiveLexicon& lexicon,
                          const TrainConfig& config,
                          const AbbreviationSet& abbrevs =
                              AbbreviationSet::builtin()) {
  if (train_set.empty())
    throw std::invalid_argument("train_crf: empty training set");
  for (const auto* inst : train_set)
    if (!inst->gold_labels)
      throw std::invalid_argument("train_crf: instance " +
                                  inst->instance_id() + " has no gold labels");

  std::vector<FeaturizedSequence> featurized;
  featurized.reserve(train_set.size());
  for (const auto* inst : train_set)
    featurized.push_back(featurize(*inst, feature_config, lexicon, abbrevs));

  QuantileBinner binner(feature_config.bin_count);
  std::vector<const FeaturizedSequence*> refs;
  for (const auto& f : featurized) refs.push_back(&f);
  binner.fit(refs, binned_feature_names(feature_config));
  for (auto& f : featurized) binner.apply(f);

  CrfModel model;
  model.feature_names = expanded_feature_names(feature_config);
  model.feature_config = feature_config;
  model.binner = binner;
  model.fingerprint = featurized.front().config_fingerprint;

  std::vector<DenseSequence> batch;
  batch.reserve(featurized.size());
  for (std::size_t i = 0; i < featurized.size(); ++i) {
    DenseSequence dense = to_dense(featurized[i], model.feature_names);
    dense.gold = *train_set[i]->gold_labels;
    batch.push_back(std::move(dense));
  }

  const std::size_t feature_count = model.feature_names.size();
  Objective objective = [&](const std::vector<double>& w,
                            std::vector<double>& g) {
    return nll_and_gradient(batch, w, feature_count, config.l2_strength, g);
  };

  LbfgsOptions opts;
  opts.max_iterations = config.max_iterations;
  opts.gradient_tolerance = config.gradient_tolerance;
  LbfgsResult opt = lbfgs_minimize(objective, std::vector<double>(
                                                  2 * feature_count + 6, 0.0),
                                   opts);
  if (!std::isfinite(opt.value))
    throw std::runtime_error("train_crf: objective diverged");

  model.weights = opt.x;
  model.metadata.l2_strength = config.l2_strength;
  model.metadata.iterations = opt.iterations;
  model.metadata.seed = config.seed;
  model.metadata.converged = opt.converged;
  model.metadata.objective = opt.value;
  model.metadata.train_instances = train_set.size();
  return model;
}

inline std::vector<std::size_t> predict_span(const SpanInstance& instance,
                                             const CrfModel& model,
                                             const ConnectiveLexicon& lexicon,
                                             const AbbreviationSet& abbrevs =
                                                 AbbreviationSet::builtin()) {
  FeaturizedSequence feats =
      featurize(instance, model.feature_config, lexicon, abbrevs);
  detail::check_fingerprint(feats, model);
  model.binner.apply(feats);
  auto labels = viterbi(score_factors(to_dense(feats, model.feature_names),
                                      model));
  std::vector<std::size_t> covered;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == kCovered) covered.push_back(i);
  return covered;
}

inline json model_to_json(const CrfModel& model) {
  json j;
  j["format"] = "citespan-crf-model";
  j["version"] = 1;
  j["labels"] = json::array({"not_covered", "covered"});
  j["fingerprint"] = model.fingerprint;
  json fc;
  to_json(fc, model.feature_config);
  j["feature_config"] = std::move(fc);
  j["binner"] = model.binner.to_json_value();
  json weights = json::object();
  for (std::size_t f = 0; f < model.feature_names.size(); ++f)
    for (int y = 0; y < kNumLabels; ++y)
      weights["obs:" + model.feature_names[f] + ":" + label_name(y)] =
          model.obs_weight(f, y);
  for (int a = 0; a < kNumLabels; ++a)
    for (int b = 0; b < kNumLabels; ++b)
      weights[std::string("trans:") + label_name(a) + ":" + label_name(b)] =
          model.trans_weight(a, b);
  for (int y = 0; y < kNumLabels; ++y)
    weights[std::string("bias:") + label_name(y)] = model.bias(y);
  j["weights"] = std::move(weights);
  j["metadata"] = {{"l2_strength", model.metadata.l2_strength},
                   {"iterations", model.metadata.iterations},
                   {"seed", model.metadata.seed},
                   {"converged", model.metadata.converged},
                   {"objective", model.metadata.objective},
                   {"train_instances", model.metadata.train_instances},
                   {"feature_order", model.feature_names}};
  return j;
}

inline CrfModel model_from_json(const json& j) {
  if (j.value("format", "") != "citespan-crf-model")
    throw std::runtime_error("not a model file (missing format tag)");
  if (j.value("version", 0) != 1)
    throw std::runtime_error("unsupported model version");

  CrfModel model;
  model.fingerprint = j.at("fingerprint").get<std::string>();
  from_json(j.at("feature_config"), model.feature_config);
  model.binner = QuantileBinner::from_json_value(j.at("binner"));
  const auto& meta = j.at("metadata");
  model.feature_names =
      meta.at("feature_order").get<std::vector<std::string>>();
  model.metadata.l2_strength = meta.at("l2_strength").get<double>();
  model.metadata.iterations = meta.at("iterations").get<int>();
  model.metadata.seed = meta.at("seed").get<std::uint64_t>();
  model.metadata.converged = meta.at("converged").get<bool>();
  model.metadata.objective = meta.at("objective").get<double>();
  model.metadata.train_instances =
      meta.at("train_instances").get<std::size_t>();

  const auto& weights = j.at("weights");
  model.weights.assign(model.parameter_count(), 0.0);
  for (std::size_t f = 0; f < model.feature_names.size(); ++f)
    for (int y = 0; y < kNumLabels; ++y)
      model.weights[2 * f + y] =
          weights.at("obs:" + model.feature_names[f] + ":" + label_name(y))
              .get<double>();
  const std::size_t trans_base = 2 * model.feature_names.size();
  for (int a = 0; a < kNumLabels; ++a)
    for (int b = 0; b < kNumLabels; ++b)
      model.weights[trans_base + 2 * a + b] =
          weights.at(std::string("trans:") + label_name(a) + ":" +
                     label_name(b))
              .get<double>();
  for (int y = 0; y < kNumLabels; ++y)
    model.weights[trans_base + 4 + y] =
        weights.at(std::string("bias:") + label_name(y)).get<double>();
  for (double w : model.weights)
    if (!std::isfinite(w))
      throw std::runtime_error("model file contains non-finite weights");
  return model;
}

inline void save_model(const CrfModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << model_to_json(model).dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline CrfModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("model file " + path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace citespan
