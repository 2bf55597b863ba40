#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "citespan/crf.hpp"

using namespace citespan;
using Catch::Approx;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
}

FactorTable random_factors(std::mt19937_64& rng, std::size_t n) {
  FactorTable t;
  t.n = n;
  t.unary.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int y = 0; y < kNumLabels; ++y)
      t.unary[i][y] = uniform(rng, -2.0, 2.0);
  for (int a = 0; a < kNumLabels; ++a)
    for (int b = 0; b < kNumLabels; ++b)
      t.trans[a][b] = uniform(rng, -2.0, 2.0);
  return t;
}

double labeling_score(const FactorTable& t, const std::vector<int>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.n; ++i) {
    s += t.unary[i][y[i]];
    if (i > 0) s += t.trans[y[i - 1]][y[i]];
  }
  return s;
}

// Enumerates all 2^n labelings; masks are ordered so that the first
// maximum encountered is the lexicographically smallest one (label 0
// preferred, earliest position first), matching the decoder's tie rule.
std::vector<int> mask_labeling(std::size_t mask, std::size_t n) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i)
    y[i] = static_cast<int>((mask >> (n - 1 - i)) & 1u);
  return y;
}

double brute_log_partition(const FactorTable& t) {
  double m = -1e300;
  std::vector<double> scores;
  for (std::size_t mask = 0; mask < (std::size_t{1} << t.n); ++mask) {
    scores.push_back(labeling_score(t, mask_labeling(mask, t.n)));
    m = std::max(m, scores.back());
  }
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - m);
  return m + std::log(sum);
}

std::vector<int> brute_viterbi(const FactorTable& t) {
  double best = -1e300;
  std::vector<int> best_y;
  for (std::size_t mask = 0; mask < (std::size_t{1} << t.n); ++mask) {
    auto y = mask_labeling(mask, t.n);
    double s = labeling_score(t, y);
    if (s > best) {
      best = s;
      best_y = y;
    }
  }
  return best_y;
}

DenseSequence random_sequence(std::mt19937_64& rng, std::size_t n,
                              std::size_t feature_count) {
  DenseSequence seq;
  seq.positions.resize(n);
  seq.gold.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < feature_count; ++f)
      if (uniform(rng, 0.0, 1.0) < 0.6)
        seq.positions[i].emplace_back(static_cast<int>(f),
                                      uniform(rng, -1.5, 1.5));
    seq.gold[i] = uniform(rng, 0.0, 1.0) < 0.5 ? 0 : 1;
  }
  return seq;
}

}  // namespace

TEST_CASE("forward_backward closed forms") {
  FactorTable t;
  t.n = 1;
  t.unary = {{0.7, -0.3}};
  auto inf = forward_backward(t);
  double expect = std::log(std::exp(0.7) + std::exp(-0.3));
  CHECK(inf.log_partition == Approx(expect).epsilon(1e-12));
  CHECK(inf.unary_marginals[0][0] ==
        Approx(std::exp(0.7 - expect)).epsilon(1e-12));

  FactorTable zeros;
  zeros.n = 5;
  zeros.unary.assign(5, {0.0, 0.0});
  inf = forward_backward(zeros);
  CHECK(inf.log_partition == Approx(5.0 * std::log(2.0)).epsilon(1e-12));
  for (const auto& m : inf.unary_marginals) {
    CHECK(m[0] == Approx(0.5).epsilon(1e-12));
    CHECK(m[1] == Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("forward_backward matches brute-force enumeration") {
  std::mt19937_64 rng(7001);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng() % 10;
    FactorTable t = random_factors(rng, n);
    auto inf = forward_backward(t);
    double brute = brute_log_partition(t);
    INFO("trial " << trial << " n=" << n);
    CHECK(std::fabs(inf.log_partition - brute) <=
          std::max(1e-9 * std::fabs(brute), 1e-12));

    // Marginals normalize and pairwise marginals marginalize to unary.
    for (std::size_t i = 0; i < n; ++i)
      CHECK(inf.unary_marginals[i][0] + inf.unary_marginals[i][1] ==
            Approx(1.0).margin(1e-9));
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (int a = 0; a < 2; ++a) {
        double row = inf.pairwise_marginals[i][a][0] +
                     inf.pairwise_marginals[i][a][1];
        CHECK(row == Approx(inf.unary_marginals[i][a]).margin(1e-9));
      }
      for (int b = 0; b < 2; ++b) {
        double col = inf.pairwise_marginals[i][0][b] +
                     inf.pairwise_marginals[i][1][b];
        CHECK(col == Approx(inf.unary_marginals[i + 1][b]).margin(1e-9));
      }
    }
  }
}

TEST_CASE("viterbi matches brute-force argmax with tie rule") {
  std::mt19937_64 rng(7002);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng() % 10;
    FactorTable t = random_factors(rng, n);
    CHECK(viterbi(t) == brute_viterbi(t));
  }
}

TEST_CASE("viterbi tie-breaking prefers not_covered") {
  FactorTable zeros;
  zeros.n = 4;
  zeros.unary.assign(4, {0.0, 0.0});
  CHECK(viterbi(zeros) == std::vector<int>{0, 0, 0, 0});
  CHECK(brute_viterbi(zeros) == std::vector<int>{0, 0, 0, 0});

  // Two optimal labelings (0,1) and (1,1) tie at score 7: the earlier
  // position wins the not_covered preference.
  FactorTable t;
  t.n = 2;
  t.unary = {{2.0, 2.0}, {0.0, 5.0}};
  auto y = viterbi(t);
  CHECK(y == std::vector<int>{0, 1});
  CHECK(y == brute_viterbi(t));
}

TEST_CASE("score_factors linear form") {
  CrfModel model;
  model.feature_names = {"f_a", "f_b"};
  model.weights.assign(model.parameter_count(), 0.0);

  DenseSequence seq;
  seq.positions = {{{0, 1.0}}, {}};

  auto zero_table = score_factors(seq, model);
  for (const auto& u : zero_table.unary) {
    CHECK(u[0] == 0.0);
    CHECK(u[1] == 0.0);
  }

  // Feature f_a weight 2 on covered, bias 0.25 on covered.
  model.weights[2 * 0 + kCovered] = 2.0;
  model.weights[2 * model.feature_names.size() + 4 + kCovered] = 0.25;
  auto table = score_factors(seq, model);
  CHECK(table.unary[0][kCovered] == Approx(2.25));
  CHECK(table.unary[0][kNotCovered] == 0.0);
  // A position with no active features reduces to the bias.
  CHECK(table.unary[1][kCovered] == Approx(0.25));
}

TEST_CASE("nll at zero weights is n log 2 per position") {
  DenseSequence seq;
  seq.positions = {{}};
  seq.gold = {0};
  std::vector<double> w(2 * 1 + 6, 0.0), g;
  double v = nll_and_gradient({seq}, w, 1, 0.0, g);
  CHECK(v == Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("gradient matches central finite differences") {
  std::mt19937_64 rng(7003);
  const std::size_t feature_count = 3;
  std::vector<DenseSequence> batch;
  for (int s = 0; s < 4; ++s)
    batch.push_back(random_sequence(rng, 2 + rng() % 5, feature_count));

  const std::size_t dim = 2 * feature_count + 6;
  const double h = 1e-5;
  const double l2 = 0.7;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> w(dim);
    for (auto& x : w) x = uniform(rng, -1.0, 1.0);
    std::vector<double> g;
    nll_and_gradient(batch, w, feature_count, l2, g);
    for (std::size_t j = 0; j < dim; ++j) {
      std::vector<double> wp = w, wm = w, scratch;
      wp[j] += h;
      wm[j] -= h;
      double fp = nll_and_gradient(batch, wp, feature_count, l2, scratch);
      double fm = nll_and_gradient(batch, wm, feature_count, l2, scratch);
      double fd = (fp - fm) / (2.0 * h);
      double rel = std::fabs(g[j] - fd) /
                   std::max({1.0, std::fabs(g[j]), std::fabs(fd)});
      INFO("trial " << trial << " coordinate " << j << " analytic " << g[j]
                    << " numeric " << fd);
      CHECK(rel < 1e-5);
    }
  }
}

TEST_CASE("nll is convex in the weights") {
  std::mt19937_64 rng(7004);
  const std::size_t feature_count = 3;
  std::vector<DenseSequence> batch;
  for (int s = 0; s < 3; ++s)
    batch.push_back(random_sequence(rng, 3 + rng() % 4, feature_count));
  const std::size_t dim = 2 * feature_count + 6;

  for (double l2 : {0.0, 1.0}) {
    for (int trial = 0; trial < 25; ++trial) {
      std::vector<double> w1(dim), w2(dim), mid(dim), g;
      for (std::size_t i = 0; i < dim; ++i) {
        w1[i] = uniform(rng, -2.0, 2.0);
        w2[i] = uniform(rng, -2.0, 2.0);
        mid[i] = 0.5 * (w1[i] + w2[i]);
      }
      double f1 = nll_and_gradient(batch, w1, feature_count, l2, g);
      double f2 = nll_and_gradient(batch, w2, feature_count, l2, g);
      double fm = nll_and_gradient(batch, mid, feature_count, l2, g);
      CHECK(fm <= 0.5 * (f1 + f2) + 1e-9);
    }
  }
}

TEST_CASE("label-flip symmetry swaps viterbi output") {
  std::mt19937_64 rng(7005);
  const std::size_t feature_count = 4;
  for (int trial = 0; trial < 50; ++trial) {
    CrfModel model;
    model.feature_names = {"a", "b", "c", "d"};
    model.weights.resize(model.parameter_count());
    for (auto& w : model.weights) w = uniform(rng, -1.0, 1.0);

    CrfModel flipped = model;
    for (std::size_t f = 0; f < feature_count; ++f) {
      flipped.weights[2 * f + 0] = model.weights[2 * f + 1];
      flipped.weights[2 * f + 1] = model.weights[2 * f + 0];
    }
    std::size_t tb = 2 * feature_count;
    flipped.weights[tb + 0] = model.weights[tb + 3];  // 00 <- 11
    flipped.weights[tb + 1] = model.weights[tb + 2];  // 01 <- 10
    flipped.weights[tb + 2] = model.weights[tb + 1];
    flipped.weights[tb + 3] = model.weights[tb + 0];
    flipped.weights[tb + 4] = model.weights[tb + 5];  // biases
    flipped.weights[tb + 5] = model.weights[tb + 4];

    DenseSequence seq = random_sequence(rng, 1 + rng() % 8, feature_count);
    auto y = viterbi(score_factors(seq, model));
    auto y_flipped = viterbi(score_factors(seq, flipped));
    REQUIRE(y.size() == y_flipped.size());
    for (std::size_t i = 0; i < y.size(); ++i)
      CHECK(y[i] == 1 - y_flipped[i]);
  }
}

TEST_CASE("training separates a one-feature dataset") {
  // Single observation feature equal to the gold label.
  std::mt19937_64 rng(7006);
  std::vector<DenseSequence> batch;
  for (int s = 0; s < 30; ++s) {
    DenseSequence seq;
    std::size_t n = 2 + rng() % 6;
    seq.positions.resize(n);
    seq.gold.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      seq.gold[i] = static_cast<int>(rng() % 2);
      if (seq.gold[i] == 1) seq.positions[i].push_back({0, 1.0});
    }
    batch.push_back(std::move(seq));
  }

  Objective obj = [&](const std::vector<double>& w, std::vector<double>& g) {
    return nll_and_gradient(batch, w, 1, 0.1, g);
  };
  LbfgsOptions opts;
  auto res = lbfgs_minimize(obj, std::vector<double>(8, 0.0), opts);
  REQUIRE(res.converged);

  std::vector<double> g;
  double at_zero = nll_and_gradient(batch, std::vector<double>(8, 0.0), 1,
                                    0.1, g);
  CHECK(res.value <= at_zero);

  CrfModel model;
  model.feature_names = {"f"};
  model.weights = res.x;
  std::size_t correct = 0, total = 0;
  for (const auto& seq : batch) {
    auto y = viterbi(score_factors(seq, model));
    for (std::size_t i = 0; i < y.size(); ++i) {
      correct += y[i] == seq.gold[i];
      ++total;
    }
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(total) >= 0.99);
}

TEST_CASE("strong l2 drives weights toward zero") {
  std::mt19937_64 rng(7007);
  std::vector<DenseSequence> batch = {random_sequence(rng, 5, 2)};
  Objective obj = [&](const std::vector<double>& w, std::vector<double>& g) {
    return nll_and_gradient(batch, w, 2, 1e6, g);
  };
  auto res = lbfgs_minimize(obj, std::vector<double>(10, 0.0));
  double norm = 0.0;
  for (double w : res.x) norm += w * w;
  CHECK(std::sqrt(norm) < 1e-3);
}

namespace {

SpanInstance labeled_instance(const std::string& text, std::size_t offset,
                              std::vector<int> gold,
                              std::vector<std::string> cite_paragraphs) {
  SpanInstance inst;
  inst.entity_id = "e";
  inst.paragraph_id = "p" + std::to_string(offset);
  inst.paragraph_text = text;
  inst.citation_offset = offset;
  inst.citation_type = CitationType::web;
  inst.citation.id = "c";
  inst.citation.paragraphs = std::move(cite_paragraphs);
  inst.gold_labels = std::move(gold);
  rebuild_fragments(inst, AbbreviationSet::builtin());
  return inst;
}

}  // namespace

TEST_CASE("train_crf end to end is deterministic") {
  std::vector<SpanInstance> data;
  data.push_back(labeled_instance(
      "The dam opened in 1961, flooding the valley. Farmers protested the "
      "decision, and courts agreed.",
      20, {1, 1, 0, 0}, {"The dam opened in 1961 and flooded the valley."}));
  data.push_back(labeled_instance(
      "Construction began in May 25, 2011, near the river. Unrelated trivia "
      "follows here.",
      25, {1, 1, 1, 0}, {"Construction began on May 25, 2011 near the river."}));
  data.push_back(labeled_instance(
      "Nothing in this paragraph matches the citation text at all.", 10,
      {0}, {"Entirely different content about astronomy."}));

  std::vector<const SpanInstance*> refs;
  for (const auto& d : data) refs.push_back(&d);

  FeatureConfig fc;
  TrainConfig tc;
  tc.max_iterations = 60;
  tc.seed = 11;
  const auto& lex = ConnectiveLexicon::builtin();
  CrfModel m1 = train_crf(refs, fc, lex, tc);
  CrfModel m2 = train_crf(refs, fc, lex, tc);
  CHECK(m1.weights == m2.weights);
  CHECK(model_to_json(m1).dump() == model_to_json(m2).dump());
  CHECK(m1.metadata.train_instances == 3);

  // Round-trip through the file format.
  auto path = std::string("/tmp/citespan_test_model.json");
  save_model(m1, path);
  CrfModel loaded = load_model(path);
  CHECK(loaded.weights == m1.weights);
  CHECK(loaded.feature_names == m1.feature_names);
  CHECK(loaded.fingerprint == m1.fingerprint);
  CHECK(loaded.binner == m1.binner);
  CHECK(model_to_json(loaded).dump() == model_to_json(m1).dump());

  // Prediction runs and yields a subset of fragment indices.
  auto covered = predict_span(data[0], loaded, lex);
  for (auto idx : covered) CHECK(idx < data[0].fragments.size());

  // Fingerprint mismatch is a hard error.
  CrfModel tampered = loaded;
  tampered.fingerprint = "0000000000000000";
  CHECK_THROWS_WITH(predict_span(data[0], tampered, lex),
                    Catch::Matchers::ContainsSubstring("fingerprint"));
}

TEST_CASE("train_crf requires gold labels") {
  SpanInstance inst;
  inst.entity_id = "e";
  inst.paragraph_id = "p";
  inst.paragraph_text = "Some text here";
  inst.citation_offset = 0;
  inst.citation.id = "c";
  inst.citation.paragraphs = {"text"};
  rebuild_fragments(inst, AbbreviationSet::builtin());
  std::vector<const SpanInstance*> refs = {&inst};
  CHECK_THROWS_AS(train_crf(refs, FeatureConfig{}, ConnectiveLexicon::builtin(),
                            TrainConfig{}),
                  std::invalid_argument);
}
