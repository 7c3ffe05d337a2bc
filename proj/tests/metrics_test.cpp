// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "rff/bench.hpp"
#include "rff/errors.hpp"
#include "rff/metrics.hpp"
#include "rff/report.hpp"
#include "test_support.hpp"

namespace rff {
namespace {

// Brute-force one-vs-rest AUC: fraction of (positive, negative) pairs ordered
// correctly, ties counting one half.
double pair_count_auc(const std::vector<double>& pos_class_scores, const std::vector<std::size_t>& labels,
                      std::size_t cls) {
  double good = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != cls) continue;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] == cls) continue;
      ++pairs;
      if (pos_class_scores[i] > pos_class_scores[j]) good += 1.0;
      else if (pos_class_scores[i] == pos_class_scores[j]) good += 0.5;
    }
  }
  return pairs ? good / pairs : NAN;
}

// Two-class scores whose class-1 column is `s`.
Tensor binary_scores(const std::vector<float>& s) {
  Tensor t({s.size(), 2});
  for (std::size_t i = 0; i < s.size(); ++i) {
    t.at(i, 0) = 1.0f - s[i];
    t.at(i, 1) = s[i];
  }
  return t;
}

Dataset two_class_set(std::size_t per_class) {
  std::vector<SignalRecord> recs;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    SignalRecord r;
    r.label = static_cast<std::uint16_t>(i % 2);
    r.iq.fill({static_cast<float>(i), 1.0f});
    recs.push_back(r);
  }
  return Dataset({"a", "b"}, recs);
}

void expect_same_report(const MetricsReport& a, const MetricsReport& b) {
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(a.confusion, b.confusion);
  ASSERT_EQ(a.auc_per_class.size(), b.auc_per_class.size());
  for (std::size_t i = 0; i < a.auc_per_class.size(); ++i) {
    if (std::isnan(a.auc_per_class[i])) EXPECT_TRUE(std::isnan(b.auc_per_class[i]));
    else EXPECT_EQ(a.auc_per_class[i], b.auc_per_class[i]);
  }
  EXPECT_EQ(a.auc_macro, b.auc_macro);
  EXPECT_EQ(a.latency, b.latency);
}

TEST(Auc, PerfectSeparation) {
  const std::vector<std::size_t> labels = {1, 1, 0, 0};
  EXPECT_EQ(roc_auc_ovr(binary_scores({0.9f, 0.8f, 0.1f, 0.2f}), labels).per_class[1], 1.0);
}

TEST(Auc, Reversed) {
  const std::vector<std::size_t> labels = {1, 1, 0, 0};
  EXPECT_EQ(roc_auc_ovr(binary_scores({0.1f, 0.2f, 0.9f, 0.8f}), labels).per_class[1], 0.0);
}

TEST(Auc, ThreeOfFourPairs) {
  const std::vector<std::size_t> labels = {1, 0, 1, 0};
  const AucResult r = roc_auc_ovr(binary_scores({0.8f, 0.7f, 0.4f, 0.3f}), labels);
  EXPECT_DOUBLE_EQ(r.per_class[1], 0.75);
  EXPECT_DOUBLE_EQ(r.per_class[0], 0.75);
  EXPECT_DOUBLE_EQ(r.macro, 0.75);
}

TEST(Auc, TiesCountHalf) {
  const std::vector<std::size_t> labels = {1, 0};
  EXPECT_DOUBLE_EQ(roc_auc_ovr(binary_scores({0.5f, 0.5f}), labels).per_class[1], 0.5);
}

TEST(Auc, MatchesPairCountingOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(20), c = 2 + rng.below(4);
    Tensor scores({n, c});
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = rng.below(c);
      // Coarse grid so ties occur.
      for (std::size_t k = 0; k < c; ++k) scores.at(i, k) = static_cast<float>(rng.below(5)) / 4.0f;
    }
    const AucResult r = roc_auc_ovr(scores, labels);
    for (std::size_t k = 0; k < c; ++k) {
      std::vector<double> col(n);
      for (std::size_t i = 0; i < n; ++i) col[i] = scores.at(i, k);
      const double expect = pair_count_auc(col, labels, k);
      if (std::isnan(expect)) {
        EXPECT_FALSE(r.defined(k));
      } else {
        EXPECT_NEAR(r.per_class[k], expect, 1e-12);
      }
    }
  }
}

TEST(Auc, InvariantUnderMonotoneTransform) {
  const Tensor scores = testing::random_tensor({30, 3}, 4, 0.0, 1.0);
  std::vector<std::size_t> labels(30);
  for (std::size_t i = 0; i < 30; ++i) labels[i] = i % 3;
  Tensor warped = scores;
  for (float& v : warped.values()) v = std::exp(3.0f * v) - 7.0f;
  const AucResult a = roc_auc_ovr(scores, labels), b = roc_auc_ovr(warped, labels);
  EXPECT_EQ(a.per_class, b.per_class);
}

TEST(Auc, MissingClassIsUndefined) {
  const std::vector<std::size_t> labels = {0, 0, 1};
  Tensor scores({3, 3}, 0.3f);
  const AucResult r = roc_auc_ovr(scores, labels);
  EXPECT_FALSE(r.defined(2));
  EXPECT_TRUE(r.defined(0));
  EXPECT_DOUBLE_EQ(r.macro, (r.per_class[0] + r.per_class[1]) / 2);
  const std::vector<std::size_t> single = {0, 0};
  EXPECT_TRUE(std::isnan(roc_auc_ovr(Tensor({2, 2}, 0.5f), single).macro));
}

TEST(Argmax, TiesGoToLowestIndex) {
  EXPECT_EQ(argmax_rows(Tensor::from_rows({{0.2f, 0.4f, 0.4f}, {0.5f, 0.5f, 0.0f}, {0, 0, 1}})),
            (std::vector<std::size_t>{1, 0, 2}));
}

TEST(Evaluate, AlwaysClassZero) {
  const Dataset ds = two_class_set(5);
  const Predictor always_zero = [](const Tensor& batch) {
    Tensor p({batch.dim(0), 2});
    for (std::size_t i = 0; i < batch.dim(0); ++i) p.at(i, 0) = 1.0f;
    return p;
  };
  const MetricsReport r = evaluate(always_zero, 2, ds);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.5);
  EXPECT_EQ(r.confusion, (std::vector<std::vector<std::uint64_t>>{{5, 0}, {5, 0}}));
}

TEST(Evaluate, PerfectPredictionsDiagonal) {
  const Dataset ds = two_class_set(4);
  const Predictor oracle = [](const Tensor& batch) {
    Tensor p({batch.dim(0), 2});
    for (std::size_t i = 0; i < batch.dim(0); ++i) p.at(i, static_cast<std::size_t>(batch[i * 512]) % 2) = 1.0f;
    return p;
  };
  const MetricsReport r = evaluate(oracle, 2, ds);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.confusion, (std::vector<std::vector<std::uint64_t>>{{4, 0}, {0, 4}}));
  EXPECT_DOUBLE_EQ(r.auc_macro, 1.0);
}

TEST(Evaluate, MatchesHandCountedAccuracy) {
  const Dataset ds = synthesize_dataset(3, 10, 5).normalized();
  const ModelGraph m = build_cnn(3, 6);
  const MetricsReport r = evaluate(m, ds);
  const Tensor probs = m.forward(ds.to_tensor(), Mode::kInfer);
  std::size_t correct = 0;
  std::vector<std::uint64_t> row_sums(3, 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < 3; ++c)
      if (probs.at(i, c) > probs.at(i, best)) best = c;
    correct += best == ds[i].label;
    ++row_sums[ds[i].label];
  }
  EXPECT_DOUBLE_EQ(r.accuracy, double(correct) / ds.size());
  std::uint64_t total = 0, trace = 0;
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_EQ(std::accumulate(r.confusion[t].begin(), r.confusion[t].end(), std::uint64_t{0}), row_sums[t]);
    total += std::accumulate(r.confusion[t].begin(), r.confusion[t].end(), std::uint64_t{0});
    trace += r.confusion[t][t];
  }
  EXPECT_EQ(total, ds.size());
  EXPECT_DOUBLE_EQ(r.accuracy, double(trace) / total);
}

TEST(Evaluate, ChunkingDoesNotChangeScores) {
  const Dataset ds = synthesize_dataset(3, 7, 5).normalized();
  const ModelGraph m = build_transformer(3, 1);
  const Predictor p = make_predictor(m);
  EXPECT_EQ(predict_dataset(p, ds, 4), predict_dataset(p, ds, 256));
}

TEST(Evaluate, ClassMismatch) {
  EXPECT_THROW(evaluate(build_cnn(3), two_class_set(2)), ConfigError);
}

TEST(Permute, IdentityOrderLeavesDataUnchanged) {
  const Dataset ds = synthesize_dataset(2, 3, 1);
  std::vector<std::size_t> identity(256);
  std::iota(identity.begin(), identity.end(), 0);
  EXPECT_EQ(permute_timesteps(ds, identity).records(), ds.records());
  std::vector<std::size_t> bad = identity;
  bad[3] = 4;
  EXPECT_THROW(permute_timesteps(ds, bad), Error);
}

TEST(Permute, PreservesLabelsAndSampleMultiset) {
  const Dataset ds = synthesize_dataset(2, 3, 1);
  for (bool shared : {false, true}) {
    const Dataset p = permute_timesteps(ds, 9, shared);
    ASSERT_EQ(p.size(), ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
      EXPECT_EQ(p[i].label, ds[i].label);
      EXPECT_NE(p[i].iq, ds[i].iq);
      auto key = [](const IqSample& a, const IqSample& b) { return std::tie(a.i, a.q) < std::tie(b.i, b.q); };
      auto x = ds[i].iq, y = p[i].iq;
      std::sort(x.begin(), x.end(), key);
      std::sort(y.begin(), y.end(), key);
      EXPECT_EQ(x, y);
    }
  }
  EXPECT_EQ(permute_timesteps(ds, 9).records(), permute_timesteps(ds, 9).records());
}

TEST(Permute, IndependentVersusShared) {
  const Dataset ds = synthesize_dataset(2, 2, 1);
  // Records are compared through the position of their original sample 0.
  auto where_first = [](const SignalRecord& original, const SignalRecord& permuted) {
    return std::find(permuted.iq.begin(), permuted.iq.end(), original.iq[0]) - permuted.iq.begin();
  };
  const Dataset shared = permute_timesteps(ds, 4, true);
  for (std::size_t i = 1; i < ds.size(); ++i)
    EXPECT_EQ(where_first(ds[i], shared[i]), where_first(ds[0], shared[0]));
  const Dataset independent = permute_timesteps(ds, 4, false);
  bool any_differs = false;
  for (std::size_t i = 1; i < ds.size(); ++i)
    any_differs |= where_first(ds[i], independent[i]) != where_first(ds[0], independent[0]);
  EXPECT_TRUE(any_differs);
}

TEST(Latency, ThreeTimings) {
  const std::vector<double> t = {1.0, 2.0, 3.0};
  const LatencyStats s = latency_stats(t);
  EXPECT_DOUBLE_EQ(s.mean_ms, 2.0);
  EXPECT_DOUBLE_EQ(s.std_ms, 1.0);
  EXPECT_NEAR(s.ci95_ms, 1.1316, 1e-4);
  EXPECT_EQ(s.runs, 3u);
}

TEST(Latency, NeedsTwoTimings) {
  const std::vector<double> one = {1.0};
  EXPECT_THROW(latency_stats(one), ParameterError);
}

TEST(Latency, BenchmarkReportsRequestedRuns) {
  const ModelGraph m = build_cnn(4);
  const Predictor p = make_predictor(m);
  const LatencyStats s = benchmark_latency(p, Tensor({1, 256, 2, 1}), 20, 10);
  EXPECT_EQ(s.runs, 20u);
  EXPECT_GT(s.mean_ms, 0.0);
  EXPECT_GE(s.std_ms, 0.0);
  EXPECT_NEAR(s.ci95_ms, 1.96 * s.std_ms / std::sqrt(20.0), 1e-12);
  EXPECT_THROW(benchmark_latency(p, Tensor({1, 256, 2, 1}), 20, 5), ParameterError);
  EXPECT_THROW(benchmark_latency(p, Tensor({2, 256, 2, 1}), 20, 10), DimensionError);
}

MetricsReport sample_report(bool with_latency) {
  MetricsReport r;
  r.accuracy = 0.8333333333333334;
  r.confusion = {{3, 1, 0}, {0, 2, 0}, {0, 0, 0}};
  r.auc_per_class = {0.9, 0.1234567890123, NAN};
  r.auc_macro = (0.9 + 0.1234567890123) / 2;
  if (with_latency) r.latency = LatencyStats{0.3983, 0.0123, 0.0008, 1000};
  return r;
}

TEST(Report, JsonRoundTrip) {
  for (bool lat : {false, true}) {
    const MetricsReport r = sample_report(lat);
    expect_same_report(parse_report(format_report(r, ReportFormat::kJson), ReportFormat::kJson), r);
  }
}

TEST(Report, CsvRoundTrip) {
  for (bool lat : {false, true}) {
    const MetricsReport r = sample_report(lat);
    expect_same_report(parse_report(format_report(r, ReportFormat::kCsv), ReportFormat::kCsv), r);
  }
}

TEST(Report, JsonSchema) {
  const nlohmann::json j = nlohmann::json::parse(format_report(sample_report(true), ReportFormat::kJson));
  EXPECT_EQ(j["confusion"], nlohmann::json::parse("[[3,1,0],[0,2,0],[0,0,0]]"));
  EXPECT_TRUE(j["auc_per_class"][2].is_null());
  EXPECT_EQ(j["latency"]["runs"], 1000);
  for (const char* key : {"mean_ms", "std_ms", "ci95_ms"}) EXPECT_TRUE(j["latency"].contains(key));
  const nlohmann::json without = nlohmann::json::parse(format_report(sample_report(false), ReportFormat::kJson));
  EXPECT_FALSE(without.contains("latency"));
}

TEST(Report, LatencyRoundedToFourDecimals) {
  MetricsReport r = sample_report(true);
  r.latency->mean_ms = 0.123456789;
  const MetricsReport back = parse_report(format_report(r, ReportFormat::kJson), ReportFormat::kJson);
  EXPECT_DOUBLE_EQ(back.latency->mean_ms, 0.1235);
}

TEST(Report, FileRoundTripAndErrors) {
  testing::TempDir dir;
  const MetricsReport r = sample_report(true);
  export_report(r, dir / "r.json", ReportFormat::kJson);
  expect_same_report(import_report(dir / "r.json", ReportFormat::kJson), r);
  EXPECT_THROW(export_report(r, dir / "no" / "r.json", ReportFormat::kJson), IoError);
  EXPECT_THROW(parse_report("{\"accuracy\": ", ReportFormat::kJson), FormatError);
  EXPECT_THROW(parse_report_format("xml"), Error);
}

}  // namespace
}  // namespace rff
