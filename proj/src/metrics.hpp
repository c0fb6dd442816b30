#pragma once

#include <string>
#include <vector>

#include "common.hpp"

namespace teko {

struct ClassStats {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int support = 0;
};

struct ClassificationResult {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<ClassStats> per_class;
};

// Macro-F1 averages the per-class F1 over all classes in [0, C);
// a class with no predictions and no true members contributes 0.
ClassificationResult classification_metrics(const std::vector<int>& preds,
                                            const std::vector<int>& labels);

// k-means++ seeding, Lloyd iterations until the largest centroid shift is
// below 1e-8 (or 300 iterations); best of `restarts` runs by WCSS.
// wcss_trace, when given, records the per-iteration objective of the first
// restart (non-increasing by construction of the Lloyd steps).
std::vector<int> kmeans(const Matrix& points, int k, uint64_t seed, int restarts = 10,
                        double* wcss_out = nullptr, std::vector<double>* wcss_trace = nullptr);

struct ClusteringResult {
  double nmi = 0.0;
  double ari = 0.0;
};

// NMI normalized by the geometric mean of the entropies (natural logs);
// ARI by the standard adjusted pair-counting formula.
ClusteringResult clustering_metrics(const std::vector<int>& a, const std::vector<int>& b);

enum class EvalMode { Classify, Cluster };

struct MetricsReport {
  EvalMode mode = EvalMode::Classify;
  std::vector<uint64_t> seeds;
  std::vector<double> accuracy, macro_f1, nmi, ari;  // per seed (mode-dependent)
  double mean_primary = 0.0, std_primary = 0.0;      // accuracy or NMI
  double mean_secondary = 0.0, std_secondary = 0.0;  // macro-F1 or ARI
  std::vector<ClassStats> per_class;                 // last seed, classify mode
};

// Classify: argmax over the class rows restricted to eval_rows.
// Cluster: k-means on the embedding rows (K = class count) scored against
// the labels. One output matrix per seed; mean and sample std across seeds.
MetricsReport evaluate(const std::vector<Matrix>& per_seed_outputs,
                       const std::vector<uint64_t>& seeds, const std::vector<int>& labels,
                       const std::vector<int>& eval_rows, int class_count, EvalMode mode,
                       int kmeans_restarts = 10);

std::string format_report_csv(const MetricsReport& r);
std::string format_report_table(const MetricsReport& r);
std::string format_report_json(const MetricsReport& r);

}  // namespace teko
