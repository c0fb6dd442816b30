#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hetero_graph.hpp"
#include "model.hpp"

namespace teko {

struct PairSets {
  std::vector<std::pair<int, int>> positives;  // doc index pairs, i < j
  std::vector<std::pair<int, int>> negatives;
  uint64_t seed = 0;
};

// Positives are the doc-doc edges; negatives are uniformly sampled
// non-adjacent doc pairs (neg_ratio per positive), rejection-sampled.
PairSets sample_pairs(const HeteroGraph& graph, int neg_ratio, uint64_t seed);

// Mean cross entropy over the masked rows; probabilities are clamped to
// [1e-12, 1] before the log.
double supervised_loss(const Matrix& H, const std::vector<int>& labels,
                       const std::vector<int>& mask);
// Also returns d(loss)/dH (zero outside the mask).
double supervised_loss_grad(const Matrix& H, const std::vector<int>& labels,
                            const std::vector<int>& mask, Matrix* dH);

// Negative-sampling objective with the logistic sigma, mean-reduced over
// |positives| + |negatives|.
double unsupervised_loss(const Matrix& H, const PairSets& pairs);
double unsupervised_loss_grad(const Matrix& H, const PairSets& pairs, Matrix* dH);

enum class Objective { Supervised, Unsupervised };

struct OptimizerConfig {
  double learning_rate = 0.005;
  double weight_decay = 5e-4;
  int epochs = 200;
  int patience = 30;
  uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_val = 0.0;
};

struct SupervisedTask {
  std::vector<int> labels;      // per doc row; -1 when absent
  std::vector<int> train_mask;  // row indices
  std::vector<int> val_mask;
};

// Adam with L2 weight decay folded into the gradient; early stopping on the
// validation metric (accuracy for supervised, loss for unsupervised);
// parameters are restored to the best-validation epoch.
TrainResult train(Model& model, Objective objective, const SupervisedTask* task,
                  const PairSets* pairs, const OptimizerConfig& opt);

struct GradCheckEntry {
  std::string group;
  double max_rel_error = 0.0;  // ||analytic - numeric|| / max(norms); 0 when both ~0
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
};

// Central finite differences against the analytic backward pass, one entry
// per parameter tensor. Dropout must be disabled (eval-mode forward).
std::vector<GradCheckEntry> grad_check(Model& model, Objective objective,
                                       const SupervisedTask* task, const PairSets* pairs,
                                       double epsilon);

std::string format_history(const std::vector<EpochRecord>& history);
void save_history(const std::string& path, const std::vector<EpochRecord>& history);

}  // namespace teko
