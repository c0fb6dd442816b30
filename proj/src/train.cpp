#include "train.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace teko {

PairSets sample_pairs(const HeteroGraph& graph, int neg_ratio, uint64_t seed) {
  if (graph.edges_dd.empty()) fail(Err::NoEdges, "no doc-doc edges");
  if (neg_ratio < 1) fail(Err::ConfigInvalid, "neg_ratio must be >= 1");

  PairSets out;
  out.seed = seed;
  out.positives = graph.edges_dd;

  std::set<std::pair<int, int>> adjacent(graph.edges_dd.begin(), graph.edges_dd.end());
  std::set<std::pair<int, int>> negatives;
  const size_t want = out.positives.size() * static_cast<size_t>(neg_ratio);
  const size_t max_attempts = 100 * want;
  const int nd = graph.n_docs();
  if (nd < 2) fail(Err::GraphTooDense, "fewer than two documents");

  Rng rng(seed);
  size_t attempts = 0;
  while (negatives.size() < want) {
    if (attempts++ >= max_attempts)
      fail(Err::GraphTooDense, "could not sample enough non-adjacent pairs");
    int a = static_cast<int>(rng.index(static_cast<size_t>(nd)));
    int b = static_cast<int>(rng.index(static_cast<size_t>(nd)));
    if (a == b) continue;
    std::pair<int, int> p{std::min(a, b), std::max(a, b)};
    if (adjacent.count(p)) continue;
    negatives.insert(p);
  }
  out.negatives.assign(negatives.begin(), negatives.end());
  return out;
}

double supervised_loss_grad(const Matrix& H, const std::vector<int>& labels,
                            const std::vector<int>& mask, Matrix* dH) {
  if (mask.empty()) fail(Err::EmptyMask, "supervised loss needs labeled rows");
  if (dH) *dH = Matrix(H.rows, H.cols);
  double loss = 0.0;
  const double floor = 1e-12;
  for (int i : mask) {
    if (i < 0 || i >= H.rows) fail(Err::UnknownId, "mask row " + std::to_string(i));
    int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= H.cols) fail(Err::UnknownId, "label at row " + std::to_string(i));
    double p = H.at(i, y);
    double clamped = std::min(1.0, std::max(floor, p));
    loss += -std::log(clamped);
    // d(-log(clamp(p)))/dp: zero below the floor
    if (dH && p > floor) dH->at(i, y) = -1.0 / (clamped * static_cast<double>(mask.size()));
  }
  return loss / static_cast<double>(mask.size());
}

double supervised_loss(const Matrix& H, const std::vector<int>& labels,
                       const std::vector<int>& mask) {
  return supervised_loss_grad(H, labels, mask, nullptr);
}

double unsupervised_loss_grad(const Matrix& H, const PairSets& pairs, Matrix* dH) {
  const size_t m = pairs.positives.size() + pairs.negatives.size();
  if (m == 0) fail(Err::EmptyPairs, "no pairs");
  if (dH) *dH = Matrix(H.rows, H.cols);
  const double inv_m = 1.0 / static_cast<double>(m);
  double loss = 0.0;
  auto dot_rows = [&](int a, int b) {
    const double* ra = H.row(a);
    const double* rb = H.row(b);
    double s = 0.0;
    for (int c = 0; c < H.cols; ++c) s += ra[c] * rb[c];
    return s;
  };
  // -log sigma(x) has gradient -(1 - sigma(x)) in x; log1p form is stable.
  for (const auto& [i, j] : pairs.positives) {
    double x = dot_rows(i, j);
    loss += std::log1p(std::exp(-std::abs(x))) + std::max(-x, 0.0);
    if (dH) {
      double coeff = -(1.0 - 1.0 / (1.0 + std::exp(-x))) * inv_m;
      const double* ri = H.row(i);
      const double* rj = H.row(j);
      double* di = dH->row(i);
      double* dj = dH->row(j);
      for (int c = 0; c < H.cols; ++c) {
        di[c] += coeff * rj[c];
        dj[c] += coeff * ri[c];
      }
    }
  }
  for (const auto& [i, j] : pairs.negatives) {
    double x = dot_rows(i, j);
    loss += std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
    if (dH) {
      double coeff = (1.0 / (1.0 + std::exp(-x))) * inv_m;
      const double* ri = H.row(i);
      const double* rj = H.row(j);
      double* di = dH->row(i);
      double* dj = dH->row(j);
      for (int c = 0; c < H.cols; ++c) {
        di[c] += coeff * rj[c];
        dj[c] += coeff * ri[c];
      }
    }
  }
  return loss * inv_m;
}

double unsupervised_loss(const Matrix& H, const PairSets& pairs) {
  return unsupervised_loss_grad(H, pairs, nullptr);
}

namespace {

struct Adam {
  double lr, wd;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long long t = 0;
  std::vector<std::vector<double>> m, v;

  explicit Adam(const std::vector<Tensor>& params, double lr_, double wd_) : lr(lr_), wd(wd_) {
    for (const auto& p : params) {
      m.emplace_back(p.size(), 0.0);
      v.emplace_back(p.size(), 0.0);
    }
  }

  void step(std::vector<Tensor>& params) {
    ++t;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t pi = 0; pi < params.size(); ++pi) {
      Tensor& p = params[pi];
      for (size_t k = 0; k < p.size(); ++k) {
        double g = p.g[k] + wd * p.w[k];
        m[pi][k] = beta1 * m[pi][k] + (1.0 - beta1) * g;
        v[pi][k] = beta2 * v[pi][k] + (1.0 - beta2) * g * g;
        double mhat = m[pi][k] / bc1;
        double vhat = v[pi][k] / bc2;
        p.w[k] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }
};

double accuracy_on(const Matrix& H, const std::vector<int>& labels, const std::vector<int>& mask) {
  if (mask.empty()) return 0.0;
  int hits = 0;
  for (int i : mask) {
    const double* row = H.row(i);
    int arg = 0;
    for (int c = 1; c < H.cols; ++c)
      if (row[c] > row[arg]) arg = c;
    if (arg == labels[static_cast<size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(mask.size());
}

std::vector<std::vector<double>> snapshot(const std::vector<Tensor>& params) {
  std::vector<std::vector<double>> s;
  s.reserve(params.size());
  for (const auto& p : params) s.push_back(p.w);
  return s;
}

void restore(std::vector<Tensor>& params, const std::vector<std::vector<double>>& s) {
  for (size_t i = 0; i < params.size(); ++i) params[i].w = s[i];
}

}  // namespace

TrainResult train(Model& model, Objective objective, const SupervisedTask* task,
                  const PairSets* pairs, const OptimizerConfig& opt) {
  if (objective == Objective::Supervised && (!task || task->train_mask.empty()))
    fail(Err::EmptyMask, "supervised training needs a train mask");
  if (objective == Objective::Unsupervised && (!pairs || (pairs->positives.empty() && pairs->negatives.empty())))
    fail(Err::EmptyPairs, "unsupervised training needs pairs");
  if (opt.learning_rate < 0) fail(Err::ConfigInvalid, "learning_rate");

  Rng rng(opt.seed);
  Adam adam(model.params(), opt.learning_rate, opt.weight_decay);

  TrainResult result;
  const bool higher_is_better = objective == Objective::Supervised;
  double best = higher_is_better ? -1e300 : 1e300;
  auto best_params = snapshot(model.params());
  int since_best = 0;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    model.zero_grad();
    const Matrix& H = model.forward(true, &rng);
    Matrix dH;
    double loss = objective == Objective::Supervised
                      ? supervised_loss_grad(H, task->labels, task->train_mask, &dH)
                      : unsupervised_loss_grad(H, *pairs, &dH);
    if (!std::isfinite(loss)) fail(Err::DivergedLoss, "epoch " + std::to_string(epoch));
    model.backward(dH);
    adam.step(model.params());

    const Matrix& He = model.forward(false);
    double val;
    if (objective == Objective::Supervised) {
      val = task->val_mask.empty() ? accuracy_on(He, task->labels, task->train_mask)
                                   : accuracy_on(He, task->labels, task->val_mask);
    } else {
      val = unsupervised_loss(He, *pairs);
    }
    if (!std::isfinite(val)) fail(Err::DivergedLoss, "epoch " + std::to_string(epoch));
    result.history.push_back({epoch, loss, val});

    bool improved = higher_is_better ? val > best : val < best;
    if (improved) {
      best = val;
      best_params = snapshot(model.params());
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= opt.patience) {
      break;
    }
  }
  restore(model.params(), best_params);
  result.best_val = best;
  return result;
}

std::vector<GradCheckEntry> grad_check(Model& model, Objective objective,
                                       const SupervisedTask* task, const PairSets* pairs,
                                       double epsilon) {
  auto loss_of = [&]() {
    const Matrix& H = model.forward(false);
    return objective == Objective::Supervised ? supervised_loss(H, task->labels, task->train_mask)
                                              : unsupervised_loss(H, *pairs);
  };

  model.zero_grad();
  const Matrix& H = model.forward(false);
  Matrix dH;
  if (objective == Objective::Supervised)
    supervised_loss_grad(H, task->labels, task->train_mask, &dH);
  else
    unsupervised_loss_grad(H, *pairs, &dH);
  model.backward(dH);

  std::vector<std::vector<double>> analytic;
  for (const auto& p : model.params()) analytic.push_back(p.g);

  std::vector<GradCheckEntry> report;
  auto& params = model.params();
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    double diff_sq = 0.0, a_sq = 0.0, n_sq = 0.0;
    for (size_t k = 0; k < p.size(); ++k) {
      double orig = p.w[k];
      p.w[k] = orig + epsilon;
      double lp = loss_of();
      p.w[k] = orig - epsilon;
      double lm = loss_of();
      p.w[k] = orig;
      double numeric = (lp - lm) / (2.0 * epsilon);
      double a = analytic[pi][k];
      diff_sq += (a - numeric) * (a - numeric);
      a_sq += a * a;
      n_sq += numeric * numeric;
    }
    GradCheckEntry e;
    e.group = p.name;
    e.analytic_norm = std::sqrt(a_sq);
    e.numeric_norm = std::sqrt(n_sq);
    double denom = std::max(e.analytic_norm, e.numeric_norm);
    e.max_rel_error = denom < 1e-8 ? 0.0 : std::sqrt(diff_sq) / denom;
    report.push_back(std::move(e));
  }
  // restore a clean forward state
  model.forward(false);
  return report;
}

std::string format_history(const std::vector<EpochRecord>& history) {
  std::ostringstream ss;
  ss << "epoch,train_loss,val_metric\n";
  for (const auto& r : history)
    ss << r.epoch << ',' << fmt_double(r.train_loss) << ',' << fmt_double(r.val_metric) << '\n';
  return ss.str();
}

void save_history(const std::string& path, const std::vector<EpochRecord>& history) {
  write_file_atomic(path, format_history(history));
}

}  // namespace teko
