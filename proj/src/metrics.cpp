#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace teko {

ClassificationResult classification_metrics(const std::vector<int>& preds,
                                            const std::vector<int>& labels) {
  if (preds.size() != labels.size() || preds.empty())
    fail(Err::LengthMismatch, "preds/labels sizes " + std::to_string(preds.size()) + "/" +
                                  std::to_string(labels.size()));
  int c_count = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || labels[i] < 0) fail(Err::UnknownId, "negative class index");
    c_count = std::max(c_count, std::max(preds[i], labels[i]) + 1);
  }

  std::vector<int> tp(c_count, 0), fp(c_count, 0), fn(c_count, 0), support(c_count, 0);
  int hits = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    support[static_cast<size_t>(labels[i])]++;
    if (preds[i] == labels[i]) {
      ++hits;
      tp[static_cast<size_t>(preds[i])]++;
    } else {
      fp[static_cast<size_t>(preds[i])]++;
      fn[static_cast<size_t>(labels[i])]++;
    }
  }

  ClassificationResult r;
  r.accuracy = static_cast<double>(hits) / static_cast<double>(preds.size());
  double f1_sum = 0.0;
  for (int c = 0; c < c_count; ++c) {
    ClassStats s;
    s.support = support[static_cast<size_t>(c)];
    int denom_p = tp[c] + fp[c];
    int denom_r = tp[c] + fn[c];
    s.precision = denom_p ? static_cast<double>(tp[c]) / denom_p : 0.0;
    s.recall = denom_r ? static_cast<double>(tp[c]) / denom_r : 0.0;
    s.f1 = (s.precision + s.recall) > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
                                        : 0.0;
    f1_sum += s.f1;
    r.per_class.push_back(s);
  }
  r.macro_f1 = f1_sum / static_cast<double>(c_count);
  return r;
}

namespace {

double sq_dist(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int k = 0; k < d; ++k) {
    double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

struct KmeansRun {
  std::vector<int> assign;
  double wcss = 0.0;
};

KmeansRun kmeans_once(const Matrix& pts, int k, uint64_t seed,
                      std::vector<double>* wcss_trace = nullptr) {
  const int n = pts.rows;
  const int d = pts.cols;
  Rng rng(seed);

  // k-means++ seeding
  Matrix centroids(k, d);
  std::vector<double> dist2(static_cast<size_t>(n), 0.0);
  int first = static_cast<int>(rng.index(static_cast<size_t>(n)));
  for (int c = 0; c < d; ++c) centroids.at(0, c) = pts.at(first, c);
  for (int m = 1; m < k; ++m) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = 1e300;
      for (int c = 0; c < m; ++c) best = std::min(best, sq_dist(pts.row(i), centroids.row(c), d));
      dist2[static_cast<size_t>(i)] = best;
      total += best;
    }
    int pick;
    if (total <= 0.0) {
      pick = static_cast<int>(rng.index(static_cast<size_t>(n)));
    } else {
      double u = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += dist2[static_cast<size_t>(i)];
        if (acc >= u) {
          pick = i;
          break;
        }
      }
    }
    for (int c = 0; c < d; ++c) centroids.at(m, c) = pts.at(pick, c);
  }

  KmeansRun run;
  run.assign.assign(static_cast<size_t>(n), 0);
  Matrix next(k, d);
  std::vector<int> counts(static_cast<size_t>(k), 0);
  for (int iter = 0; iter < 300; ++iter) {
    double objective = 0.0;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bd = sq_dist(pts.row(i), centroids.row(0), d);
      for (int c = 1; c < k; ++c) {
        double dd = sq_dist(pts.row(i), centroids.row(c), d);
        if (dd < bd) {
          bd = dd;
          best = c;
        }
      }
      run.assign[static_cast<size_t>(i)] = best;
      objective += bd;
    }
    if (wcss_trace) wcss_trace->push_back(objective);
    next.fill(0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      int c = run.assign[static_cast<size_t>(i)];
      counts[static_cast<size_t>(c)]++;
      for (int j = 0; j < d; ++j) next.at(c, j) += pts.at(i, j);
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] == 0) {
        // Re-seed an empty cluster at the point farthest from its centroid.
        int far_i = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          double dd = sq_dist(pts.row(i), centroids.row(run.assign[static_cast<size_t>(i)]), d);
          if (dd > far_d) {
            far_d = dd;
            far_i = i;
          }
        }
        for (int j = 0; j < d; ++j) next.at(c, j) = pts.at(far_i, j);
        counts[static_cast<size_t>(c)] = 1;
      } else {
        for (int j = 0; j < d; ++j) next.at(c, j) /= counts[static_cast<size_t>(c)];
      }
    }
    double shift = 0.0;
    for (int c = 0; c < k; ++c) shift = std::max(shift, sq_dist(centroids.row(c), next.row(c), d));
    centroids = next;
    if (std::sqrt(shift) < 1e-8) break;
  }

  for (int i = 0; i < n; ++i) {
    int best = 0;
    double bd = sq_dist(pts.row(i), centroids.row(0), d);
    for (int c = 1; c < k; ++c) {
      double dd = sq_dist(pts.row(i), centroids.row(c), d);
      if (dd < bd) {
        bd = dd;
        best = c;
      }
    }
    run.assign[static_cast<size_t>(i)] = best;
    run.wcss += bd;
  }
  return run;
}

}  // namespace

std::vector<int> kmeans(const Matrix& points, int k, uint64_t seed, int restarts,
                        double* wcss_out, std::vector<double>* wcss_trace) {
  if (k < 1 || points.rows < k) fail(Err::TooFewPoints, std::to_string(points.rows) + " points for k=" + std::to_string(k));
  KmeansRun best;
  best.wcss = 1e300;
  for (int r = 0; r < std::max(1, restarts); ++r) {
    // per-restart seed derived from the master seed
    uint64_t rs = fnv1a(&r, sizeof(r), seed ^ 0xd6e8feb86659fd93ULL);
    KmeansRun run = kmeans_once(points, k, rs, r == 0 ? wcss_trace : nullptr);
    if (run.wcss < best.wcss) best = std::move(run);
  }
  if (wcss_out) *wcss_out = best.wcss;
  return best.assign;
}

namespace {

bool identical_up_to_relabel(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<int, int> fwd, bwd;
  for (size_t i = 0; i < a.size(); ++i) {
    auto f = fwd.find(a[i]);
    if (f == fwd.end())
      fwd[a[i]] = b[i];
    else if (f->second != b[i])
      return false;
    auto g = bwd.find(b[i]);
    if (g == bwd.end())
      bwd[b[i]] = a[i];
    else if (g->second != a[i])
      return false;
  }
  return true;
}

}  // namespace

ClusteringResult clustering_metrics(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size() || a.size() < 2) fail(Err::LengthMismatch, "partitions");
  const double n = static_cast<double>(a.size());

  std::map<int, int> ca, cb;
  std::map<std::pair<int, int>, int> joint;
  for (size_t i = 0; i < a.size(); ++i) {
    ca[a[i]]++;
    cb[b[i]]++;
    joint[{a[i], b[i]}]++;
  }

  ClusteringResult out;
  if (identical_up_to_relabel(a, b)) {
    out.nmi = 1.0;
    out.ari = 1.0;
    return out;
  }

  double ha = 0.0, hb = 0.0;
  for (auto& [k, c] : ca) {
    double p = c / n;
    ha -= p * std::log(p);
  }
  for (auto& [k, c] : cb) {
    double p = c / n;
    hb -= p * std::log(p);
  }
  if (ha <= 0.0 || hb <= 0.0) {
    out.nmi = 0.0;
  } else {
    double mi = 0.0;
    for (auto& [key, c] : joint) {
      double pij = c / n;
      double pi = ca[key.first] / n;
      double pj = cb[key.second] / n;
      mi += pij * std::log(pij / (pi * pj));
    }
    out.nmi = std::min(1.0, std::max(0.0, mi / std::sqrt(ha * hb)));
  }

  auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (auto& [key, c] : joint) sum_ij += choose2(c);
  for (auto& [k, c] : ca) sum_a += choose2(c);
  for (auto& [k, c] : cb) sum_b += choose2(c);
  double total_pairs = choose2(n);
  double expected = sum_a * sum_b / total_pairs;
  double max_index = 0.5 * (sum_a + sum_b);
  double denom = max_index - expected;
  out.ari = denom == 0.0 ? 0.0 : (sum_ij - expected) / denom;
  return out;
}

MetricsReport evaluate(const std::vector<Matrix>& per_seed_outputs,
                       const std::vector<uint64_t>& seeds, const std::vector<int>& labels,
                       const std::vector<int>& eval_rows, int class_count, EvalMode mode,
                       int kmeans_restarts) {
  if (per_seed_outputs.size() != seeds.size() || seeds.empty())
    fail(Err::LengthMismatch, "one output matrix per seed required");
  MetricsReport r;
  r.mode = mode;
  r.seeds = seeds;

  for (size_t s = 0; s < seeds.size(); ++s) {
    const Matrix& H = per_seed_outputs[s];
    std::vector<int> truth;
    truth.reserve(eval_rows.size());
    for (int i : eval_rows) truth.push_back(labels[static_cast<size_t>(i)]);

    if (mode == EvalMode::Classify) {
      std::vector<int> preds;
      preds.reserve(eval_rows.size());
      for (int i : eval_rows) {
        const double* row = H.row(i);
        int arg = 0;
        for (int c = 1; c < H.cols; ++c)
          if (row[c] > row[arg]) arg = c;
        preds.push_back(arg);
      }
      auto cm = classification_metrics(preds, truth);
      r.accuracy.push_back(cm.accuracy);
      r.macro_f1.push_back(cm.macro_f1);
      r.per_class = cm.per_class;
    } else {
      Matrix pts(static_cast<int>(eval_rows.size()), H.cols);
      for (size_t i = 0; i < eval_rows.size(); ++i)
        for (int c = 0; c < H.cols; ++c) pts.at(static_cast<int>(i), c) = H.at(eval_rows[i], c);
      auto assign = kmeans(pts, class_count, seeds[s], kmeans_restarts);
      auto cl = clustering_metrics(assign, truth);
      r.nmi.push_back(cl.nmi);
      r.ari.push_back(cl.ari);
    }
  }

  auto stats = [](const std::vector<double>& v, double* mean, double* sd) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double var = 0.0;
    if (v.size() > 1) {
      for (double x : v) var += (x - m) * (x - m);
      var /= static_cast<double>(v.size() - 1);
    }
    *mean = m;
    *sd = std::sqrt(var);
  };
  if (mode == EvalMode::Classify) {
    stats(r.accuracy, &r.mean_primary, &r.std_primary);
    stats(r.macro_f1, &r.mean_secondary, &r.std_secondary);
  } else {
    stats(r.nmi, &r.mean_primary, &r.std_primary);
    stats(r.ari, &r.mean_secondary, &r.std_secondary);
  }
  return r;
}

std::string format_report_csv(const MetricsReport& r) {
  std::ostringstream ss;
  const bool classify = r.mode == EvalMode::Classify;
  ss << (classify ? "seed,accuracy,macro_f1\n" : "seed,nmi,ari\n");
  for (size_t i = 0; i < r.seeds.size(); ++i) {
    ss << r.seeds[i] << ',';
    if (classify)
      ss << fmt_double(r.accuracy[i]) << ',' << fmt_double(r.macro_f1[i]);
    else
      ss << fmt_double(r.nmi[i]) << ',' << fmt_double(r.ari[i]);
    ss << '\n';
  }
  ss << "mean," << fmt_double(r.mean_primary) << ',' << fmt_double(r.mean_secondary) << '\n';
  ss << "std," << fmt_double(r.std_primary) << ',' << fmt_double(r.std_secondary) << '\n';
  return ss.str();
}

std::string format_report_table(const MetricsReport& r) {
  std::ostringstream ss;
  const bool classify = r.mode == EvalMode::Classify;
  char buf[160];
  ss << (classify ? "seed      accuracy  macro_f1\n" : "seed      nmi       ari\n");
  for (size_t i = 0; i < r.seeds.size(); ++i) {
    double a = classify ? r.accuracy[i] : r.nmi[i];
    double b = classify ? r.macro_f1[i] : r.ari[i];
    std::snprintf(buf, sizeof(buf), "%-9llu %-9.4f %-9.4f\n",
                  static_cast<unsigned long long>(r.seeds[i]), a, b);
    ss << buf;
  }
  std::snprintf(buf, sizeof(buf), "mean      %-9.4f %-9.4f\nstd       %-9.4f %-9.4f\n",
                r.mean_primary, r.mean_secondary, r.std_primary, r.std_secondary);
  ss << buf;
  if (classify && !r.per_class.empty()) {
    ss << "class     precision recall    f1        support\n";
    for (size_t c = 0; c < r.per_class.size(); ++c) {
      const auto& s = r.per_class[c];
      std::snprintf(buf, sizeof(buf), "%-9zu %-9.4f %-9.4f %-9.4f %d\n", c, s.precision, s.recall,
                    s.f1, s.support);
      ss << buf;
    }
  }
  return ss.str();
}

std::string format_report_json(const MetricsReport& r) {
  const bool classify = r.mode == EvalMode::Classify;
  std::ostringstream ss;
  ss << "{\"mode\":\"" << (classify ? "classify" : "cluster") << "\",\"seeds\":[";
  for (size_t i = 0; i < r.seeds.size(); ++i) ss << (i ? "," : "") << r.seeds[i];
  ss << "],";
  auto arr = [&](const char* name, const std::vector<double>& v) {
    ss << "\"" << name << "\":[";
    for (size_t i = 0; i < v.size(); ++i) ss << (i ? "," : "") << fmt_double(v[i]);
    ss << "],";
  };
  if (classify) {
    arr("accuracy", r.accuracy);
    arr("macro_f1", r.macro_f1);
  } else {
    arr("nmi", r.nmi);
    arr("ari", r.ari);
  }
  ss << "\"mean\":" << fmt_double(r.mean_primary) << ",\"std\":" << fmt_double(r.std_primary)
     << ",\"mean_secondary\":" << fmt_double(r.mean_secondary)
     << ",\"std_secondary\":" << fmt_double(r.std_secondary) << "}";
  return ss.str();
}

}  // namespace teko
