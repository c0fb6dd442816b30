#pragma once

// Test-only fixtures and independent oracles. Nothing here is used by the
// library; the oracles deliberately re-derive quantities from first
// principles so they can cross-check the implementation.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "hetero_graph.hpp"
#include "knowledge.hpp"
#include "linker.hpp"
#include "model.hpp"

namespace fixtures {

using namespace teko;

// --------------------------------------------------------------------------
// Small random heterogeneous instance for gradient and invariant tests.

struct HeteroInstance {
  HeteroGraph graph;
  Matrix X;   // doc features
  Matrix Es;  // entity triplet features
  Matrix Ed;  // entity textual features
  std::vector<int> labels;  // per global row; -1 for entities
  std::vector<int> train_rows;
  int class_count = 2;
};

inline HeteroInstance make_hetero_instance(int n_docs, int n_ents, int doc_feat, int ent_feat,
                                           uint64_t seed, double edge_p = 0.35,
                                           double link_p = 0.5, double ee_p = 0.3) {
  Rng rng(seed);
  TextRichGraph g;
  std::string content;
  for (int i = 0; i < n_docs; ++i)
    content += "d" + std::to_string(100 + i) + "\tplaceholder text\t" +
               std::to_string(static_cast<int>(rng.index(2))) + "\n";
  g.documents = parse_documents(content, "fixture");
  for (int i = 0; i < n_docs; ++i)
    for (int j = i + 1; j < n_docs; ++j)
      if (rng.uniform() < edge_p)
        g.edges.push_back({"d" + std::to_string(100 + i), "d" + std::to_string(100 + j)});

  AnnotationSet ann;
  for (int i = 0; i < n_docs; ++i)
    for (int e = 0; e < n_ents; ++e)
      if (rng.uniform() < link_p) {
        Mention m;
        m.doc_id = "d" + std::to_string(100 + i);
        m.entity_id = "E" + std::to_string(10 + e);
        m.score = 0.5;
        ann.mentions.push_back(m);
      }
  std::vector<std::pair<std::string, std::string>> ee;
  for (int a = 0; a < n_ents; ++a)
    for (int b = a + 1; b < n_ents; ++b)
      if (rng.uniform() < ee_p)
        ee.push_back({"E" + std::to_string(10 + a), "E" + std::to_string(10 + b)});
  // make sure every entity occurs somewhere
  for (int e = 0; e < n_ents; ++e) {
    Mention m;
    m.doc_id = "d" + std::to_string(100 + static_cast<int>(rng.index(static_cast<size_t>(n_docs))));
    m.entity_id = "E" + std::to_string(10 + e);
    m.score = 0.5;
    ann.mentions.push_back(m);
  }

  HeteroInstance inst;
  inst.graph = assemble(g, filter_mentions(ann.mentions, 0.0), ee);

  inst.X = Matrix(inst.graph.n_docs(), doc_feat);
  for (double& v : inst.X.a) v = rng.uniform(-1, 1);
  inst.Es = Matrix(inst.graph.n_ents(), ent_feat);
  for (double& v : inst.Es.a) v = rng.uniform(-1, 1);
  inst.Ed = Matrix(inst.graph.n_ents(), ent_feat);
  for (double& v : inst.Ed.a) v = rng.uniform(-1, 1);

  inst.labels.assign(static_cast<size_t>(inst.graph.n_nodes()), -1);
  for (int i = 0; i < inst.graph.n_docs(); ++i) {
    const auto& d = g.documents.docs[static_cast<size_t>(
        g.documents.position(inst.graph.doc_ids[static_cast<size_t>(i)]))];
    inst.labels[static_cast<size_t>(i)] = d.label.value();
    inst.train_rows.push_back(i);
  }
  return inst;
}

// --------------------------------------------------------------------------
// Brute-force clustering oracles (pair counting / direct definitions).

inline double ari_bruteforce(const std::vector<int>& a, const std::vector<int>& b) {
  const size_t n = a.size();
  double s11 = 0, s10 = 0, s01 = 0, s00 = 0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      bool same_a = a[i] == a[j];
      bool same_b = b[i] == b[j];
      if (same_a && same_b) s11 += 1;
      else if (same_a) s10 += 1;
      else if (same_b) s01 += 1;
      else s00 += 1;
    }
  // Hubert-Arabie adjusted Rand from the pair table
  double num = 2.0 * (s11 * s00 - s10 * s01);
  double den = (s11 + s10) * (s10 + s00) + (s11 + s01) * (s01 + s00);
  if (den == 0.0) {
    // degenerate: either partition structure identical or no variability
    bool identical = true;
    for (size_t i = 0; i < n && identical; ++i)
      for (size_t j = i + 1; j < n && identical; ++j)
        identical = (a[i] == a[j]) == (b[i] == b[j]);
    return identical ? 1.0 : 0.0;
  }
  return num / den;
}

inline double nmi_bruteforce(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = static_cast<double>(a.size());
  auto uniques = [](const std::vector<int>& v) {
    std::set<int> s(v.begin(), v.end());
    return std::vector<int>(s.begin(), s.end());
  };
  auto ua = uniques(a), ub = uniques(b);

  // detect identical-up-to-relabeling first, mirroring the documented rule
  {
    std::map<int, int> f, g;
    bool ident = true;
    for (size_t i = 0; i < a.size() && ident; ++i) {
      if (f.count(a[i]) && f[a[i]] != b[i]) ident = false;
      if (g.count(b[i]) && g[b[i]] != a[i]) ident = false;
      f[a[i]] = b[i];
      g[b[i]] = a[i];
    }
    if (ident) return 1.0;
  }

  double ha = 0, hb = 0, mi = 0;
  for (int ca : ua) {
    double cnt = 0;
    for (int v : a) cnt += v == ca;
    ha -= cnt / n * std::log(cnt / n);
  }
  for (int cb : ub) {
    double cnt = 0;
    for (int v : b) cnt += v == cb;
    hb -= cnt / n * std::log(cnt / n);
  }
  if (ha <= 0 || hb <= 0) return 0.0;
  for (int ca : ua)
    for (int cb : ub) {
      double nij = 0, ni = 0, nj = 0;
      for (size_t k = 0; k < a.size(); ++k) {
        ni += a[k] == ca;
        nj += b[k] == cb;
        nij += a[k] == ca && b[k] == cb;
      }
      if (nij > 0) mi += nij / n * std::log((nij / n) / ((ni / n) * (nj / n)));
    }
  double v = mi / std::sqrt(ha * hb);
  return std::min(1.0, std::max(0.0, v));
}

// --------------------------------------------------------------------------
// Plain logistic regression, used to certify that single modalities cap
// below a target accuracy on the synthetic benchmark.

inline double logistic_regression_accuracy(const Matrix& X, const std::vector<int>& y,
                                           const std::vector<int>& train_rows,
                                           const std::vector<int>& test_rows, int iters = 400,
                                           double lr = 0.5) {
  const int d = X.cols;
  std::vector<double> w(static_cast<size_t>(d) + 1, 0.0);  // bias last
  for (int it = 0; it < iters; ++it) {
    std::vector<double> grad(w.size(), 0.0);
    for (int r : train_rows) {
      const double* x = X.row(r);
      double z = w[static_cast<size_t>(d)];
      for (int c = 0; c < d; ++c) z += w[static_cast<size_t>(c)] * x[c];
      double p = 1.0 / (1.0 + std::exp(-z));
      double err = p - static_cast<double>(y[static_cast<size_t>(r)]);
      for (int c = 0; c < d; ++c) grad[static_cast<size_t>(c)] += err * x[c];
      grad[static_cast<size_t>(d)] += err;
    }
    for (size_t k = 0; k < w.size(); ++k)
      w[k] -= lr * grad[k] / static_cast<double>(train_rows.size());
  }
  int hits = 0;
  for (int r : test_rows) {
    const double* x = X.row(r);
    double z = w[static_cast<size_t>(d)];
    for (int c = 0; c < d; ++c) z += w[static_cast<size_t>(c)] * x[c];
    hits += (z > 0 ? 1 : 0) == y[static_cast<size_t>(r)];
  }
  return static_cast<double>(hits) / static_cast<double>(test_rows.size());
}

// --------------------------------------------------------------------------
// End-to-end synthetic benchmark. Labels are the XOR of a topology-visible
// community bit and a knowledge-visible entity-family bit, so neither text
// nor topology alone can decide them while the combination can. Every
// mention is a fresh entity (no entity is shared across documents, which
// blocks transductive memorization of its feature noise). Each entity is
// informative in exactly one knowledge channel, chosen at random: covered
// by KB triplets or by a textual description. A single-channel ablation is
// therefore blind on the docs whose mentions all lack that channel, while
// the fused model sees a signal for every mention.

struct BenchmarkData {
  std::string documents;     // documents.tsv content
  std::string edges;         // edges.tsv content
  std::string annotations;   // precomputed annotations content
  std::string triplets;      // kb triplets
  std::string descriptions;  // kb descriptions
  std::vector<int> labels_by_sorted_doc;  // aligned with sorted doc ids
};

inline BenchmarkData make_benchmark(int n_docs, uint64_t seed) {
  Rng rng(seed);
  const int mentions_per_doc = 2;
  const int filler_vocab = 8;

  auto doc_id = [](int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "d%04d", i);
    return std::string(buf);
  };
  auto entity_id = [](int doc, int k) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "ent%04d_%d", doc, k);
    return std::string(buf);
  };

  std::vector<int> community(static_cast<size_t>(n_docs));
  std::vector<int> family(static_cast<size_t>(n_docs));
  std::vector<int> labels(static_cast<size_t>(n_docs));
  for (int i = 0; i < n_docs; ++i) {
    community[static_cast<size_t>(i)] = i < n_docs / 2 ? 0 : 1;
    family[static_cast<size_t>(i)] = rng.uniform() < 0.5 ? 0 : 1;
    labels[static_cast<size_t>(i)] =
        community[static_cast<size_t>(i)] ^ family[static_cast<size_t>(i)];
  }

  BenchmarkData data;
  for (int i = 0; i < n_docs; ++i) {
    // The mention surface form ("item") is deliberately ambiguous: the
    // family bit is only resolvable through the knowledge base.
    std::string text;
    for (int m = 0; m < 3; ++m)
      text += "marker" + std::to_string(community[static_cast<size_t>(i)]) + " ";
    for (int m = 0; m < 2; ++m)
      text += "filler" + std::to_string(rng.index(static_cast<size_t>(filler_vocab))) + " ";
    for (int m = 0; m < mentions_per_doc; ++m) text += "item ";
    data.documents += doc_id(i) + "\t" + text + "\t" +
                      std::to_string(labels[static_cast<size_t>(i)]) + "\n";
  }

  // topology: strong community structure, sparse across
  std::set<std::pair<int, int>> edges;
  auto add_edge = [&](int a, int b) {
    if (a != b) edges.insert({std::min(a, b), std::max(a, b)});
  };
  for (int i = 0; i < n_docs; ++i) {
    int added = 0, guard = 0;
    while (added < 2 && guard++ < 2000) {
      int j = static_cast<int>(rng.index(static_cast<size_t>(n_docs)));
      if (j == i) continue;
      bool same = community[static_cast<size_t>(i)] == community[static_cast<size_t>(j)];
      if (rng.uniform() < (same ? 0.9 : 0.1)) {
        add_edge(i, j);
        ++added;
      }
    }
  }
  for (const auto& [a, b] : edges) data.edges += doc_id(a) + "\t" + doc_id(b) + "\n";

  for (int i = 0; i < n_docs; ++i) {
    int fam = family[static_cast<size_t>(i)];
    for (int k = 0; k < mentions_per_doc; ++k) {
      std::string ent = entity_id(i, k);
      data.annotations += doc_id(i) + "\t" + ent + "\t0.9\n";

      if (rng.uniform() < 0.5) {
        std::string anchor = fam == 0 ? "anchor_alpha" : "anchor_beta";
        data.triplets += ent + "\tfamily_of\t" + anchor + "\n";
        data.triplets += ent + "\tmember_of\tpool_" + std::to_string(fam) + "\n";
      } else {
        // a small co-occurring vocabulary keeps same-family topic mixtures aligned
        std::string text;
        for (int w = 0; w < 16; ++w)
          text += "fam" + std::to_string(fam) + "word" + std::to_string(rng.index(3)) + " ";
        data.descriptions += ent + "\t" + text + "\n";
      }
    }
  }

  std::vector<std::string> ids;
  for (int i = 0; i < n_docs; ++i) ids.push_back(doc_id(i));
  std::sort(ids.begin(), ids.end());
  for (const auto& id : ids) {
    int i = std::stoi(id.substr(1));
    data.labels_by_sorted_doc.push_back(labels[static_cast<size_t>(i)]);
  }
  return data;
}

}  // namespace fixtures
