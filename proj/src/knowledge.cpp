#include "knowledge.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace teko {

static std::vector<std::string> lines_of(const std::string& content) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : content) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

KnowledgeBase parse_kb(const std::string& triplets, const std::string& descriptions,
                       const std::vector<std::string>& head_whitelist, const std::string& origin) {
  KnowledgeBase kb;
  std::set<std::string> whitelist(head_whitelist.begin(), head_whitelist.end());
  std::set<std::string> ents, rels;
  std::set<std::string> seen_triplets;

  auto tlines = lines_of(triplets);
  for (size_t ln = 0; ln < tlines.size(); ++ln) {
    const std::string& line = tlines[ln];
    if (line.empty() || line[0] == '#') continue;
    auto fields = split(line, '\t');
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty())
      fail(Err::MalformedRecord, origin + " triplets line " + std::to_string(ln + 1));
    if (!whitelist.empty() && whitelist.count(fields[0]) == 0) continue;
    std::string key = fields[0] + "\t" + fields[1] + "\t" + fields[2];
    if (!seen_triplets.insert(key).second) continue;
    ents.insert(fields[0]);
    ents.insert(fields[2]);
    rels.insert(fields[1]);
    kb.triplets.push_back(Triplet{fields[0], fields[1], fields[2]});
  }

  auto dlines = lines_of(descriptions);
  for (size_t ln = 0; ln < dlines.size(); ++ln) {
    const std::string& line = dlines[ln];
    if (line.empty() || line[0] == '#') continue;
    auto pos = line.find('\t');
    if (pos == std::string::npos || pos == 0)
      fail(Err::MalformedRecord, origin + " descriptions line " + std::to_string(ln + 1));
    std::string id = line.substr(0, pos);
    kb.descriptions[id] = line.substr(pos + 1);
    ents.insert(id);
  }

  kb.entities.assign(ents.begin(), ents.end());
  kb.relations.assign(rels.begin(), rels.end());
  return kb;
}

KnowledgeBase load_kb(const std::string& triplets_path, const std::string& descriptions_path,
                      const std::vector<std::string>& head_whitelist) {
  std::string desc = descriptions_path.empty() ? std::string() : read_file(descriptions_path);
  return parse_kb(read_file(triplets_path), desc, head_whitelist, triplets_path);
}

double transe_score(const std::vector<double>& h, const std::vector<double>& r,
                    const std::vector<double>& t) {
  if (h.size() != r.size() || h.size() != t.size())
    fail(Err::DimensionMismatch, "transe_score vector sizes differ");
  double s = 0.0;
  for (size_t k = 0; k < h.size(); ++k) {
    double d = h[k] + r[k] - t[k];
    s += d * d;
  }
  return -s;
}

static void normalize_unit(std::vector<double>& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n < 1e-12) {
    v.assign(v.size(), 0.0);
    v[0] = 1.0;
    return;
  }
  for (double& x : v) x /= n;
}

TransEState train_transe(const KnowledgeBase& kb, const TransEConfig& config) {
  if (kb.triplets.empty()) fail(Err::EmptyKnowledgeBase, "no triplets");
  if (config.dim < 2) fail(Err::DimensionMismatch, "TransE dim must be >= 2");

  const int u = config.dim;
  Rng rng(config.seed);
  const double bound = 6.0 / std::sqrt(static_cast<double>(u));

  // Only entities that occur in some triplet are embedded; entities known
  // solely from descriptions stay outside the translation space.
  std::set<std::string> in_triplets;
  for (const auto& t : kb.triplets) {
    in_triplets.insert(t.head);
    in_triplets.insert(t.tail);
  }
  std::vector<std::string> graph_entities(in_triplets.begin(), in_triplets.end());

  TransEState st;
  st.dim = u;
  for (const auto& e : graph_entities) {
    std::vector<double> v(u);
    for (double& x : v) x = rng.uniform(-bound, bound);
    normalize_unit(v);
    st.entity_vectors[e] = std::move(v);
  }
  for (const auto& r : kb.relations) {
    std::vector<double> v(u);
    for (double& x : v) x = rng.uniform(-bound, bound);
    st.relation_vectors[r] = std::move(v);
  }

  std::vector<size_t> order(kb.triplets.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  // filtered corruption: never use a corrupted triplet that is a true fact
  std::set<std::string> known;
  for (const auto& t : kb.triplets) known.insert(t.head + "\t" + t.relation + "\t" + t.tail);

  std::vector<double> diff_pos(u), diff_neg(u);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    size_t loss_count = 0;
    for (size_t idx : order) {
      const Triplet& tri = kb.triplets[idx];
      for (int neg = 0; neg < config.neg_per_pos; ++neg) {
        // Corrupt head or tail uniformly at random.
        bool corrupt_head = rng.bernoulli(0.5);
        std::string neg_h, neg_t;
        bool found = false;
        for (int attempt = 0; attempt < 50 && !found; ++attempt) {
          const std::string& replacement = graph_entities[rng.index(graph_entities.size())];
          neg_h = corrupt_head ? replacement : tri.head;
          neg_t = corrupt_head ? tri.tail : replacement;
          found = neg_h != neg_t &&
                  known.count(neg_h + "\t" + tri.relation + "\t" + neg_t) == 0;
        }
        if (!found) continue;

        auto& h = st.entity_vectors[tri.head];
        auto& r = st.relation_vectors[tri.relation];
        auto& t = st.entity_vectors[tri.tail];
        auto& hn = st.entity_vectors[neg_h];
        auto& tn = st.entity_vectors[neg_t];

        double pos_sq = 0.0, neg_sq = 0.0;
        for (int k = 0; k < u; ++k) {
          diff_pos[k] = h[k] + r[k] - t[k];
          pos_sq += diff_pos[k] * diff_pos[k];
          diff_neg[k] = hn[k] + r[k] - tn[k];
          neg_sq += diff_neg[k] * diff_neg[k];
        }
        double loss = config.margin + pos_sq - neg_sq;
        loss_count++;
        if (loss <= 0.0) continue;
        loss_sum += loss;

        // d loss / d h = 2 diff_pos, d/d t = -2 diff_pos,
        // d/d hn = -2 diff_neg, d/d tn = 2 diff_neg, d/d r = 2 (diff_pos - diff_neg)
        const double step = config.lr * 2.0;
        for (int k = 0; k < u; ++k) {
          double gp = step * diff_pos[k];
          double gn = step * diff_neg[k];
          h[k] -= gp;
          t[k] += gp;
          hn[k] += gn;
          tn[k] -= gn;
          r[k] -= gp - gn;
        }
        normalize_unit(h);
        normalize_unit(t);
        normalize_unit(st.entity_vectors[neg_h]);
        normalize_unit(st.entity_vectors[neg_t]);
      }
    }
    st.loss_history.push_back(loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0);
  }
  return st;
}

TopicModelState train_lda(const KnowledgeBase& kb, const LdaConfig& config) {
  if (config.topic_count < 2) fail(Err::DimensionMismatch, "LDA needs at least 2 topics");
  const int K = config.topic_count;
  const double alpha = config.alpha > 0 ? config.alpha : 50.0 / K;
  const double beta = config.beta;

  // Tokenize descriptions; entities with empty descriptions still get a
  // (smoothing-only) theta.
  std::vector<std::string> ids;
  std::vector<std::vector<int>> docs;
  std::map<std::string, int> word_id;
  std::vector<std::string> vocab;
  bool any_tokens = false;
  for (const auto& [id, text] : kb.descriptions) {
    ids.push_back(id);
    std::vector<int> ws;
    for (auto& t : tokenize(text, true, 2)) {
      auto it = word_id.find(t.text);
      int w;
      if (it == word_id.end()) {
        w = static_cast<int>(vocab.size());
        word_id[t.text] = w;
        vocab.push_back(t.text);
      } else {
        w = it->second;
      }
      ws.push_back(w);
    }
    if (!ws.empty()) any_tokens = true;
    docs.push_back(std::move(ws));
  }
  if (!any_tokens) fail(Err::EmptyDescriptions, "no nonempty descriptions");

  const int V = static_cast<int>(vocab.size());
  const int D = static_cast<int>(docs.size());
  Rng rng(config.seed);

  std::vector<std::vector<int>> z(D);
  std::vector<int> n_dk(static_cast<size_t>(D) * K, 0);
  std::vector<int> n_kw(static_cast<size_t>(K) * V, 0);
  std::vector<int> n_k(K, 0);
  std::vector<int> n_d(D, 0);

  for (int d = 0; d < D; ++d) {
    z[d].resize(docs[d].size());
    for (size_t i = 0; i < docs[d].size(); ++i) {
      int k = static_cast<int>(rng.index(static_cast<size_t>(K)));
      z[d][i] = k;
      n_dk[static_cast<size_t>(d) * K + k]++;
      n_kw[static_cast<size_t>(k) * V + docs[d][i]]++;
      n_k[k]++;
      n_d[d]++;
    }
  }

  long long total_tokens = 0;
  for (int k = 0; k < K; ++k) total_tokens += n_k[k];

  std::vector<double> cdf(K);
  for (int iter = 0; iter < config.iters; ++iter) {
    for (int d = 0; d < D; ++d) {
      for (size_t i = 0; i < docs[d].size(); ++i) {
        int w = docs[d][i];
        int old = z[d][i];
        n_dk[static_cast<size_t>(d) * K + old]--;
        n_kw[static_cast<size_t>(old) * V + w]--;
        n_k[old]--;

        double total = 0.0;
        for (int k = 0; k < K; ++k) {
          double p = (n_dk[static_cast<size_t>(d) * K + k] + alpha) *
                     (n_kw[static_cast<size_t>(k) * V + w] + beta) /
                     (n_k[k] + V * beta);
          total += p;
          cdf[k] = total;
        }
        double u = rng.uniform() * total;
        int pick = 0;
        while (pick < K - 1 && cdf[pick] < u) ++pick;

        z[d][i] = pick;
        n_dk[static_cast<size_t>(d) * K + pick]++;
        n_kw[static_cast<size_t>(pick) * V + w]++;
        n_k[pick]++;
      }
    }
    // a sweep only moves tokens between topics
    long long check = 0;
    for (int k = 0; k < K; ++k) check += n_k[k];
    if (check != total_tokens) fail(Err::Internal, "lda sweep changed the token count");
  }

  TopicModelState st;
  st.topic_count = K;
  st.vocab = vocab;
  st.alpha = alpha;
  st.beta = beta;
  st.gibbs_iters = config.iters;
  st.topic_word = Matrix(K, V);
  for (int k = 0; k < K; ++k) {
    double denom = n_k[k] + V * beta;
    for (int w = 0; w < V; ++w)
      st.topic_word.at(k, w) = (n_kw[static_cast<size_t>(k) * V + w] + beta) / denom;
  }
  for (int d = 0; d < D; ++d) {
    std::vector<double> theta(K);
    double denom = n_d[d] + K * alpha;
    for (int k = 0; k < K; ++k)
      theta[k] = (n_dk[static_cast<size_t>(d) * K + k] + alpha) / denom;
    st.doc_topic[ids[d]] = std::move(theta);
  }
  return st;
}

std::vector<double> textual_representation(const TopicModelState& state,
                                           const std::string& entity) {
  auto it = state.doc_topic.find(entity);
  if (it != state.doc_topic.end()) return it->second;
  return std::vector<double>(state.topic_count, 1.0 / state.topic_count);
}

FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "gated") return FusionMode::Gated;
  if (s == "concat") return FusionMode::Concat;
  if (s == "triplet_only") return FusionMode::TripletOnly;
  if (s == "textual_only") return FusionMode::TextualOnly;
  fail(Err::ConfigInvalid, "fusion_mode: " + s);
}

const char* fusion_mode_name(FusionMode m) {
  switch (m) {
    case FusionMode::Gated: return "gated";
    case FusionMode::Concat: return "concat";
    case FusionMode::TripletOnly: return "triplet_only";
    case FusionMode::TextualOnly: return "textual_only";
  }
  return "?";
}

std::vector<double> GateState::gate() const {
  std::vector<double> g(logits.size());
  for (size_t k = 0; k < logits.size(); ++k) g[k] = 1.0 / (1.0 + std::exp(-logits[k]));
  return g;
}

std::vector<double> fuse(const std::vector<double>& e_s, const std::vector<double>& e_d,
                         const GateState& gate, FusionMode mode) {
  switch (mode) {
    case FusionMode::TripletOnly:
      return e_s;
    case FusionMode::TextualOnly:
      return e_d;
    case FusionMode::Concat: {
      std::vector<double> out;
      out.reserve(e_s.size() + e_d.size());
      out.insert(out.end(), e_s.begin(), e_s.end());
      out.insert(out.end(), e_d.begin(), e_d.end());
      return out;
    }
    case FusionMode::Gated: {
      if (e_s.size() != e_d.size() || e_s.size() != gate.logits.size())
        fail(Err::DimensionMismatch, "gated fusion requires equal dimensions");
      std::vector<double> out(e_s.size());
      for (size_t k = 0; k < e_s.size(); ++k) {
        double g = 1.0 / (1.0 + std::exp(-gate.logits[k]));
        out[k] = g * e_s[k] + (1.0 - g) * e_d[k];
      }
      return out;
    }
  }
  fail(Err::Internal, "unreachable fusion mode");
}

void fuse_backward_gate(const std::vector<double>& e_s, const std::vector<double>& e_d,
                        const GateState& gate, const std::vector<double>& d_fused,
                        std::vector<double>* d_logits) {
  // d e / d g~ = (e_s - e_d) * g * (1 - g), elementwise
  for (size_t k = 0; k < gate.logits.size(); ++k) {
    double g = 1.0 / (1.0 + std::exp(-gate.logits[k]));
    (*d_logits)[k] += d_fused[k] * (e_s[k] - e_d[k]) * g * (1.0 - g);
  }
}

EntityFeatures build_entity_features(const std::vector<std::string>& entity_ids,
                                     const TransEState& transe, const TopicModelState& lda,
                                     uint64_t seed) {
  const int u = transe.dim;
  const int kt = lda.topic_count;
  EntityFeatures f;
  f.Es = Matrix(static_cast<int>(entity_ids.size()), u);
  f.Ed = Matrix(static_cast<int>(entity_ids.size()), kt);
  for (size_t i = 0; i < entity_ids.size(); ++i) {
    const std::string& id = entity_ids[i];
    auto it = transe.entity_vectors.find(id);
    if (it != transe.entity_vectors.end()) {
      for (int k = 0; k < u; ++k) f.Es.at(static_cast<int>(i), k) = it->second[k];
    } else {
      // Seeded per entity id so coverage gaps are stable across runs and
      // independent of iteration order. Scaled well below the unit norm of
      // trained vectors so a missing channel stays quiet in the fusion.
      Rng rng(fnv1a(id, seed ^ 0x9e3779b97f4a7c15ULL));
      std::vector<double> v(u);
      for (double& x : v) x = rng.normal();
      normalize_unit(v);
      for (int k = 0; k < u; ++k) f.Es.at(static_cast<int>(i), k) = 0.1 * v[k];
    }
    auto theta = textual_representation(lda, id);
    for (int k = 0; k < kt; ++k) f.Ed.at(static_cast<int>(i), k) = theta[k];
  }
  return f;
}

std::string format_embeddings(const std::vector<std::string>& ids, const Matrix& rows) {
  if (static_cast<int>(ids.size()) != rows.rows)
    fail(Err::DimensionMismatch, "embedding export: id/row count mismatch");
  std::ostringstream ss;
  for (size_t i = 0; i < ids.size(); ++i) {
    ss << ids[i];
    for (int k = 0; k < rows.cols; ++k) ss << '\t' << fmt_double(rows.at(static_cast<int>(i), k));
    ss << '\n';
  }
  return ss.str();
}

std::map<std::string, std::vector<double>> parse_embeddings(const std::string& content,
                                                            const std::string& origin) {
  std::map<std::string, std::vector<double>> out;
  auto lines = lines_of(content);
  size_t dim = 0;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string& line = lines[ln];
    if (line.empty() || line[0] == '#') continue;
    auto fields = split(line, '\t');
    if (fields.size() < 2) fail(Err::MalformedRecord, origin + " line " + std::to_string(ln + 1));
    std::vector<double> v(fields.size() - 1);
    for (size_t k = 1; k < fields.size(); ++k)
      if (!parse_double(fields[k], &v[k - 1]))
        fail(Err::MalformedRecord, origin + " line " + std::to_string(ln + 1));
    if (dim == 0) dim = v.size();
    if (v.size() != dim) fail(Err::DimensionMismatch, origin + " line " + std::to_string(ln + 1));
    out[fields[0]] = std::move(v);
  }
  return out;
}

}  // namespace teko
