#include "hetero_graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace teko {

double entity_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) fail(Err::DimensionMismatch, "cosine on unequal dimensions");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na <= 0.0 || nb <= 0.0) fail(Err::ZeroVector, "cosine of a zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::pair<std::string, std::string>> build_entity_edges(
    const std::vector<std::string>& entity_ids, const Matrix& embeddings, double delta_sim) {
  if (delta_sim < -1.0 || delta_sim > 1.0) fail(Err::ThresholdOutOfRange, fmt_double(delta_sim));
  if (entity_ids.size() < 2) fail(Err::TooFewEntities, std::to_string(entity_ids.size()));
  if (static_cast<int>(entity_ids.size()) != embeddings.rows)
    fail(Err::DimensionMismatch, "entity id/embedding row mismatch");

  std::vector<size_t> order(entity_ids.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return entity_ids[a] < entity_ids[b]; });

  std::vector<std::pair<std::string, std::string>> edges;
  const int d = embeddings.cols;
  for (size_t a = 0; a < order.size(); ++a) {
    for (size_t b = a + 1; b < order.size(); ++b) {
      const double* va = embeddings.row(static_cast<int>(order[a]));
      const double* vb = embeddings.row(static_cast<int>(order[b]));
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (int k = 0; k < d; ++k) {
        dot += va[k] * vb[k];
        na += va[k] * va[k];
        nb += vb[k] * vb[k];
      }
      if (na <= 0.0 || nb <= 0.0) fail(Err::ZeroVector, "zero embedding for entity");
      double s = dot / (std::sqrt(na) * std::sqrt(nb));
      if (s >= delta_sim) edges.emplace_back(entity_ids[order[a]], entity_ids[order[b]]);
    }
  }
  return edges;
}

HeteroGraph assemble(const TextRichGraph& g, const AnnotationSet& ann,
                     const std::vector<std::pair<std::string, std::string>>& entity_edges) {
  HeteroGraph h;
  for (const auto& d : g.documents.docs) h.doc_ids.push_back(d.id);
  std::sort(h.doc_ids.begin(), h.doc_ids.end());
  for (size_t i = 0; i < h.doc_ids.size(); ++i) h.doc_index[h.doc_ids[i]] = static_cast<int>(i);

  std::set<std::string> ents;
  for (const auto& m : ann.mentions) {
    if (!g.documents.contains(m.doc_id)) fail(Err::InconsistentIds, "annotation doc " + m.doc_id);
    ents.insert(m.entity_id);
  }
  for (const auto& [a, b] : entity_edges) {
    ents.insert(a);
    ents.insert(b);
  }
  h.ent_ids.assign(ents.begin(), ents.end());
  for (size_t i = 0; i < h.ent_ids.size(); ++i) h.ent_index[h.ent_ids[i]] = static_cast<int>(i);

  std::set<std::pair<int, int>> dd;
  for (const auto& [a, b] : g.edges) {
    int ia = h.doc_index.at(a), ib = h.doc_index.at(b);
    dd.insert({std::min(ia, ib), std::max(ia, ib)});
  }
  h.edges_dd.assign(dd.begin(), dd.end());

  std::set<std::pair<int, int>> de;
  for (const auto& m : ann.mentions)
    de.insert({h.doc_index.at(m.doc_id), h.ent_index.at(m.entity_id)});
  h.edges_de.assign(de.begin(), de.end());

  std::set<std::pair<int, int>> ee;
  for (const auto& [a, b] : entity_edges) {
    auto ia = h.ent_index.find(a);
    auto ib = h.ent_index.find(b);
    if (ia == h.ent_index.end() || ib == h.ent_index.end())
      fail(Err::InconsistentIds, "entity edge endpoint " + a + "/" + b);
    if (ia->second == ib->second) continue;  // self loops are never stored
    ee.insert({std::min(ia->second, ib->second), std::max(ia->second, ib->second)});
  }
  h.edges_ee.assign(ee.begin(), ee.end());
  return h;
}

static Matrix same_type_normalized(int n, const std::vector<std::pair<int, int>>& edges) {
  Matrix a_tilde(n, n);
  for (int i = 0; i < n; ++i) a_tilde.at(i, i) = 1.0;
  for (const auto& [i, j] : edges) {
    a_tilde.at(i, j) = 1.0;
    a_tilde.at(j, i) = 1.0;
  }
  std::vector<double> dinv(n);
  for (int i = 0; i < n; ++i) {
    double deg = 0.0;
    for (int j = 0; j < n; ++j) deg += a_tilde.at(i, j);
    dinv[i] = 1.0 / std::sqrt(deg);
  }
  Matrix out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (a_tilde.at(i, j) != 0.0) out.at(i, j) = dinv[i] * a_tilde.at(i, j) * dinv[j];
  return out;
}

Matrix normalized_adjacency(const HeteroGraph& h, NodeType src, NodeType dst) {
  const int nd = h.n_docs();
  const int ne = h.n_ents();
  if (src == NodeType::Doc && dst == NodeType::Doc) return same_type_normalized(nd, h.edges_dd);
  if (src == NodeType::Ent && dst == NodeType::Ent) return same_type_normalized(ne, h.edges_ee);

  // Bipartite block; degrees counted inside the doc-entity subgraph only.
  std::vector<double> deg_doc(nd, 0.0), deg_ent(ne, 0.0);
  for (const auto& [d, e] : h.edges_de) {
    deg_doc[d] += 1.0;
    deg_ent[e] += 1.0;
  }
  if (src == NodeType::Doc && dst == NodeType::Ent) {
    Matrix out(nd, ne);
    for (const auto& [d, e] : h.edges_de)
      out.at(d, e) = 1.0 / std::sqrt((deg_doc[d] + 1.0) * (deg_ent[e] + 1.0));
    return out;
  }
  if (src == NodeType::Ent && dst == NodeType::Doc) {
    Matrix out(ne, nd);
    for (const auto& [d, e] : h.edges_de)
      out.at(e, d) = 1.0 / std::sqrt((deg_doc[d] + 1.0) * (deg_ent[e] + 1.0));
    return out;
  }
  fail(Err::UnknownTypePair, "unsupported type pair");
}

std::string format_graph(const HeteroGraph& h, const std::string& stamp) {
  std::ostringstream ss;
  ss << "# teko-graph v1\n";
  if (!stamp.empty()) ss << "# " << stamp << "\n";
  ss << "[doc_nodes]\n";
  for (const auto& id : h.doc_ids) ss << id << "\n";
  ss << "[ent_nodes]\n";
  for (const auto& id : h.ent_ids) ss << id << "\n";
  ss << "[edges_dd]\n";
  for (const auto& [i, j] : h.edges_dd) ss << h.doc_ids[i] << '\t' << h.doc_ids[j] << "\n";
  ss << "[edges_de]\n";
  for (const auto& [d, e] : h.edges_de) ss << h.doc_ids[d] << '\t' << h.ent_ids[e] << "\n";
  ss << "[edges_ee]\n";
  for (const auto& [i, j] : h.edges_ee) ss << h.ent_ids[i] << '\t' << h.ent_ids[j] << "\n";
  return ss.str();
}

HeteroGraph parse_graph(const std::string& content, const std::string& origin) {
  HeteroGraph h;
  std::vector<std::string> lines;
  {
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
  }

  enum Section { None, DocNodes, EntNodes, Dd, De, Ee } section = None;
  std::vector<std::pair<std::string, std::string>> dd, de, ee;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string& line = lines[ln];
    if (line.empty() || line[0] == '#') continue;
    if (line == "[doc_nodes]") { section = DocNodes; continue; }
    if (line == "[ent_nodes]") { section = EntNodes; continue; }
    if (line == "[edges_dd]") { section = Dd; continue; }
    if (line == "[edges_de]") { section = De; continue; }
    if (line == "[edges_ee]") { section = Ee; continue; }
    if (section == None) fail(Err::MalformedRecord, origin + " line " + std::to_string(ln + 1));
    if (section == DocNodes) {
      h.doc_ids.push_back(line);
      continue;
    }
    if (section == EntNodes) {
      h.ent_ids.push_back(line);
      continue;
    }
    auto fields = split(line, '\t');
    if (fields.size() != 2) fail(Err::MalformedRecord, origin + " line " + std::to_string(ln + 1));
    if (section == Dd) dd.emplace_back(fields[0], fields[1]);
    if (section == De) de.emplace_back(fields[0], fields[1]);
    if (section == Ee) ee.emplace_back(fields[0], fields[1]);
  }

  std::sort(h.doc_ids.begin(), h.doc_ids.end());
  std::sort(h.ent_ids.begin(), h.ent_ids.end());
  for (size_t i = 0; i < h.doc_ids.size(); ++i) h.doc_index[h.doc_ids[i]] = static_cast<int>(i);
  for (size_t i = 0; i < h.ent_ids.size(); ++i) h.ent_index[h.ent_ids[i]] = static_cast<int>(i);

  auto doc_at = [&](const std::string& id) {
    auto it = h.doc_index.find(id);
    if (it == h.doc_index.end()) fail(Err::UnknownId, id);
    return it->second;
  };
  auto ent_at = [&](const std::string& id) {
    auto it = h.ent_index.find(id);
    if (it == h.ent_index.end()) fail(Err::UnknownId, id);
    return it->second;
  };

  std::set<std::pair<int, int>> s_dd, s_de, s_ee;
  for (auto& [a, b] : dd) {
    int i = doc_at(a), j = doc_at(b);
    if (i != j) s_dd.insert({std::min(i, j), std::max(i, j)});
  }
  for (auto& [a, b] : de) s_de.insert({doc_at(a), ent_at(b)});
  for (auto& [a, b] : ee) {
    int i = ent_at(a), j = ent_at(b);
    if (i != j) s_ee.insert({std::min(i, j), std::max(i, j)});
  }
  h.edges_dd.assign(s_dd.begin(), s_dd.end());
  h.edges_de.assign(s_de.begin(), s_de.end());
  h.edges_ee.assign(s_ee.begin(), s_ee.end());
  return h;
}

void save_graph(const std::string& path, const HeteroGraph& h, const std::string& stamp) {
  write_file_atomic(path, format_graph(h, stamp));
}

HeteroGraph load_graph(const std::string& path) {
  return parse_graph(read_file(path), path);
}

}  // namespace teko
