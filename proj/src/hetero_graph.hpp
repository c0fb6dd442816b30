#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "linker.hpp"

namespace teko {

enum class NodeType { Doc = 0, Ent = 1 };

// Two node types, three edge sets. Node lists are sorted by id with
// documents ordered before entities, so every derived matrix is
// reproducible. The entity subgraph is fixed once assembled.
struct HeteroGraph {
  std::vector<std::string> doc_ids;
  std::vector<std::string> ent_ids;
  std::map<std::string, int> doc_index;
  std::map<std::string, int> ent_index;
  std::vector<std::pair<int, int>> edges_dd;  // doc-doc, i < j
  std::vector<std::pair<int, int>> edges_de;  // (doc, entity)
  std::vector<std::pair<int, int>> edges_ee;  // entity-entity, i < j

  int n_docs() const { return static_cast<int>(doc_ids.size()); }
  int n_ents() const { return static_cast<int>(ent_ids.size()); }
  int n_nodes() const { return n_docs() + n_ents(); }
  NodeType type_of(int global) const { return global < n_docs() ? NodeType::Doc : NodeType::Ent; }
};

// Cosine similarity; both vectors must be nonzero.
double entity_similarity(const std::vector<double>& a, const std::vector<double>& b);

// Undirected entity edges (i < j in id order) where cosine >= delta_sim.
std::vector<std::pair<std::string, std::string>> build_entity_edges(
    const std::vector<std::string>& entity_ids, const Matrix& embeddings, double delta_sim);

HeteroGraph assemble(const TextRichGraph& g, const AnnotationSet& ann,
                     const std::vector<std::pair<std::string, std::string>>& entity_edges);

// Normalized adjacency block for a (src type, dst type) pair.
// Same-type blocks: D~^{-1/2} (A + I) D~^{-1/2} on that type's subgraph.
// Cross-type blocks: entry 1/sqrt((deg+1)(deg+1)) with degrees taken inside
// the bipartite doc-entity subgraph; no self-loops.
Matrix normalized_adjacency(const HeteroGraph& h, NodeType src, NodeType dst);

// Graph artifact: sections [doc_nodes] [ent_nodes] [edges_dd] [edges_de]
// [edges_ee], '#' comments ignored. Round-trips exactly.
std::string format_graph(const HeteroGraph& h, const std::string& stamp = "");
HeteroGraph parse_graph(const std::string& content, const std::string& origin);
void save_graph(const std::string& path, const HeteroGraph& h, const std::string& stamp = "");
HeteroGraph load_graph(const std::string& path);

}  // namespace teko
