#pragma once

#include <array>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hetero_graph.hpp"
#include "knowledge.hpp"

namespace teko {

struct Tensor {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<double> w;
  std::vector<double> g;

  Tensor() = default;
  Tensor(std::string n, int r, int c)
      : name(std::move(n)), rows(r), cols(c),
        w(static_cast<size_t>(r) * c, 0.0), g(static_cast<size_t>(r) * c, 0.0) {}
  double& at(int i, int j) { return w[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return w[static_cast<size_t>(i) * cols + j]; }
  size_t size() const { return w.size(); }
  void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }
};

enum class HeadKind { Softmax, Activation };
enum class AttentionScaling { Feature, Logit };

// Neighbor structure derived from the normalized adjacency blocks.
// Entry order per node: DOC neighbors sorted by index, then ENT neighbors.
// Same-type self-loops are included (A + I), so no node is isolated.
struct GraphView {
  int n_doc = 0;
  int n_ent = 0;
  struct Entry {
    int j = 0;        // global node index
    double w = 0.0;   // normalized adjacency weight for (type(i) -> type(j))
    int type = 0;     // 0 = DOC, 1 = ENT
  };
  std::vector<int> offset;  // size n+1
  std::vector<Entry> entries;

  int n_nodes() const { return n_doc + n_ent; }
  int type_of(int i) const { return i < n_doc ? 0 : 1; }
};

GraphView build_graph_view(const HeteroGraph& h);

// Per-layer forward cache; also the window tests use to inspect attention.
struct LayerTrace {
  Matrix in_doc, in_ent;             // post-dropout inputs (per type at layer 0)
  std::vector<double> mask_doc, mask_ent;  // dropout multipliers; empty in eval mode
  Matrix proj;                       // h' = input * W_type  (n x d_out)
  std::vector<double> hphi;          // n * 2 * d_out, type embeddings
  std::vector<char> present;         // n * 2
  std::vector<double> z_pre, alpha;  // n * 2 (pre-activation logits, type weights)
  std::vector<double> cdot, beta;    // CSR-aligned with GraphView::entries
  Matrix pre;                        // aggregated pre-activation (n x d_out)
  Matrix out;                        // post-head (n x d_out)
};

class Model {
 public:
  virtual ~Model() = default;
  virtual std::vector<Tensor>& params() = 0;
  virtual const std::vector<Tensor>& params() const = 0;
  // Runs the full forward pass; dropout is applied only when training and
  // draws from rng. Returns the final representation matrix.
  virtual const Matrix& forward(bool training, Rng* rng = nullptr) = 0;
  // Backpropagates d(loss)/d(output), accumulating into Tensor::g.
  virtual void backward(const Matrix& d_out) = 0;
  virtual void zero_grad() = 0;
  virtual std::map<std::string, std::string> meta() const = 0;
};

struct TekoModelConfig {
  std::vector<int> layer_dims;  // e.g. {hidden, C}; length = layer count
  double leaky_slope = 0.2;
  double dropout = 0.5;
  HeadKind head = HeadKind::Softmax;
  AttentionScaling scaling = AttentionScaling::Feature;
  FusionMode fusion = FusionMode::Gated;
  uint64_t init_seed = 0;
};

// Two-level heterogeneous graph attention over {DOC, ENT} nodes.
// DOC inputs are the TF-IDF rows; ENT inputs are fused inside the model so
// the fusion gate receives gradient.
class TekoModel : public Model {
 public:
  TekoModel(const HeteroGraph& graph, Matrix doc_features, Matrix ent_triplet,
            Matrix ent_textual, const TekoModelConfig& config);

  std::vector<Tensor>& params() override { return params_; }
  const std::vector<Tensor>& params() const override { return params_; }
  const Matrix& forward(bool training, Rng* rng = nullptr) override;
  void backward(const Matrix& d_out) override;
  void zero_grad() override;
  std::map<std::string, std::string> meta() const override;

  int layer_count() const { return static_cast<int>(cfg_.layer_dims.size()); }
  const LayerTrace& trace(int layer) const { return traces_[layer]; }
  const GraphView& view() const { return view_; }
  const Matrix& fused_input() const { return ent_fused_; }
  const TekoModelConfig& config() const { return cfg_; }

  Tensor& weight(int type, int layer) { return params_[w_index_[layer][type]]; }
  Tensor& eta(int type, int layer) { return params_[eta_index_[layer][type]]; }
  Tensor& gamma(int layer) { return params_[gamma_index_[layer]]; }
  Tensor* gate() { return gate_index_ < 0 ? nullptr : &params_[gate_index_]; }

 private:
  void fuse_inputs();
  void forward_layer(int layer, const Matrix& doc_in, const Matrix& ent_in, bool training,
                     Rng* rng);

  GraphView view_;
  Matrix doc_features_;
  Matrix ent_es_, ent_ed_;
  Matrix ent_fused_;  // recomputed every forward (depends on the gate)
  TekoModelConfig cfg_;
  std::vector<Tensor> params_;
  std::vector<std::array<int, 2>> w_index_, eta_index_;
  std::vector<int> gamma_index_;
  int gate_index_ = -1;
  std::vector<LayerTrace> traces_;
};

struct GcnModelConfig {
  std::vector<int> layer_dims;
  double leaky_slope = 0.2;
  double dropout = 0.5;
  HeadKind head = HeadKind::Softmax;
  uint64_t init_seed = 0;
};

// Vanilla GCN baseline on the document-only graph: H^(k) = sigma(A_hat H W).
class GcnModel : public Model {
 public:
  GcnModel(Matrix a_hat, Matrix features, const GcnModelConfig& config);

  std::vector<Tensor>& params() override { return params_; }
  const std::vector<Tensor>& params() const override { return params_; }
  const Matrix& forward(bool training, Rng* rng = nullptr) override;
  void backward(const Matrix& d_out) override;
  void zero_grad() override;
  std::map<std::string, std::string> meta() const override;

 private:
  Matrix a_hat_;
  Matrix features_;
  GcnModelConfig cfg_;
  std::vector<Tensor> params_;
  struct Cache {
    Matrix input;  // post-dropout
    Matrix pre;
    Matrix out;
    std::vector<double> drop_mask;
  };
  std::vector<Cache> caches_;
};

// Spec-level building blocks, implemented independently of the fused model
// loop; unit tests check the model traces against these.
Matrix project(const Matrix& features, const Tensor& W);
std::vector<double> type_embedding(const Matrix& a_hat_block, const Matrix& proj_dst,
                                   int node_row);
// alpha over present types; keys are the type indices present.
std::map<int, double> type_attention(const std::vector<double>& h_i,
                                     const std::map<int, std::vector<double>>& type_embeds,
                                     const std::vector<Tensor>& eta_by_type, double slope);
struct NeighborRef {
  int j;
  const double* h_j;
  int type;
};
std::vector<double> node_attention(const std::vector<double>& h_i,
                                   const std::vector<NeighborRef>& neighbors,
                                   const std::map<int, double>& alpha, const Tensor& gamma,
                                   double slope, AttentionScaling scaling, int dim);

// Text checkpoint: header metadata then named tensors, full precision.
std::string format_checkpoint(const std::map<std::string, std::string>& meta,
                              const std::vector<Tensor>& tensors);
void parse_checkpoint(const std::string& content, std::map<std::string, std::string>* meta,
                      std::vector<Tensor>* tensors);
void save_checkpoint(const std::string& path, const Model& model, uint64_t seed);
void load_checkpoint_into(const std::string& path, Model* model);

}  // namespace teko
