#pragma once

#include <map>
#include <string>
#include <vector>

#include "common.hpp"

namespace teko {

struct Triplet {
  std::string head;
  std::string relation;
  std::string tail;
};

struct KnowledgeBase {
  std::vector<std::string> entities;   // sorted
  std::vector<std::string> relations;  // sorted
  std::vector<Triplet> triplets;       // deduplicated, input order
  std::map<std::string, std::string> descriptions;
};

// triplets file: head <TAB> relation <TAB> tail. When head_whitelist is
// nonempty, only triplets whose head is in the whitelist are kept (network
// entities appear as subjects, not objects). Exact duplicates are dropped.
KnowledgeBase load_kb(const std::string& triplets_path, const std::string& descriptions_path,
                      const std::vector<std::string>& head_whitelist = {});
KnowledgeBase parse_kb(const std::string& triplets, const std::string& descriptions,
                       const std::vector<std::string>& head_whitelist, const std::string& origin);

struct TransEConfig {
  int dim = 64;
  double margin = 1.0;
  double lr = 0.01;
  int epochs = 200;
  int neg_per_pos = 1;
  uint64_t seed = 0;
};

struct TransEState {
  int dim = 0;
  std::map<std::string, std::vector<double>> entity_vectors;    // unit L2 norm
  std::map<std::string, std::vector<double>> relation_vectors;
  std::vector<double> loss_history;  // mean margin-ranking loss per epoch
};

// f(h, r, t) = -||h + r - t||_2^2
double transe_score(const std::vector<double>& h, const std::vector<double>& r,
                    const std::vector<double>& t);

// Margin-based ranking loss with one corrupted triplet per positive
// (head or tail replaced uniformly at random); SGD, entity vectors
// renormalized to unit length after every update.
TransEState train_transe(const KnowledgeBase& kb, const TransEConfig& config);

struct LdaConfig {
  int topic_count = 64;
  double alpha = -1.0;  // <=0 means 50 / topic_count
  double beta = 0.01;
  int iters = 500;
  uint64_t seed = 0;
};

struct TopicModelState {
  int topic_count = 0;
  std::vector<std::string> vocab;
  Matrix topic_word;                                   // K x V, rows sum to 1
  std::map<std::string, std::vector<double>> doc_topic;  // entity -> theta
  double alpha = 0.0;
  double beta = 0.0;
  int gibbs_iters = 0;
};

// Collapsed Gibbs sampling over entity descriptions.
TopicModelState train_lda(const KnowledgeBase& kb, const LdaConfig& config);

// theta for the entity; unknown entities get the uniform vector.
std::vector<double> textual_representation(const TopicModelState& state, const std::string& entity);

enum class FusionMode { Gated, Concat, TripletOnly, TextualOnly };

FusionMode parse_fusion_mode(const std::string& s);
const char* fusion_mode_name(FusionMode m);

struct GateState {
  std::vector<double> logits;  // u-dimensional, shared across entities

  std::vector<double> gate() const;  // sigmoid(logits), elementwise in (0,1)
};

// e = g (.) e_s + (1-g) (.) e_d for gated; [e_s ; e_d] for concat;
// the respective input for the ablation modes.
std::vector<double> fuse(const std::vector<double>& e_s, const std::vector<double>& e_d,
                         const GateState& gate, FusionMode mode);

// Accumulates d(loss)/d(gate logits) given d(loss)/d(fused) for one entity.
void fuse_backward_gate(const std::vector<double>& e_s, const std::vector<double>& e_d,
                        const GateState& gate, const std::vector<double>& d_fused,
                        std::vector<double>* d_logits);

// Per-entity input matrices for the model, rows aligned with entity_ids.
// Entities missing from the TransE state get a seeded random unit vector;
// entities without a description get the uniform topic vector.
struct EntityFeatures {
  Matrix Es;  // n_e x u
  Matrix Ed;  // n_e x K_t
};
EntityFeatures build_entity_features(const std::vector<std::string>& entity_ids,
                                     const TransEState& transe, const TopicModelState& lda,
                                     uint64_t seed);

// embedding TSV: entity_id followed by the vector, full precision.
std::string format_embeddings(const std::vector<std::string>& ids, const Matrix& rows);
std::map<std::string, std::vector<double>> parse_embeddings(const std::string& content,
                                                            const std::string& origin);

}  // namespace teko
