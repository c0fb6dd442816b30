#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include "corpus.hpp"
#include "hetero_graph.hpp"
#include "knowledge.hpp"
#include "linker.hpp"
#include "model.hpp"
#include "train.hpp"

namespace teko {

namespace fs = std::filesystem;

namespace {

const std::map<std::string, std::string>& default_config() {
  static const std::map<std::string, std::string> defaults = {
      // inputs
      {"documents", ""},
      {"edges", ""},
      {"lexicon", ""},
      {"annotations", ""},
      {"triplets", ""},
      {"descriptions", ""},
      {"splits", ""},
      {"out_dir", "out"},
      // thresholds
      {"delta_tag", "0.1"},
      {"delta_sim", "0.5"},
      // knowledge embedding
      {"embed_dim", "64"},
      {"topic_count", "64"},
      {"margin", "1"},
      {"transe_lr", "0.01"},
      {"transe_epochs", "200"},
      {"transe_neg_per_pos", "1"},
      {"head_filter", "true"},
      {"lda_alpha", "0"},
      {"lda_beta", "0.01"},
      {"lda_iters", "500"},
      // model
      {"model", "teko"},
      {"hidden", "64"},
      {"layers", "2"},
      {"learning_rate", "0.005"},
      {"weight_decay", "5e-4"},
      {"dropout", "0.5"},
      {"leaky_slope", "0.2"},
      {"fusion_mode", "gated"},
      {"attention_scaling", "feature"},
      {"similarity_source", "fused"},
      // training
      {"objective", "supervised"},
      {"epochs", "300"},
      {"patience", "30"},
      {"neg_ratio", "1"},
      {"seed", "42"},
      {"seeds", ""},
      {"train_ratio", "0.1"},
      {"val_ratio", "0.1"},
      {"test_ratio", "0.8"},
      // featurization
      {"min_df", "1"},
      {"max_vocab", "50000"},
      {"min_token_len", "2"},
      {"lowercase", "true"},
      // evaluation / execution
      {"kmeans_restarts", "10"},
      {"cache", "true"},
      {"sweep_param", "delta_sim"},
      {"sweep_grid", ""},
      {"sweep_parallel", "false"},
  };
  return defaults;
}

}  // namespace

PipelineConfig::PipelineConfig() : kv_(default_config()) {}

PipelineConfig PipelineConfig::from_string(const std::string& content, const std::string& origin) {
  PipelineConfig cfg;
  std::istringstream in(content);
  std::string line;
  int ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      fail(Err::ConfigInvalid, origin + " line " + std::to_string(ln) + ": expected key = value");
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
  return from_string(read_file(path), path);
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  if (default_config().count(key) == 0) fail(Err::ConfigInvalid, "unknown key '" + key + "'");
  kv_[key] = value;
}

const std::string& PipelineConfig::get(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) fail(Err::ConfigInvalid, "unknown key '" + key + "'");
  return it->second;
}

double PipelineConfig::num(const std::string& key) const {
  double v = 0;
  if (!parse_double(get(key), &v)) fail(Err::ConfigInvalid, key + " is not a number");
  return v;
}

long long PipelineConfig::integer(const std::string& key) const {
  long long v = 0;
  if (!parse_long(get(key), &v)) fail(Err::ConfigInvalid, key + " is not an integer");
  return v;
}

bool PipelineConfig::flag(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(Err::ConfigInvalid, key + " is not a boolean");
}

std::vector<double> PipelineConfig::grid(const std::string& key) const {
  std::vector<double> out;
  for (auto& part : split(get(key), ',')) {
    std::string t = trim(part);
    if (t.empty()) continue;
    double v = 0;
    if (!parse_double(t, &v)) fail(Err::ConfigInvalid, key + ": bad number '" + t + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<uint64_t> PipelineConfig::seed_list() const {
  std::vector<uint64_t> out;
  for (auto& part : split(get("seeds"), ',')) {
    std::string t = trim(part);
    if (t.empty()) continue;
    long long v = 0;
    if (!parse_long(t, &v) || v < 0) fail(Err::ConfigInvalid, "seeds: bad entry '" + t + "'");
    out.push_back(static_cast<uint64_t>(v));
  }
  if (out.empty()) out.push_back(static_cast<uint64_t>(integer("seed")));
  return out;
}

uint64_t PipelineConfig::config_hash() const {
  uint64_t h = 1469598103934665603ULL;
  for (const auto& [k, v] : kv_) {
    if (k == "out_dir" || k == "cache" || k == "sweep_parallel") continue;
    h = fnv1a(k, h);
    h = fnv1a("=", h);
    h = fnv1a(v, h);
    h = fnv1a("\n", h);
  }
  return h;
}

void PipelineConfig::validate() const {
  double dtag = num("delta_tag");
  if (dtag < 0.0 || dtag > 1.0) fail(Err::ConfigInvalid, "delta_tag must be in [0,1]");
  double dsim = num("delta_sim");
  if (dsim < -1.0 || dsim > 1.0) fail(Err::ConfigInvalid, "delta_sim must be in [-1,1]");
  if (num("learning_rate") <= 0.0) fail(Err::ConfigInvalid, "learning_rate must be positive");
  if (num("weight_decay") < 0.0) fail(Err::ConfigInvalid, "weight_decay must be nonnegative");
  double dr = num("dropout");
  if (dr < 0.0 || dr >= 1.0) fail(Err::ConfigInvalid, "dropout must be in [0,1)");
  if (integer("layers") < 1 || integer("layers") > 8) fail(Err::ConfigInvalid, "layers must be in [1,8]");
  if (integer("hidden") < 1) fail(Err::ConfigInvalid, "hidden must be positive");
  if (integer("embed_dim") < 2) fail(Err::ConfigInvalid, "embed_dim must be >= 2");
  if (integer("topic_count") < 2) fail(Err::ConfigInvalid, "topic_count must be >= 2");
  FusionMode mode = parse_fusion_mode(get("fusion_mode"));
  if (mode == FusionMode::Gated && integer("embed_dim") != integer("topic_count"))
    fail(Err::ConfigInvalid, "embed_dim must equal topic_count for gated fusion");
  const std::string& obj = get("objective");
  if (obj != "supervised" && obj != "unsupervised") fail(Err::ConfigInvalid, "objective");
  const std::string& sc = get("attention_scaling");
  if (sc != "feature" && sc != "logit") fail(Err::ConfigInvalid, "attention_scaling");
  const std::string& ss = get("similarity_source");
  if (ss != "fused" && ss != "triplet") fail(Err::ConfigInvalid, "similarity_source");
  const std::string& mdl = get("model");
  if (mdl != "teko" && mdl != "gcn") fail(Err::ConfigInvalid, "model");
  const std::string& sp = get("sweep_param");
  if (sp != "delta_tag" && sp != "delta_sim") fail(Err::ConfigInvalid, "sweep_param");
}

Pipeline::Pipeline(PipelineConfig config, std::string upstream_dir)
    : cfg_(std::move(config)), upstream_dir_(std::move(upstream_dir)) {
  cfg_.validate();
  out_dir_ = cfg_.get("out_dir");
  if (out_dir_.empty()) fail(Err::ConfigInvalid, "out_dir is empty");
}

std::string Pipeline::artifact_path(const std::string& name) const {
  return (fs::path(out_dir_) / name).string();
}

std::string Pipeline::resolve_input(const std::string& artifact,
                                    const std::string& producer) const {
  std::string own = artifact_path(artifact);
  if (file_exists(own)) return own;
  if (!upstream_dir_.empty()) {
    std::string up = (fs::path(upstream_dir_) / artifact).string();
    if (file_exists(up)) return up;
  }
  fail(Err::MissingUpstreamArtifact, producer);
}

uint64_t Pipeline::stage_hash(const std::vector<std::string>& files,
                              const std::vector<std::string>& keys) const {
  uint64_t h = 1469598103934665603ULL;
  for (const auto& k : keys) {
    h = fnv1a(k, h);
    h = fnv1a("=", h);
    h = fnv1a(cfg_.get(k), h);
    h = fnv1a(";", h);
  }
  for (const auto& f : files) {
    h = fnv1a(f.empty() ? "-" : "+", h);
    if (!f.empty()) h = fnv1a_file(f, h);
  }
  return h;
}

bool Pipeline::stage_fresh(const std::string& stage, uint64_t hash) const {
  if (!cfg_.flag("cache")) return false;
  std::string path = artifact_path(stage + ".stamp");
  if (!file_exists(path)) return false;
  std::string content = read_file(path);
  return content.find("hash " + to_hex(hash) + "\n") != std::string::npos;
}

void Pipeline::write_stamp(const std::string& stage, uint64_t hash) const {
  std::ostringstream ss;
  ss << "stage " << stage << "\n";
  ss << "hash " << to_hex(hash) << "\n";
  ss << "config_hash " << to_hex(cfg_.config_hash()) << "\n";
  ss << "seed " << cfg_.integer("seed") << "\n";
  write_file_atomic(artifact_path(stage + ".stamp"), ss.str());
}

std::string Pipeline::stamp_line() const {
  return "config_hash=" + to_hex(cfg_.config_hash()) + " seed=" + cfg_.get("seed");
}

// ---------------------------------------------------------------------------
// stage: link

Pipeline::StageResult Pipeline::cmd_link() {
  const std::string docs_path = cfg_.get("documents");
  if (docs_path.empty() || !file_exists(docs_path)) fail(Err::ConfigInvalid, "documents path");
  const std::string lexicon = cfg_.get("lexicon");
  const std::string precomputed = cfg_.get("annotations");
  if (lexicon.empty() && precomputed.empty())
    fail(Err::ConfigInvalid, "link needs a lexicon or an annotations file");

  StageResult res;
  uint64_t h = stage_hash({docs_path, lexicon, precomputed}, {"delta_tag"});
  std::string out = artifact_path("annotations.tsv");
  res.artifacts.push_back(out);
  if (stage_fresh("link", h) && file_exists(out)) {
    res.cached = true;
    return res;
  }

  DocumentSet docs = load_documents(docs_path);
  std::vector<Mention> mentions;
  if (!precomputed.empty()) {
    mentions = load_annotations(precomputed, docs);
  } else {
    mentions = annotate(docs, load_lexicon(lexicon));
  }
  AnnotationSet ann = filter_mentions(mentions, cfg_.num("delta_tag"));
  std::string body = "# " + stamp_line() + " delta_tag=" + cfg_.get("delta_tag") + "\n" +
                     format_annotations(ann.mentions);
  write_file_atomic(out, body);
  write_stamp("link", h);
  return res;
}

// ---------------------------------------------------------------------------
// stage: train-kb

Pipeline::StageResult Pipeline::cmd_train_kb() {
  std::string ann_path = resolve_input("annotations.tsv", "link");
  const std::string triplets = cfg_.get("triplets");
  const std::string descriptions = cfg_.get("descriptions");
  if (triplets.empty() || !file_exists(triplets)) fail(Err::ConfigInvalid, "triplets path");
  if (!descriptions.empty() && !file_exists(descriptions))
    fail(Err::ConfigInvalid, "descriptions path");

  StageResult res;
  uint64_t h = stage_hash({ann_path, triplets, descriptions},
                          {"embed_dim", "topic_count", "margin", "transe_lr", "transe_epochs",
                           "transe_neg_per_pos", "head_filter", "lda_alpha", "lda_beta",
                           "lda_iters", "seed"});
  std::vector<std::string> outs = {artifact_path("transe_entities.tsv"),
                                   artifact_path("entity_es.tsv"), artifact_path("entity_ed.tsv"),
                                   artifact_path("entity_fused.tsv")};
  res.artifacts = outs;
  bool all_exist = true;
  for (auto& o : outs) all_exist = all_exist && file_exists(o);
  if (stage_fresh("train-kb", h) && all_exist) {
    res.cached = true;
    return res;
  }

  DocumentSet docs = load_documents(cfg_.get("documents"));
  auto mentions = parse_annotations(read_file(ann_path), docs, ann_path);
  AnnotationSet ann = filter_mentions(mentions, cfg_.num("delta_tag"));
  std::vector<std::string> network_entities = annotated_entities(ann);
  if (network_entities.empty()) fail(Err::EmptyKnowledgeBase, "no annotated entities");

  std::vector<std::string> whitelist;
  if (cfg_.flag("head_filter")) whitelist = network_entities;
  KnowledgeBase kb = load_kb(triplets, descriptions, whitelist);

  TransEConfig tc;
  tc.dim = static_cast<int>(cfg_.integer("embed_dim"));
  tc.margin = cfg_.num("margin");
  tc.lr = cfg_.num("transe_lr");
  tc.epochs = static_cast<int>(cfg_.integer("transe_epochs"));
  tc.neg_per_pos = static_cast<int>(cfg_.integer("transe_neg_per_pos"));
  tc.seed = static_cast<uint64_t>(cfg_.integer("seed"));
  TransEState transe = train_transe(kb, tc);

  LdaConfig lc;
  lc.topic_count = static_cast<int>(cfg_.integer("topic_count"));
  lc.alpha = cfg_.num("lda_alpha");
  lc.beta = cfg_.num("lda_beta");
  lc.iters = static_cast<int>(cfg_.integer("lda_iters"));
  lc.seed = static_cast<uint64_t>(cfg_.integer("seed")) + 1;
  TopicModelState lda;
  if (!kb.descriptions.empty()) {
    lda = train_lda(kb, lc);
  } else {
    lda.topic_count = lc.topic_count;  // uniform thetas only
  }

  EntityFeatures feats = build_entity_features(network_entities, transe, lda,
                                               static_cast<uint64_t>(cfg_.integer("seed")));
  // Initial knowledge-based representation for the similarity stage:
  // balanced gate (zero logits) when the two sides share a dimension,
  // concatenation otherwise. Independent of the model's fusion_mode so
  // ablation runs share the same graph.
  GateState zero_gate;
  zero_gate.logits.assign(static_cast<size_t>(transe.dim), 0.0);
  FusionMode init_mode =
      feats.Es.cols == feats.Ed.cols ? FusionMode::Gated : FusionMode::Concat;
  Matrix fused;
  {
    std::vector<std::vector<double>> rows;
    int cols = 0;
    for (int i = 0; i < feats.Es.rows; ++i) {
      std::vector<double> es(feats.Es.row(i), feats.Es.row(i) + feats.Es.cols);
      std::vector<double> ed(feats.Ed.row(i), feats.Ed.row(i) + feats.Ed.cols);
      auto f = fuse(es, ed, zero_gate, init_mode);
      cols = static_cast<int>(f.size());
      rows.push_back(std::move(f));
    }
    fused = Matrix(feats.Es.rows, cols);
    for (int i = 0; i < fused.rows; ++i)
      for (int c = 0; c < cols; ++c) fused.at(i, c) = rows[static_cast<size_t>(i)][static_cast<size_t>(c)];
  }

  std::string stamp = "# " + stamp_line() + "\n";
  {
    std::vector<std::string> kb_ids;
    Matrix kb_rows(static_cast<int>(transe.entity_vectors.size()), transe.dim);
    int r = 0;
    for (const auto& [id, v] : transe.entity_vectors) {
      kb_ids.push_back(id);
      for (int c = 0; c < transe.dim; ++c) kb_rows.at(r, c) = v[static_cast<size_t>(c)];
      ++r;
    }
    write_file_atomic(outs[0], stamp + format_embeddings(kb_ids, kb_rows));
  }
  write_file_atomic(outs[1], stamp + format_embeddings(network_entities, feats.Es));
  write_file_atomic(outs[2], stamp + format_embeddings(network_entities, feats.Ed));
  write_file_atomic(outs[3], stamp + format_embeddings(network_entities, fused));
  write_stamp("train-kb", h);
  return res;
}

// ---------------------------------------------------------------------------
// stage: build-graph

Pipeline::StageResult Pipeline::cmd_build_graph() {
  std::string ann_path = resolve_input("annotations.tsv", "link");
  const bool use_fused = cfg_.get("similarity_source") == "fused";
  std::string emb_path =
      resolve_input(use_fused ? "entity_fused.tsv" : "entity_es.tsv", "train-kb");
  const std::string docs_path = cfg_.get("documents");
  const std::string edges_path = cfg_.get("edges");
  if (docs_path.empty() || !file_exists(docs_path)) fail(Err::ConfigInvalid, "documents path");

  StageResult res;
  uint64_t h = stage_hash({ann_path, emb_path, docs_path, edges_path},
                          {"delta_sim", "similarity_source", "min_df", "max_vocab",
                           "min_token_len", "lowercase"});
  std::string out = artifact_path("graph.txt");
  res.artifacts.push_back(out);
  if (stage_fresh("build-graph", h) && file_exists(out)) {
    res.cached = true;
    return res;
  }

  TextRichGraph g;
  g.documents = load_documents(docs_path);
  if (!edges_path.empty()) g.edges = load_edges(edges_path, g.documents, &g.self_loops_dropped);

  auto mentions = parse_annotations(read_file(ann_path), g.documents, ann_path);
  AnnotationSet ann = filter_mentions(mentions, cfg_.num("delta_tag"));

  auto embeddings = parse_embeddings(read_file(emb_path), emb_path);
  std::vector<std::string> ids = annotated_entities(ann);
  std::vector<std::pair<std::string, std::string>> ee;
  if (ids.size() >= 2) {
    Matrix rows(static_cast<int>(ids.size()), static_cast<int>(embeddings.begin()->second.size()));
    for (size_t i = 0; i < ids.size(); ++i) {
      auto it = embeddings.find(ids[i]);
      if (it == embeddings.end()) fail(Err::InconsistentIds, "no embedding for " + ids[i]);
      for (int c = 0; c < rows.cols; ++c) rows.at(static_cast<int>(i), c) = it->second[static_cast<size_t>(c)];
    }
    ee = build_entity_edges(ids, rows, cfg_.num("delta_sim"));
  }

  HeteroGraph hg = assemble(g, ann, ee);
  save_graph(out, hg, stamp_line() + " delta_sim=" + cfg_.get("delta_sim"));
  write_stamp("build-graph", h);
  return res;
}

// ---------------------------------------------------------------------------
// training workspace shared by train / eval / embed

namespace {

struct Workspace {
  DocumentSet docs;
  HeteroGraph graph;
  AttributeMatrix attrs;
  Matrix Es, Ed;
  SplitSpec splits;
  std::vector<int> labels;  // per doc row in graph order; -1 when absent
  std::vector<int> train_rows, val_rows, test_rows, labeled_rows;
  int class_count = 0;
};

Matrix rows_for(const std::vector<std::string>& ids,
                const std::map<std::string, std::vector<double>>& emb, const std::string& what) {
  if (ids.empty()) return Matrix(0, 0);
  auto first = emb.find(ids[0]);
  if (first == emb.end()) fail(Err::InconsistentIds, what + ": no vector for " + ids[0]);
  Matrix out(static_cast<int>(ids.size()), static_cast<int>(first->second.size()));
  for (size_t i = 0; i < ids.size(); ++i) {
    auto it = emb.find(ids[i]);
    if (it == emb.end()) fail(Err::InconsistentIds, what + ": no vector for " + ids[i]);
    if (static_cast<int>(it->second.size()) != out.cols) fail(Err::DimensionMismatch, what);
    for (int c = 0; c < out.cols; ++c) out.at(static_cast<int>(i), c) = it->second[static_cast<size_t>(c)];
  }
  return out;
}

}  // namespace

static Workspace load_workspace(const Pipeline& pl, const PipelineConfig& cfg,
                                const std::string& graph_path, const std::string& es_path,
                                const std::string& ed_path) {
  Workspace ws;
  ws.docs = load_documents(cfg.get("documents"));
  ws.graph = load_graph(graph_path);
  for (const auto& id : ws.graph.doc_ids)
    if (!ws.docs.contains(id)) fail(Err::InconsistentIds, "graph doc " + id + " not in documents");
  if (ws.graph.n_docs() != static_cast<int>(ws.docs.size()))
    fail(Err::InconsistentIds, "graph/documents node count mismatch");

  VocabConfig vc;
  vc.min_df = static_cast<int>(cfg.integer("min_df"));
  vc.max_vocab = static_cast<int>(cfg.integer("max_vocab"));
  vc.min_token_len = static_cast<int>(cfg.integer("min_token_len"));
  vc.lowercase = cfg.flag("lowercase");
  // Attribute rows follow graph doc order (sorted ids).
  DocumentSet ordered;
  for (const auto& id : ws.graph.doc_ids) {
    ordered.index[id] = static_cast<int>(ordered.docs.size());
    ordered.docs.push_back(ws.docs.docs[static_cast<size_t>(ws.docs.position(id))]);
  }
  ws.attrs = build_attributes(ordered, vc);
  ws.docs = std::move(ordered);

  if (ws.graph.n_ents() > 0) {
    auto es = parse_embeddings(read_file(es_path), es_path);
    auto ed = parse_embeddings(read_file(ed_path), ed_path);
    ws.Es = rows_for(ws.graph.ent_ids, es, "entity_es");
    ws.Ed = rows_for(ws.graph.ent_ids, ed, "entity_ed");
  } else {
    ws.Es = Matrix(0, static_cast<int>(cfg.integer("embed_dim")));
    ws.Ed = Matrix(0, static_cast<int>(cfg.integer("topic_count")));
  }

  ws.class_count = infer_class_count(ws.docs);
  ws.labels.assign(static_cast<size_t>(ws.graph.n_docs()), -1);
  for (int i = 0; i < ws.graph.n_docs(); ++i) {
    const auto& d = ws.docs.docs[static_cast<size_t>(i)];
    if (d.label) {
      ws.labels[static_cast<size_t>(i)] = *d.label;
      ws.labeled_rows.push_back(i);
    }
  }

  const std::string splits_path = cfg.get("splits");
  if (!splits_path.empty()) {
    ws.splits = load_splits(splits_path, ws.docs);
  } else {
    ws.splits = make_splits(ws.docs, cfg.num("train_ratio"), cfg.num("val_ratio"),
                            cfg.num("test_ratio"), static_cast<uint64_t>(cfg.integer("seed")));
    save_splits(pl.artifact_path("splits.txt"), ws.splits);
  }
  for (const auto& id : ws.splits.train_ids) ws.train_rows.push_back(ws.graph.doc_index.at(id));
  for (const auto& id : ws.splits.val_ids) ws.val_rows.push_back(ws.graph.doc_index.at(id));
  for (const auto& id : ws.splits.test_ids) ws.test_rows.push_back(ws.graph.doc_index.at(id));
  std::sort(ws.train_rows.begin(), ws.train_rows.end());
  std::sort(ws.val_rows.begin(), ws.val_rows.end());
  std::sort(ws.test_rows.begin(), ws.test_rows.end());
  return ws;
}

namespace {

struct TrainedRun {
  std::unique_ptr<Model> model;
  TrainResult result;
  Matrix final_out;   // eval-mode forward after restoring best params
  Matrix embeddings;  // representation rows (docs first)
};

std::unique_ptr<Model> make_model(const Workspace& ws, const PipelineConfig& cfg, uint64_t seed) {
  const bool supervised = cfg.get("objective") == "supervised";
  const int hidden = static_cast<int>(cfg.integer("hidden"));
  const int layers = static_cast<int>(cfg.integer("layers"));
  int out_dim = supervised ? ws.class_count : hidden;
  if (supervised && ws.class_count < 2) fail(Err::ConfigInvalid, "need >= 2 classes");
  std::vector<int> dims;
  for (int l = 0; l < layers - 1; ++l) dims.push_back(hidden);
  dims.push_back(out_dim);

  if (cfg.get("model") == "gcn") {
    GcnModelConfig gc;
    gc.layer_dims = dims;
    gc.leaky_slope = cfg.num("leaky_slope");
    gc.dropout = cfg.num("dropout");
    gc.head = supervised ? HeadKind::Softmax : HeadKind::Activation;
    gc.init_seed = seed;
    Matrix a_hat = normalized_adjacency(ws.graph, NodeType::Doc, NodeType::Doc);
    return std::make_unique<GcnModel>(std::move(a_hat), ws.attrs.X, gc);
  }

  TekoModelConfig mc;
  mc.layer_dims = dims;
  mc.leaky_slope = cfg.num("leaky_slope");
  mc.dropout = cfg.num("dropout");
  mc.head = supervised ? HeadKind::Softmax : HeadKind::Activation;
  mc.scaling = cfg.get("attention_scaling") == "feature" ? AttentionScaling::Feature
                                                         : AttentionScaling::Logit;
  mc.fusion = parse_fusion_mode(cfg.get("fusion_mode"));
  mc.init_seed = seed;
  return std::make_unique<TekoModel>(ws.graph, ws.attrs.X, ws.Es, ws.Ed, mc);
}

Matrix doc_rows(const Matrix& H, int n_docs) {
  Matrix out(n_docs, H.cols);
  for (int i = 0; i < n_docs; ++i)
    for (int c = 0; c < H.cols; ++c) out.at(i, c) = H.at(i, c);
  return out;
}

Matrix representation_of(Model& model, const PipelineConfig& cfg) {
  // For softmax models the penultimate layer is the representation; the
  // final activation output otherwise.
  if (auto* teko = dynamic_cast<TekoModel*>(&model)) {
    int layers = teko->layer_count();
    if (cfg.get("objective") == "supervised" && layers >= 2) return teko->trace(layers - 2).out;
    return teko->trace(layers - 1).out;
  }
  return model.forward(false);
}

TrainedRun run_training(const Workspace& ws, const PipelineConfig& cfg, uint64_t seed) {
  TrainedRun run;
  run.model = make_model(ws, cfg, seed);

  const bool supervised = cfg.get("objective") == "supervised";
  SupervisedTask task;
  PairSets pairs;
  if (supervised) {
    // Labels indexed by global row; entity rows carry -1 and are never masked.
    task.labels = ws.labels;
    task.labels.resize(static_cast<size_t>(ws.graph.n_nodes()), -1);
    task.train_mask = ws.train_rows;
    task.val_mask = ws.val_rows;
    if (task.train_mask.empty()) fail(Err::EmptyMask, "empty train split");
  } else {
    pairs = sample_pairs(ws.graph, static_cast<int>(cfg.integer("neg_ratio")), seed);
  }

  OptimizerConfig opt;
  opt.learning_rate = cfg.num("learning_rate");
  opt.weight_decay = cfg.num("weight_decay");
  opt.epochs = static_cast<int>(cfg.integer("epochs"));
  opt.patience = static_cast<int>(cfg.integer("patience"));
  opt.seed = seed;

  run.result = train(*run.model, supervised ? Objective::Supervised : Objective::Unsupervised,
                     supervised ? &task : nullptr, supervised ? nullptr : &pairs, opt);
  run.final_out = run.model->forward(false);
  run.embeddings = representation_of(*run.model, cfg);
  return run;
}

}  // namespace

// ---------------------------------------------------------------------------
// stage: train

Pipeline::StageResult Pipeline::cmd_train() {
  std::string graph_path = resolve_input("graph.txt", "build-graph");
  std::string es_path = resolve_input("entity_es.tsv", "train-kb");
  std::string ed_path = resolve_input("entity_ed.tsv", "train-kb");

  StageResult res;
  uint64_t h = stage_hash(
      {graph_path, es_path, ed_path, cfg_.get("documents"), cfg_.get("splits")},
      {"model", "hidden", "layers", "learning_rate", "weight_decay", "dropout", "leaky_slope",
       "fusion_mode", "attention_scaling", "objective", "epochs", "patience", "neg_ratio", "seed",
       "train_ratio", "val_ratio", "test_ratio", "min_df", "max_vocab", "min_token_len",
       "lowercase"});
  std::string ckpt = artifact_path("checkpoint.txt");
  std::string hist = artifact_path("history.csv");
  res.artifacts = {ckpt, hist};
  if (stage_fresh("train", h) && file_exists(ckpt) && file_exists(hist)) {
    res.cached = true;
    return res;
  }

  Workspace ws = load_workspace(*this, cfg_, graph_path, es_path, ed_path);
  uint64_t seed = static_cast<uint64_t>(cfg_.integer("seed"));
  TrainedRun run = run_training(ws, cfg_, seed);

  auto meta = run.model->meta();
  meta["seed"] = std::to_string(seed);
  meta["config_hash"] = to_hex(cfg_.config_hash());
  write_file_atomic(ckpt, format_checkpoint(meta, run.model->params()));
  write_file_atomic(hist, "# " + stamp_line() + "\n" + format_history(run.result.history));
  write_stamp("train", h);
  return res;
}

// ---------------------------------------------------------------------------
// stage: eval

Pipeline::StageResult Pipeline::cmd_eval() {
  std::string graph_path = resolve_input("graph.txt", "build-graph");
  std::string es_path = resolve_input("entity_es.tsv", "train-kb");
  std::string ed_path = resolve_input("entity_ed.tsv", "train-kb");

  StageResult res;
  uint64_t h = stage_hash(
      {graph_path, es_path, ed_path, cfg_.get("documents"), cfg_.get("splits")},
      {"model", "hidden", "layers", "learning_rate", "weight_decay", "dropout", "leaky_slope",
       "fusion_mode", "attention_scaling", "objective", "epochs", "patience", "neg_ratio", "seed",
       "seeds", "kmeans_restarts", "train_ratio", "val_ratio", "test_ratio", "min_df", "max_vocab",
       "min_token_len", "lowercase"});
  std::string metrics_path = artifact_path("metrics.csv");
  res.artifacts = {metrics_path};
  if (stage_fresh("eval", h) && file_exists(metrics_path) &&
      file_exists(artifact_path("metrics.json"))) {
    res.cached = true;
    res.extra_json = read_file(artifact_path("metrics.json"));
    return res;
  }

  Workspace ws = load_workspace(*this, cfg_, graph_path, es_path, ed_path);
  const bool supervised = cfg_.get("objective") == "supervised";
  std::vector<uint64_t> seeds = cfg_.seed_list();

  std::vector<Matrix> outputs;
  for (uint64_t s : seeds) {
    TrainedRun run = run_training(ws, cfg_, s);
    outputs.push_back(supervised ? doc_rows(run.final_out, ws.graph.n_docs())
                                 : doc_rows(run.embeddings, ws.graph.n_docs()));
  }

  const std::vector<int>& rows = supervised ? ws.test_rows : ws.labeled_rows;
  if (rows.empty()) fail(Err::EmptyMask, supervised ? "empty test split" : "no labeled documents");
  MetricsReport report =
      evaluate(outputs, seeds, ws.labels, rows, ws.class_count,
               supervised ? EvalMode::Classify : EvalMode::Cluster,
               static_cast<int>(cfg_.integer("kmeans_restarts")));

  write_file_atomic(metrics_path, "# " + stamp_line() + "\n" + format_report_csv(report));
  res.extra_json = format_report_json(report);
  write_file_atomic(artifact_path("metrics.json"), res.extra_json);
  write_stamp("eval", h);
  return res;
}

// ---------------------------------------------------------------------------
// stage: embed

Pipeline::StageResult Pipeline::cmd_embed() {
  std::string graph_path = resolve_input("graph.txt", "build-graph");
  std::string es_path = resolve_input("entity_es.tsv", "train-kb");
  std::string ed_path = resolve_input("entity_ed.tsv", "train-kb");
  std::string ckpt_path = resolve_input("checkpoint.txt", "train");

  StageResult res;
  uint64_t h = stage_hash({graph_path, es_path, ed_path, ckpt_path, cfg_.get("documents")},
                          {"model", "hidden", "layers", "fusion_mode", "attention_scaling",
                           "objective", "leaky_slope", "dropout", "min_df", "max_vocab",
                           "min_token_len", "lowercase"});
  std::string out = artifact_path("embeddings.tsv");
  res.artifacts = {out};
  if (stage_fresh("embed", h) && file_exists(out)) {
    res.cached = true;
    return res;
  }

  Workspace ws = load_workspace(*this, cfg_, graph_path, es_path, ed_path);
  auto model = make_model(ws, cfg_, static_cast<uint64_t>(cfg_.integer("seed")));
  load_checkpoint_into(ckpt_path, model.get());
  model->forward(false);
  Matrix rep = representation_of(*model, cfg_);
  Matrix docs = doc_rows(rep, ws.graph.n_docs());
  write_file_atomic(out, "# " + stamp_line() + "\n" + format_embeddings(ws.graph.doc_ids, docs));
  write_stamp("embed", h);
  return res;
}

// ---------------------------------------------------------------------------
// stage: sweep

Pipeline::StageResult Pipeline::cmd_sweep() {
  const std::string param = cfg_.get("sweep_param");
  std::vector<double> grid = cfg_.grid("sweep_grid");
  if (grid.empty()) {
    grid = param == "delta_tag" ? std::vector<double>{0.1, 0.2, 0.3, 0.4}
                                : std::vector<double>{0.5, 0.6, 0.7, 0.8, 0.9};
  }

  // Stages upstream of the swept parameter are shared across points.
  if (param == "delta_sim") {
    cmd_link();
    cmd_train_kb();
  }

  struct Row {
    double value = 0.0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
  };
  std::vector<Row> rows(grid.size());
  std::vector<std::string> errors(grid.size());

  // grid values are user-entered short decimals
  auto short_num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return std::string(buf);
  };

  auto run_point = [&](size_t idx) {
    try {
      PipelineConfig pc = cfg_;
      pc.set(param, short_num(grid[idx]));
      std::string point_dir =
          (fs::path(out_dir_) / "sweep" / (param + "_" + short_num(grid[idx]))).string();
      pc.set("out_dir", point_dir);
      Pipeline point(pc, out_dir_);
      if (param == "delta_tag") {
        // the annotation set and hence the KB change with the threshold
        point.run("link");
        point.run("train-kb");
      }
      point.run("build-graph");
      point.run("eval");
      auto metrics = read_file(point.artifact_path("metrics.csv"));
      std::istringstream in(metrics);
      std::string line;
      double mean_a = 0.0, mean_b = 0.0;
      while (std::getline(in, line)) {
        if (line.rfind("mean,", 0) == 0) {
          auto fields = split(line, ',');
          parse_double(fields[1], &mean_a);
          parse_double(fields[2], &mean_b);
        }
      }
      rows[idx] = Row{grid[idx], mean_a, mean_b};
    } catch (const std::exception& e) {
      errors[idx] = e.what();
    }
  };

  if (cfg_.flag("sweep_parallel")) {
    std::vector<std::thread> threads;
    for (size_t i = 0; i < grid.size(); ++i) threads.emplace_back(run_point, i);
    for (auto& t : threads) t.join();
  } else {
    for (size_t i = 0; i < grid.size(); ++i) run_point(i);
  }
  for (size_t i = 0; i < grid.size(); ++i)
    if (!errors[i].empty()) fail(Err::Internal, "sweep point " + short_num(grid[i]) + ": " + errors[i]);

  std::ostringstream csv;
  csv << "# " << stamp_line() << "\n";
  csv << param << ",accuracy,macro_f1\n";
  for (const auto& r : rows)
    csv << short_num(r.value) << ',' << fmt_double(r.accuracy) << ',' << fmt_double(r.macro_f1)
        << '\n';
  std::string out = artifact_path("sweep.csv");
  write_file_atomic(out, csv.str());

  StageResult res;
  res.artifacts = {out};
  std::ostringstream js;
  js << "{\"param\":\"" << param << "\",\"rows\":[";
  for (size_t i = 0; i < rows.size(); ++i) {
    if (i) js << ',';
    js << "{\"value\":" << short_num(rows[i].value)
       << ",\"accuracy\":" << fmt_double(rows[i].accuracy)
       << ",\"macro_f1\":" << fmt_double(rows[i].macro_f1) << "}";
  }
  js << "]}";
  res.extra_json = js.str();
  return res;
}

std::string Pipeline::run(const std::string& command) {
  fs::create_directories(out_dir_);
  StageResult res;
  if (command == "link") res = cmd_link();
  else if (command == "train-kb") res = cmd_train_kb();
  else if (command == "build-graph") res = cmd_build_graph();
  else if (command == "train") res = cmd_train();
  else if (command == "eval") res = cmd_eval();
  else if (command == "embed") res = cmd_embed();
  else if (command == "sweep") res = cmd_sweep();
  else fail(Err::ConfigInvalid, "unknown command '" + command + "'");

  std::ostringstream js;
  js << "{\"command\":\"" << command << "\",\"status\":\"ok\",\"cached\":"
     << (res.cached ? "true" : "false") << ",\"config_hash\":\"" << to_hex(cfg_.config_hash())
     << "\",\"artifacts\":[";
  for (size_t i = 0; i < res.artifacts.size(); ++i) {
    if (i) js << ',';
    js << '"' << res.artifacts[i] << '"';
  }
  js << "]";
  if (!res.extra_json.empty()) js << ",\"result\":" << res.extra_json;
  js << "}";
  return js.str();
}

}  // namespace teko
