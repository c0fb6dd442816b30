#include "model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace teko {

namespace {

inline double lrelu(double x, double slope) { return x > 0.0 ? x : slope * x; }
inline double lrelu_grad(double x, double slope) { return x > 0.0 ? 1.0 : slope; }

void softmax_inplace(double* v, int n) {
  double mx = v[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, v[i]);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    v[i] = std::exp(v[i] - mx);
    sum += v[i];
  }
  for (int i = 0; i < n; ++i) v[i] /= sum;
}

void init_uniform(Tensor& t, Rng& rng, int fan_in, int fan_out) {
  double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& x : t.w) x = rng.uniform(-s, s);
}

Matrix apply_dropout(const Matrix& in, double rate, bool training, Rng* rng,
                     std::vector<double>* mask) {
  mask->clear();
  if (!training || rate <= 0.0) return in;
  if (!rng) fail(Err::Internal, "training forward requires an RNG for dropout");
  Matrix out = in;
  const double scale = 1.0 / (1.0 - rate);
  mask->resize(out.a.size());
  for (size_t k = 0; k < out.a.size(); ++k) {
    double m = rng->uniform() < rate ? 0.0 : scale;
    (*mask)[k] = m;
    out.a[k] *= m;
  }
  return out;
}

}  // namespace

GraphView build_graph_view(const HeteroGraph& h) {
  GraphView v;
  v.n_doc = h.n_docs();
  v.n_ent = h.n_ents();
  const int n = v.n_nodes();

  Matrix dd = normalized_adjacency(h, NodeType::Doc, NodeType::Doc);
  Matrix ee = normalized_adjacency(h, NodeType::Ent, NodeType::Ent);
  Matrix de = normalized_adjacency(h, NodeType::Doc, NodeType::Ent);
  Matrix ed = normalized_adjacency(h, NodeType::Ent, NodeType::Doc);

  v.offset.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) {
    v.offset[i] = static_cast<int>(v.entries.size());
    if (i < v.n_doc) {
      for (int j = 0; j < v.n_doc; ++j)
        if (dd.at(i, j) != 0.0) v.entries.push_back({j, dd.at(i, j), 0});
      for (int j = 0; j < v.n_ent; ++j)
        if (de.at(i, j) != 0.0) v.entries.push_back({v.n_doc + j, de.at(i, j), 1});
    } else {
      int e = i - v.n_doc;
      for (int j = 0; j < v.n_doc; ++j)
        if (ed.at(e, j) != 0.0) v.entries.push_back({j, ed.at(e, j), 0});
      for (int j = 0; j < v.n_ent; ++j)
        if (ee.at(e, j) != 0.0) v.entries.push_back({v.n_doc + j, ee.at(e, j), 1});
    }
  }
  v.offset[n] = static_cast<int>(v.entries.size());
  return v;
}

TekoModel::TekoModel(const HeteroGraph& graph, Matrix doc_features, Matrix ent_triplet,
                     Matrix ent_textual, const TekoModelConfig& config)
    : view_(build_graph_view(graph)),
      doc_features_(std::move(doc_features)),
      ent_es_(std::move(ent_triplet)),
      ent_ed_(std::move(ent_textual)),
      cfg_(config) {
  if (cfg_.layer_dims.empty()) fail(Err::ConfigInvalid, "layer_dims empty");
  if (doc_features_.rows != view_.n_doc) fail(Err::DimensionMismatch, "doc feature rows");
  if (ent_es_.rows != view_.n_ent || ent_ed_.rows != view_.n_ent)
    fail(Err::DimensionMismatch, "entity feature rows");
  if (cfg_.fusion == FusionMode::Gated && ent_es_.cols != ent_ed_.cols)
    fail(Err::DimensionMismatch, "gated fusion requires dim(e_s) == dim(e_d)");

  int ent_in = 0;
  switch (cfg_.fusion) {
    case FusionMode::Gated: ent_in = ent_es_.cols; break;
    case FusionMode::Concat: ent_in = ent_es_.cols + ent_ed_.cols; break;
    case FusionMode::TripletOnly: ent_in = ent_es_.cols; break;
    case FusionMode::TextualOnly: ent_in = ent_ed_.cols; break;
  }

  Rng rng(cfg_.init_seed);
  const int layers = static_cast<int>(cfg_.layer_dims.size());
  w_index_.resize(layers);
  eta_index_.resize(layers);
  gamma_index_.resize(layers);
  int din_doc = doc_features_.cols;
  int din_ent = ent_in;
  for (int l = 0; l < layers; ++l) {
    int dout = cfg_.layer_dims[l];
    auto push = [&](Tensor t) {
      params_.push_back(std::move(t));
      return static_cast<int>(params_.size() - 1);
    };
    Tensor wd("W_DOC_" + std::to_string(l), din_doc, dout);
    init_uniform(wd, rng, din_doc, dout);
    w_index_[l][0] = push(std::move(wd));
    Tensor we("W_ENT_" + std::to_string(l), din_ent, dout);
    init_uniform(we, rng, din_ent, dout);
    w_index_[l][1] = push(std::move(we));
    Tensor ed("ETA_DOC_" + std::to_string(l), 1, 2 * dout);
    init_uniform(ed, rng, 2 * dout, 1);
    eta_index_[l][0] = push(std::move(ed));
    Tensor ee("ETA_ENT_" + std::to_string(l), 1, 2 * dout);
    init_uniform(ee, rng, 2 * dout, 1);
    eta_index_[l][1] = push(std::move(ee));
    Tensor gm("GAMMA_" + std::to_string(l), 1, 2 * dout);
    init_uniform(gm, rng, 2 * dout, 1);
    gamma_index_[l] = push(std::move(gm));
    din_doc = dout;
    din_ent = dout;
  }
  if (cfg_.fusion == FusionMode::Gated) {
    Tensor gate("GATE", 1, ent_es_.cols);  // zero logits: balanced gate
    params_.push_back(std::move(gate));
    gate_index_ = static_cast<int>(params_.size() - 1);
  }
  traces_.resize(layers);
  fuse_inputs();
}

void TekoModel::fuse_inputs() {
  const int ne = view_.n_ent;
  switch (cfg_.fusion) {
    case FusionMode::TripletOnly: ent_fused_ = ent_es_; return;
    case FusionMode::TextualOnly: ent_fused_ = ent_ed_; return;
    case FusionMode::Concat: {
      ent_fused_ = Matrix(ne, ent_es_.cols + ent_ed_.cols);
      for (int i = 0; i < ne; ++i) {
        for (int k = 0; k < ent_es_.cols; ++k) ent_fused_.at(i, k) = ent_es_.at(i, k);
        for (int k = 0; k < ent_ed_.cols; ++k)
          ent_fused_.at(i, ent_es_.cols + k) = ent_ed_.at(i, k);
      }
      return;
    }
    case FusionMode::Gated: {
      const Tensor& gate = params_[gate_index_];
      ent_fused_ = Matrix(ne, ent_es_.cols);
      for (int i = 0; i < ne; ++i) {
        for (int k = 0; k < ent_es_.cols; ++k) {
          double g = 1.0 / (1.0 + std::exp(-gate.w[k]));
          ent_fused_.at(i, k) = g * ent_es_.at(i, k) + (1.0 - g) * ent_ed_.at(i, k);
        }
      }
      return;
    }
  }
}

void TekoModel::forward_layer(int layer, const Matrix& doc_in, const Matrix& ent_in,
                              bool training, Rng* rng) {
  LayerTrace& t = traces_[layer];
  const int n = view_.n_nodes();
  const int nd = view_.n_doc;
  const int dout = cfg_.layer_dims[layer];
  const double slope = cfg_.leaky_slope;

  t.in_doc = apply_dropout(doc_in, cfg_.dropout, training, rng, &t.mask_doc);
  t.in_ent = apply_dropout(ent_in, cfg_.dropout, training, rng, &t.mask_ent);

  const Tensor& wd = params_[w_index_[layer][0]];
  const Tensor& we = params_[w_index_[layer][1]];
  if (t.in_doc.cols != wd.rows) fail(Err::DimensionMismatch, "doc projection at layer " + std::to_string(layer));
  if (t.in_ent.cols != we.rows) fail(Err::DimensionMismatch, "ent projection at layer " + std::to_string(layer));

  t.proj = Matrix(n, dout);
  for (int i = 0; i < nd; ++i) {
    const double* x = t.in_doc.row(i);
    double* out = t.proj.row(i);
    for (int k = 0; k < wd.rows; ++k) {
      double v = x[k];
      if (v == 0.0) continue;
      const double* wrow = wd.w.data() + static_cast<size_t>(k) * dout;
      for (int c = 0; c < dout; ++c) out[c] += v * wrow[c];
    }
  }
  for (int e = 0; e < view_.n_ent; ++e) {
    const double* x = t.in_ent.row(e);
    double* out = t.proj.row(nd + e);
    for (int k = 0; k < we.rows; ++k) {
      double v = x[k];
      if (v == 0.0) continue;
      const double* wrow = we.w.data() + static_cast<size_t>(k) * dout;
      for (int c = 0; c < dout; ++c) out[c] += v * wrow[c];
    }
  }

  t.hphi.assign(static_cast<size_t>(n) * 2 * dout, 0.0);
  t.present.assign(static_cast<size_t>(n) * 2, 0);
  t.z_pre.assign(static_cast<size_t>(n) * 2, 0.0);
  t.alpha.assign(static_cast<size_t>(n) * 2, 0.0);
  t.cdot.assign(view_.entries.size(), 0.0);
  t.beta.assign(view_.entries.size(), 0.0);
  t.pre = Matrix(n, dout);

  const Tensor& gm = params_[gamma_index_[layer]];
  std::vector<double> logits;
  for (int i = 0; i < n; ++i) {
    const int begin = view_.offset[i];
    const int end = view_.offset[i + 1];
    const double* hi = t.proj.row(i);

    // type embeddings h_phi and type-attention logits
    for (int e = begin; e < end; ++e) {
      const auto& nb = view_.entries[e];
      double* acc = t.hphi.data() + (static_cast<size_t>(i) * 2 + nb.type) * dout;
      const double* hj = t.proj.row(nb.j);
      for (int c = 0; c < dout; ++c) acc[c] += nb.w * hj[c];
      t.present[static_cast<size_t>(i) * 2 + nb.type] = 1;
    }
    double zact[2] = {0.0, 0.0};
    for (int phi = 0; phi < 2; ++phi) {
      if (!t.present[static_cast<size_t>(i) * 2 + phi]) continue;
      const Tensor& eta = params_[eta_index_[layer][phi]];
      const double* hp = t.hphi.data() + (static_cast<size_t>(i) * 2 + phi) * dout;
      double z = 0.0;
      for (int c = 0; c < dout; ++c) z += eta.w[c] * hi[c];
      for (int c = 0; c < dout; ++c) z += eta.w[dout + c] * hp[c];
      t.z_pre[static_cast<size_t>(i) * 2 + phi] = z;
      zact[phi] = lrelu(z, slope);
    }
    // softmax over the present types
    {
      double mx = -1e300;
      for (int phi = 0; phi < 2; ++phi)
        if (t.present[static_cast<size_t>(i) * 2 + phi]) mx = std::max(mx, zact[phi]);
      double sum = 0.0;
      for (int phi = 0; phi < 2; ++phi) {
        if (!t.present[static_cast<size_t>(i) * 2 + phi]) continue;
        double v = std::exp(zact[phi] - mx);
        t.alpha[static_cast<size_t>(i) * 2 + phi] = v;
        sum += v;
      }
      for (int phi = 0; phi < 2; ++phi)
        if (t.present[static_cast<size_t>(i) * 2 + phi])
          t.alpha[static_cast<size_t>(i) * 2 + phi] /= sum;
    }

    // node-level attention over all neighbors jointly
    logits.resize(static_cast<size_t>(end - begin));
    for (int e = begin; e < end; ++e) {
      const auto& nb = view_.entries[e];
      const double* hj = t.proj.row(nb.j);
      double dot = 0.0;
      for (int c = 0; c < dout; ++c) dot += gm.w[c] * hi[c];
      for (int c = 0; c < dout; ++c) dot += gm.w[dout + c] * hj[c];
      t.cdot[e] = dot;
      double a = t.alpha[static_cast<size_t>(i) * 2 + nb.type];
      double l = cfg_.scaling == AttentionScaling::Feature ? lrelu(a * dot, slope)
                                                           : a * lrelu(dot, slope);
      logits[static_cast<size_t>(e - begin)] = l;
    }
    if (end > begin) {
      softmax_inplace(logits.data(), end - begin);
      for (int e = begin; e < end; ++e) t.beta[e] = logits[static_cast<size_t>(e - begin)];
    }

    double* pre = t.pre.row(i);
    for (int e = begin; e < end; ++e) {
      const auto& nb = view_.entries[e];
      const double* hj = t.proj.row(nb.j);
      const double b = t.beta[e];
      for (int c = 0; c < dout; ++c) pre[c] += b * hj[c];
    }
  }

  const bool final_layer = layer == layer_count() - 1;
  t.out = Matrix(n, dout);
  if (final_layer && cfg_.head == HeadKind::Softmax) {
    for (int i = 0; i < n; ++i) {
      const double* pre = t.pre.row(i);
      double* out = t.out.row(i);
      for (int c = 0; c < dout; ++c) out[c] = pre[c];
      softmax_inplace(out, dout);
    }
  } else {
    for (size_t k = 0; k < t.out.a.size(); ++k) t.out.a[k] = lrelu(t.pre.a[k], slope);
  }
  if (!all_finite(t.out)) fail(Err::NonFiniteActivation, "layer " + std::to_string(layer));
}

const Matrix& TekoModel::forward(bool training, Rng* rng) {
  if (cfg_.fusion == FusionMode::Gated) fuse_inputs();
  const int nd = view_.n_doc;
  const int layers = layer_count();
  for (int l = 0; l < layers; ++l) {
    if (l == 0) {
      forward_layer(0, doc_features_, ent_fused_, training, rng);
    } else {
      const Matrix& prev = traces_[l - 1].out;
      Matrix doc_in(nd, prev.cols), ent_in(view_.n_ent, prev.cols);
      for (int i = 0; i < nd; ++i)
        for (int c = 0; c < prev.cols; ++c) doc_in.at(i, c) = prev.at(i, c);
      for (int e = 0; e < view_.n_ent; ++e)
        for (int c = 0; c < prev.cols; ++c) ent_in.at(e, c) = prev.at(nd + e, c);
      forward_layer(l, doc_in, ent_in, training, rng);
    }
  }
  return traces_.back().out;
}

void TekoModel::backward(const Matrix& d_out) {
  const int n = view_.n_nodes();
  const int nd = view_.n_doc;
  const double slope = cfg_.leaky_slope;
  if (d_out.rows != n || d_out.cols != cfg_.layer_dims.back())
    fail(Err::DimensionMismatch, "backward output gradient shape");

  Matrix dout_mat = d_out;
  for (int layer = layer_count() - 1; layer >= 0; --layer) {
    const LayerTrace& t = traces_[layer];
    const int dout = cfg_.layer_dims[layer];
    const bool final_layer = layer == layer_count() - 1;

    // head backward -> d(pre)
    Matrix dpre(n, dout);
    if (final_layer && cfg_.head == HeadKind::Softmax) {
      for (int i = 0; i < n; ++i) {
        const double* p = t.out.row(i);
        const double* g = dout_mat.row(i);
        double dot = 0.0;
        for (int c = 0; c < dout; ++c) dot += g[c] * p[c];
        double* d = dpre.row(i);
        for (int c = 0; c < dout; ++c) d[c] = p[c] * (g[c] - dot);
      }
    } else {
      for (size_t k = 0; k < dpre.a.size(); ++k)
        dpre.a[k] = dout_mat.a[k] * lrelu_grad(t.pre.a[k], slope);
    }

    Matrix dproj(n, dout);
    Tensor& gm = params_[gamma_index_[layer]];
    std::vector<double> dbeta, dl;
    std::vector<double> dhphi(static_cast<size_t>(2) * dout);

    for (int i = 0; i < n; ++i) {
      const int begin = view_.offset[i];
      const int end = view_.offset[i + 1];
      const double* hi = t.proj.row(i);
      const double* dprei = dpre.row(i);

      // aggregation: pre_i = sum_e beta_e h'_j
      dbeta.assign(static_cast<size_t>(end - begin), 0.0);
      double bsum = 0.0;
      for (int e = begin; e < end; ++e) {
        const auto& nb = view_.entries[e];
        const double* hj = t.proj.row(nb.j);
        double* dpj = dproj.row(nb.j);
        double d = 0.0;
        for (int c = 0; c < dout; ++c) {
          d += dprei[c] * hj[c];
          dpj[c] += t.beta[e] * dprei[c];
        }
        dbeta[static_cast<size_t>(e - begin)] = d;
        bsum += t.beta[e] * d;
      }

      // beta softmax, then the node-attention logit
      double dalpha[2] = {0.0, 0.0};
      for (int e = begin; e < end; ++e) {
        const auto& nb = view_.entries[e];
        double dle = t.beta[e] * (dbeta[static_cast<size_t>(e - begin)] - bsum);
        double a = t.alpha[static_cast<size_t>(i) * 2 + nb.type];
        double dcdot;
        if (cfg_.scaling == AttentionScaling::Feature) {
          double dlpre = dle * lrelu_grad(a * t.cdot[e], slope);
          dalpha[nb.type] += dlpre * t.cdot[e];
          dcdot = dlpre * a;
        } else {
          dalpha[nb.type] += dle * lrelu(t.cdot[e], slope);
          dcdot = dle * a * lrelu_grad(t.cdot[e], slope);
        }
        if (dcdot != 0.0) {
          const double* hj = t.proj.row(nb.j);
          double* dpi = dproj.row(i);
          double* dpj = dproj.row(nb.j);
          for (int c = 0; c < dout; ++c) {
            gm.g[c] += dcdot * hi[c];
            gm.g[dout + c] += dcdot * hj[c];
            dpi[c] += dcdot * gm.w[c];
            dpj[c] += dcdot * gm.w[dout + c];
          }
        }
      }

      // alpha softmax over present types, then eta and h_phi
      double asum = 0.0;
      for (int phi = 0; phi < 2; ++phi)
        if (t.present[static_cast<size_t>(i) * 2 + phi])
          asum += t.alpha[static_cast<size_t>(i) * 2 + phi] * dalpha[phi];
      std::fill(dhphi.begin(), dhphi.end(), 0.0);
      for (int phi = 0; phi < 2; ++phi) {
        if (!t.present[static_cast<size_t>(i) * 2 + phi]) continue;
        double al = t.alpha[static_cast<size_t>(i) * 2 + phi];
        double dzact = al * (dalpha[phi] - asum);
        double c0 = dzact * lrelu_grad(t.z_pre[static_cast<size_t>(i) * 2 + phi], slope);
        if (c0 == 0.0) continue;
        Tensor& eta = params_[eta_index_[layer][phi]];
        const double* hp = t.hphi.data() + (static_cast<size_t>(i) * 2 + phi) * dout;
        double* dpi = dproj.row(i);
        for (int c = 0; c < dout; ++c) {
          eta.g[c] += c0 * hi[c];
          eta.g[dout + c] += c0 * hp[c];
          dpi[c] += c0 * eta.w[c];
          dhphi[static_cast<size_t>(phi) * dout + c] += c0 * eta.w[dout + c];
        }
      }
      for (int e = begin; e < end; ++e) {
        const auto& nb = view_.entries[e];
        const double* dh = dhphi.data() + static_cast<size_t>(nb.type) * dout;
        double* dpj = dproj.row(nb.j);
        for (int c = 0; c < dout; ++c) dpj[c] += nb.w * dh[c];
      }
    }

    // projection backward
    Tensor& wd = params_[w_index_[layer][0]];
    Tensor& we = params_[w_index_[layer][1]];
    Matrix din_doc(nd, wd.rows), din_ent(view_.n_ent, we.rows);
    for (int i = 0; i < nd; ++i) {
      const double* x = t.in_doc.row(i);
      const double* dp = dproj.row(i);
      double* dx = din_doc.row(i);
      for (int k = 0; k < wd.rows; ++k) {
        const double* wrow = wd.w.data() + static_cast<size_t>(k) * dout;
        double* grow = wd.g.data() + static_cast<size_t>(k) * dout;
        double acc = 0.0;
        for (int c = 0; c < dout; ++c) {
          grow[c] += x[k] * dp[c];
          acc += wrow[c] * dp[c];
        }
        dx[k] = acc;
      }
    }
    for (int e = 0; e < view_.n_ent; ++e) {
      const double* x = t.in_ent.row(e);
      const double* dp = dproj.row(nd + e);
      double* dx = din_ent.row(e);
      for (int k = 0; k < we.rows; ++k) {
        const double* wrow = we.w.data() + static_cast<size_t>(k) * dout;
        double* grow = we.g.data() + static_cast<size_t>(k) * dout;
        double acc = 0.0;
        for (int c = 0; c < dout; ++c) {
          grow[c] += x[k] * dp[c];
          acc += wrow[c] * dp[c];
        }
        dx[k] = acc;
      }
    }

    // dropout backward
    if (!t.mask_doc.empty())
      for (size_t k = 0; k < din_doc.a.size(); ++k) din_doc.a[k] *= t.mask_doc[k];
    if (!t.mask_ent.empty())
      for (size_t k = 0; k < din_ent.a.size(); ++k) din_ent.a[k] *= t.mask_ent[k];

    if (layer > 0) {
      dout_mat = Matrix(n, cfg_.layer_dims[layer - 1]);
      for (int i = 0; i < nd; ++i)
        for (int c = 0; c < dout_mat.cols; ++c) dout_mat.at(i, c) = din_doc.at(i, c);
      for (int e = 0; e < view_.n_ent; ++e)
        for (int c = 0; c < dout_mat.cols; ++c) dout_mat.at(nd + e, c) = din_ent.at(e, c);
    } else if (cfg_.fusion == FusionMode::Gated) {
      Tensor& gate = params_[gate_index_];
      const int u = ent_es_.cols;
      for (int e = 0; e < view_.n_ent; ++e) {
        const double* des = ent_es_.row(e);
        const double* ded = ent_ed_.row(e);
        const double* df = din_ent.row(e);
        for (int k = 0; k < u; ++k) {
          double g = 1.0 / (1.0 + std::exp(-gate.w[k]));
          gate.g[k] += df[k] * (des[k] - ded[k]) * g * (1.0 - g);
        }
      }
    }
  }
}

void TekoModel::zero_grad() {
  for (auto& t : params_) t.zero_grad();
}

std::map<std::string, std::string> TekoModel::meta() const {
  std::map<std::string, std::string> m;
  m["kind"] = "teko";
  m["fusion"] = fusion_mode_name(cfg_.fusion);
  m["head"] = cfg_.head == HeadKind::Softmax ? "softmax" : "activation";
  m["scaling"] = cfg_.scaling == AttentionScaling::Feature ? "feature" : "logit";
  m["leaky_slope"] = fmt_double(cfg_.leaky_slope);
  m["dropout"] = fmt_double(cfg_.dropout);
  std::string dims;
  for (size_t i = 0; i < cfg_.layer_dims.size(); ++i) {
    if (i) dims += ",";
    dims += std::to_string(cfg_.layer_dims[i]);
  }
  m["layer_dims"] = dims;
  m["doc_in"] = std::to_string(doc_features_.cols);
  m["ent_in_s"] = std::to_string(ent_es_.cols);
  m["ent_in_d"] = std::to_string(ent_ed_.cols);
  m["n_doc"] = std::to_string(view_.n_doc);
  m["n_ent"] = std::to_string(view_.n_ent);
  return m;
}

GcnModel::GcnModel(Matrix a_hat, Matrix features, const GcnModelConfig& config)
    : a_hat_(std::move(a_hat)), features_(std::move(features)), cfg_(config) {
  if (cfg_.layer_dims.empty()) fail(Err::ConfigInvalid, "layer_dims empty");
  if (a_hat_.rows != a_hat_.cols || a_hat_.rows != features_.rows)
    fail(Err::DimensionMismatch, "gcn adjacency/features");
  Rng rng(cfg_.init_seed);
  int din = features_.cols;
  for (size_t l = 0; l < cfg_.layer_dims.size(); ++l) {
    int dout = cfg_.layer_dims[l];
    Tensor w("W_" + std::to_string(l), din, dout);
    init_uniform(w, rng, din, dout);
    params_.push_back(std::move(w));
    din = dout;
  }
  caches_.resize(cfg_.layer_dims.size());
}

const Matrix& GcnModel::forward(bool training, Rng* rng) {
  const int layers = static_cast<int>(cfg_.layer_dims.size());
  for (int l = 0; l < layers; ++l) {
    Cache& c = caches_[l];
    const Matrix& raw = l == 0 ? features_ : caches_[l - 1].out;
    c.input = apply_dropout(raw, cfg_.dropout, training, rng, &c.drop_mask);

    Matrix xw(c.input.rows, params_[l].cols);
    for (int i = 0; i < c.input.rows; ++i) {
      const double* x = c.input.row(i);
      double* out = xw.row(i);
      for (int k = 0; k < params_[l].rows; ++k) {
        double v = x[k];
        if (v == 0.0) continue;
        const double* wrow = params_[l].w.data() + static_cast<size_t>(k) * params_[l].cols;
        for (int j = 0; j < xw.cols; ++j) out[j] += v * wrow[j];
      }
    }
    c.pre = matmul(a_hat_, xw);

    const bool final_layer = l == layers - 1;
    c.out = Matrix(c.pre.rows, c.pre.cols);
    if (final_layer && cfg_.head == HeadKind::Softmax) {
      for (int i = 0; i < c.pre.rows; ++i) {
        for (int j = 0; j < c.pre.cols; ++j) c.out.at(i, j) = c.pre.at(i, j);
        softmax_inplace(c.out.row(i), c.out.cols);
      }
    } else {
      for (size_t k = 0; k < c.pre.a.size(); ++k) c.out.a[k] = lrelu(c.pre.a[k], cfg_.leaky_slope);
    }
    if (!all_finite(c.out)) fail(Err::NonFiniteActivation, "gcn layer " + std::to_string(l));
  }
  return caches_.back().out;
}

void GcnModel::backward(const Matrix& d_out) {
  const int layers = static_cast<int>(cfg_.layer_dims.size());
  Matrix dout_mat = d_out;
  for (int l = layers - 1; l >= 0; --l) {
    Cache& c = caches_[l];
    const bool final_layer = l == layers - 1;
    Matrix dpre(c.pre.rows, c.pre.cols);
    if (final_layer && cfg_.head == HeadKind::Softmax) {
      for (int i = 0; i < c.pre.rows; ++i) {
        const double* p = c.out.row(i);
        const double* g = dout_mat.row(i);
        double dot = 0.0;
        for (int j = 0; j < c.pre.cols; ++j) dot += g[j] * p[j];
        for (int j = 0; j < c.pre.cols; ++j) dpre.at(i, j) = p[j] * (g[j] - dot);
      }
    } else {
      for (size_t k = 0; k < dpre.a.size(); ++k)
        dpre.a[k] = dout_mat.a[k] * lrelu_grad(c.pre.a[k], cfg_.leaky_slope);
    }
    // pre = A (X W): A symmetric
    Matrix dxw = matmul(a_hat_, dpre);
    Tensor& w = params_[l];
    Matrix din(c.input.rows, w.rows);
    for (int i = 0; i < c.input.rows; ++i) {
      const double* x = c.input.row(i);
      const double* dp = dxw.row(i);
      double* dx = din.row(i);
      for (int k = 0; k < w.rows; ++k) {
        const double* wrow = w.w.data() + static_cast<size_t>(k) * w.cols;
        double* grow = w.g.data() + static_cast<size_t>(k) * w.cols;
        double acc = 0.0;
        for (int j = 0; j < w.cols; ++j) {
          grow[j] += x[k] * dp[j];
          acc += wrow[j] * dp[j];
        }
        dx[k] = acc;
      }
    }
    if (!c.drop_mask.empty())
      for (size_t k = 0; k < din.a.size(); ++k) din.a[k] *= c.drop_mask[k];
    if (l > 0) dout_mat = std::move(din);
  }
}

void GcnModel::zero_grad() {
  for (auto& t : params_) t.zero_grad();
}

std::map<std::string, std::string> GcnModel::meta() const {
  std::map<std::string, std::string> m;
  m["kind"] = "gcn";
  m["head"] = cfg_.head == HeadKind::Softmax ? "softmax" : "activation";
  m["leaky_slope"] = fmt_double(cfg_.leaky_slope);
  m["dropout"] = fmt_double(cfg_.dropout);
  std::string dims;
  for (size_t i = 0; i < cfg_.layer_dims.size(); ++i) {
    if (i) dims += ",";
    dims += std::to_string(cfg_.layer_dims[i]);
  }
  m["layer_dims"] = dims;
  m["n"] = std::to_string(a_hat_.rows);
  m["in"] = std::to_string(features_.cols);
  return m;
}

Matrix project(const Matrix& features, const Tensor& W) {
  if (features.cols != W.rows) fail(Err::DimensionMismatch, "project");
  Matrix out(features.rows, W.cols);
  for (int i = 0; i < features.rows; ++i)
    for (int k = 0; k < W.rows; ++k) {
      double v = features.at(i, k);
      if (v == 0.0) continue;
      for (int c = 0; c < W.cols; ++c) out.at(i, c) += v * W.at(k, c);
    }
  return out;
}

std::vector<double> type_embedding(const Matrix& a_hat_block, const Matrix& proj_dst,
                                   int node_row) {
  if (a_hat_block.cols != proj_dst.rows) fail(Err::DimensionMismatch, "type_embedding");
  std::vector<double> out(static_cast<size_t>(proj_dst.cols), 0.0);
  for (int j = 0; j < a_hat_block.cols; ++j) {
    double w = a_hat_block.at(node_row, j);
    if (w == 0.0) continue;
    for (int c = 0; c < proj_dst.cols; ++c) out[static_cast<size_t>(c)] += w * proj_dst.at(j, c);
  }
  return out;
}

std::map<int, double> type_attention(const std::vector<double>& h_i,
                                     const std::map<int, std::vector<double>>& type_embeds,
                                     const std::vector<Tensor>& eta_by_type, double slope) {
  if (type_embeds.empty()) return {};
  const int d = static_cast<int>(h_i.size());
  std::map<int, double> out;
  double mx = -1e300;
  for (const auto& [phi, hp] : type_embeds) {
    const Tensor& eta = eta_by_type[static_cast<size_t>(phi)];
    double z = 0.0;
    for (int c = 0; c < d; ++c) z += eta.w[c] * h_i[static_cast<size_t>(c)];
    for (int c = 0; c < d; ++c) z += eta.w[d + c] * hp[static_cast<size_t>(c)];
    double a = lrelu(z, slope);
    out[phi] = a;
    mx = std::max(mx, a);
  }
  double sum = 0.0;
  for (auto& [phi, v] : out) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& [phi, v] : out) v /= sum;
  return out;
}

std::vector<double> node_attention(const std::vector<double>& h_i,
                                   const std::vector<NeighborRef>& neighbors,
                                   const std::map<int, double>& alpha, const Tensor& gamma,
                                   double slope, AttentionScaling scaling, int dim) {
  if (neighbors.empty()) fail(Err::EmptyNeighborhood, "node_attention");
  std::vector<double> logits(neighbors.size());
  for (size_t k = 0; k < neighbors.size(); ++k) {
    const auto& nb = neighbors[k];
    double a = alpha.at(nb.type);
    double dot = 0.0;
    for (int c = 0; c < dim; ++c) dot += gamma.w[c] * h_i[static_cast<size_t>(c)];
    for (int c = 0; c < dim; ++c) dot += gamma.w[dim + c] * nb.h_j[c];
    logits[k] = scaling == AttentionScaling::Feature ? lrelu(a * dot, slope) : a * lrelu(dot, slope);
  }
  softmax_inplace(logits.data(), static_cast<int>(logits.size()));
  return logits;
}

std::string format_checkpoint(const std::map<std::string, std::string>& meta,
                              const std::vector<Tensor>& tensors) {
  std::ostringstream ss;
  ss << "teko-checkpoint v1\n";
  for (const auto& [k, v] : meta) ss << "meta " << k << " " << v << "\n";
  for (const auto& t : tensors) {
    ss << "tensor " << t.name << " " << t.rows << " " << t.cols << "\n";
    for (int i = 0; i < t.rows; ++i) {
      for (int j = 0; j < t.cols; ++j) {
        if (j) ss << ' ';
        ss << fmt_double(t.at(i, j));
      }
      ss << "\n";
    }
  }
  ss << "end\n";
  return ss.str();
}

void parse_checkpoint(const std::string& content, std::map<std::string, std::string>* meta,
                      std::vector<Tensor>* tensors) {
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line) || line != "teko-checkpoint v1")
    fail(Err::MalformedRecord, "checkpoint: bad header");
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    if (line.rfind("meta ", 0) == 0) {
      std::string rest = line.substr(5);
      auto sp = rest.find(' ');
      if (sp == std::string::npos) fail(Err::MalformedRecord, "checkpoint meta: " + line);
      (*meta)[rest.substr(0, sp)] = rest.substr(sp + 1);
      continue;
    }
    if (line.rfind("tensor ", 0) == 0) {
      std::istringstream hs(line.substr(7));
      std::string name;
      int rows = 0, cols = 0;
      if (!(hs >> name >> rows >> cols) || rows <= 0 || cols <= 0)
        fail(Err::MalformedRecord, "checkpoint tensor header: " + line);
      Tensor t(name, rows, cols);
      for (int i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) fail(Err::MalformedRecord, "checkpoint: truncated tensor " + name);
        auto fields = split(trim(line), ' ');
        if (static_cast<int>(fields.size()) != cols)
          fail(Err::MalformedRecord, "checkpoint: row width in " + name);
        for (int j = 0; j < cols; ++j)
          if (!parse_double(fields[static_cast<size_t>(j)], &t.at(i, j)))
            fail(Err::MalformedRecord, "checkpoint: bad float in " + name);
      }
      tensors->push_back(std::move(t));
      continue;
    }
    fail(Err::MalformedRecord, "checkpoint: unexpected line: " + line);
  }
  if (!ended) fail(Err::MalformedRecord, "checkpoint: missing end marker");
}

void save_checkpoint(const std::string& path, const Model& model, uint64_t seed) {
  auto meta = model.meta();
  meta["seed"] = std::to_string(seed);
  write_file_atomic(path, format_checkpoint(meta, model.params()));
}

void load_checkpoint_into(const std::string& path, Model* model) {
  std::map<std::string, std::string> meta;
  std::vector<Tensor> tensors;
  parse_checkpoint(read_file(path), &meta, &tensors);
  auto& params = model->params();
  if (tensors.size() != params.size())
    fail(Err::DimensionMismatch, "checkpoint tensor count " + std::to_string(tensors.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    if (tensors[i].name != params[i].name || tensors[i].rows != params[i].rows ||
        tensors[i].cols != params[i].cols)
      fail(Err::DimensionMismatch, "checkpoint tensor " + tensors[i].name);
    params[i].w = tensors[i].w;
  }
}

}  // namespace teko
