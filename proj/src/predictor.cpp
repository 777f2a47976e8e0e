#include "metaxplain/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "metaxplain/stats.hpp"

namespace metaxplain {

std::string variant_name(Variant v) { return v == Variant::HAN ? "han" : "han_gcn"; }

Variant variant_from_name(const std::string& s) {
  if (s == "han" || s == "HAN") return Variant::HAN;
  if (s == "han_gcn" || s == "han-gcn" || s == "HAN-GCN" || s == "HAN_GCN") return Variant::HAN_GCN;
  throw ParameterError("unknown predictor variant '" + s + "'");
}

PredictorConfig PredictorConfig::han_defaults() { return PredictorConfig{}; }

PredictorConfig PredictorConfig::han_gcn_defaults() {
  PredictorConfig c;
  c.variant = Variant::HAN_GCN;
  c.hidden_units = 64;
  return c;
}

void PredictorConfig::check() const {
  if (hidden_units <= 0) throw ParameterError("hidden_units must be positive");
  if (variant == Variant::HAN && attention_heads <= 0)
    throw ParameterError("attention_heads must be positive for HAN");
  if (dropout < 0.0 || dropout >= 1.0) throw ParameterError("dropout must be in [0, 1)");
  if (epochs <= 0) throw ParameterError("epochs must be positive");
  if (patience > epochs) throw ParameterError("patience must not exceed epochs");
  if (semantic_units <= 0) throw ParameterError("semantic_units must be positive");
}

AttentionOverride AttentionOverride::explicit_weights(std::vector<double> w) {
  double sum = 0.0;
  for (double v : w) {
    if (v < 0.0) throw ParameterError("explicit attention weights must be nonnegative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ParameterError("explicit attention weights must sum to 1");
  AttentionOverride ov;
  ov.mode = Mode::Explicit;
  ov.weights = std::move(w);
  return ov;
}

const Mat& TrainedPredictor::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw UsageError("unknown parameter '" + name + "'");
  return it->second;
}

Eigen::RowVectorXd softmax_row(const Eigen::RowVectorXd& logits) {
  const double mx = logits.maxCoeff();
  Eigen::ArrayXd e = (logits.array() - mx).exp();
  return (e / e.sum()).matrix().transpose();
}

namespace {

// Tensors for one forward pass over the weights. Training passes share one
// leaf per parameter so gradients accumulate across all uses.
class ParamSet {
 public:
  ParamSet(const std::map<std::string, Mat>& values, bool requires_grad)
      : values_(values), requires_grad_(requires_grad) {}

  Tensor get(const std::string& name) {
    auto it = tensors_.find(name);
    if (it != tensors_.end()) return it->second;
    auto vit = values_.find(name);
    if (vit == values_.end()) throw UsageError("unknown parameter '" + name + "'");
    Tensor t = Tensor::leaf(vit->second, requires_grad_);
    tensors_.emplace(name, t);
    return t;
  }

  const std::map<std::string, Tensor>& tensors() const { return tensors_; }

 private:
  const std::map<std::string, Mat>& values_;
  bool requires_grad_;
  std::map<std::string, Tensor> tensors_;
};

// One view's structural input: directed edge arrays over the kept edges.
struct ViewComputation {
  Eigen::Index n = 0;
  std::vector<Eigen::Index> src, dst;        // both orientations of kept edges
  std::vector<Eigen::Index> kept_of_directed;  // directed index -> kept-edge index
  Tensor features;                           // n x d
  Tensor weights;                            // kept x 1, undefined => all ones
  Eigen::Index n_kept = 0;
};

ViewComputation build_view_computation(Eigen::Index n, const EdgeList& edges,
                                       const std::optional<std::vector<int>>& kept, Tensor features,
                                       Tensor weights) {
  ViewComputation vc;
  vc.n = n;
  vc.features = std::move(features);
  vc.weights = std::move(weights);
  std::vector<int> idx;
  if (kept) {
    idx = *kept;
    for (int e : idx)
      if (e < 0 || e >= static_cast<int>(edges.size()))
        throw UsageError("edge subset index " + std::to_string(e) + " out of range");
  } else {
    idx.resize(edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) idx[i] = static_cast<int>(i);
  }
  vc.n_kept = static_cast<Eigen::Index>(idx.size());
  if (vc.weights.defined() &&
      (vc.weights.rows() != vc.n_kept || vc.weights.cols() != 1))
    throw ShapeError("edge weights must be " + std::to_string(vc.n_kept) + "x1");
  vc.src.reserve(idx.size() * 2);
  vc.dst.reserve(idx.size() * 2);
  vc.kept_of_directed.reserve(idx.size() * 2);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto [u, v] = edges[idx[i]];
    vc.src.push_back(u);
    vc.dst.push_back(v);
    vc.kept_of_directed.push_back(static_cast<Eigen::Index>(i));
    vc.src.push_back(v);
    vc.dst.push_back(u);
    vc.kept_of_directed.push_back(static_cast<Eigen::Index>(i));
  }
  return vc;
}

constexpr double kLeakySlope = 0.2;

Tensor gat_encode(ParamSet& ps, int view, const ViewComputation& vc, const PredictorConfig& cfg,
                  bool training, CounterRng* rng) {
  Tensor x = vc.features;
  if (training) x = dropout(x, cfg.dropout, *rng, true);

  // Directed edges followed by one self-loop per node.
  std::vector<Eigen::Index> src = vc.src;
  std::vector<Eigen::Index> dst = vc.dst;
  for (Eigen::Index i = 0; i < vc.n; ++i) {
    src.push_back(i);
    dst.push_back(i);
  }

  Tensor dir_weights;  // 2E+n x 1; undefined when the view is unweighted
  if (vc.weights.defined()) {
    Tensor real = vc.n_kept > 0 ? gather_rows(vc.weights, vc.kept_of_directed) : Tensor();
    Tensor self_ones = Tensor::constant(Mat::Ones(vc.n, 1));
    dir_weights = real.defined() ? concat_rows({real, self_ones}) : self_ones;
  }

  const std::string prefix = "view" + std::to_string(view) + ".";
  std::vector<Tensor> heads;
  heads.reserve(cfg.attention_heads);
  for (int h = 0; h < cfg.attention_heads; ++h) {
    const std::string hp = prefix + "head" + std::to_string(h) + ".";
    Tensor z = matmul(x, ps.get(hp + "W"));
    Tensor s_src = matmul(z, ps.get(hp + "a_src"));
    Tensor s_dst = matmul(z, ps.get(hp + "a_dst"));
    Tensor e = add(gather_rows(s_src, src), gather_rows(s_dst, dst));
    Tensor alpha = segment_softmax(leaky_relu(e, kLeakySlope), dst, vc.n);
    if (training) alpha = dropout(alpha, cfg.dropout, *rng, true);
    Tensor coef = dir_weights.defined() ? mul(alpha, dir_weights) : alpha;
    Tensor msgs = rowscale(gather_rows(z, src), coef);
    heads.push_back(elu(scatter_add_rows(msgs, dst, vc.n)));
  }
  return cfg.attention_heads == 1 ? heads.front() : concat_cols(heads);
}

Tensor gcn_encode(ParamSet& ps, int view, const ViewComputation& vc, const PredictorConfig& cfg,
                  bool training, CounterRng* rng) {
  Tensor x = vc.features;
  if (training) x = dropout(x, cfg.dropout, *rng, true);
  Tensor xw = matmul(x, ps.get("view" + std::to_string(view) + ".W"));

  Tensor w = vc.weights.defined() ? vc.weights : Tensor::constant(Mat::Ones(vc.n_kept, 1));

  // deg_i = 1 + sum of incident kept-edge weights; Ahat = D^-1/2 (A + I) D^-1/2.
  auto incidence = std::make_shared<Coo>();
  incidence->rows = vc.n;
  incidence->cols = vc.n_kept;
  for (std::size_t d = 0; d < vc.src.size(); ++d)
    incidence->add(vc.dst[d], vc.kept_of_directed[d], 1.0);
  Tensor deg = add_const(sparse_adj_matmul(incidence, w), 1.0);
  Tensor r = rsqrt(deg);

  Tensor agg;
  if (vc.n_kept > 0) {
    Tensor coef = mul(gather_rows(w, vc.kept_of_directed),
                      mul(gather_rows(r, vc.src), gather_rows(r, vc.dst)));
    agg = scatter_add_rows(rowscale(gather_rows(xw, vc.src), coef), vc.dst, vc.n);
  }
  Tensor self = rowscale(xw, mul(r, r));
  return elu(agg.defined() ? add(agg, self) : self);
}

Tensor encode_view(ParamSet& ps, int view, const ViewComputation& vc, const PredictorConfig& cfg,
                   bool training, CounterRng* rng) {
  if (vc.features.cols() <= 0) throw ShapeError("encode_view: empty feature matrix");
  return cfg.variant == Variant::HAN ? gat_encode(ps, view, vc, cfg, training, rng)
                                     : gcn_encode(ps, view, vc, cfg, training, rng);
}

// HAN-style semantic attention: softmax over per-view means of q^T tanh(W h + b).
Tensor learned_attention(ParamSet& ps, const std::vector<Tensor>& embeddings) {
  std::vector<Tensor> scores;
  scores.reserve(embeddings.size());
  for (const auto& h : embeddings) {
    Tensor proj = tanh_op(add_rowvec(matmul(h, ps.get("sem.W")), ps.get("sem.b")));
    scores.push_back(mean_rows(matmul(proj, ps.get("sem.q"))));
  }
  return softmax_rows(concat_cols(scores));
}

Tensor resolve_attention(ParamSet& ps, const std::vector<Tensor>& embeddings,
                         const AttentionOverride& ov) {
  const int m = static_cast<int>(embeddings.size());
  switch (ov.mode) {
    case AttentionOverride::Mode::Learned:
      return learned_attention(ps, embeddings);
    case AttentionOverride::Mode::OneHot: {
      if (ov.index < 0 || ov.index >= m)
        throw ShapeError("attention override one_hot(" + std::to_string(ov.index) + ") for " +
                         std::to_string(m) + " views");
      Mat b = Mat::Zero(1, m);
      b(0, ov.index) = 1.0;
      return Tensor::constant(std::move(b));
    }
    case AttentionOverride::Mode::Balanced:
      return Tensor::constant(Mat::Constant(1, m, 1.0 / m));
    case AttentionOverride::Mode::Explicit: {
      if (static_cast<int>(ov.weights.size()) != m)
        throw ShapeError("explicit attention override has " + std::to_string(ov.weights.size()) +
                         " weights for " + std::to_string(m) + " views");
      Mat b(1, m);
      for (int i = 0; i < m; ++i) b(0, i) = ov.weights[i];
      return Tensor::constant(std::move(b));
    }
  }
  throw UsageError("unreachable attention mode");
}

Tensor fuse_and_decode(ParamSet& ps, const std::vector<Tensor>& rows, const Tensor& beta) {
  Tensor fused;
  for (std::size_t m = 0; m < rows.size(); ++m) {
    Tensor t = scale(rows[m], slice_cols(beta, static_cast<Eigen::Index>(m), 1));
    fused = fused.defined() ? add(fused, t) : t;
  }
  return add_rowvec(matmul(fused, ps.get("dec.W")), ps.get("dec.b"));
}

struct FullForward {
  Tensor logits;
  Tensor attention;
};

FullForward full_forward(ParamSet& ps, const PredictorConfig& cfg,
                         const std::vector<MetaPathView>& views, const Tensor& features,
                         const AttentionOverride& ov, bool training, CounterRng* rng) {
  std::vector<Tensor> embeddings;
  embeddings.reserve(views.size());
  for (std::size_t m = 0; m < views.size(); ++m) {
    ViewComputation vc = build_view_computation(features.rows(), views[m].edges, std::nullopt,
                                                features, Tensor());
    embeddings.push_back(encode_view(ps, static_cast<int>(m), vc, cfg, training, rng));
  }
  FullForward out;
  out.attention = resolve_attention(ps, embeddings, ov);
  out.logits = fuse_and_decode(ps, embeddings, out.attention);
  return out;
}

double subset_ce(const Mat& logits, const std::vector<int>& labels, const std::vector<int>& idx) {
  if (idx.empty()) return 0.0;
  double loss = 0.0;
  for (int i : idx) {
    const Eigen::RowVectorXd row = logits.row(i);
    const double mx = row.maxCoeff();
    const double z = (row.array() - mx).exp().sum();
    loss += std::log(z) + mx - row(labels[i]);
  }
  return loss / static_cast<double>(idx.size());
}

double subset_macro_f1(const Mat& logits, const std::vector<int>& labels, const std::vector<int>& idx,
                       int num_classes) {
  if (idx.empty()) return 0.0;
  std::vector<int> yt, yp;
  yt.reserve(idx.size());
  yp.reserve(idx.size());
  for (int i : idx) {
    Eigen::Index arg;
    logits.row(i).maxCoeff(&arg);
    yp.push_back(static_cast<int>(arg));
    yt.push_back(labels[i]);
  }
  return f1_scores(yt, yp, num_classes).macro;
}

}  // namespace

TrainedPredictor train(const HeteroGraph& g, const std::vector<MetaPathView>& views,
                       const PredictorConfig& cfg) {
  cfg.check();
  if (views.empty()) throw ParameterError("train: at least one meta-path view is required");
  const Mat& x = g.target_features();
  for (const auto& v : views)
    if (v.n != x.rows())
      throw ShapeError("train: view over " + std::to_string(v.n) + " nodes vs " +
                       std::to_string(x.rows()) + " feature rows");
  if (static_cast<Eigen::Index>(g.labels.size()) != x.rows())
    throw ParameterError("train: labels missing or wrong length");
  if (g.train_idx.empty()) throw ParameterError("train: empty train split");

  TrainedPredictor model;
  model.config = cfg;
  model.num_views = static_cast<int>(views.size());
  model.in_dim = static_cast<int>(x.cols());
  model.num_classes = g.num_classes;

  CounterRng master(cfg.seed);
  CounterRng init_rng = master.split(1);
  CounterRng drop_rng = master.split(2);

  const int fused = model.fused_dim();
  for (int m = 0; m < model.num_views; ++m) {
    const std::string vp = "view" + std::to_string(m) + ".";
    if (cfg.variant == Variant::HAN) {
      for (int h = 0; h < cfg.attention_heads; ++h) {
        const std::string hp = vp + "head" + std::to_string(h) + ".";
        model.params[hp + "W"] = glorot_uniform(model.in_dim, cfg.hidden_units, init_rng);
        model.params[hp + "a_src"] = glorot_uniform(cfg.hidden_units, 1, init_rng);
        model.params[hp + "a_dst"] = glorot_uniform(cfg.hidden_units, 1, init_rng);
      }
    } else {
      model.params[vp + "W"] = glorot_uniform(model.in_dim, cfg.hidden_units, init_rng);
    }
  }
  model.params["sem.W"] = glorot_uniform(fused, cfg.semantic_units, init_rng);
  model.params["sem.b"] = Mat::Zero(1, cfg.semantic_units);
  model.params["sem.q"] = glorot_uniform(cfg.semantic_units, 1, init_rng);
  model.params["dec.W"] = glorot_uniform(fused, g.num_classes, init_rng);
  model.params["dec.b"] = Mat::Zero(1, g.num_classes);

  std::map<std::string, AdamState> adam;
  const Tensor features = Tensor::constant(x);
  const bool has_val = !g.val_idx.empty();

  std::map<std::string, Mat> best_params = model.params;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int stale = 0;

  std::vector<Eigen::Index> tr(g.train_idx.begin(), g.train_idx.end());
  std::vector<int> tr_labels;
  tr_labels.reserve(tr.size());
  for (int i : g.train_idx) tr_labels.push_back(g.labels[i]);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ParamSet ps(model.params, true);
    FullForward ff =
        full_forward(ps, cfg, views, features, AttentionOverride::learned(), true, &drop_rng);
    Tensor loss = cross_entropy(gather_rows(ff.logits, tr), tr_labels);
    if (!std::isfinite(loss.item()))
      throw TrainingDivergedError("training diverged at epoch " + std::to_string(epoch));
    backward(loss);
    for (const auto& [name, tensor] : ps.tensors())
      if (tensor.node()->grad_valid)
        adam_step(model.params[name], tensor.grad(), adam[name], cfg.learning_rate, cfg.weight_decay);

    ParamSet eval_ps(model.params, false);
    FullForward ev =
        full_forward(eval_ps, cfg, views, features, AttentionOverride::learned(), false, nullptr);
    EpochStats st;
    st.train_loss = subset_ce(ev.logits.value(), g.labels, g.train_idx);
    st.val_loss = has_val ? subset_ce(ev.logits.value(), g.labels, g.val_idx) : st.train_loss;
    st.train_macro_f1 = subset_macro_f1(ev.logits.value(), g.labels, g.train_idx, g.num_classes);
    st.val_macro_f1 =
        has_val ? subset_macro_f1(ev.logits.value(), g.labels, g.val_idx, g.num_classes) : st.train_macro_f1;
    model.history.push_back(st);
    if (!std::isfinite(st.val_loss))
      throw TrainingDivergedError("training diverged at epoch " + std::to_string(epoch));

    if (st.val_loss < best_val) {
      best_val = st.val_loss;
      best_params = model.params;
      best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }

  model.params = std::move(best_params);
  model.best_epoch = best_epoch;
  return model;
}

Mat forward(const TrainedPredictor& p, const std::vector<MetaPathView>& views, const Mat& features,
            const AttentionOverride& ov) {
  if (static_cast<int>(views.size()) != p.num_views)
    throw ShapeError("forward: model trained on " + std::to_string(p.num_views) + " views, got " +
                     std::to_string(views.size()));
  if (features.cols() != p.in_dim)
    throw ShapeError("forward: feature dim " + std::to_string(features.cols()) + " vs model dim " +
                     std::to_string(p.in_dim));
  ParamSet ps(p.params, false);
  FullForward ff = full_forward(ps, p.config, views, Tensor::constant(features), ov, false, nullptr);
  return ff.logits.value();
}

std::vector<double> semantic_attention(const TrainedPredictor& p, const std::vector<MetaPathView>& views,
                                       const Mat& features) {
  ParamSet ps(p.params, false);
  FullForward ff = full_forward(ps, p.config, views, Tensor::constant(features),
                                AttentionOverride::learned(), false, nullptr);
  std::vector<double> out(ff.attention.cols());
  for (Eigen::Index i = 0; i < ff.attention.cols(); ++i) out[i] = ff.attention.value()(0, i);
  return out;
}

LocalOutput local_forward(const TrainedPredictor& p, const LocalViewSet& local, const LocalSpec& spec) {
  const std::size_t m = local.views.size();
  if (static_cast<int>(m) != p.num_views)
    throw ShapeError("local_forward: model trained on " + std::to_string(p.num_views) +
                     " views, local set has " + std::to_string(m));
  if (spec.edges_kept.size() != m || spec.features.size() != m || spec.edge_weights.size() != m)
    throw ShapeError("local_forward: spec arity does not match view count");

  ParamSet ps(p.params, false);
  std::vector<Tensor> embeddings;
  std::vector<Tensor> target_rows;
  embeddings.reserve(m);
  target_rows.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const LocalView& lv = local.views[i];
    if (lv.target_local < 0 || lv.target_local >= static_cast<int>(lv.nodes.size()))
      throw UsageError("local_forward: target missing from view " + std::to_string(i) +
                       " (LocalViewSet invariant violated)");
    Tensor feats = spec.features[i].defined() ? spec.features[i] : Tensor::constant(lv.features);
    if (feats.rows() != static_cast<Eigen::Index>(lv.nodes.size()) || feats.cols() != p.in_dim)
      throw ShapeError("local_forward: view " + std::to_string(i) + " features are " +
                       std::to_string(feats.rows()) + "x" + std::to_string(feats.cols()));
    ViewComputation vc = build_view_computation(static_cast<Eigen::Index>(lv.nodes.size()), lv.edges,
                                                spec.edges_kept[i], feats, spec.edge_weights[i]);
    Tensor h = encode_view(ps, static_cast<int>(i), vc, p.config, false, nullptr);
    target_rows.push_back(gather_rows(h, {static_cast<Eigen::Index>(lv.target_local)}));
    embeddings.push_back(std::move(h));
  }

  LocalOutput out;
  out.attention = resolve_attention(ps, embeddings, spec.ov);
  out.logits = fuse_and_decode(ps, target_rows, out.attention);
  return out;
}

Eigen::RowVectorXd local_probabilities(const TrainedPredictor& p, const LocalViewSet& local,
                                       const LocalSpec& spec) {
  LocalOutput out = local_forward(p, local, spec);
  return softmax_row(out.logits.value().row(0));
}

std::vector<Mat> grad_wrt_view_features(const TrainedPredictor& p, const LocalViewSet& local,
                                        int target_class, const AttentionOverride& ov) {
  if (target_class < 0 || target_class >= p.num_classes)
    throw ParameterError("grad_wrt_view_features: class " + std::to_string(target_class) +
                         " out of range");
  LocalSpec spec = LocalSpec::plain(local.views.size());
  spec.ov = ov;
  for (std::size_t m = 0; m < local.views.size(); ++m)
    spec.features[m] = Tensor::leaf(local.views[m].features, true);
  LocalOutput out = local_forward(p, local, spec);
  Tensor loss = cross_entropy(out.logits, {target_class});
  backward(loss);
  std::vector<Mat> grads;
  grads.reserve(local.views.size());
  for (std::size_t m = 0; m < local.views.size(); ++m) grads.push_back(spec.features[m].grad());
  return grads;
}

}  // namespace metaxplain
