#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "metaxplain/hetgraph.hpp"
#include "metaxplain/tensor.hpp"

namespace metaxplain {

enum class Variant { HAN, HAN_GCN };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& s);

struct PredictorConfig {
  Variant variant = Variant::HAN;
  int hidden_units = 8;
  int attention_heads = 8;  // HAN only
  double dropout = 0.6;
  double learning_rate = 0.01;
  double weight_decay = 0.001;
  int epochs = 200;
  int patience = 100;
  int semantic_units = 128;  // width of the semantic-attention projection
  std::uint64_t seed = 0;

  static PredictorConfig han_defaults();
  static PredictorConfig han_gcn_defaults();
  void check() const;  // throws ParameterError on invalid fields
};

struct AttentionOverride {
  enum class Mode { Learned, OneHot, Balanced, Explicit };
  Mode mode = Mode::Learned;
  int index = 0;                // OneHot target channel
  std::vector<double> weights;  // Explicit distribution

  static AttentionOverride learned() { return {}; }
  static AttentionOverride one_hot(int m) { return {Mode::OneHot, m, {}}; }
  static AttentionOverride balanced() { return {Mode::Balanced, 0, {}}; }
  static AttentionOverride explicit_weights(std::vector<double> w);
};

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_macro_f1 = 0.0;
  double val_macro_f1 = 0.0;
};

// Trained meta-path predictor: per-view encoders, semantic attention, decoder.
// Immutable after training; forward paths are pure functions of the weights.
struct TrainedPredictor {
  PredictorConfig config;
  int num_views = 0;
  int in_dim = 0;
  int num_classes = 0;
  std::map<std::string, Mat> params;
  std::vector<EpochStats> history;
  int best_epoch = -1;

  const Mat& param(const std::string& name) const;
  int fused_dim() const {
    return config.variant == Variant::HAN ? config.hidden_units * config.attention_heads
                                          : config.hidden_units;
  }
};

// Full-batch training with early stopping on validation loss (best weights
// restored). Throws TrainingDivergedError when the loss goes non-finite.
TrainedPredictor train(const HeteroGraph& g, const std::vector<MetaPathView>& views,
                       const PredictorConfig& cfg);

// Eval-mode logits for every target node.
Mat forward(const TrainedPredictor& p, const std::vector<MetaPathView>& views, const Mat& features,
            const AttentionOverride& ov = AttentionOverride::learned());

// Learned semantic attention distribution over meta-paths (sums to 1).
std::vector<double> semantic_attention(const TrainedPredictor& p, const std::vector<MetaPathView>& views,
                                       const Mat& features);

// --- local (per-target) computation ------------------------------------------

// One forward pass over a LocalViewSet with optional structural and soft
// modifications per view. Everything the explainers and the faithfulness
// protocol evaluate goes through this spec.
struct LocalSpec {
  // Per view: subset of local edge indices to keep; empty optional keeps all.
  std::vector<std::optional<std::vector<int>>> edges_kept;
  // Per view: feature tensor overriding the gathered local features. An
  // undefined Tensor means "use the view's own features as constants".
  std::vector<Tensor> features;
  // Per view: continuous weights over the *kept* edges (n_kept x 1). An
  // undefined Tensor means all-ones. Weights multiply messages (GAT) or
  // adjacency entries prior to normalization (GCN).
  std::vector<Tensor> edge_weights;
  AttentionOverride ov;

  static LocalSpec plain(std::size_t num_views) {
    LocalSpec s;
    s.edges_kept.resize(num_views);
    s.features.resize(num_views);
    s.edge_weights.resize(num_views);
    return s;
  }
};

struct LocalOutput {
  Tensor logits;     // 1 x C, target row
  Tensor attention;  // 1 x M (post-softmax or the override)
};

// Differentiable local forward (eval mode). Gradients flow into any
// requires-grad tensors supplied through the spec.
LocalOutput local_forward(const TrainedPredictor& p, const LocalViewSet& local, const LocalSpec& spec);

// Convenience: class probabilities of the target node under `spec`.
Eigen::RowVectorXd local_probabilities(const TrainedPredictor& p, const LocalViewSet& local,
                                       const LocalSpec& spec);

// Gradient of the cross-entropy of the target's logits against `target_class`
// with respect to each view's feature matrix (adjacency held fixed).
std::vector<Mat> grad_wrt_view_features(const TrainedPredictor& p, const LocalViewSet& local,
                                        int target_class,
                                        const AttentionOverride& ov = AttentionOverride::learned());

Eigen::RowVectorXd softmax_row(const Eigen::RowVectorXd& logits);

}  // namespace metaxplain
