#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "metaxplain/common.hpp"
#include "metaxplain/rng.hpp"

namespace metaxplain {

// Row-major dense float64 matrix. Everything numeric in this project is 2-D.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

struct Node {
  Mat value;
  Mat grad;  // allocated lazily, only when requires_grad
  bool requires_grad = false;
  bool grad_valid = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  // Pushes this node's grad into its parents' grads. Empty for leaves and for
  // tensors built outside any differentiable context.
  std::function<void(Node&)> backprop;
  const char* op = "leaf";

  void ensure_grad() {
    if (!grad_valid) {
      grad = Mat::Zero(value.rows(), value.cols());
      grad_valid = true;
    }
  }
};

}  // namespace detail

// Value-semantics handle onto a node of the computation graph. Ops on tensors
// whose inputs require grad record backward closures; backward() replays them
// in reverse topological order and then clears the tape.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Mat value);
  static Tensor leaf(Mat value, bool requires_grad);
  static Tensor zeros(Eigen::Index rows, Eigen::Index cols, bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  const Mat& value() const { return node_->value; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  // Gradient accumulated by the last backward() pass.
  const Mat& grad() const;
  double item() const;

  std::shared_ptr<detail::Node> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_op(Mat value, std::vector<Tensor> inputs, std::function<void(detail::Node&)> backprop,
                        const char* op);
};

// Populates grads of every requires_grad leaf reachable from `loss`, then
// clears the tape. `loss` must be a 1x1 tensor attached to a live graph.
void backward(const Tensor& loss);

// Constant sparse matrix in coordinate form; used where the adjacency itself
// never needs a gradient.
struct Coo {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<Eigen::Index> row_idx;
  std::vector<Eigen::Index> col_idx;
  std::vector<double> weight;

  void add(Eigen::Index r, Eigen::Index c, double w) {
    row_idx.push_back(r);
    col_idx.push_back(c);
    weight.push_back(w);
  }
};

// --- primitives -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor sparse_adj_matmul(const std::shared_ptr<const Coo>& adj, const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_rowvec(const Tensor& x, const Tensor& bias);  // bias is 1 x d
Tensor scale(const Tensor& x, const Tensor& s);          // s is 1 x 1
Tensor scale_const(const Tensor& x, double c);
Tensor add_const(const Tensor& x, double c);
Tensor neg(const Tensor& x);
Tensor elu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor tanh_op(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor log_op(const Tensor& x);
Tensor rsqrt(const Tensor& x, double eps = 0.0);  // 1 / sqrt(x + eps)
Tensor softmax_rows(const Tensor& x);
// Entries where mask == 0 are excluded from the softmax and output exactly 0.
Tensor masked_softmax(const Tensor& x, const Mat& mask);
// Inverted dropout: kept entries scaled by 1/(1-p). Identity when p == 0 or
// not training. Mask drawn from `rng` (mutates it).
Tensor dropout(const Tensor& x, double p, CounterRng& rng, bool training);
Tensor concat_cols(const std::vector<Tensor>& xs);
Tensor concat_rows(const std::vector<Tensor>& xs);
Tensor slice_cols(const Tensor& x, Eigen::Index start, Eigen::Index len);
Tensor mean_rows(const Tensor& x);  // n x d -> 1 x d column means
Tensor sum_all(const Tensor& x);    // -> 1 x 1
Tensor gather_rows(const Tensor& x, const std::vector<Eigen::Index>& idx);
Tensor scatter_add_rows(const Tensor& x, const std::vector<Eigen::Index>& idx, Eigen::Index out_rows);
Tensor rowscale(const Tensor& x, const Tensor& s);  // s is n x 1, scales row i by s(i)
// Softmax over groups of entries sharing the same segment id (scores: m x 1).
Tensor segment_softmax(const Tensor& scores, const std::vector<Eigen::Index>& segment, Eigen::Index n_segments);
// Mean cross-entropy of row-wise logits against integer class labels.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// --- optimizer ---------------------------------------------------------------

struct AdamState {
  Mat m;
  Mat v;
  long step = 0;
};

// Standard Adam with L2-in-gradient weight decay. Deterministic.
void adam_step(Mat& param, const Mat& grad, AdamState& state, double lr, double weight_decay,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Glorot-uniform initialization.
Mat glorot_uniform(Eigen::Index rows, Eigen::Index cols, CounterRng& rng);

}  // namespace metaxplain
