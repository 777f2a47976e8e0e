#include "metaxplain/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace metaxplain {

namespace {

std::string shape_str(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

[[noreturn]] void shape_fail(const char* op, const Mat& a, const Mat& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

}  // namespace

Tensor make_op(Mat value, std::vector<Tensor> inputs, std::function<void(detail::Node&)> backprop,
               const char* op) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  n->op = op;
  n->is_leaf = false;
  bool rg = false;
  for (const auto& t : inputs) rg = rg || t.requires_grad();
  if (rg) {
    n->requires_grad = true;
    n->parents.reserve(inputs.size());
    for (const auto& t : inputs) n->parents.push_back(t.node());
    n->backprop = std::move(backprop);
  }
  return Tensor(std::move(n));
}

Tensor Tensor::constant(Mat value) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  return Tensor(std::move(n));
}

Tensor Tensor::leaf(Mat value, bool requires_grad) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(Eigen::Index rows, Eigen::Index cols, bool requires_grad) {
  return leaf(Mat::Zero(rows, cols), requires_grad);
}

Tensor Tensor::scalar(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

const Mat& Tensor::grad() const {
  if (!node_ || !node_->grad_valid) throw UsageError("Tensor::grad: no gradient has been computed");
  return node_->grad;
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw ShapeError("Tensor::item: tensor is " + shape_str(node_->value));
  return node_->value(0, 0);
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw UsageError("backward: undefined tensor");
  auto root = loss.node();
  if (root->value.rows() != 1 || root->value.cols() != 1)
    throw UsageError("backward: loss must be scalar, got " + shape_str(root->value));
  if (!root->requires_grad)
    throw UsageError("backward: tensor is detached from any computation graph");

  // Post-order DFS; parents are only recorded on grad-requiring nodes, so the
  // traversal stays inside the active graph.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (detail::Node* n : order) {
    n->ensure_grad();
    n->grad.setZero();
  }
  root->grad(0, 0) = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backprop) (*it)->backprop(**it);
  }
  // Clear the tape. Leaf grads stay readable; interior nodes become plain
  // constants, so a second backward through them reports detachment.
  for (detail::Node* n : order) {
    n->backprop = nullptr;
    n->parents.clear();
    if (!n->is_leaf) n->requires_grad = false;
  }
}

// --- primitives -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_fail("matmul", a.value(), b.value());
  auto an = a.node();
  auto bn = b.node();
  return make_op(
      a.value() * b.value(), {a, b},
      [an, bn](detail::Node& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          an->grad.noalias() += self.grad * bn->value.transpose();
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          bn->grad.noalias() += an->value.transpose() * self.grad;
        }
      },
      "matmul");
}

Tensor sparse_adj_matmul(const std::shared_ptr<const Coo>& adj, const Tensor& x) {
  if (!adj) throw UsageError("sparse_adj_matmul: null adjacency");
  if (adj->cols != x.rows())
    throw ShapeError("sparse_adj_matmul: adjacency " + std::to_string(adj->rows) + "x" +
                     std::to_string(adj->cols) + " vs dense " + shape_str(x.value()));
  Mat out = Mat::Zero(adj->rows, x.cols());
  for (std::size_t k = 0; k < adj->row_idx.size(); ++k)
    out.row(adj->row_idx[k]) += adj->weight[k] * x.value().row(adj->col_idx[k]);
  auto xn = x.node();
  return make_op(
      std::move(out), {x},
      [xn, adj](detail::Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t k = 0; k < adj->row_idx.size(); ++k)
          xn->grad.row(adj->col_idx[k]) += adj->weight[k] * self.grad.row(adj->row_idx[k]);
      },
      "sparse_adj_matmul");
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail("add", a.value(), b.value());
  auto an = a.node();
  auto bn = b.node();
  return make_op(
      a.value() + b.value(), {a, b},
      [an, bn](detail::Node& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          an->grad += self.grad;
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          bn->grad += self.grad;
        }
      },
      "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail("sub", a.value(), b.value());
  auto an = a.node();
  auto bn = b.node();
  return make_op(
      a.value() - b.value(), {a, b},
      [an, bn](detail::Node& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          an->grad += self.grad;
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          bn->grad -= self.grad;
        }
      },
      "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail("mul", a.value(), b.value());
  auto an = a.node();
  auto bn = b.node();
  return make_op(
      a.value().cwiseProduct(b.value()), {a, b},
      [an, bn](detail::Node& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          an->grad += self.grad.cwiseProduct(bn->value);
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          bn->grad += self.grad.cwiseProduct(an->value);
        }
      },
      "mul");
}

Tensor add_rowvec(const Tensor& x, const Tensor& bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) shape_fail("add_rowvec", x.value(), bias.value());
  Mat out = x.value();
  out.rowwise() += bias.value().row(0);
  auto xn = x.node();
  auto bn = bias.node();
  return make_op(
      std::move(out), {x, bias},
      [xn, bn](detail::Node& self) {
        if (xn->requires_grad) {
          xn->ensure_grad();
          xn->grad += self.grad;
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          bn->grad += self.grad.colwise().sum();
        }
      },
      "add_rowvec");
}

Tensor scale(const Tensor& x, const Tensor& s) {
  if (s.rows() != 1 || s.cols() != 1) shape_fail("scale", x.value(), s.value());
  auto xn = x.node();
  auto sn = s.node();
  return make_op(
      x.value() * s.item(), {x, s},
      [xn, sn](detail::Node& self) {
        if (xn->requires_grad) {
          xn->ensure_grad();
          xn->grad += self.grad * sn->value(0, 0);
        }
        if (sn->requires_grad) {
          sn->ensure_grad();
          sn->grad(0, 0) += self.grad.cwiseProduct(xn->value).sum();
        }
      },
      "scale");
}

Tensor scale_const(const Tensor& x, double c) {
  auto xn = x.node();
  return make_op(
      x.value() * c, {x},
      [xn, c](detail::Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        xn->grad += self.grad * c;
      },
      "scale_const");
}

Tensor add_const(const Tensor& x, double c) {
  auto xn = x.node();
  return make_op(
      x.value().array() + c, {x},
      [xn](detail::Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        xn->grad += self.grad;
      },
      "add_const");
}

Tensor neg(const Tensor& x) { return scale_const(x, -1.0); }

Tensor elu(const Tensor& x) {
  Mat out = x.value().unaryExpr([](double v) { return v > 0 ? v : std::expm1(v); });
  auto xn = x.node();
  return make_op(
      std::move(out), {x},
      [xn](detail::Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        xn->grad += self.grad.cwiseProduct(
            xn->value.unaryExpr([](double v) { return v > 0 ? 1.0 : std::exp(v); }));
      },
      "elu");
}

Tensor leaky_relu(const Tensor& x, double slope) {
  Mat out = x.value().unaryExpr([slope](double v) { return v >= 0 ? v : slope * v; });
  auto xn = x.node();
  return make_op(
      std::move(out), {x},
      [xn, slope](detail::Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        xn->grad += self.grad.cwiseProduct(
            xn->value.unaryExpr([slope](double v) { return v >= 0 ? 1.0 : slope; }));
      },
      "leaky_relu");
}

Tensor tanh_op(const Tensor& x) {
  Mat out = x.value().array().tanh();
  auto xn = x.node();
  return make_op(
      std::move(out), {x},
      [xn](detail::Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        xn->grad.array() += self.grad.array() * (1.0 - self.value.array().square());
      },
      "tanh");
}

Tensor sigmoid(const Tensor& x) {
  Mat out = x.value().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  auto xn = x.node();
  return make_op(
      std::move(out), {x},
      [xn](detail::Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        xn->grad.array() += self.grad.array() * self.value.array() * (1.0 - self.value.array());
      },
      "sigmoid");
}

Tensor log_op(const Tensor& x) {
  Mat out = x.value().array().log();
  auto xn = x.node();
  return make_op(
      std::move(out), {x},
      [xn](detail::Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        xn->grad.array() += self.grad.array() / xn->value.array();
      },
      "log");
}

Tensor rsqrt(const Tensor& x, double eps) {
  Mat out = (x.value().array() + eps).rsqrt();
  auto xn = x.node();
  return make_op(
      std::move(out), {x},
      [xn](detail::Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        xn->grad.array() += self.grad.array() * (-0.5) * self.value.array().cube();
      },
      "rsqrt");
}

Tensor softmax_rows(const Tensor& x) {
  Mat out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mx = x.value().row(i).maxCoeff();
    Eigen::ArrayXd e = (x.value().row(i).array() - mx).exp();
    out.row(i) = (e / e.sum()).matrix();
  }
  auto xn = x.node();
  return make_op(
      std::move(out), {x},
      [xn](detail::Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (Eigen::Index i = 0; i < self.value.rows(); ++i) {
          const double dot = self.grad.row(i).dot(self.value.row(i));
          xn->grad.row(i).array() +=
              self.value.row(i).array() * (self.grad.row(i).array() - dot);
        }
      },
      "softmax_rows");
}

Tensor masked_softmax(const Tensor& x, const Mat& mask) {
  if (mask.rows() != x.rows() || mask.cols() != x.cols()) shape_fail("masked_softmax", x.value(), mask);
  Mat out = Mat::Zero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (mask(i, j) != 0.0) mx = std::max(mx, x.value()(i, j));
    if (!std::isfinite(mx)) continue;  // fully masked row stays zero
    double z = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (mask(i, j) != 0.0) z += std::exp(x.value()(i, j) - mx);
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (mask(i, j) != 0.0) out(i, j) = std::exp(x.value()(i, j) - mx) / z;
  }
  auto xn = x.node();
  return make_op(
      std::move(out), {x},
      [xn](detail::Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        // Masked entries have value 0, so the softmax backward formula
        // already routes no gradient through them.
        for (Eigen::Index i = 0; i < self.value.rows(); ++i) {
          const double dot = self.grad.row(i).dot(self.value.row(i));
          xn->grad.row(i).array() +=
              self.value.row(i).array() * (self.grad.row(i).array() - dot);
        }
      },
      "masked_softmax");
}

Tensor dropout(const Tensor& x, double p, CounterRng& rng, bool training) {
  if (p < 0.0 || p >= 1.0) throw ParameterError("dropout: p must be in [0, 1), got " + std::to_string(p));
  if (!training || p == 0.0) return x;
  Mat keep(x.rows(), x.cols());
  const double inv = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) keep(i, j) = rng.bernoulli(p) ? 0.0 : inv;
  auto xn = x.node();
  return make_op(
      x.value().cwiseProduct(keep), {x},
      [xn, keep](detail::Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        xn->grad += self.grad.cwiseProduct(keep);
      },
      "dropout");
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw UsageError("concat_cols: empty input list");
  Eigen::Index rows = xs.front().rows();
  Eigen::Index cols = 0;
  for (const auto& t : xs) {
    if (t.rows() != rows) shape_fail("concat_cols", xs.front().value(), t.value());
    cols += t.cols();
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& t : xs) {
    out.middleCols(at, t.cols()) = t.value();
    at += t.cols();
  }
  std::vector<std::shared_ptr<detail::Node>> nodes;
  for (const auto& t : xs) nodes.push_back(t.node());
  return make_op(
      std::move(out), xs,
      [nodes](detail::Node& self) {
        Eigen::Index at = 0;
        for (const auto& n : nodes) {
          if (n->requires_grad) {
            n->ensure_grad();
            n->grad += self.grad.middleCols(at, n->value.cols());
          }
          at += n->value.cols();
        }
      },
      "concat_cols");
}

Tensor concat_rows(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw UsageError("concat_rows: empty input list");
  Eigen::Index cols = xs.front().cols();
  Eigen::Index rows = 0;
  for (const auto& t : xs) {
    if (t.cols() != cols) shape_fail("concat_rows", xs.front().value(), t.value());
    rows += t.rows();
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& t : xs) {
    out.middleRows(at, t.rows()) = t.value();
    at += t.rows();
  }
  std::vector<std::shared_ptr<detail::Node>> nodes;
  for (const auto& t : xs) nodes.push_back(t.node());
  return make_op(
      std::move(out), xs,
      [nodes](detail::Node& self) {
        Eigen::Index at = 0;
        for (const auto& n : nodes) {
          if (n->requires_grad) {
            n->ensure_grad();
            n->grad += self.grad.middleRows(at, n->value.rows());
          }
          at += n->value.rows();
        }
      },
      "concat_rows");
}

Tensor slice_cols(const Tensor& x, Eigen::Index start, Eigen::Index len) {
  if (start < 0 || len < 0 || start + len > x.cols())
    throw ShapeError("slice_cols: range [" + std::to_string(start) + ", " + std::to_string(start + len) +
                     ") out of bounds for " + shape_str(x.value()));
  auto xn = x.node();
  return make_op(
      x.value().middleCols(start, len), {x},
      [xn, start, len](detail::Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        xn->grad.middleCols(start, len) += self.grad;
      },
      "slice_cols");
}

Tensor mean_rows(const Tensor& x) {
  if (x.rows() == 0) throw ShapeError("mean_rows: empty tensor");
  Mat out = x.value().colwise().mean();
  auto xn = x.node();
  return make_op(
      std::move(out), {x},
      [xn](detail::Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const double inv = 1.0 / static_cast<double>(xn->value.rows());
        xn->grad += (self.grad * inv).replicate(xn->value.rows(), 1);
      },
      "mean_rows");
}

Tensor sum_all(const Tensor& x) {
  Mat out(1, 1);
  out(0, 0) = x.value().sum();
  auto xn = x.node();
  return make_op(
      std::move(out), {x},
      [xn](detail::Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        xn->grad.array() += self.grad(0, 0);
      },
      "sum_all");
}

Tensor gather_rows(const Tensor& x, const std::vector<Eigen::Index>& idx) {
  Mat out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= x.rows())
      throw UsageError("gather_rows: index " + std::to_string(idx[i]) + " out of range for " +
                       std::to_string(x.rows()) + " rows");
    out.row(static_cast<Eigen::Index>(i)) = x.value().row(idx[i]);
  }
  auto xn = x.node();
  return make_op(
      std::move(out), {x},
      [xn, idx](detail::Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < idx.size(); ++i)
          xn->grad.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
      },
      "gather_rows");
}

Tensor scatter_add_rows(const Tensor& x, const std::vector<Eigen::Index>& idx, Eigen::Index out_rows) {
  if (static_cast<Eigen::Index>(idx.size()) != x.rows())
    throw ShapeError("scatter_add_rows: " + std::to_string(idx.size()) + " indices for " +
                     std::to_string(x.rows()) + " rows");
  Mat out = Mat::Zero(out_rows, x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= out_rows)
      throw UsageError("scatter_add_rows: index " + std::to_string(idx[i]) + " out of range");
    out.row(idx[i]) += x.value().row(static_cast<Eigen::Index>(i));
  }
  auto xn = x.node();
  return make_op(
      std::move(out), {x},
      [xn, idx](detail::Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < idx.size(); ++i)
          xn->grad.row(static_cast<Eigen::Index>(i)) += self.grad.row(idx[i]);
      },
      "scatter_add_rows");
}

Tensor rowscale(const Tensor& x, const Tensor& s) {
  if (s.cols() != 1 || s.rows() != x.rows()) shape_fail("rowscale", x.value(), s.value());
  Mat out = x.value().array().colwise() * s.value().col(0).array();
  auto xn = x.node();
  auto sn = s.node();
  return make_op(
      std::move(out), {x, s},
      [xn, sn](detail::Node& self) {
        if (xn->requires_grad) {
          xn->ensure_grad();
          xn->grad.array() += self.grad.array().colwise() * sn->value.col(0).array();
        }
        if (sn->requires_grad) {
          sn->ensure_grad();
          sn->grad.col(0) += self.grad.cwiseProduct(xn->value).rowwise().sum();
        }
      },
      "rowscale");
}

Tensor segment_softmax(const Tensor& scores, const std::vector<Eigen::Index>& segment,
                       Eigen::Index n_segments) {
  if (scores.cols() != 1 || static_cast<Eigen::Index>(segment.size()) != scores.rows())
    throw ShapeError("segment_softmax: scores must be m x 1 with one segment id per row");
  const Eigen::Index m = scores.rows();
  std::vector<double> seg_max(n_segments, -std::numeric_limits<double>::infinity());
  for (Eigen::Index e = 0; e < m; ++e) {
    if (segment[e] < 0 || segment[e] >= n_segments) throw UsageError("segment_softmax: segment id out of range");
    seg_max[segment[e]] = std::max(seg_max[segment[e]], scores.value()(e, 0));
  }
  std::vector<double> seg_sum(n_segments, 0.0);
  Mat out(m, 1);
  for (Eigen::Index e = 0; e < m; ++e) {
    out(e, 0) = std::exp(scores.value()(e, 0) - seg_max[segment[e]]);
    seg_sum[segment[e]] += out(e, 0);
  }
  for (Eigen::Index e = 0; e < m; ++e) out(e, 0) /= seg_sum[segment[e]];
  auto sn = scores.node();
  return make_op(
      std::move(out), {scores},
      [sn, segment, n_segments](detail::Node& self) {
        if (!sn->requires_grad) return;
        sn->ensure_grad();
        std::vector<double> seg_dot(n_segments, 0.0);
        for (Eigen::Index e = 0; e < self.value.rows(); ++e)
          seg_dot[segment[e]] += self.grad(e, 0) * self.value(e, 0);
        for (Eigen::Index e = 0; e < self.value.rows(); ++e)
          sn->grad(e, 0) += self.value(e, 0) * (self.grad(e, 0) - seg_dot[segment[e]]);
      },
      "segment_softmax");
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows())
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(logits.rows()) + " logit rows");
  const Eigen::Index n = logits.rows();
  const Eigen::Index c = logits.cols();
  Mat probs(n, c);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= c)
      throw InputError("cross_entropy: label " + std::to_string(labels[i]) + " out of range for " +
                       std::to_string(c) + " classes");
    const double mx = logits.value().row(i).maxCoeff();
    Eigen::ArrayXd e = (logits.value().row(i).array() - mx).exp();
    const double z = e.sum();
    probs.row(i) = (e / z).matrix();
    loss += std::log(z) + mx - logits.value()(i, labels[i]);
  }
  Mat out(1, 1);
  out(0, 0) = loss / static_cast<double>(n);
  auto ln = logits.node();
  return make_op(
      std::move(out), {logits},
      [ln, labels, probs](detail::Node& self) {
        if (!ln->requires_grad) return;
        ln->ensure_grad();
        const double g = self.grad(0, 0) / static_cast<double>(probs.rows());
        ln->grad += g * probs;
        for (Eigen::Index i = 0; i < probs.rows(); ++i) ln->grad(i, labels[i]) -= g;
      },
      "cross_entropy");
}

// --- optimizer ---------------------------------------------------------------

void adam_step(Mat& param, const Mat& grad, AdamState& state, double lr, double weight_decay,
               double beta1, double beta2, double eps) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols())
    shape_fail("adam_step", param, grad);
  if (state.step == 0) {
    state.m = Mat::Zero(param.rows(), param.cols());
    state.v = Mat::Zero(param.rows(), param.cols());
  }
  ++state.step;
  Mat g = grad;
  if (weight_decay != 0.0) g += weight_decay * param;
  state.m = beta1 * state.m + (1.0 - beta1) * g;
  state.v = beta2 * state.v + (1.0 - beta2) * g.cwiseProduct(g);
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  param.array() -= lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + eps);
}

Mat glorot_uniform(Eigen::Index rows, Eigen::Index cols, CounterRng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = (2.0 * rng.u01() - 1.0) * limit;
  return m;
}

}  // namespace metaxplain
