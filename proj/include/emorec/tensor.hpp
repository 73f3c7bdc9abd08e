#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "emorec/common.hpp"

namespace emorec {

class Tensor;

// One node of the computation graph. Parents are the operation inputs; the
// backward rule scatters this node's grad into the parents' grads. Nodes form
// a DAG (parents only), so shared_ptr ownership cannot cycle.
struct TensorNode {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily, same length as data
  bool requires_grad = false;
  std::vector<Tensor> parents;
  std::function<void(TensorNode&)> backward;

  std::size_t numel() const { return data.size(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

// Value-semantic handle to a graph node. Copies share the node, which is how
// a node used twice accumulates gradient from both uses.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false);
  static Tensor from(std::vector<double> values, std::vector<std::size_t> shape,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->data.size(); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t extent(std::size_t axis) const { return node_->shape[axis]; }

  // Handle semantics: copies share the node, so mutable access is granted
  // through const handles (as with smart pointers).
  std::vector<double>& data() const { return node_->data; }
  std::vector<double>& grad() const { return node_->grad; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) const { node_->requires_grad = rg; }
  void zero_grad() const { node_->grad.assign(node_->data.size(), 0.0); }

  // Scalar accessors; contract-checked.
  double value() const;
  double at(std::size_t i) const { return node_->data[i]; }
  double at(std::size_t row, std::size_t col) const;

  TensorNode* node() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<TensorNode> node_;

  friend Tensor make_op(std::vector<std::size_t> shape, std::vector<Tensor> parents,
                        std::function<void(TensorNode&)> backward);
};

// Creates a graph node for an operation result. The backward rule is attached
// only when some parent requires grad.
Tensor make_op(std::vector<std::size_t> shape, std::vector<Tensor> parents,
               std::function<void(TensorNode&)> backward);

// ---- primitive operations -------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);

// add/sub/mul/div accept equal shapes, or broadcast a length-n vector across
// the rows of an [m, n] matrix (batch-axis broadcast only).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// Scales row i of x by s[i]; s has shape [rows(x)].
Tensor scale_rows(const Tensor& x, const Tensor& s);

Tensor neg(const Tensor& x);
Tensor add_scalar(const Tensor& x, double c);
Tensor mul_scalar(const Tensor& x, double c);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);  // domain error at non-positive arguments
Tensor sqrt(const Tensor& x);
Tensor relu(const Tensor& x);
// Elementwise max(x, lo); gradient is zero where the clamp is active.
Tensor clamp_min(const Tensor& x, double lo);

Tensor sum(const Tensor& x);   // -> scalar
Tensor mean(const Tensor& x);  // -> scalar
Tensor colsum(const Tensor& x);   // [m, n] -> [n]
Tensor colmean(const Tensor& x);  // [m, n] -> [n]
Tensor rowsum(const Tensor& x);   // [m, n] -> [m]
Tensor rowmean(const Tensor& x);  // [m, n] -> [m]

// Same element count, new shape; gradient passes through unchanged.
Tensor reshape(const Tensor& x, std::vector<std::size_t> shape);

Tensor concat_cols(const Tensor& a, const Tensor& b);           // feature axis
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);

// Softmax over the last axis of [m, n] scores. mask holds 0/1 and does not
// receive gradient; masked positions come out exactly 0 and rows renormalize
// over the unmasked ones. A fully masked row is a contract error.
Tensor softmax_masked(const Tensor& scores, const Tensor& mask);

// out.row(i) = sum_t weights[i, t] * steps[t].row(i). Gradient flows into the
// steps and, when weights requires grad, into the weights. This is the single
// primitive behind attention readout, masked mean pooling and per-item step
// gathering (one-hot weights).
Tensor attend_steps(const std::vector<Tensor>& steps, const Tensor& weights);

// ---- backward -------------------------------------------------------------

// Reverse-mode sweep from a scalar loss. Every reachable requires_grad tensor
// gets its grad accumulated (additively; call zero_grad between steps).
void backward(const Tensor& loss);

// ---- verification oracle ---------------------------------------------------

// Compares the backward-mode gradient of f at x against central finite
// differences coordinate by coordinate and returns the maximum relative error
// with denominator max(|analytic|, |numeric|, 1e-8). f must be deterministic.
double grad_check(const std::function<Tensor(Tensor&)>& f, Tensor& x, double eps);

}  // namespace emorec
