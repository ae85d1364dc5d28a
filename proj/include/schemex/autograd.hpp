#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "schemex/tensor.hpp"

namespace schemex {

/// Named tensors. Used for model parameters and for their gradients, which
/// always share the same names and shapes.
using TensorMap = std::map<std::string, Tensor>;

/// Handle to a value recorded on a Graph.
struct Var {
  std::size_t index = 0;
};

/// Reverse-mode tape. Each op appends a node holding its value and, when
/// recording, a closure that pushes the node's gradient to its inputs.
/// A Graph with recording off is a plain forward evaluator.
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }

  Var constant(Tensor value);
  /// Leaf bound to an externally owned tensor; repeated calls with the same
  /// name return the same node.
  Var parameter(const std::string& name, const Tensor& value);

  const Tensor& value(Var v) const;
  /// Gradient buffer of a node, zero-initialized on first access.
  Tensor& grad(Var v);

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded closure in reverse.
  void backward(Var loss);

  /// Adds the gradient of every parameter leaf into `out` (keyed by name).
  /// Missing entries are created with the parameter's shape.
  void accumulate_parameter_grads(TensorMap& out) const;

  using Backward = std::function<void(Graph&, Var self)>;
  Var push(Tensor value, Backward backward);

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor grad;
    Backward backward;
  };

  bool record_;
  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> params_;
};

namespace ops {

/// Rows `ids` of `table`.
Var gather_rows(Graph& g, Var table, std::span<const std::size_t> ids);
Var add(Graph& g, Var a, Var b);
/// x[n x m] + b broadcast over rows; b has m elements.
Var add_row(Graph& g, Var x, Var b);
/// a[n x k] * b[k x m]
Var matmul(Graph& g, Var a, Var b);
/// a[n x k] * b[m x k]^T
Var matmul_nt(Graph& g, Var a, Var b);
/// x * w + b
Var linear(Graph& g, Var x, Var w, Var b);
/// Exact (erf) GELU.
Var gelu(Graph& g, Var x);
Var layer_norm(Graph& g, Var x, Var gain, Var bias, double eps);
/// Bidirectional multi-head attention over [len x dim] projections.
Var attention(Graph& g, Var q, Var k, Var v, std::size_t heads);
Var concat_cols(Graph& g, Var a, Var b);
Var reshape(Graph& g, Var x, std::vector<std::size_t> shape);
Var scale(Graph& g, Var x, double factor);

/// Mean binary cross-entropy on logits against targets in [0, 1].
Var bce_with_logits(Graph& g, Var logits, const Tensor& targets);
/// Weighted mean: sum(w * bce) / sum(w).
Var bce_with_logits(Graph& g, Var logits, const Tensor& targets, const Tensor& weights);
/// Cross-entropy of a logit vector (any shape, flattened) against a class.
Var softmax_cross_entropy(Graph& g, Var logits, std::size_t target);
/// Sum of scalar nodes.
Var sum(Graph& g, std::span<const Var> terms);

}  // namespace ops

inline constexpr double kLayerNormEps = 1e-9;

}  // namespace schemex
