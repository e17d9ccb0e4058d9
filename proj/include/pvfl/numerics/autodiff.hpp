#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pvfl/numerics/tensor.hpp"

namespace pvfl::num {

class Graph;

/// Handle to a node recorded on a Graph. Cheap to copy; only valid while the
/// owning Graph is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  bool requires_grad() const;
  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Boolean attention mask; `blocked(r, c)` removes column c from row r's softmax.
class Mask {
 public:
  Mask(std::size_t rows, std::size_t cols);

  /// Lower-triangular mask: row k may only see columns <= k.
  static Mask causal(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool blocked(std::size_t r, std::size_t c) const { return blocked_[r * cols_ + c] != 0; }
  void block(std::size_t r, std::size_t c) { blocked_[r * cols_ + c] = 1; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::uint8_t> blocked_;
};

/// Dynamic reverse-mode tape. Every primitive appends a node; `backward`
/// walks the nodes in reverse insertion order, which is a valid topological
/// order because inputs always exist before the node that consumes them.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Trainable leaf.
  Var param(Tensor value);

  /// Back-propagates from a 1 x 1 loss. Consumes every node up to the loss;
  /// a second call on the same loss is an error.
  void backward(Var loss);

  /// Gradient of a requires_grad leaf after backward(), nullptr otherwise.
  const Tensor* grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

  // Used by the primitive implementations.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn, const char* op);
  const Tensor& value_of(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient accumulator of node `id`, zero-initialised on first access.
  Tensor& grad_of(std::size_t id);
  const std::vector<std::size_t>& inputs_of(std::size_t id) const { return nodes_[id].inputs; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool leaf = false;
    bool consumed = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  Var push_leaf(Tensor value, bool requires_grad);

  std::vector<Node> nodes_;
};

// Primitives. All operands must be rank-2 and live on the same Graph.
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// a (m x n) + row (1 x n), row broadcast over every row of a.
Var add_row(Var a, Var row);
Var scale(Var a, double s);
/// Row-wise softmax; blocked entries get probability exactly zero.
Var softmax_rows(Var a, const Mask* mask = nullptr);
/// Normalises each row to zero mean and unit variance (no affine part).
Var layer_norm(Var a, double eps = 1e-5);
Var relu(Var a);
Var tanh(Var a);
Var concat_cols(Var a, Var b);
/// Mean of the rows of a, returned as 1 x n.
Var mean_rows(Var a);
Var gather_rows(Var a, std::span<const std::size_t> rows);
Var sum(Var a);
/// Mean squared difference, returned as 1 x 1.
Var mse(Var a, Var b);

}  // namespace pvfl::num
