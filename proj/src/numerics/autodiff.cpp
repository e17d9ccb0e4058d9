#include "pvfl/numerics/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pvfl::num {

const Tensor& Var::value() const { return graph_->value_of(id_); }
bool Var::requires_grad() const { return graph_->needs_grad(id_); }

Mask::Mask(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), blocked_(rows * cols, 0) {}

Mask Mask::causal(std::size_t n) {
  Mask m(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = r + 1; c < n; ++c) m.block(r, c);
  }
  return m;
}

Var Graph::push_leaf(Tensor value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.leaf = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) { return push_leaf(std::move(value), false); }
Var Graph::param(Tensor value) { return push_leaf(std::move(value), true); }

Var Graph::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn, const char* op) {
  require_finite(value, op);
  Node node;
  node.value = std::move(value);
  node.requires_grad = std::any_of(inputs.begin(), inputs.end(), [this](std::size_t i) { return nodes_[i].requires_grad; });
  if (node.requires_grad) node.backward = std::move(fn);
  node.inputs = std::move(inputs);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Graph::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph_ != this) throw NumericError("backward: loss belongs to a different graph");
  const Tensor& lv = nodes_[loss.id_].value;
  if (lv.size() != 1) throw NumericError("backward: loss must be a scalar, got shape " + shape_to_string(lv.shape()));
  if (nodes_[loss.id_].consumed) throw NumericError("backward: graph already consumed; run a new forward pass");

  for (std::size_t i = 0; i <= loss.id_; ++i) {
    nodes_[i].grad = Tensor();
    if (nodes_[i].leaf && nodes_[i].requires_grad) grad_of(i);
  }
  if (nodes_[loss.id_].requires_grad) {
    grad_of(loss.id_).data()[0] = 1.0;
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.leaf || !n.requires_grad || n.grad.size() == 0) continue;
      if (n.consumed || !n.backward) throw NumericError("backward: path crosses a consumed node");
      n.backward(*this, i);
    }
  }
  for (std::size_t i = 0; i <= loss.id_; ++i) {
    Node& n = nodes_[i];
    n.consumed = true;
    if (!n.leaf) {
      n.backward = nullptr;
      n.grad = Tensor();
    }
  }
}

const Tensor* Graph::grad(Var v) const {
  const Node& n = nodes_.at(v.id_);
  if (!n.leaf || !n.requires_grad || n.grad.size() == 0) return nullptr;
  return &n.grad;
}

namespace {

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got shape " + shape_to_string(t.shape()));
}

void require_same_graph(Var a, Var b, const char* op) {
  if (&a.graph() != &b.graph()) throw ShapeError(std::string(op) + ": operands live on different graphs");
}

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_to_string(a.shape()) + " and " +
                   shape_to_string(b.shape()));
}

// c += a * b for row-major (m x k) * (k x n).
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_graph(a, b, "matmul");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_rank2(A, "matmul");
  require_rank2(B, "matmul");
  if (A.cols() != B.rows()) shape_mismatch("matmul", A, B);
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  std::vector<double> out(m * n, 0.0);
  gemm_acc(A.data().data(), B.data().data(), out.data(), m, k, n);
  return a.graph().record(
      Tensor::matrix(m, n, std::move(out)), {a.id(), b.id()},
      [m, k, n](Graph& g, std::size_t self) {
        const std::size_t ia = g.inputs_of(self)[0], ib = g.inputs_of(self)[1];
        const Tensor& G = g.grad_of(self);
        const Tensor& A = g.value_of(ia);
        const Tensor& B = g.value_of(ib);
        if (g.needs_grad(ia)) {
          // dA = G * B^T
          double* da = g.grad_of(ia).data().data();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += G(i, j) * B(p, j);
              da[i * k + p] += acc;
            }
          }
        }
        if (g.needs_grad(ib)) {
          // dB = A^T * G
          double* db = g.grad_of(ib).data().data();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const double aip = A(i, p);
              for (std::size_t j = 0; j < n; ++j) db[p * n + j] += aip * G(i, j);
            }
          }
        }
      },
      "matmul");
}

Var transpose(Var a) {
  const Tensor& A = a.value();
  require_rank2(A, "transpose");
  const std::size_t m = A.rows(), n = A.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = A(i, j);
  return a.graph().record(
      Tensor::matrix(n, m, std::move(out)), {a.id()},
      [m, n](Graph& g, std::size_t self) {
        const std::size_t ia = g.inputs_of(self)[0];
        const Tensor& G = g.grad_of(self);
        Tensor& da = g.grad_of(ia);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) da(i, j) += G(j, i);
      },
      "transpose");
}

namespace {

Var elementwise_binary(Var a, Var b, const char* op, int kind) {
  require_same_graph(a, b, op);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_rank2(A, op);
  if (!A.same_shape(B)) shape_mismatch(op, A, B);
  std::vector<double> out(A.size());
  auto x = A.data();
  auto y = B.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = kind == 0 ? x[i] + y[i] : kind == 1 ? x[i] - y[i] : x[i] * y[i];
  }
  return a.graph().record(
      Tensor(A.shape(), std::move(out)), {a.id(), b.id()},
      [kind](Graph& g, std::size_t self) {
        const std::size_t ia = g.inputs_of(self)[0], ib = g.inputs_of(self)[1];
        auto G = g.grad_of(self).data();
        if (g.needs_grad(ia)) {
          auto da = g.grad_of(ia).data();
          auto y = g.value_of(ib).data();
          for (std::size_t i = 0; i < G.size(); ++i) da[i] += kind == 2 ? G[i] * y[i] : G[i];
        }
        if (g.needs_grad(ib)) {
          auto db = g.grad_of(ib).data();
          auto x = g.value_of(ia).data();
          for (std::size_t i = 0; i < G.size(); ++i) db[i] += kind == 0 ? G[i] : kind == 1 ? -G[i] : G[i] * x[i];
        }
      },
      op);
}

}  // namespace

Var add(Var a, Var b) { return elementwise_binary(a, b, "add", 0); }
Var sub(Var a, Var b) { return elementwise_binary(a, b, "sub", 1); }
Var mul(Var a, Var b) { return elementwise_binary(a, b, "mul", 2); }

Var add_row(Var a, Var row) {
  require_same_graph(a, row, "add_row");
  const Tensor& A = a.value();
  const Tensor& R = row.value();
  require_rank2(A, "add_row");
  require_rank2(R, "add_row");
  if (R.rows() != 1 || R.cols() != A.cols()) shape_mismatch("add_row", A, R);
  const std::size_t m = A.rows(), n = A.cols();
  std::vector<double> out(A.values());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += R(0, j);
  return a.graph().record(
      Tensor::matrix(m, n, std::move(out)), {a.id(), row.id()},
      [m, n](Graph& g, std::size_t self) {
        const std::size_t ia = g.inputs_of(self)[0], ir = g.inputs_of(self)[1];
        const Tensor& G = g.grad_of(self);
        if (g.needs_grad(ia)) {
          auto da = g.grad_of(ia).data();
          for (std::size_t i = 0; i < G.size(); ++i) da[i] += G.data()[i];
        }
        if (g.needs_grad(ir)) {
          auto dr = g.grad_of(ir).data();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) dr[j] += G(i, j);
        }
      },
      "add_row");
}

Var scale(Var a, double s) {
  const Tensor& A = a.value();
  require_rank2(A, "scale");
  std::vector<double> out(A.values());
  for (double& x : out) x *= s;
  return a.graph().record(
      Tensor(A.shape(), std::move(out)), {a.id()},
      [s](Graph& g, std::size_t self) {
        auto G = g.grad_of(self).data();
        auto da = g.grad_of(g.inputs_of(self)[0]).data();
        for (std::size_t i = 0; i < G.size(); ++i) da[i] += s * G[i];
      },
      "scale");
}

Var softmax_rows(Var a, const Mask* mask) {
  const Tensor& A = a.value();
  require_rank2(A, "softmax_rows");
  const std::size_t m = A.rows(), n = A.cols();
  if (mask && (mask->rows() != m || mask->cols() != n)) {
    throw ShapeError("softmax_rows: mask shape [" + std::to_string(mask->rows()) + ", " + std::to_string(mask->cols()) +
                     "] does not match scores " + shape_to_string(A.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (!(mask && mask->blocked(i, j))) mx = std::max(mx, A(i, j));
    }
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw NumericError("softmax_rows: row " + std::to_string(i) + " is fully masked");
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask && mask->blocked(i, j)) continue;
      out[i * n + j] = std::exp(A(i, j) - mx);
      z += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  return a.graph().record(
      Tensor::matrix(m, n, std::move(out)), {a.id()},
      [m, n](Graph& g, std::size_t self) {
        const Tensor& P = g.value_of(self);
        const Tensor& G = g.grad_of(self);
        Tensor& da = g.grad_of(g.inputs_of(self)[0]);
        for (std::size_t i = 0; i < m; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < n; ++j) dot += P(i, j) * G(i, j);
          for (std::size_t j = 0; j < n; ++j) da(i, j) += P(i, j) * (G(i, j) - dot);
        }
      },
      "softmax_rows");
}

Var layer_norm(Var a, double eps) {
  const Tensor& A = a.value();
  require_rank2(A, "layer_norm");
  const std::size_t m = A.rows(), n = A.cols();
  std::vector<double> out(m * n);
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += A(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (A(i, j) - mean) * (A(i, j) - mean);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = (A(i, j) - mean) * inv_std[i];
  }
  return a.graph().record(
      Tensor::matrix(m, n, std::move(out)), {a.id()},
      [m, n, inv_std = std::move(inv_std)](Graph& g, std::size_t self) {
        const Tensor& Y = g.value_of(self);
        const Tensor& G = g.grad_of(self);
        Tensor& da = g.grad_of(g.inputs_of(self)[0]);
        const double dn = static_cast<double>(n);
        for (std::size_t i = 0; i < m; ++i) {
          double mean_g = 0.0, mean_gy = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            mean_g += G(i, j);
            mean_gy += G(i, j) * Y(i, j);
          }
          mean_g /= dn;
          mean_gy /= dn;
          for (std::size_t j = 0; j < n; ++j) da(i, j) += inv_std[i] * (G(i, j) - mean_g - Y(i, j) * mean_gy);
        }
      },
      "layer_norm");
}

Var relu(Var a) {
  const Tensor& A = a.value();
  require_rank2(A, "relu");
  std::vector<double> out(A.values());
  for (double& x : out) x = x > 0.0 ? x : 0.0;
  return a.graph().record(
      Tensor(A.shape(), std::move(out)), {a.id()},
      [](Graph& g, std::size_t self) {
        const std::size_t ia = g.inputs_of(self)[0];
        auto G = g.grad_of(self).data();
        auto x = g.value_of(ia).data();
        auto da = g.grad_of(ia).data();
        for (std::size_t i = 0; i < G.size(); ++i) da[i] += x[i] > 0.0 ? G[i] : 0.0;
      },
      "relu");
}

Var tanh(Var a) {
  const Tensor& A = a.value();
  require_rank2(A, "tanh");
  std::vector<double> out(A.values());
  for (double& x : out) x = std::tanh(x);
  return a.graph().record(
      Tensor(A.shape(), std::move(out)), {a.id()},
      [](Graph& g, std::size_t self) {
        auto G = g.grad_of(self).data();
        auto y = g.value_of(self).data();
        auto da = g.grad_of(g.inputs_of(self)[0]).data();
        for (std::size_t i = 0; i < G.size(); ++i) da[i] += G[i] * (1.0 - y[i] * y[i]);
      },
      "tanh");
}

Var concat_cols(Var a, Var b) {
  require_same_graph(a, b, "concat_cols");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_rank2(A, "concat_cols");
  require_rank2(B, "concat_cols");
  if (A.rows() != B.rows()) shape_mismatch("concat_cols", A, B);
  const std::size_t m = A.rows(), na = A.cols(), nb = B.cols();
  std::vector<double> out(m * (na + nb));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < na; ++j) out[i * (na + nb) + j] = A(i, j);
    for (std::size_t j = 0; j < nb; ++j) out[i * (na + nb) + na + j] = B(i, j);
  }
  return a.graph().record(
      Tensor::matrix(m, na + nb, std::move(out)), {a.id(), b.id()},
      [m, na, nb](Graph& g, std::size_t self) {
        const std::size_t ia = g.inputs_of(self)[0], ib = g.inputs_of(self)[1];
        const Tensor& G = g.grad_of(self);
        if (g.needs_grad(ia)) {
          Tensor& da = g.grad_of(ia);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < na; ++j) da(i, j) += G(i, j);
        }
        if (g.needs_grad(ib)) {
          Tensor& db = g.grad_of(ib);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < nb; ++j) db(i, j) += G(i, na + j);
        }
      },
      "concat_cols");
}

Var mean_rows(Var a) {
  const Tensor& A = a.value();
  require_rank2(A, "mean_rows");
  const std::size_t m = A.rows(), n = A.cols();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += A(i, j);
  for (double& x : out) x /= static_cast<double>(m);
  return a.graph().record(
      Tensor::matrix(1, n, std::move(out)), {a.id()},
      [m, n](Graph& g, std::size_t self) {
        const Tensor& G = g.grad_of(self);
        Tensor& da = g.grad_of(g.inputs_of(self)[0]);
        const double w = 1.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) da(i, j) += w * G(0, j);
      },
      "mean_rows");
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  const Tensor& A = a.value();
  require_rank2(A, "gather_rows");
  if (rows.empty()) throw ShapeError("gather_rows: empty row selection");
  const std::size_t n = A.cols();
  std::vector<double> out;
  out.reserve(rows.size() * n);
  for (std::size_t r : rows) {
    if (r >= A.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(r) + " out of range for shape " + shape_to_string(A.shape()));
    }
    for (std::size_t j = 0; j < n; ++j) out.push_back(A(r, j));
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return a.graph().record(
      Tensor::matrix(rows.size(), n, std::move(out)), {a.id()},
      [n, idx = std::move(idx)](Graph& g, std::size_t self) {
        const Tensor& G = g.grad_of(self);
        Tensor& da = g.grad_of(g.inputs_of(self)[0]);
        for (std::size_t i = 0; i < idx.size(); ++i)
          for (std::size_t j = 0; j < n; ++j) da(idx[i], j) += G(i, j);
      },
      "gather_rows");
}

Var sum(Var a) {
  const Tensor& A = a.value();
  require_rank2(A, "sum");
  double s = 0.0;
  for (double x : A.data()) s += x;
  return a.graph().record(
      Tensor::scalar(s), {a.id()},
      [](Graph& g, std::size_t self) {
        const double G = g.grad_of(self).item();
        for (double& d : g.grad_of(g.inputs_of(self)[0]).data()) d += G;
      },
      "sum");
}

Var mse(Var a, Var b) {
  require_same_graph(a, b, "mse");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_rank2(A, "mse");
  if (!A.same_shape(B)) shape_mismatch("mse", A, B);
  double s = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) {
    const double d = A.data()[i] - B.data()[i];
    s += d * d;
  }
  const double count = static_cast<double>(A.size());
  return a.graph().record(
      Tensor::scalar(s / count), {a.id(), b.id()},
      [count](Graph& g, std::size_t self) {
        const std::size_t ia = g.inputs_of(self)[0], ib = g.inputs_of(self)[1];
        const double G = g.grad_of(self).item();
        auto x = g.value_of(ia).data();
        auto y = g.value_of(ib).data();
        const bool ga = g.needs_grad(ia), gb = g.needs_grad(ib);
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double d = 2.0 * (x[i] - y[i]) / count * G;
          if (ga) g.grad_of(ia).data()[i] += d;
          if (gb) g.grad_of(ib).data()[i] -= d;
        }
      },
      "mse");
}

}  // namespace pvfl::num
