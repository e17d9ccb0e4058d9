#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pvfl/fl/classifier.hpp"
#include "pvfl/numerics/autodiff.hpp"
#include "pvfl/numerics/tensor.hpp"

namespace pvfl::qnet {

/// Frozen Gaussian projection P (d_feat x d_model), entries ~ N(0, 1).
class ProjectionMatrix {
 public:
  ProjectionMatrix(std::size_t d_feat, std::size_t d_model, std::uint64_t seed);

  std::size_t d_feat() const { return d_feat_; }
  std::size_t d_model() const { return d_model_; }
  std::uint64_t seed() const { return seed_; }
  double entry(std::size_t r, std::size_t c) const { return p_[r * d_model_ + c]; }

 private:
  std::size_t d_feat_;
  std::size_t d_model_;
  std::uint64_t seed_;
  std::vector<double> p_;
};

/// RP(w) = (1 / d_feat) * P * w. The 1/d_feat factor is deliberate and not
/// norm preserving: E||RP(w)||^2 = ||w||^2 / d_feat.
std::vector<double> random_project(std::span<const double> w, const ProjectionMatrix& projection);
inline std::vector<double> random_project(const fl::ParamVector& w, const ProjectionMatrix& projection) {
  return random_project(std::span<const double>(w.values), projection);
}

struct QNetConfig {
  std::size_t d_feat = 128;
  std::size_t d_token = 64;
  std::size_t d_emb = 16;  // 0 disables the identity embedding
  std::size_t heads = 1;
  std::size_t num_clients = 0;
  std::size_t max_history = 6;  // H + 1 temporal tokens

  bool operator==(const QNetConfig&) const = default;
};

template <class T>
struct TwoLayer {
  T w1, b1, w2, b2;
};

template <class T>
struct AttentionWeights {
  std::vector<T> wq, wk, wv;  // one d_token x (d_token / heads) matrix per head
};

/// All learnable Q-network weights. Field order below is the checkpoint order:
/// encoder, spatial, temporal and cross attention (per head: q, k, v),
/// identity embedding (if any), value head, advantage head.
template <class T>
struct QNetWeights {
  TwoLayer<T> encoder;
  AttentionWeights<T> spatial, temporal, cross;
  std::vector<T> embedding;  // empty or a single num_clients x d_emb table
  TwoLayer<T> value, advantage;

  template <class F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <class F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

 private:
  template <class Self, class F>
  static void visit_impl(Self& self, F& f) {
    auto two = [&f](auto& m) {
      f(m.w1);
      f(m.b1);
      f(m.w2);
      f(m.b2);
    };
    auto attn = [&f](auto& a) {
      for (std::size_t h = 0; h < a.wq.size(); ++h) {
        f(a.wq[h]);
        f(a.wk[h]);
        f(a.wv[h]);
      }
    };
    two(self.encoder);
    attn(self.spatial);
    attn(self.temporal);
    attn(self.cross);
    for (auto& e : self.embedding) f(e);
    two(self.value);
    two(self.advantage);
  }
};

/// Learnable state of the spatio-temporal attention Q-network.
class QNetState {
 public:
  /// Glorot-uniform matrices, zero biases, embedding ~ N(0, 0.02^2).
  QNetState(QNetConfig config, std::uint64_t seed);

  const QNetConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  QNetWeights<num::Tensor>& weights() { return weights_; }
  const QNetWeights<num::Tensor>& weights() const { return weights_; }

  std::vector<num::Tensor*> parameters();
  std::vector<const num::Tensor*> parameters() const;
  std::size_t parameter_count() const;

  /// Sinusoidal table, max_history x d_token.
  const num::Tensor& positional_encoding() const { return positional_; }

  void save(const std::filesystem::path& path) const;
  static QNetState load(const std::filesystem::path& path);

 private:
  QNetConfig config_;
  std::uint64_t seed_;
  QNetWeights<num::Tensor> weights_;
  num::Tensor positional_;
};

/// target <- tau * online + (1 - tau) * target, parameter-wise.
void soft_update(const QNetState& online, QNetState& target, double tau);

/// Squared L2 distance between two structurally identical states.
double squared_distance(const QNetState& a, const QNetState& b);

/// Q-network input for one round.
struct QInput {
  std::vector<std::vector<double>> history;  // global features, oldest first
  std::vector<std::vector<double>> cluster;  // one feature vector per visible client
  std::vector<int> ids;                      // client ID of each cluster row
};

/// Weights placed on a Graph as leaves.
struct BoundQNet {
  const QNetState* state = nullptr;
  QNetWeights<num::Var> weights;
  std::vector<num::Var> leaves;  // visit order
  num::Var positional;
};

BoundQNet bind(num::Graph& graph, const QNetState& state, bool trainable);

/// Scaled dot-product attention with learnable projections:
/// concat_h softmax(Xq Wq_h (Xkv Wk_h)^T / sqrt(d_head), mask) Xkv Wv_h.
num::Var attention(const AttentionWeights<num::Var>& w, num::Var queries, num::Var keys_values,
                   const num::Mask* mask = nullptr);

struct QForward {
  num::Var q;          // |C| x 1, aligned with the input ids
  num::Var value;      // 1 x 1
  num::Var advantage;  // |C| x 1, before centring
  num::Var spatial;    // |C| x d_token
  num::Var temporal;   // L x d_token
  num::Var fused;      // |C| x d_token
};

/// history: L x d_feat (oldest first), cluster: |C| x d_feat.
QForward q_forward(const BoundQNet& net, num::Var history, num::Var cluster, std::span<const int> ids);
QForward q_forward(num::Graph& graph, const BoundQNet& net, const QInput& input);

/// Per-client Q values without gradient tracking.
std::vector<double> q_values(const QNetState& state, const QInput& input);

void validate(const QNetConfig& config, const QInput& input);

}  // namespace pvfl::qnet
