#include "pvfl/qnet.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

#include "pvfl/seeds.hpp"

namespace pvfl::qnet {

using num::Graph;
using num::Mask;
using num::Tensor;
using num::Var;

ProjectionMatrix::ProjectionMatrix(std::size_t d_feat, std::size_t d_model, std::uint64_t seed)
    : d_feat_(d_feat), d_model_(d_model), seed_(seed), p_(d_feat * d_model) {
  if (d_feat == 0 || d_model == 0) throw std::invalid_argument("projection: dimensions must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& x : p_) x = normal(rng);
}

std::vector<double> random_project(std::span<const double> w, const ProjectionMatrix& projection) {
  if (w.size() != projection.d_model()) {
    throw std::invalid_argument("random_project: vector has length " + std::to_string(w.size()) + ", projection expects " +
                                std::to_string(projection.d_model()));
  }
  const double inv = 1.0 / static_cast<double>(projection.d_feat());
  std::vector<double> out(projection.d_feat());
  for (std::size_t r = 0; r < out.size(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < w.size(); ++c) acc += projection.entry(r, c) * w[c];
    out[r] = inv * acc;
  }
  return out;
}

namespace {

Tensor glorot(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<double> v(in * out);
  for (double& x : v) x = u(rng);
  return Tensor::matrix(in, out, std::move(v));
}

TwoLayer<Tensor> make_two_layer(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
  return {glorot(in, hidden, rng), Tensor::zeros({1, hidden}), glorot(hidden, out, rng), Tensor::zeros({1, out})};
}

AttentionWeights<Tensor> make_attention(std::size_t d_token, std::size_t heads, Rng& rng) {
  AttentionWeights<Tensor> a;
  const std::size_t d_head = d_token / heads;
  for (std::size_t h = 0; h < heads; ++h) {
    a.wq.push_back(glorot(d_token, d_head, rng));
    a.wk.push_back(glorot(d_token, d_head, rng));
    a.wv.push_back(glorot(d_token, d_head, rng));
  }
  return a;
}

Tensor sinusoidal(std::size_t positions, std::size_t dim) {
  std::vector<double> v(positions * dim);
  for (std::size_t p = 0; p < positions; ++p) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(dim));
      const double angle = static_cast<double>(p) * freq;
      v[p * dim + i] = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor::matrix(positions, dim, std::move(v));
}

void check_config(const QNetConfig& c) {
  if (c.d_feat == 0 || c.d_token == 0 || c.num_clients == 0 || c.max_history == 0 || c.heads == 0) {
    throw std::invalid_argument("qnet: d_feat, d_token, heads, num_clients and max_history must be positive");
  }
  if (c.d_token % c.heads != 0) throw std::invalid_argument("qnet: d_token must be divisible by heads");
}

}  // namespace

QNetState::QNetState(QNetConfig config, std::uint64_t seed) : config_(config), seed_(seed) {
  check_config(config_);
  Rng rng(seed);
  const std::size_t d = config_.d_token;
  const std::size_t head_in = d + config_.d_emb;
  weights_.encoder = make_two_layer(config_.d_feat, d, d, rng);
  weights_.spatial = make_attention(d, config_.heads, rng);
  weights_.temporal = make_attention(d, config_.heads, rng);
  weights_.cross = make_attention(d, config_.heads, rng);
  if (config_.d_emb > 0) {
    std::normal_distribution<double> normal(0.0, 0.02);
    std::vector<double> e(config_.num_clients * config_.d_emb);
    for (double& x : e) x = normal(rng);
    weights_.embedding.push_back(Tensor::matrix(config_.num_clients, config_.d_emb, std::move(e)));
  }
  weights_.value = make_two_layer(head_in, d, 1, rng);
  weights_.advantage = make_two_layer(head_in, d, 1, rng);
  positional_ = sinusoidal(config_.max_history, d);
}

std::vector<Tensor*> QNetState::parameters() {
  std::vector<Tensor*> out;
  weights_.visit([&out](Tensor& t) { out.push_back(&t); });
  return out;
}

std::vector<const Tensor*> QNetState::parameters() const {
  std::vector<const Tensor*> out;
  weights_.visit([&out](const Tensor& t) { out.push_back(&t); });
  return out;
}

std::size_t QNetState::parameter_count() const {
  std::size_t n = 0;
  weights_.visit([&n](const Tensor& t) { n += t.size(); });
  return n;
}

// Checkpoint layout, all integers and doubles little-endian:
//   "PVQN" | u32 version (1) | u64 d_feat, d_token, d_emb, heads, num_clients,
//   max_history, seed, value_count | value_count f64 in weight visit order.
namespace {

constexpr char kMagic[4] = {'P', 'V', 'Q', 'N'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void QNetState::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot write " + path.string());
  os.write(kMagic, 4);
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((kVersion >> (8 * i)) & 0xff));
  for (std::uint64_t v : {config_.d_feat, config_.d_token, config_.d_emb, config_.heads, config_.num_clients,
                          config_.max_history}) {
    put_u64(os, v);
  }
  put_u64(os, seed_);
  put_u64(os, parameter_count());
  weights_.visit([&os](const Tensor& t) {
    for (double x : t.data()) put_u64(os, std::bit_cast<std::uint64_t>(x));
  });
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

QNetState QNetState::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[4];
  unsigned char ver[4];
  if (!is.read(magic, 4) || !is.read(reinterpret_cast<char*>(ver), 4)) throw std::runtime_error("checkpoint: truncated header");
  if (std::string(magic, 4) != std::string(kMagic, 4)) throw std::runtime_error("checkpoint: bad magic in " + path.string());
  const std::uint32_t version = ver[0] | (ver[1] << 8) | (ver[2] << 16) | (static_cast<std::uint32_t>(ver[3]) << 24);
  if (version != kVersion) throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  QNetConfig c;
  c.d_feat = get_u64(is);
  c.d_token = get_u64(is);
  c.d_emb = get_u64(is);
  c.heads = get_u64(is);
  c.num_clients = get_u64(is);
  c.max_history = get_u64(is);
  const std::uint64_t seed = get_u64(is);
  const std::uint64_t count = get_u64(is);
  QNetState state(c, seed);
  if (count != state.parameter_count()) throw std::runtime_error("checkpoint: value count does not match header dimensions");
  state.weights_.visit([&is](Tensor& t) {
    for (double& x : t.data()) x = std::bit_cast<double>(get_u64(is));
    num::require_finite(t, "checkpoint");
  });
  return state;
}

void soft_update(const QNetState& online, QNetState& target, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("soft_update: tau must be in [0, 1]");
  if (!(online.config() == target.config())) throw std::invalid_argument("soft_update: network structures differ");
  auto src = online.parameters();
  auto dst = target.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto s = src[i]->data();
    auto d = dst[i]->data();
    for (std::size_t j = 0; j < s.size(); ++j) d[j] = tau * s[j] + (1.0 - tau) * d[j];
  }
}

double squared_distance(const QNetState& a, const QNetState& b) {
  if (!(a.config() == b.config())) throw std::invalid_argument("squared_distance: network structures differ");
  auto pa = a.parameters();
  auto pb = b.parameters();
  double s = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (std::size_t j = 0; j < pa[i]->size(); ++j) {
      const double d = pa[i]->data()[j] - pb[i]->data()[j];
      s += d * d;
    }
  }
  return s;
}

BoundQNet bind(Graph& graph, const QNetState& state, bool trainable) {
  BoundQNet net;
  net.state = &state;
  auto leaf = [&](const Tensor& t) {
    Var v = trainable ? graph.param(t) : graph.constant(t);
    net.leaves.push_back(v);
    return v;
  };
  const auto& w = state.weights();
  auto two = [&](const TwoLayer<Tensor>& m) { return TwoLayer<Var>{leaf(m.w1), leaf(m.b1), leaf(m.w2), leaf(m.b2)}; };
  auto attn = [&](const AttentionWeights<Tensor>& a) {
    AttentionWeights<Var> out;
    for (std::size_t h = 0; h < a.wq.size(); ++h) {
      out.wq.push_back(leaf(a.wq[h]));
      out.wk.push_back(leaf(a.wk[h]));
      out.wv.push_back(leaf(a.wv[h]));
    }
    return out;
  };
  // Same order as QNetWeights::visit.
  net.weights.encoder = two(w.encoder);
  net.weights.spatial = attn(w.spatial);
  net.weights.temporal = attn(w.temporal);
  net.weights.cross = attn(w.cross);
  for (const Tensor& e : w.embedding) net.weights.embedding.push_back(leaf(e));
  net.weights.value = two(w.value);
  net.weights.advantage = two(w.advantage);
  net.positional = graph.constant(state.positional_encoding());
  return net;
}

Var attention(const AttentionWeights<Var>& w, Var queries, Var keys_values, const Mask* mask) {
  if (w.wq.empty()) throw std::invalid_argument("attention: no heads");
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(w.wq[0].value().cols()));
  Var out;
  for (std::size_t h = 0; h < w.wq.size(); ++h) {
    Var q = num::matmul(queries, w.wq[h]);
    Var k = num::matmul(keys_values, w.wk[h]);
    Var v = num::matmul(keys_values, w.wv[h]);
    Var scores = num::scale(num::matmul(q, num::transpose(k)), inv_sqrt);
    Var head = num::matmul(num::softmax_rows(scores, mask), v);
    out = h == 0 ? head : num::concat_cols(out, head);
  }
  return out;
}

namespace {

Var two_layer(const TwoLayer<Var>& m, Var x) {
  Var h = num::tanh(num::add_row(num::matmul(x, m.w1), m.b1));
  return num::add_row(num::matmul(h, m.w2), m.b2);
}

Var encode(const TwoLayer<Var>& m, Var x) { return num::layer_norm(two_layer(m, x)); }

Tensor rows_to_tensor(const std::vector<std::vector<double>>& rows) {
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return Tensor::matrix(rows.size(), rows.front().size(), std::move(flat));
}

}  // namespace

void validate(const QNetConfig& config, const QInput& input) {
  if (input.history.empty() || input.history.size() > config.max_history) {
    throw std::invalid_argument("qnet: history length " + std::to_string(input.history.size()) + " outside [1, " +
                                std::to_string(config.max_history) + "]");
  }
  if (input.cluster.empty()) throw std::invalid_argument("qnet: empty cluster");
  if (input.cluster.size() != input.ids.size()) throw std::invalid_argument("qnet: cluster features and IDs differ in length");
  for (const auto& h : input.history) {
    if (h.size() != config.d_feat) throw std::invalid_argument("qnet: history feature has wrong dimension");
  }
  for (const auto& c : input.cluster) {
    if (c.size() != config.d_feat) throw std::invalid_argument("qnet: cluster feature has wrong dimension");
  }
  std::set<int> seen;
  for (int id : input.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= config.num_clients) {
      throw std::invalid_argument("qnet: unknown client ID " + std::to_string(id));
    }
    if (!seen.insert(id).second) throw std::invalid_argument("qnet: duplicate client ID " + std::to_string(id));
  }
}

QForward q_forward(const BoundQNet& net, Var history, Var cluster, std::span<const int> ids) {
  const QNetConfig& cfg = net.state->config();
  const std::size_t len = history.value().rows();
  const std::size_t n = cluster.value().rows();
  if (len == 0 || len > cfg.max_history) throw std::invalid_argument("qnet: history length outside [1, max_history]");
  if (n != ids.size()) throw std::invalid_argument("qnet: cluster features and IDs differ in length");
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.num_clients) {
      throw std::invalid_argument("qnet: unknown client ID " + std::to_string(id));
    }
  }
  const auto& w = net.weights;
  QForward out;

  std::vector<std::size_t> positions(len);
  for (std::size_t i = 0; i < len; ++i) positions[i] = i;
  Var hist_tokens = num::add(encode(w.encoder, history), num::gather_rows(net.positional, positions));
  const Mask causal = Mask::causal(len);
  out.temporal = num::add(hist_tokens, attention(w.temporal, hist_tokens, hist_tokens, &causal));

  Var cluster_tokens = encode(w.encoder, cluster);
  out.spatial = num::add(cluster_tokens, attention(w.spatial, cluster_tokens, cluster_tokens));
  out.fused = num::add(out.spatial, attention(w.cross, out.spatial, out.temporal));

  Var adv_in = out.fused;
  Var val_in = num::mean_rows(out.fused);
  if (!w.embedding.empty()) {
    std::vector<std::size_t> rows(ids.begin(), ids.end());
    Var e = num::gather_rows(w.embedding.front(), rows);
    adv_in = num::concat_cols(adv_in, e);
    val_in = num::concat_cols(val_in, num::mean_rows(e));
  }
  out.value = two_layer(w.value, val_in);
  out.advantage = two_layer(w.advantage, adv_in);
  Var centred = num::add_row(out.advantage, num::scale(num::mean_rows(out.advantage), -1.0));
  out.q = num::add_row(centred, out.value);
  return out;
}

QForward q_forward(Graph& graph, const BoundQNet& net, const QInput& input) {
  validate(net.state->config(), input);
  Var history = graph.constant(rows_to_tensor(input.history));
  Var cluster = graph.constant(rows_to_tensor(input.cluster));
  return q_forward(net, history, cluster, input.ids);
}

std::vector<double> q_values(const QNetState& state, const QInput& input) {
  Graph g;
  const BoundQNet net = bind(g, state, false);
  const QForward f = q_forward(g, net, input);
  auto v = f.q.value().data();
  return {v.begin(), v.end()};
}

}  // namespace pvfl::qnet
