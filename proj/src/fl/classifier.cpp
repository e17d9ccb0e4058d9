#include "pvfl/fl/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace pvfl::fl {

double l2_distance(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("l2_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

Classifier::Classifier(ClassifierSpec spec) : spec_(std::move(spec)) {
  if (spec_.widths.size() < 2) throw std::invalid_argument("classifier: need at least input and output widths");
  for (std::size_t w : spec_.widths) {
    if (w == 0) throw std::invalid_argument("classifier: zero layer width");
  }
  if (spec_.widths.back() < 2) throw std::invalid_argument("classifier: need at least two classes");
  for (std::size_t l = 0; l + 1 < spec_.widths.size(); ++l) num_params_ += (spec_.widths[l] + 1) * spec_.widths[l + 1];
}

void Classifier::check(const ParamVector& params) const {
  if (params.size() != num_params_) {
    throw std::invalid_argument("classifier: parameter vector has " + std::to_string(params.size()) +
                                " entries, expected " + std::to_string(num_params_));
  }
}

ParamVector Classifier::init(std::uint64_t seed) const {
  Rng rng(seed);
  ParamVector p{std::vector<double>(num_params_, 0.0)};
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
    const std::size_t in = spec_.widths[l], out = spec_.widths[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = 0; i < in * out; ++i) p[off + i] = u(rng);
    off += in * out + out;
  }
  return p;
}

std::vector<DenseLayer> Classifier::unflatten(const ParamVector& params) const {
  check(params);
  std::vector<DenseLayer> layers;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
    DenseLayer d;
    d.in = spec_.widths[l];
    d.out = spec_.widths[l + 1];
    d.weight.assign(params.values.begin() + static_cast<std::ptrdiff_t>(off),
                    params.values.begin() + static_cast<std::ptrdiff_t>(off + d.in * d.out));
    off += d.in * d.out;
    d.bias.assign(params.values.begin() + static_cast<std::ptrdiff_t>(off),
                  params.values.begin() + static_cast<std::ptrdiff_t>(off + d.out));
    off += d.out;
    layers.push_back(std::move(d));
  }
  return layers;
}

ParamVector Classifier::flatten(std::span<const DenseLayer> layers) const {
  if (layers.size() + 1 != spec_.widths.size()) throw std::invalid_argument("classifier: wrong number of layers");
  ParamVector p;
  p.values.reserve(num_params_);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& d = layers[l];
    if (d.in != spec_.widths[l] || d.out != spec_.widths[l + 1] || d.weight.size() != d.in * d.out ||
        d.bias.size() != d.out) {
      throw std::invalid_argument("classifier: layer " + std::to_string(l) + " does not match the spec");
    }
    p.values.insert(p.values.end(), d.weight.begin(), d.weight.end());
    p.values.insert(p.values.end(), d.bias.begin(), d.bias.end());
  }
  return p;
}

namespace {

// Activations of every layer for a batch; acts[0] is the input batch,
// acts.back() holds the logits.
struct ForwardPass {
  std::vector<std::vector<double>> acts;
};

ForwardPass forward(const std::vector<std::size_t>& widths, const ParamVector& params, const LabeledDataset& data,
                    std::span<const std::size_t> indices) {
  const std::size_t batch = indices.size();
  ForwardPass fp;
  fp.acts.reserve(widths.size());
  std::vector<double> x(batch * widths[0]);
  for (std::size_t b = 0; b < batch; ++b) {
    auto r = data.row(indices[b]);
    std::copy(r.begin(), r.end(), x.begin() + static_cast<std::ptrdiff_t>(b * widths[0]));
  }
  fp.acts.push_back(std::move(x));
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l], out = widths[l + 1];
    const double* w = params.values.data() + off;
    const double* bias = w + in * out;
    const std::vector<double>& a = fp.acts.back();
    std::vector<double> z(batch * out);
    for (std::size_t b = 0; b < batch; ++b) {
      double* zb = z.data() + b * out;
      std::copy(bias, bias + out, zb);
      const double* ab = a.data() + b * in;
      for (std::size_t i = 0; i < in; ++i) {
        const double ai = ab[i];
        const double* wi = w + i * out;
        for (std::size_t j = 0; j < out; ++j) zb[j] += ai * wi[j];
      }
    }
    if (l + 2 < widths.size()) {
      for (double& v : z) v = std::tanh(v);
    }
    fp.acts.push_back(std::move(z));
    off += in * out + out;
  }
  return fp;
}

}  // namespace

LossAndGrad Classifier::loss_and_grad(const ParamVector& params, const LabeledDataset& data,
                                      std::span<const std::size_t> indices) const {
  check(params);
  if (indices.empty()) throw std::invalid_argument("classifier: empty batch");
  if (data.feature_dim() != input_dim()) throw std::invalid_argument("classifier: feature dimension mismatch");
  const auto& widths = spec_.widths;
  const std::size_t batch = indices.size();
  const std::size_t classes = num_classes();
  ForwardPass fp = forward(widths, params, data, indices);

  LossAndGrad out;
  out.grad.values.assign(num_params_, 0.0);
  // delta = dLoss/dLogits, mean over the batch.
  std::vector<double> delta = fp.acts.back();
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    double* z = delta.data() + b * classes;
    const double mx = *std::max_element(z, z + classes);
    double s = 0.0;
    for (std::size_t j = 0; j < classes; ++j) s += std::exp(z[j] - mx);
    const double log_z = mx + std::log(s);
    const std::size_t y = static_cast<std::size_t>(data.label(indices[b]));
    if (y >= classes) throw std::invalid_argument("classifier: label outside the output layer");
    out.loss += (log_z - z[y]) * inv_b;
    for (std::size_t j = 0; j < classes; ++j) z[j] = (std::exp(z[j] - log_z) - (j == y ? 1.0 : 0.0)) * inv_b;
  }

  std::size_t off = num_params_;
  for (std::size_t l = widths.size() - 1; l-- > 0;) {
    const std::size_t in = widths[l], out_w = widths[l + 1];
    off -= in * out_w + out_w;
    double* gw = out.grad.values.data() + off;
    double* gb = gw + in * out_w;
    const double* w = params.values.data() + off;
    const std::vector<double>& a = fp.acts[l];
    for (std::size_t b = 0; b < batch; ++b) {
      const double* db = delta.data() + b * out_w;
      const double* ab = a.data() + b * in;
      for (std::size_t j = 0; j < out_w; ++j) gb[j] += db[j];
      for (std::size_t i = 0; i < in; ++i) {
        const double ai = ab[i];
        double* gwi = gw + i * out_w;
        for (std::size_t j = 0; j < out_w; ++j) gwi[j] += ai * db[j];
      }
    }
    if (l == 0) break;
    std::vector<double> prev(batch * in, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* db = delta.data() + b * out_w;
      double* pb = prev.data() + b * in;
      const double* ab = a.data() + b * in;
      for (std::size_t i = 0; i < in; ++i) {
        const double* wi = w + i * out_w;
        double acc = 0.0;
        for (std::size_t j = 0; j < out_w; ++j) acc += wi[j] * db[j];
        pb[i] = acc * (1.0 - ab[i] * ab[i]);
      }
    }
    delta = std::move(prev);
  }
  return out;
}

double Classifier::loss(const ParamVector& params, const LabeledDataset& data,
                        std::span<const std::size_t> indices) const {
  check(params);
  if (indices.empty()) throw std::invalid_argument("classifier: empty batch");
  ForwardPass fp = forward(spec_.widths, params, data, indices);
  const std::size_t classes = num_classes();
  double total = 0.0;
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const double* z = fp.acts.back().data() + b * classes;
    const double mx = *std::max_element(z, z + classes);
    double s = 0.0;
    for (std::size_t j = 0; j < classes; ++j) s += std::exp(z[j] - mx);
    total += mx + std::log(s) - z[data.label(indices[b])];
  }
  return total / static_cast<double>(indices.size());
}

std::vector<int> Classifier::predict(const ParamVector& params, const LabeledDataset& data) const {
  check(params);
  if (data.feature_dim() != input_dim()) throw std::invalid_argument("classifier: feature dimension mismatch");
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<int> pred(data.size());
  if (idx.empty()) return pred;
  ForwardPass fp = forward(spec_.widths, params, data, idx);
  const std::size_t classes = num_classes();
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const double* z = fp.acts.back().data() + b * classes;
    pred[b] = static_cast<int>(std::max_element(z, z + classes) - z);
  }
  return pred;
}

}  // namespace pvfl::fl
