// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "avsr/error.hpp"
#include "avsr/layers.hpp"

namespace avsr {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

LstmLayer LstmLayer::create(std::size_t in, std::size_t hidden, Rng& rng) {
  if (in == 0 || hidden == 0) throw ParameterError("LSTM sizes must be positive");
  const double s = 1.0 / std::sqrt(static_cast<double>(in + hidden));
  LstmLayer layer{rng_uniform(rng, {4 * hidden, in + hidden}, -s, s), Tensor({4 * hidden})};
  for (std::size_t j = 0; j < hidden; ++j) layer.bias[hidden + j] = 1.0;
  return layer;
}

void LstmLayer::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + "weight", &weight});
  out.push_back({prefix + "bias", &bias});
}

namespace {

template <class Mac>
Tensor lstm_forward_impl(const LstmLayer& layer, const Tensor& xs, const Tensor* h0, const Tensor* c0,
                         LstmCache* cache, Mac& m) {
  const std::size_t hidden = layer.hidden_size(), in = layer.input_size();
  if (xs.rank() != 2 || xs.dim(1) != in) {
    throw DimensionError("lstm_forward: input " + shape_string(xs.shape()) + " vs layer input " +
                         std::to_string(in));
  }
  const std::size_t len = xs.dim(0);
  if (len == 0) throw DimensionError("lstm_forward: empty sequence");
  if ((h0 && h0->size() != hidden) || (c0 && c0->size() != hidden)) {
    throw DimensionError("lstm_forward: initial state size");
  }
  const std::size_t width = in + hidden;
  Tensor gates({len, 4 * hidden});
  Tensor cells({len, hidden});
  Tensor hs({len, hidden});
  std::vector<double> xh(width);
  std::vector<double> h_prev = h0 ? h0->values() : std::vector<double>(hidden, 0.0);
  std::vector<double> c_prev = c0 ? c0->values() : std::vector<double>(hidden, 0.0);
  const double* w = layer.weight.data().data();

  for (std::size_t t = 0; t < len; ++t) {
    std::copy(xs.row(t).begin(), xs.row(t).end(), xh.begin());
    std::copy(h_prev.begin(), h_prev.end(), xh.begin() + static_cast<long>(in));
    auto z = gates.row(t);
    for (std::size_t r = 0; r < 4 * hidden; ++r) {
      double acc = 0.0;
      mac(m, acc, layer.bias[r], 1.0);
      acc += dot(m, w + r * width, xh.data(), width);
      z[r] = acc;
    }
    for (std::size_t j = 0; j < hidden; ++j) {
      const double i = sigmoid(z[j]);
      const double f = sigmoid(z[hidden + j]);
      const double g = std::tanh(z[2 * hidden + j]);
      const double o = sigmoid(z[3 * hidden + j]);
      z[j] = i, z[hidden + j] = f, z[2 * hidden + j] = g, z[3 * hidden + j] = o;
      const double c = f * c_prev[j] + i * g;
      cells(t, j) = c;
      hs(t, j) = o * std::tanh(c);
    }
    std::copy(hs.row(t).begin(), hs.row(t).end(), h_prev.begin());
    std::copy(cells.row(t).begin(), cells.row(t).end(), c_prev.begin());
  }
  if (cache) {
    cache->xs = xs;
    cache->h0 = h0 ? *h0 : Tensor({hidden});
    cache->c0 = c0 ? *c0 : Tensor({hidden});
    cache->gates = std::move(gates);
    cache->cells = std::move(cells);
    cache->hiddens = hs;
  }
  return hs;
}

}  // namespace

Tensor lstm_forward(const LstmLayer& layer, const Tensor& xs, const Tensor* h0, const Tensor* c0,
                    LstmCache* cache) {
  PlainMac m;
  return lstm_forward_impl(layer, xs, h0, c0, cache, m);
}
Tensor lstm_forward(const LstmLayer& layer, const Tensor& xs, const Tensor* h0, const Tensor* c0,
                    LstmCache* cache, PlainMac& mac) {
  return lstm_forward_impl(layer, xs, h0, c0, cache, mac);
}
Tensor lstm_forward(const LstmLayer& layer, const Tensor& xs, const Tensor* h0, const Tensor* c0,
                    LstmCache* cache, CountingMac& mac) {
  return lstm_forward_impl(layer, xs, h0, c0, cache, mac);
}

Tensor lstm_backward(const LstmLayer& layer, const LstmCache& cache, const Tensor& d_hs, LstmLayer& grad,
                     LstmStateGrad* d_init) {
  require_same_shape(cache.hiddens, d_hs, "lstm_backward");
  const std::size_t hidden = layer.hidden_size(), in = layer.input_size();
  const std::size_t width = in + hidden, len = d_hs.dim(0);
  Tensor dxs({len, in});
  std::vector<double> dh_next(hidden, 0.0), dc_next(hidden, 0.0);
  std::vector<double> dz(4 * hidden), xh(width), dxh(width);
  const double* w = layer.weight.data().data();
  double* gw = grad.weight.data().data();

  for (std::size_t t = len; t-- > 0;) {
    const auto gates = cache.gates.row(t);
    const auto c_prev = t ? cache.cells.row(t - 1) : cache.c0.data();
    const auto h_prev = t ? cache.hiddens.row(t - 1) : cache.h0.data();
    for (std::size_t j = 0; j < hidden; ++j) {
      const double i = gates[j], f = gates[hidden + j], g = gates[2 * hidden + j],
                   o = gates[3 * hidden + j];
      const double tc = std::tanh(cache.cells(t, j));
      const double dh = d_hs(t, j) + dh_next[j];
      const double dc = dh * o * (1.0 - tc * tc) + dc_next[j];
      dz[j] = dc * g * i * (1.0 - i);
      dz[hidden + j] = dc * c_prev[j] * f * (1.0 - f);
      dz[2 * hidden + j] = dc * i * (1.0 - g * g);
      dz[3 * hidden + j] = dh * tc * o * (1.0 - o);
      dc_next[j] = dc * f;
    }
    std::copy(cache.xs.row(t).begin(), cache.xs.row(t).end(), xh.begin());
    std::copy(h_prev.begin(), h_prev.end(), xh.begin() + static_cast<long>(in));
    std::fill(dxh.begin(), dxh.end(), 0.0);
    for (std::size_t r = 0; r < 4 * hidden; ++r) {
      const double g = dz[r];
      grad.bias[r] += g;
      double* gwr = gw + r * width;
      const double* wr = w + r * width;
      for (std::size_t c = 0; c < width; ++c) {
        gwr[c] += g * xh[c];
        dxh[c] += g * wr[c];
      }
    }
    std::copy(dxh.begin(), dxh.begin() + static_cast<long>(in), dxs.row(t).begin());
    std::copy(dxh.begin() + static_cast<long>(in), dxh.end(), dh_next.begin());
  }
  if (d_init) {
    d_init->h0 = Tensor({hidden}, dh_next);
    d_init->c0 = Tensor({hidden}, dc_next);
  }
  return dxs;
}

Tensor reverse_rows(const Tensor& t) {
  Tensor out = t;
  const std::size_t n = t.dim(0);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy(t.row(n - 1 - r).begin(), t.row(n - 1 - r).end(), out.row(r).begin());
  }
  return out;
}

BiLstmLayer BiLstmLayer::create(std::size_t in, std::size_t hidden, Rng& rng) {
  BiLstmLayer layer;
  layer.forward = LstmLayer::create(in, hidden, rng);
  layer.backward = LstmLayer::create(in, hidden, rng);
  return layer;
}

void BiLstmLayer::collect(const std::string& prefix, ParamList& out) {
  forward.collect(prefix + "fwd.", out);
  backward.collect(prefix + "bwd.", out);
}

namespace {

template <class Mac>
Tensor bilstm_forward_impl(const BiLstmLayer& layer, const Tensor& xs, BiLstmCache* cache, Mac& m) {
  if (layer.forward.hidden_size() != layer.backward.hidden_size() ||
      layer.forward.input_size() != layer.backward.input_size()) {
    throw DimensionError("bilstm: sublayer shapes differ");
  }
  Tensor out = lstm_forward(layer.forward, xs, nullptr, nullptr, cache ? &cache->fwd : nullptr, m);
  const Tensor back = reverse_rows(
      lstm_forward(layer.backward, reverse_rows(xs), nullptr, nullptr, cache ? &cache->bwd : nullptr, m));
  add_inplace(out, back);
  return out;
}

}  // namespace

Tensor bilstm_forward(const BiLstmLayer& layer, const Tensor& xs, BiLstmCache* cache) {
  PlainMac m;
  return bilstm_forward_impl(layer, xs, cache, m);
}
Tensor bilstm_forward(const BiLstmLayer& layer, const Tensor& xs, BiLstmCache* cache, PlainMac& mac) {
  return bilstm_forward_impl(layer, xs, cache, mac);
}
Tensor bilstm_forward(const BiLstmLayer& layer, const Tensor& xs, BiLstmCache* cache, CountingMac& mac) {
  return bilstm_forward_impl(layer, xs, cache, mac);
}

Tensor bilstm_backward(const BiLstmLayer& layer, const BiLstmCache& cache, const Tensor& d_out,
                       BiLstmLayer& grad) {
  Tensor dx = lstm_backward(layer.forward, cache.fwd, d_out, grad.forward);
  const Tensor dx_rev = lstm_backward(layer.backward, cache.bwd, reverse_rows(d_out), grad.backward);
  add_inplace(dx, reverse_rows(dx_rev));
  return dx;
}

}  // namespace avsr
