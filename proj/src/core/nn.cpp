// Copyright 2026 The MEST Lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mest/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mest {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::fc: return "fc";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::avgpool: return "avgpool";
    case LayerKind::add: return "add";
    case LayerKind::softmax_xent: return "softmax-xent";
  }
  return "?";
}

LayerKind parse_layer_kind(const std::string& text) {
  for (auto k : {LayerKind::conv2d, LayerKind::fc, LayerKind::relu,
                 LayerKind::maxpool, LayerKind::avgpool, LayerKind::add,
                 LayerKind::softmax_xent})
    if (to_string(k) == text) return k;
  if (text == "conv") return LayerKind::conv2d;
  fail(ErrorKind::config, "unknown layer kind '" + text + "'");
}

std::size_t LayerSpec::weight_count() const {
  switch (kind) {
    case LayerKind::conv2d: return filters * channels * kernel * kernel;
    case LayerKind::fc: return in_features * out_features;
    default: return 0;
  }
}

WeightLayout LayerSpec::weight_layout() const {
  if (kind == LayerKind::conv2d) return {filters, channels, kernel};
  if (kind == LayerKind::fc) return {out_features, in_features, 1};
  return {};
}

Shape LayerSpec::weight_shape() const {
  if (kind == LayerKind::conv2d) return {filters, channels, kernel, kernel};
  if (kind == LayerKind::fc) return {out_features, in_features};
  return {};
}

LayerSpec LayerSpec::conv(std::size_t channels, std::size_t filters,
                          std::size_t kernel, std::size_t stride,
                          std::size_t padding, Activation act) {
  LayerSpec l;
  l.kind = LayerKind::conv2d;
  l.channels = channels;
  l.filters = filters;
  l.kernel = kernel;
  l.stride = stride;
  l.padding = padding;
  l.activation = act;
  return l;
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out, Activation act) {
  LayerSpec l;
  l.kind = LayerKind::fc;
  l.in_features = in;
  l.out_features = out;
  l.activation = act;
  return l;
}

namespace {

std::size_t conv_out(std::size_t in, std::size_t k, std::size_t stride,
                     std::size_t pad) {
  require(in + 2 * pad >= k, ErrorKind::dimension,
          "convolution kernel larger than padded input");
  return (in + 2 * pad - k) / stride + 1;
}

// Output coordinates o with 0 <= o*stride - pad + k < in.
void valid_range(std::size_t in, std::size_t out, std::size_t stride,
                 std::size_t pad, std::size_t k, std::size_t& lo,
                 std::size_t& hi) {
  const long long s = static_cast<long long>(stride);
  const long long p = static_cast<long long>(pad);
  const long long kk = static_cast<long long>(k);
  long long first = p - kk;  // need o*s >= p - k
  long long l = first <= 0 ? 0 : (first + s - 1) / s;
  long long last = static_cast<long long>(in) - 1 + p - kk;  // o*s <= last
  long long h = last < 0 ? -1 : last / s;
  h = std::min<long long>(h, static_cast<long long>(out) - 1);
  lo = static_cast<std::size_t>(l);
  hi = h < l ? lo : static_cast<std::size_t>(h + 1);
}

void check_conv_input(const LayerSpec& layer, const Tensor& a_prev) {
  require(a_prev.rank() == 4 && a_prev.dim(1) == layer.channels,
          ErrorKind::dimension,
          "conv2d expects (B," + std::to_string(layer.channels) +
              ",H,W) input, got " + shape_string(a_prev.shape()));
}

std::size_t flat_features(const Tensor& t) {
  return t.rank() == 0 ? 0 : t.size() / t.dim(0);
}

void check_fc_input(const LayerSpec& layer, const Tensor& a_prev) {
  require(a_prev.rank() >= 2 && flat_features(a_prev) == layer.in_features,
          ErrorKind::dimension,
          "fc expects " + std::to_string(layer.in_features) +
              " input features, got " + shape_string(a_prev.shape()));
}

std::size_t pool_window(const LayerSpec& layer, const Tensor& in) {
  return layer.pool == 0 ? in.dim(2) : layer.pool;
}

void apply_activation(Activation act, const Tensor& z, Tensor& a) {
  a = z;
  if (act == Activation::relu)
    for (auto& v : a.values()) v = v > 0.0 ? v : 0.0;
}

}  // namespace

Shape output_shape(const LayerSpec& layer, const Shape& in) {
  switch (layer.kind) {
    case LayerKind::conv2d:
      require(in.size() == 4 && in[1] == layer.channels, ErrorKind::dimension,
              "conv2d input shape mismatch: " + shape_string(in));
      return {in[0], layer.filters,
              conv_out(in[2], layer.kernel, layer.stride, layer.padding),
              conv_out(in[3], layer.kernel, layer.stride, layer.padding)};
    case LayerKind::fc: {
      require(in.size() >= 2, ErrorKind::dimension, "fc input needs a batch axis");
      std::size_t features = 1;
      for (std::size_t i = 1; i < in.size(); ++i) features *= in[i];
      require(features == layer.in_features, ErrorKind::dimension,
              "fc input feature mismatch: " + shape_string(in));
      return {in[0], layer.out_features};
    }
    case LayerKind::maxpool:
    case LayerKind::avgpool: {
      require(in.size() == 4, ErrorKind::dimension, "pooling expects NCHW input");
      const std::size_t ph = layer.pool == 0 ? in[2] : layer.pool;
      const std::size_t pw = layer.pool == 0 ? in[3] : layer.pool;
      require(in[2] >= ph && in[3] >= pw, ErrorKind::dimension,
              "pooling window larger than input");
      return {in[0], in[1], in[2] / ph, in[3] / pw};
    }
    case LayerKind::relu:
    case LayerKind::add:
      return in;
    case LayerKind::softmax_xent:
      return {in[0]};
  }
  return in;
}

LayerOutput forward(const LayerSpec& layer, const Tensor& weights,
                    const Tensor& bias, const Tensor& a_prev) {
  LayerOutput out;
  switch (layer.kind) {
    case LayerKind::conv2d: {
      check_conv_input(layer, a_prev);
      require(weights.size() == layer.weight_count(), ErrorKind::dimension,
              "conv2d weight count mismatch");
      const Shape os = output_shape(layer, a_prev.shape());
      const std::size_t B = os[0], F = os[1], Ho = os[2], Wo = os[3];
      const std::size_t C = layer.channels, H = a_prev.dim(2), W = a_prev.dim(3);
      const std::size_t K = layer.kernel, S = layer.stride, P = layer.padding;
      out.z = Tensor(os);
      const double* w = weights.data();
      for (std::size_t n = 0; n < B; ++n) {
        for (std::size_t f = 0; f < F; ++f) {
          double* o = out.z.data() + (n * F + f) * Ho * Wo;
          const double b0 = (layer.bias && !bias.empty()) ? bias[f] : 0.0;
          std::fill(o, o + Ho * Wo, b0);
          // Summation per output: channel outer, kernel offset inner.
          for (std::size_t c = 0; c < C; ++c) {
            const double* in = a_prev.data() + (n * C + c) * H * W;
            for (std::size_t ky = 0; ky < K; ++ky) {
              std::size_t oy0, oy1;
              valid_range(H, Ho, S, P, ky, oy0, oy1);
              for (std::size_t kx = 0; kx < K; ++kx) {
                const double wv = w[((f * C + c) * K + ky) * K + kx];
                if (wv == 0.0) continue;
                std::size_t ox0, ox1;
                valid_range(W, Wo, S, P, kx, ox0, ox1);
                for (std::size_t oy = oy0; oy < oy1; ++oy) {
                  const double* row = in + (oy * S + ky - P) * W;
                  double* orow = o + oy * Wo;
                  for (std::size_t ox = ox0; ox < ox1; ++ox)
                    orow[ox] += wv * row[ox * S + kx - P];
                }
              }
            }
          }
        }
      }
      apply_activation(layer.activation, out.z, out.a);
      return out;
    }
    case LayerKind::fc: {
      check_fc_input(layer, a_prev);
      require(weights.size() == layer.weight_count(), ErrorKind::dimension,
              "fc weight count mismatch");
      const std::size_t B = a_prev.dim(0), I = layer.in_features,
                        O = layer.out_features;
      out.z = Tensor({B, O});
      for (std::size_t n = 0; n < B; ++n) {
        const double* x = a_prev.data() + n * I;
        for (std::size_t o = 0; o < O; ++o) {
          const double* wr = weights.data() + o * I;
          double acc = (layer.bias && !bias.empty()) ? bias[o] : 0.0;
          for (std::size_t i = 0; i < I; ++i)
            if (wr[i] != 0.0) acc += wr[i] * x[i];
          out.z[n * O + o] = acc;
        }
      }
      apply_activation(layer.activation, out.z, out.a);
      return out;
    }
    case LayerKind::relu:
      out.z = a_prev;
      apply_activation(Activation::relu, out.z, out.a);
      return out;
    case LayerKind::maxpool:
    case LayerKind::avgpool: {
      const Shape os = output_shape(layer, a_prev.shape());
      const std::size_t ph = pool_window(layer, a_prev);
      const std::size_t pw = layer.pool == 0 ? a_prev.dim(3) : layer.pool;
      out.z = Tensor(os);
      const bool is_max = layer.kind == LayerKind::maxpool;
      for (std::size_t n = 0; n < os[0]; ++n)
        for (std::size_t c = 0; c < os[1]; ++c)
          for (std::size_t oy = 0; oy < os[2]; ++oy)
            for (std::size_t ox = 0; ox < os[3]; ++ox) {
              double acc = is_max ? -std::numeric_limits<double>::infinity() : 0.0;
              for (std::size_t dy = 0; dy < ph; ++dy)
                for (std::size_t dx = 0; dx < pw; ++dx) {
                  const double v = a_prev.at(n, c, oy * ph + dy, ox * pw + dx);
                  if (is_max)
                    acc = v > acc ? v : acc;
                  else
                    acc += v;
                }
              out.z.at(n, c, oy, ox) =
                  is_max ? acc : acc / static_cast<double>(ph * pw);
            }
      out.a = out.z;
      return out;
    }
    case LayerKind::add:
    case LayerKind::softmax_xent:
      fail(ErrorKind::state, to_string(layer.kind) +
                                 " is evaluated by the network, not per layer");
  }
  return out;
}

double activation_derivative(Activation act, double z) {
  if (act == Activation::identity) return 1.0;
  return z > 0.0 ? 1.0 : 0.0;
}

Tensor input_gradient(const LayerSpec& layer, const Tensor& weights,
                      const Tensor& delta, const Tensor& a_prev) {
  switch (layer.kind) {
    case LayerKind::conv2d: {
      check_conv_input(layer, a_prev);
      const Shape os = output_shape(layer, a_prev.shape());
      require(delta.shape() == os, ErrorKind::dimension,
              "conv2d delta shape mismatch");
      const std::size_t B = os[0], F = os[1], Ho = os[2], Wo = os[3];
      const std::size_t C = layer.channels, H = a_prev.dim(2), W = a_prev.dim(3);
      const std::size_t K = layer.kernel, S = layer.stride, P = layer.padding;
      Tensor g(a_prev.shape());
      for (std::size_t n = 0; n < B; ++n)
        for (std::size_t f = 0; f < F; ++f) {
          const double* d = delta.data() + (n * F + f) * Ho * Wo;
          for (std::size_t c = 0; c < C; ++c) {
            double* gin = g.data() + (n * C + c) * H * W;
            for (std::size_t ky = 0; ky < K; ++ky) {
              std::size_t oy0, oy1;
              valid_range(H, Ho, S, P, ky, oy0, oy1);
              for (std::size_t kx = 0; kx < K; ++kx) {
                const double wv = weights[((f * C + c) * K + ky) * K + kx];
                if (wv == 0.0) continue;
                std::size_t ox0, ox1;
                valid_range(W, Wo, S, P, kx, ox0, ox1);
                for (std::size_t oy = oy0; oy < oy1; ++oy) {
                  double* grow = gin + (oy * S + ky - P) * W;
                  const double* drow = d + oy * Wo;
                  for (std::size_t ox = ox0; ox < ox1; ++ox)
                    grow[ox * S + kx - P] += wv * drow[ox];
                }
              }
            }
          }
        }
      return g;
    }
    case LayerKind::fc: {
      check_fc_input(layer, a_prev);
      const std::size_t B = a_prev.dim(0), I = layer.in_features,
                        O = layer.out_features;
      require(delta.size() == B * O, ErrorKind::dimension, "fc delta shape mismatch");
      Tensor g(a_prev.shape());
      for (std::size_t n = 0; n < B; ++n) {
        double* gx = g.data() + n * I;
        for (std::size_t o = 0; o < O; ++o) {
          const double d = delta[n * O + o];
          if (d == 0.0) continue;
          const double* wr = weights.data() + o * I;
          for (std::size_t i = 0; i < I; ++i)
            if (wr[i] != 0.0) gx[i] += wr[i] * d;
        }
      }
      return g;
    }
    case LayerKind::relu: {
      require(delta.shape() == a_prev.shape(), ErrorKind::dimension,
              "relu delta shape mismatch");
      Tensor g(a_prev.shape());
      for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = a_prev[i] > 0.0 ? delta[i] : 0.0;
      return g;
    }
    case LayerKind::maxpool:
    case LayerKind::avgpool: {
      const Shape os = output_shape(layer, a_prev.shape());
      require(delta.shape() == os, ErrorKind::dimension, "pool delta shape mismatch");
      const std::size_t ph = pool_window(layer, a_prev);
      const std::size_t pw = layer.pool == 0 ? a_prev.dim(3) : layer.pool;
      Tensor g(a_prev.shape());
      const bool is_max = layer.kind == LayerKind::maxpool;
      const double inv = 1.0 / static_cast<double>(ph * pw);
      for (std::size_t n = 0; n < os[0]; ++n)
        for (std::size_t c = 0; c < os[1]; ++c)
          for (std::size_t oy = 0; oy < os[2]; ++oy)
            for (std::size_t ox = 0; ox < os[3]; ++ox) {
              const double d = delta.at(n, c, oy, ox);
              if (is_max) {
                // First maximum in scan order receives the gradient.
                std::size_t by = 0, bx = 0;
                double best = -std::numeric_limits<double>::infinity();
                for (std::size_t dy = 0; dy < ph; ++dy)
                  for (std::size_t dx = 0; dx < pw; ++dx) {
                    const double v = a_prev.at(n, c, oy * ph + dy, ox * pw + dx);
                    if (v > best) {
                      best = v;
                      by = dy;
                      bx = dx;
                    }
                  }
                g.at(n, c, oy * ph + by, ox * pw + bx) += d;
              } else {
                for (std::size_t dy = 0; dy < ph; ++dy)
                  for (std::size_t dx = 0; dx < pw; ++dx)
                    g.at(n, c, oy * ph + dy, ox * pw + dx) += d * inv;
              }
            }
      return g;
    }
    case LayerKind::add:
      return delta;
    case LayerKind::softmax_xent:
      fail(ErrorKind::state, "softmax-xent gradient is produced by the network");
  }
  return {};
}

Tensor backward_error(const LayerSpec& next, const Tensor& next_weights,
                      const Tensor& delta_next, const Tensor& z,
                      Activation act) {
  require(!z.empty(), ErrorKind::state,
          "backward_error needs the cached pre-activation of the lower layer");
  // conv/fc only use z for its shape.
  Tensor g = input_gradient(next, next_weights, delta_next, z);
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] *= activation_derivative(act, z[i]);
  return g;
}

Tensor weight_gradient(const LayerSpec& layer, const Tensor& a_prev,
                       const Tensor& delta, const Mask* mask) {
  require(mask == nullptr || mask->size() == layer.weight_count(),
          ErrorKind::dimension, "mask does not match layer weights");
  Tensor g(layer.weight_shape());
  auto active = [&](std::size_t i) { return mask == nullptr || mask->test(i); };
  if (layer.kind == LayerKind::conv2d) {
    check_conv_input(layer, a_prev);
    const Shape os = output_shape(layer, a_prev.shape());
    require(delta.shape() == os, ErrorKind::dimension, "conv2d delta shape mismatch");
    const std::size_t B = os[0], F = os[1], Ho = os[2], Wo = os[3];
    const std::size_t C = layer.channels, H = a_prev.dim(2), W = a_prev.dim(3);
    const std::size_t K = layer.kernel, S = layer.stride, P = layer.padding;
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t ky = 0; ky < K; ++ky) {
          std::size_t oy0, oy1;
          valid_range(H, Ho, S, P, ky, oy0, oy1);
          for (std::size_t kx = 0; kx < K; ++kx) {
            const std::size_t wi = ((f * C + c) * K + ky) * K + kx;
            if (!active(wi)) continue;
            std::size_t ox0, ox1;
            valid_range(W, Wo, S, P, kx, ox0, ox1);
            double acc = 0.0;
            for (std::size_t n = 0; n < B; ++n) {
              const double* in = a_prev.data() + (n * C + c) * H * W;
              const double* d = delta.data() + (n * F + f) * Ho * Wo;
              for (std::size_t oy = oy0; oy < oy1; ++oy) {
                const double* row = in + (oy * S + ky - P) * W;
                const double* drow = d + oy * Wo;
                for (std::size_t ox = ox0; ox < ox1; ++ox)
                  acc += drow[ox] * row[ox * S + kx - P];
              }
            }
            g[wi] = acc;
          }
        }
    return g;
  }
  require(layer.kind == LayerKind::fc, ErrorKind::state,
          "weight_gradient on a weightless layer");
  check_fc_input(layer, a_prev);
  const std::size_t B = a_prev.dim(0), I = layer.in_features,
                    O = layer.out_features;
  require(delta.size() == B * O, ErrorKind::dimension, "fc delta shape mismatch");
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t i = 0; i < I; ++i) {
      if (!active(o * I + i)) continue;
      double acc = 0.0;
      for (std::size_t n = 0; n < B; ++n)
        acc += delta[n * O + o] * a_prev[n * I + i];
      g[o * I + i] = acc;
    }
  return g;
}

Tensor bias_gradient(const LayerSpec& layer, const Tensor& delta) {
  if (layer.kind == LayerKind::fc) {
    const std::size_t O = layer.out_features, B = delta.size() / O;
    Tensor g({O});
    for (std::size_t n = 0; n < B; ++n)
      for (std::size_t o = 0; o < O; ++o) g[o] += delta[n * O + o];
    return g;
  }
  require(layer.kind == LayerKind::conv2d && delta.rank() == 4,
          ErrorKind::state, "bias_gradient on a weightless layer");
  const std::size_t B = delta.dim(0), F = delta.dim(1),
                    HW = delta.dim(2) * delta.dim(3);
  Tensor g({F});
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t f = 0; f < F; ++f) {
      const double* d = delta.data() + (n * F + f) * HW;
      double acc = 0.0;
      for (std::size_t i = 0; i < HW; ++i) acc += d[i];
      g[f] += acc;
    }
  return g;
}

}  // namespace mest
