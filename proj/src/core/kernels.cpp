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

#include "mest/kernels.hpp"

#include <sys/utsname.h>

#include <algorithm>
#include <chrono>
#include <numeric>
#include <sstream>
#include <thread>

#include "mest/error.hpp"
#include "mest/rng.hpp"

namespace mest {
namespace {

template <std::size_t U>
inline void axpy(double v, const double* a, double* z, std::size_t len) {
  std::size_t p = 0;
  for (; p + U <= len; p += U)
    for (std::size_t u = 0; u < U; ++u) z[p + u] += v * a[p + u];
  for (; p < len; ++p) z[p] += v * a[p];
}

using AxpyFn = void (*)(double, const double*, double*, std::size_t);

AxpyFn pick_axpy(std::size_t unroll) {
  switch (unroll) {
    case 1: return axpy<1>;
    case 2: return axpy<2>;
    case 4: return axpy<4>;
    case 8: return axpy<8>;
  }
  fail(ErrorKind::config, "unroll must be 1, 2, 4 or 8");
}

inline double dot(const double* a, const double* b, std::size_t len) {
  double s = 0;
  for (std::size_t p = 0; p < len; ++p) s += a[p] * b[p];
  return s;
}

// Rows of the compressed layout that the row tiling walks over: filters, or
// block rows for block layers.
std::size_t row_units(const CompressedLayer& cl) {
  if (cl.scheme.kind == SchemeKind::block) return cl.layout.filters / cl.scheme.block_m;
  return cl.layout.filters;
}

std::vector<std::size_t> unit_nnz(const CompressedLayer& cl) {
  const std::size_t units = row_units(cl);
  std::vector<std::size_t> n(units, 0);
  if (cl.scheme.kind == SchemeKind::channel) {
    std::fill(n.begin(), n.end(), cl.kept_channels.size());
    return n;
  }
  for (std::size_t u = 0; u < units; ++u) n[u] = cl.row_index[u + 1] - cl.row_index[u];
  return n;
}

std::vector<std::size_t> reorder_perm(const CompressedLayer& cl) {
  const auto nnz = unit_nnz(cl);
  std::vector<std::size_t> perm(nnz.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::size_t a, std::size_t b) { return nnz[a] > nnz[b]; });
  return perm;
}

void check_operand(const CompressedLayer& cl, const Tensor& a) {
  require(a.rank() == 2 && a.shape()[0] == cl.layout.cols(), ErrorKind::dimension,
          "operand rows (" + shape_string(a.shape()) + ") must equal weight columns " +
              std::to_string(cl.layout.cols()));
}

// Accumulates the contribution of row unit `u` into output columns [p0, p1).
void row_unit_forward(const CompressedLayer& cl, std::size_t u, const double* a,
                      double* z, std::size_t P, std::size_t p0, std::size_t len,
                      AxpyFn ax) {
  const std::size_t ka = cl.layout.kernel_area();
  switch (cl.scheme.kind) {
    case SchemeKind::unstructured: {
      double* zr = z + u * P + p0;
      for (std::uint32_t k = cl.row_index[u]; k < cl.row_index[u + 1]; ++k)
        ax(cl.values[k], a + cl.indices[k] * P + p0, zr, len);
      return;
    }
    case SchemeKind::pattern: {
      double* zr = z + u * P + p0;
      for (std::uint32_t k = cl.row_index[u]; k < cl.row_index[u + 1]; ++k) {
        const std::size_t base = (cl.indices[k] / kPatternStyles) * ka;
        const auto& taps = pattern_styles()[cl.indices[k] % kPatternStyles];
        const double* v = cl.values.data() + 4 * k;
        ax(v[0], a + (base + taps[0]) * P + p0, zr, len);
        ax(v[1], a + (base + taps[1]) * P + p0, zr, len);
        ax(v[2], a + (base + taps[2]) * P + p0, zr, len);
        ax(v[3], a + (base + taps[3]) * P + p0, zr, len);
      }
      return;
    }
    case SchemeKind::block: {
      const std::size_t m = cl.scheme.block_m, n = cl.scheme.block_n;
      for (std::uint32_t k = cl.row_index[u]; k < cl.row_index[u + 1]; ++k) {
        const double* v = cl.values.data() + k * m * n;
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j)
            ax(v[i * n + j], a + (cl.indices[k] * n + j) * P + p0,
               z + (u * m + i) * P + p0, len);
      }
      return;
    }
    case SchemeKind::channel: {
      const std::size_t kept = cl.kept_channels.size();
      double* zr = z + u * P + p0;
      const double* v = cl.values.data() + u * kept * ka;
      for (std::size_t ci = 0; ci < kept; ++ci)
        for (std::size_t t = 0; t < ka; ++t)
          ax(v[ci * ka + t], a + (cl.kept_channels[ci] * ka + t) * P + p0, zr, len);
      return;
    }
  }
}

// Visits every stored value as (value index, row, column), rows ascending and
// columns ascending within a row.
template <class F>
void for_each_value(const CompressedLayer& cl, F&& f) {
  const std::size_t ka = cl.layout.kernel_area();
  switch (cl.scheme.kind) {
    case SchemeKind::unstructured:
      for (std::size_t r = 0; r < cl.layout.filters; ++r)
        for (std::uint32_t k = cl.row_index[r]; k < cl.row_index[r + 1]; ++k)
          f(std::size_t{k}, r, std::size_t{cl.indices[k]});
      return;
    case SchemeKind::pattern:
      for (std::size_t r = 0; r < cl.layout.filters; ++r)
        for (std::uint32_t k = cl.row_index[r]; k < cl.row_index[r + 1]; ++k) {
          const std::size_t base = (cl.indices[k] / kPatternStyles) * ka;
          const auto& taps = pattern_styles()[cl.indices[k] % kPatternStyles];
          for (std::size_t t = 0; t < 4; ++t) f(4 * k + t, r, base + taps[t]);
        }
      return;
    case SchemeKind::block: {
      const std::size_t m = cl.scheme.block_m, n = cl.scheme.block_n;
      for (std::size_t br = 0; br < row_units(cl); ++br)
        for (std::size_t i = 0; i < m; ++i)
          for (std::uint32_t k = cl.row_index[br]; k < cl.row_index[br + 1]; ++k)
            for (std::size_t j = 0; j < n; ++j)
              f(k * m * n + i * n + j, br * m + i, cl.indices[k] * n + j);
      return;
    }
    case SchemeKind::channel: {
      const std::size_t kept = cl.kept_channels.size();
      for (std::size_t r = 0; r < cl.layout.filters; ++r)
        for (std::size_t ci = 0; ci < kept; ++ci)
          for (std::size_t t = 0; t < ka; ++t)
            f((r * kept + ci) * ka + t, r, cl.kept_channels[ci] * ka + t);
      return;
    }
  }
}

double now_us() {
  using namespace std::chrono;
  return duration<double, std::micro>(steady_clock::now().time_since_epoch()).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <class F>
double time_us(F&& f) {
  const double t0 = now_us();
  f();
  return now_us() - t0;
}

std::string machine_descriptor() {
  utsname u{};
  std::ostringstream os;
  if (uname(&u) == 0) os << u.sysname << ' ' << u.release << ' ' << u.machine;
  os << "; hw_threads=" << std::thread::hardware_concurrency();
#ifdef __VERSION__
  os << "; compiler=" << __VERSION__;
#endif
  return os.str();
}

// Keeps the optimizer from discarding benchmark results.
volatile double g_sink = 0;

}  // namespace

void KernelConfig::validate(std::size_t rows, std::size_t cols) const {
  require(tile_rows >= 1 && tile_rows <= std::max<std::size_t>(rows, 1) &&
              tile_cols >= 1 && tile_cols <= std::max<std::size_t>(cols, 1),
          ErrorKind::config, "tile sizes must lie in [1, matrix dims]: " + str());
  pick_axpy(unroll);
}

KernelConfig KernelConfig::fitted(std::size_t rows, std::size_t cols) const {
  KernelConfig c = *this;
  c.tile_rows = std::clamp<std::size_t>(tile_rows, 1, std::max<std::size_t>(rows, 1));
  c.tile_cols = std::clamp<std::size_t>(tile_cols, 1, std::max<std::size_t>(cols, 1));
  return c;
}

std::string KernelConfig::str() const {
  std::ostringstream os;
  os << "tile=" << tile_rows << 'x' << tile_cols << " unroll=" << unroll
     << " reorder=" << (reorder ? 1 : 0);
  return os.str();
}

Tensor im2col(const Tensor& x, std::size_t k, std::size_t stride, std::size_t pad) {
  require(x.rank() == 4, ErrorKind::dimension, "im2col expects N x C x H x W");
  require(k >= 1 && stride >= 1, ErrorKind::config, "kernel and stride must be positive");
  const auto& s = x.shape();
  const std::size_t N = s[0], C = s[1], H = s[2], W = s[3];
  require(H + 2 * pad >= k && W + 2 * pad >= k, ErrorKind::dimension,
          "kernel larger than the padded input");
  const std::size_t Ho = (H + 2 * pad - k) / stride + 1, Wo = (W + 2 * pad - k) / stride + 1;
  const std::size_t P = N * Ho * Wo;
  Tensor out({C * k * k, P});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* row = out.data() + ((c * k + ky) * k + kx) * P;
        for (std::size_t n = 0; n < N; ++n)
          for (std::size_t oy = 0; oy < Ho; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                            static_cast<std::ptrdiff_t>(pad);
            for (std::size_t ox = 0; ox < Wo; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                              static_cast<std::ptrdiff_t>(pad);
              double v = 0;
              if (iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(H) &&
                  ix < static_cast<std::ptrdiff_t>(W))
                v = x.at(n, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
              row[(n * Ho + oy) * Wo + ox] = v;
            }
          }
      }
  return out;
}

Tensor col2im(const Tensor& cols, const Shape& xs, std::size_t k, std::size_t stride,
              std::size_t pad) {
  require(xs.size() == 4, ErrorKind::dimension, "col2im expects an N x C x H x W shape");
  const std::size_t N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const std::size_t Ho = (H + 2 * pad - k) / stride + 1, Wo = (W + 2 * pad - k) / stride + 1;
  const std::size_t P = N * Ho * Wo;
  require(cols.rank() == 2 && cols.shape()[0] == C * k * k && cols.shape()[1] == P,
          ErrorKind::dimension, "column matrix does not match the input shape");
  Tensor out(xs);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* row = cols.data() + ((c * k + ky) * k + kx) * P;
        for (std::size_t n = 0; n < N; ++n)
          for (std::size_t oy = 0; oy < Ho; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                            static_cast<std::ptrdiff_t>(pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
            for (std::size_t ox = 0; ox < Wo; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                              static_cast<std::ptrdiff_t>(pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
              out.at(n, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) +=
                  row[(n * Ho + oy) * Wo + ox];
            }
          }
      }
  return out;
}

Tensor rows_to_nchw(const Tensor& z, std::size_t n, std::size_t ho, std::size_t wo) {
  require(z.rank() == 2 && z.shape()[1] == n * ho * wo, ErrorKind::dimension,
          "row matrix does not match N x Ho x Wo");
  const std::size_t F = z.shape()[0], hw = ho * wo;
  Tensor out({n, F, ho, wo});
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(z.data() + f * n * hw + i * hw, hw, out.data() + (i * F + f) * hw);
  return out;
}

Tensor nchw_to_rows(const Tensor& z) {
  require(z.rank() == 4, ErrorKind::dimension, "expected N x C x H x W");
  const auto& s = z.shape();
  const std::size_t n = s[0], F = s[1], hw = s[2] * s[3];
  Tensor out({F, n * hw});
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(z.data() + (i * F + f) * hw, hw, out.data() + f * n * hw + i * hw);
  return out;
}

Tensor dense_gemm(const Tensor& w, const Tensor& a) {
  require(w.rank() == 2 && a.rank() == 2 && w.shape()[1] == a.shape()[0],
          ErrorKind::dimension, "dense_gemm shape mismatch");
  const std::size_t F = w.shape()[0], J = w.shape()[1], P = a.shape()[1];
  Tensor z({F, P});
  constexpr std::size_t kTile = 64;
  for (std::size_t p0 = 0; p0 < P; p0 += kTile) {
    const std::size_t len = std::min(kTile, P - p0);
    for (std::size_t r = 0; r < F; ++r)
      for (std::size_t j = 0; j < J; ++j)
        axpy<4>(w[r * J + j], a.data() + j * P + p0, z.data() + r * P + p0, len);
  }
  return z;
}

std::pair<Tensor, Tensor> dense_gemm_backward(const Tensor& w, const Tensor& delta,
                                              const Tensor& a) {
  require(w.rank() == 2 && delta.rank() == 2 && a.rank() == 2 &&
              delta.shape()[0] == w.shape()[0] && a.shape()[0] == w.shape()[1] &&
              a.shape()[1] == delta.shape()[1],
          ErrorKind::dimension, "dense_gemm_backward shape mismatch");
  const std::size_t F = w.shape()[0], J = w.shape()[1], P = a.shape()[1];
  Tensor da({J, P});
  Tensor g({F, J});
  for (std::size_t r = 0; r < F; ++r)
    for (std::size_t j = 0; j < J; ++j)
      axpy<4>(w[r * J + j], delta.data() + r * P, da.data() + j * P, P);
  for (std::size_t r = 0; r < F; ++r)
    for (std::size_t j = 0; j < J; ++j)
      g[r * J + j] = dot(delta.data() + r * P, a.data() + j * P, P);
  return {std::move(da), std::move(g)};
}

Tensor spmm(const CompressedLayer& cl, const Tensor& a, const KernelConfig& cfg) {
  check_operand(cl, a);
  const std::size_t F = cl.layout.filters, P = a.shape()[1];
  const std::size_t units = row_units(cl);
  cfg.validate(units, P);
  const AxpyFn ax = pick_axpy(cfg.unroll);
  std::vector<std::size_t> order(units);
  if (cfg.reorder)
    order = reorder_perm(cl);
  else
    std::iota(order.begin(), order.end(), std::size_t{0});
  Tensor z({F, P});
  for (std::size_t u0 = 0; u0 < units; u0 += cfg.tile_rows) {
    const std::size_t u1 = std::min(units, u0 + cfg.tile_rows);
    for (std::size_t p0 = 0; p0 < P; p0 += cfg.tile_cols) {
      const std::size_t len = std::min(cfg.tile_cols, P - p0);
      for (std::size_t i = u0; i < u1; ++i)
        row_unit_forward(cl, order[i], a.data(), z.data(), P, p0, len, ax);
    }
  }
  return z;
}

SparseGrad spmm_backward(const CompressedLayer& cl, const Tensor& delta,
                         const Tensor& a, const KernelConfig& cfg) {
  check_operand(cl, a);
  const std::size_t F = cl.layout.filters, J = cl.layout.cols(), P = a.shape()[1];
  require(delta.rank() == 2 && delta.shape()[0] == F && delta.shape()[1] == P,
          ErrorKind::dimension, "delta must be filters x columns of the operand");
  cfg.validate(row_units(cl), P);
  const AxpyFn ax = pick_axpy(cfg.unroll);
  SparseGrad out{Tensor({J, P}), cl};
  // Scatter in original row order so every dA entry sums rows ascending.
  for (std::size_t p0 = 0; p0 < P; p0 += cfg.tile_cols) {
    const std::size_t len = std::min(cfg.tile_cols, P - p0);
    for_each_value(cl, [&](std::size_t k, std::size_t r, std::size_t j) {
      ax(cl.values[k], delta.data() + r * P + p0, out.delta_prev.data() + j * P + p0, len);
    });
  }
  for_each_value(cl, [&](std::size_t k, std::size_t r, std::size_t j) {
    out.grad.values[k] = dot(delta.data() + r * P, a.data() + j * P, P);
  });
  return out;
}

Reordered matrix_reorder(const CompressedLayer& cl) {
  Reordered out{reorder_perm(cl), cl};
  if (cl.scheme.kind == SchemeKind::channel) return out;
  const std::size_t per = cl.scheme.kind == SchemeKind::pattern ? 4
                          : cl.scheme.kind == SchemeKind::block
                              ? cl.scheme.block_m * cl.scheme.block_n
                              : 1;
  auto& L = out.layer;
  L.row_index.assign(1, 0);
  L.indices.clear();
  L.values.clear();
  for (std::size_t u : out.perm) {
    for (std::uint32_t k = cl.row_index[u]; k < cl.row_index[u + 1]; ++k) {
      L.indices.push_back(cl.indices[k]);
      L.values.insert(L.values.end(), cl.values.begin() + static_cast<std::ptrdiff_t>(k * per),
                      cl.values.begin() + static_cast<std::ptrdiff_t>((k + 1) * per));
    }
    L.row_index.push_back(static_cast<std::uint32_t>(L.indices.size()));
  }
  return out;
}

Tensor unpermute_rows(const Tensor& z, const std::vector<std::size_t>& perm,
                      std::size_t rows_per_unit) {
  require(z.rank() == 2 && z.shape()[0] == perm.size() * rows_per_unit,
          ErrorKind::dimension, "permutation does not match the output rows");
  const std::size_t P = z.shape()[1], chunk = rows_per_unit * P;
  Tensor out(z.shape());
  for (std::size_t i = 0; i < perm.size(); ++i)
    std::copy_n(z.data() + i * chunk, chunk, out.data() + perm[i] * chunk);
  return out;
}

std::vector<KernelConfig> tuning_grid(std::size_t rows, std::size_t cols) {
  const KernelConfig def = KernelConfig{}.fitted(rows, cols);
  std::vector<KernelConfig> grid;
  for (std::size_t tr : {1, 4, 8, 16})
    for (std::size_t tc : {32, 64, 128, 256})
      for (std::size_t un : {1, 4, 8})
        for (bool re : {false, true}) {
          KernelConfig c{tr, tc, un, re};
          c = c.fitted(rows, cols);
          if (c == def || std::find(grid.begin(), grid.end(), c) != grid.end()) continue;
          grid.push_back(c);
        }
  std::sort(grid.begin(), grid.end());
  grid.insert(grid.begin(), def);
  return grid;
}

TuneResult autotune(const CompressedLayer& cl, const Tensor& a, std::size_t budget) {
  require(budget >= 1, ErrorKind::config, "tuning budget must be at least 1");
  check_operand(cl, a);
  const auto grid = tuning_grid(row_units(cl), a.shape()[1]);
  TuneResult res;
  for (std::size_t i = 0; i < std::min(budget, grid.size()); ++i) {
    std::vector<double> t;
    for (int rep = 0; rep < 5; ++rep)
      t.push_back(time_us([&] { g_sink = g_sink + spmm(cl, a, grid[i])[0]; }));
    res.trials.push_back({grid[i], median(std::move(t))});
  }
  auto best = res.trials.front();
  for (const auto& tr : res.trials)
    if (tr.median_us < best.median_us ||
        (tr.median_us == best.median_us && tr.config < best.config))
      best = tr;
  res.best = best.config;
  return res;
}

BenchLayer fig2_layer() { return BenchLayer{}; }

std::vector<double> fig2_sparsities() { return {0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.98}; }

std::vector<Scheme> fig2_schemes() {
  return {Scheme::unstructured(), Scheme::block(4, 1), Scheme::pattern(),
          Scheme::channel()};
}

AccelReport bench(const BenchLayer& layer, const BenchOptions& opts) {
  require(opts.repeats >= 1, ErrorKind::config, "repeats must be at least 1");
  AccelReport rep;
  rep.layer = layer;
  rep.machine = machine_descriptor();
  rep.threads = 1;
  const WeightLayout wl{layer.filters, layer.channels, layer.kernel};
  Rng rng(derive_seed(opts.seed, {0xbe7c}));
  Tensor x({layer.batch, layer.channels, layer.size, layer.size});
  for (auto& v : x.values()) v = static_cast<float>(rng.normal());
  const Tensor a = im2col(x, layer.kernel, 1, layer.pad);
  const std::size_t P = a.shape()[1];
  Tensor delta({layer.filters, P});
  for (auto& v : delta.values()) v = static_cast<float>(rng.normal());
  Tensor wd({layer.filters, wl.cols()});
  for (auto& v : wd.values()) v = static_cast<float>(rng.normal() * 0.1);

  auto run_dense_fwd = [&] { g_sink = g_sink + dense_gemm(wd, a)[0]; };
  auto run_dense_bwd = [&] { g_sink = g_sink + dense_gemm_backward(wd, delta, a).first[0]; };

  // Dense control: two interleaved copies of the same kernel.
  {
    for (std::size_t i = 0; i < opts.warmup; ++i) {
      run_dense_fwd();
      run_dense_bwd();
    }
    std::vector<double> fa, ba, fb, bb;
    for (std::size_t i = 0; i < opts.repeats; ++i) {
      fa.push_back(time_us(run_dense_fwd));
      ba.push_back(time_us(run_dense_bwd));
      fb.push_back(time_us(run_dense_fwd));
      bb.push_back(time_us(run_dense_bwd));
    }
    rep.dense_fwd_us = median(fa);
    rep.dense_bwd_us = median(ba);
    const double f2 = median(fb), b2 = median(bb);
    rep.points.push_back({"dense", 0.0, f2, b2,
                          (rep.dense_fwd_us + rep.dense_bwd_us) / (f2 + b2), "dense"});
  }

  for (const auto& scheme : opts.schemes) {
    for (double s : opts.sparsities) {
      const std::string name = to_string(scheme);
      try {
        check_feasible(wl, scheme, s);
      } catch (const Error& e) {
        rep.skipped.push_back(name + " @ " + std::to_string(s) + ": " + e.what());
        continue;
      }
      const Mask mask = random_mask(wl, scheme, s, derive_seed(opts.seed, {std::size_t(s * 1e6)}));
      Tensor w({layer.filters, layer.channels, layer.kernel, layer.kernel});
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = mask.test(i) ? wd[i] : 0.0;
      const CompressedLayer cl = encode(w, mask, 32, 32);
      KernelConfig cfg = KernelConfig{}.fitted(row_units(cl), P);
      if (opts.tune_budget > 0) cfg = autotune(cl, a, opts.tune_budget).best;
      auto run_fwd = [&] { g_sink = g_sink + spmm(cl, a, cfg)[0]; };
      auto run_bwd = [&] { g_sink = g_sink + spmm_backward(cl, delta, a, cfg).delta_prev[0]; };
      for (std::size_t i = 0; i < opts.warmup; ++i) {
        run_fwd();
        run_bwd();
      }
      std::vector<double> df, db, sf, sb;
      for (std::size_t i = 0; i < opts.repeats; ++i) {
        df.push_back(time_us(run_dense_fwd));
        db.push_back(time_us(run_dense_bwd));
        sf.push_back(time_us(run_fwd));
        sb.push_back(time_us(run_bwd));
      }
      const double dense = median(df) + median(db);
      const double f = median(sf), b = median(sb);
      rep.points.push_back({name, s, f, b, dense / (f + b), cfg.str()});
    }
  }
  return rep;
}

std::string accel_csv(const AccelReport& r) {
  std::ostringstream os;
  os << "scheme,sparsity,fwd_us,bwd_us,accel\n";
  for (const auto& p : r.points)
    os << p.scheme << ',' << p.sparsity << ',' << p.fwd_us << ',' << p.bwd_us << ','
       << p.accel << '\n';
  return os.str();
}

std::string accel_gnuplot(const AccelReport& r) {
  std::ostringstream os;
  os << "# machine: " << r.machine << "\n# threads: " << r.threads << '\n';
  std::string current;
  for (const auto& p : r.points) {
    if (p.scheme != current) {
      if (!current.empty()) os << "\n\n";
      current = p.scheme;
      os << "# scheme " << p.scheme << "\n# sparsity accel\n";
    }
    os << p.sparsity << ' ' << p.accel << '\n';
  }
  return os.str();
}

}  // namespace mest
