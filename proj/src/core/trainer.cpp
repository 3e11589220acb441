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

#include "mest/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mest/compressed.hpp"
#include "mest/error.hpp"
#include "mest/io.hpp"
#include "mest/rng.hpp"

namespace mest {
namespace {

constexpr char kMagic[4] = {'M', 'E', 'S', 'T'};
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kEvalBatch = 250;

double round_to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

void round_tensor(Tensor& t) {
  for (auto& v : t.values()) v = round_to_float(v);
}

void put_tensor(ByteWriter& w, const Tensor& t, unsigned bits) {
  w.put(static_cast<std::uint64_t>(t.size()));
  for (double v : t.values()) {
    if (bits == 32)
      w.put(static_cast<float>(v));
    else
      w.put(v);
  }
}

Tensor get_tensor(ByteReader& r, const Shape& shape, unsigned bits) {
  const auto n = r.get<std::uint64_t>();
  require(n == shape_size(shape), ErrorKind::format, "checkpoint tensor size mismatch");
  Tensor t(shape);
  for (auto& v : t.values())
    v = bits == 32 ? static_cast<double>(r.get<float>()) : r.get<double>();
  return t;
}

double now_ms() {
  using namespace std::chrono;
  return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

std::size_t argmax_row(const Tensor& logits, std::size_t n) {
  const std::size_t k = logits.shape()[1];
  std::size_t best = 0;
  for (std::size_t j = 1; j < k; ++j)
    if (logits[n * k + j] > logits[n * k + best]) best = j;
  return best;
}

}  // namespace

double lr_at(const OptimizerConfig& opt, std::size_t epochs, std::size_t epoch,
             std::size_t batch, std::size_t batches) {
  require(batches >= 1 && batch < batches && epoch < epochs, ErrorKind::config,
          "step outside the schedule");
  const double nb = static_cast<double>(batches);
  const double t = static_cast<double>(epoch) + static_cast<double>(batch) / nb;
  const double w = opt.warmup_epochs;
  if (t < w) return opt.lr0 * (t + 1.0 / nb) / w;
  // Position of the final step, so the schedule lands on lr_end exactly.
  const double span = static_cast<double>(epochs) - 1.0 / nb - w;
  const double q = span > 0 ? std::min(1.0, (t - w) / span) : 1.0;
  return opt.lr_end + (opt.lr0 - opt.lr_end) * 0.5 * (1.0 + std::cos(std::numbers::pi * q));
}

void sgd_step(Tensor& weight, Tensor& momentum, const Tensor& grad, const Mask* mask,
              double lr, const OptimizerConfig& opt) {
  require(weight.size() == momentum.size() && weight.size() == grad.size(),
          ErrorKind::dimension, "sgd_step operands differ in size");
  require(!mask || mask->size() == weight.size(), ErrorKind::dimension,
          "mask does not match the weights");
  for (std::size_t i = 0; i < weight.size(); ++i) {
    if (mask && !mask->test(i)) continue;
    const double g = grad[i] + opt.weight_decay * weight[i];
    momentum[i] = opt.momentum * momentum[i] + g;
    weight[i] -= lr * momentum[i];
  }
}

Trainer::Trainer(RunConfig cfg, DataBundle data) : cfg_(std::move(cfg)), data_(std::move(data)) {
  cfg_.mutation.end = cfg_.epochs;
  cfg_.validate();
  const auto& tr = data_.train;
  require(tr.size() > 0 && data_.test.size() > 0, ErrorKind::config,
          "training and test sets must be non-empty");
  Network net = build_model(cfg_.model, {tr.channels, tr.height, tr.width}, tr.num_classes,
                            cfg_.width);
  plan_ = plan_sparsity(net, cfg_);
  for (std::size_t n : net.weighted()) {
    if (!plan_.schemes[n]) continue;
    net.set_mask(n, random_mask(net.layers()[n].weight_layout(), *plan_.schemes[n],
                                plan_.layer_s[n], derive_seed(cfg_.seed, {0x3a5c, n})));
  }
  net.init_weights(cfg_.seed);
  if (cfg_.storage_bits == 32)
    for (auto& p : net.params()) {
      round_tensor(p.weight);
      round_tensor(p.bias);
    }
  validate_schedule_for(net, plan_.layer_s, cfg_.mutation);

  state_.net = std::move(net);
  const std::size_t nodes = state_.net.layers().size();
  state_.momentum_w.resize(nodes);
  state_.momentum_b.resize(nodes);
  state_.last_grads.resize(nodes);
  for (std::size_t n : state_.net.weighted()) {
    state_.momentum_w[n] = Tensor(state_.net.params()[n].weight.shape());
    state_.momentum_b[n] = Tensor(state_.net.params()[n].bias.shape());
  }
  state_.flog = ForgettingLog(tr.size(), cfg_.keep_history);
  state_.view = DatasetView::identity(tr.size());
}

MetricsRow Trainer::run_epoch() {
  require(!done(), ErrorKind::state, "training already finished");
  auto& st = state_;
  const std::size_t epoch = st.epoch;
  Network& net = st.net;

  // Epoch boundary: mutation, then momentum remap onto the new masks.
  em_epoch_hook(net, st.last_grads, plan_.layer_s, cfg_.mutation, epoch, cfg_.seed,
                hooks_.on_mutation);
  for (std::size_t n : net.weighted())
    if (net.params()[n].mask) apply_mask(st.momentum_w[n], *net.params()[n].mask);

  const std::size_t e1 = cfg_.de_e1();
  if (cfg_.de.enabled && epoch == e1 && !st.compressed) {
    st.view = compress_dataset(st.flog, cfg_.de.th, e1, cfg_.seed);
    st.compressed = true;
    if (!cfg_.output_dir.empty())
      write_file_atomic(std::filesystem::path(cfg_.output_dir) / "manifest.txt",
                        manifest_text(st.view));
  }
  const bool record =
      cfg_.de.enabled ? epoch < e1 : cfg_.record_forgetting;

  std::vector<std::size_t> order = st.view.kept;
  Rng(derive_seed(cfg_.seed, {0x0de7, epoch})).shuffle(order);
  const std::size_t B = cfg_.batch_size;
  const std::size_t batches = (order.size() + B - 1) / B;
  std::vector<std::uint8_t> correct(data_.train.size(), 0);
  double loss_sum = 0, hits = 0, lr = 0;
  Gradients grads;

  const double t0 = now_ms();
  for (std::size_t b = 0; b < batches; ++b) {
    const std::span<const std::size_t> idx(order.data() + b * B,
                                           std::min(B, order.size() - b * B));
    Tensor x = make_batch(data_.train, idx, data_.norm);
    if (cfg_.dataset.augment) augment(x, idx, derive_seed(cfg_.seed, {0xa6, epoch}));
    const auto labels = batch_labels(data_.train, idx);
    const LossResult res = net.loss_and_gradients(x, labels, grads);
    loss_sum += res.loss * static_cast<double>(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      correct[idx[i]] = res.correct[i];
      hits += res.correct[i];
    }
    lr = lr_at(cfg_.optimizer, cfg_.epochs, epoch, b, batches);
    for (std::size_t n : net.weighted()) {
      auto& p = net.params()[n];
      sgd_step(p.weight, st.momentum_w[n], grads.weight[n], p.mask ? &*p.mask : nullptr, lr,
               cfg_.optimizer);
      sgd_step(p.bias, st.momentum_b[n], grads.bias[n], nullptr, lr, cfg_.optimizer);
      if (cfg_.storage_bits == 32) {
        round_tensor(p.weight);
        round_tensor(p.bias);
        round_tensor(st.momentum_w[n]);
        round_tensor(st.momentum_b[n]);
      }
    }
    ++st.step;
  }
  const double train_ms = now_ms() - t0;
  for (std::size_t n : net.weighted()) {
    st.last_grads[n] = std::move(grads.weight[n]);
    if (cfg_.storage_bits == 32) round_tensor(st.last_grads[n]);
  }
  if (record) st.flog.record_epoch(correct);

  const double t1 = now_ms();
  MetricsRow row;
  row.epoch = epoch;
  row.lr = lr;
  row.train_loss = loss_sum / static_cast<double>(order.size());
  row.train_acc = hits / static_cast<double>(order.size());
  row.test_acc = evaluate();
  const double eval_ms = now_ms() - t1;
  row.nnz_total = net.total_nnz();
  row.sparsity_actual =
      1.0 - static_cast<double>(row.nnz_total) / static_cast<double>(net.total_weights());
  row.dataset_size = order.size();
  const bool mutating = cfg_.mutation.mode != MutationMode::none && epoch < cfg_.mutation.stop;
  row.p_current = mutating ? cfg_.mutation.p_at(epoch) : 0.0;
  row.footprint_bits = footprint();
  st.metrics.push_back(row);
  timings_.push_back({epoch, train_ms, eval_ms, order.size()});
  ++st.epoch;

  write_epoch_artifacts(row);
  if (hooks_.on_epoch_end) hooks_.on_epoch_end(st, row);
  return row;
}

void Trainer::write_epoch_artifacts(const MetricsRow& row) const {
  if (cfg_.output_dir.empty()) return;
  const std::filesystem::path dir(cfg_.output_dir);
  if (row.epoch == 0 || timings_.size() == 1)
    write_file_atomic(dir / "config.json", run_config_json(cfg_));
  write_file_atomic(dir / "metrics.csv", metrics_csv(state_.metrics));
  write_file_atomic(dir / "timings.csv", timings_csv(timings_));
  const bool last = state_.epoch >= cfg_.epochs;
  const bool periodic = cfg_.checkpoint_every > 0 && state_.epoch % cfg_.checkpoint_every == 0;
  if (periodic || last) {
    const auto bytes = checkpoint();
    if (periodic) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04zu.ckpt", row.epoch + 1);
      write_file_atomic(dir / "checkpoints" / name, bytes);
    }
    if (last) {
      write_file_atomic(dir / "final.ckpt", bytes);
      write_file_atomic(dir / "forgetting.csv", forgetting_csv(state_.flog, state_.view));
      write_file_atomic(dir / "forgetting_curve.csv", forgetting_curve_csv(state_.flog));
    }
  }
}

void Trainer::run() {
  while (!done()) run_epoch();
}

double Trainer::evaluate() const {
  const auto& te = data_.test;
  std::size_t hits = 0;
  std::vector<std::size_t> idx;
  for (std::size_t s = 0; s < te.size(); s += kEvalBatch) {
    idx.clear();
    for (std::size_t i = s; i < std::min(te.size(), s + kEvalBatch); ++i) idx.push_back(i);
    const Tensor logits = state_.net.logits(make_batch(te, idx, data_.norm));
    for (std::size_t n = 0; n < idx.size(); ++n)
      hits += argmax_row(logits, n) == te.labels[idx[n]];
  }
  return static_cast<double>(hits) / static_cast<double>(te.size());
}

double Trainer::footprint() const {
  double bits = 0;
  const auto& net = state_.net;
  for (std::size_t n : net.weighted()) {
    const auto& l = net.layers()[n];
    const LayerDims dims[] = {{l.weight_count(), l.weight_layout().filters}};
    const auto& m = net.params()[n].mask;
    FootprintParams fp;
    fp.weight_bits = cfg_.storage_bits;
    if (m) {
      fp.block_m = m->scheme().block_m;
      fp.block_n = m->scheme().block_n;
      bits += footprint_bits(dims, footprint_mode_for(m->scheme()), m->sparsity(), fp).total_bits;
    } else {
      bits += footprint_bits(dims, FootprintMode::dense, 0.0, fp).total_bits;
    }
  }
  return bits;
}

double Trainer::state_bits() const {
  double bits = 0;
  const auto& net = state_.net;
  for (std::size_t n : net.weighted()) {
    const auto& p = net.params()[n];
    if (p.mask) {
      Tensor w = p.weight;
      round_tensor(w);
      const auto cl = encode(w, *p.mask, 32, 32);
      bits += static_cast<double>(cl.payload_bits()) + 2.0 * 32.0 * static_cast<double>(cl.nnz());
    } else {
      bits += 3.0 * 32.0 * static_cast<double>(p.weight.size());
    }
  }
  return bits;
}

std::vector<std::uint8_t> Trainer::checkpoint() const {
  const auto& st = state_;
  const unsigned bw = cfg_.storage_bits;
  ByteWriter w;
  w.put_bytes(kMagic, 4);
  w.put(kVersion);
  w.put(config_hash(cfg_));
  w.put(static_cast<std::uint64_t>(st.epoch));
  w.put(st.step);
  w.put(static_cast<std::uint8_t>(bw));
  w.put(static_cast<std::uint8_t>(st.compressed));
  w.put(static_cast<std::uint32_t>(st.net.weighted().size()));
  for (std::size_t n : st.net.weighted()) {
    const auto& p = st.net.params()[n];
    w.put(static_cast<std::uint32_t>(n));
    w.put(static_cast<std::uint8_t>(p.mask.has_value()));
    const bool has_grad = st.last_grads[n].size() > 0;
    if (p.mask) {
      const auto cl = encode(p.weight, *p.mask, bw, 32);
      serialize(cl, w);
      serialize(with_values(cl, st.momentum_w[n]), w);
      w.put(static_cast<std::uint8_t>(has_grad));
      if (has_grad) serialize(with_values(cl, st.last_grads[n]), w);
    } else {
      put_tensor(w, p.weight, bw);
      put_tensor(w, st.momentum_w[n], bw);
      w.put(static_cast<std::uint8_t>(has_grad));
      if (has_grad) put_tensor(w, st.last_grads[n], bw);
    }
    put_tensor(w, p.bias, bw);
    put_tensor(w, st.momentum_b[n], bw);
  }
  st.flog.serialize(w);
  serialize(st.view, w);
  w.put(static_cast<std::uint64_t>(st.metrics.size()));
  for (const auto& m : st.metrics) {
    w.put(static_cast<std::uint64_t>(m.epoch));
    w.put(m.lr);
    w.put(m.train_loss);
    w.put(m.train_acc);
    w.put(m.test_acc);
    w.put(static_cast<std::uint64_t>(m.nnz_total));
    w.put(m.sparsity_actual);
    w.put(static_cast<std::uint64_t>(m.dataset_size));
    w.put(m.p_current);
    w.put(m.footprint_bits);
  }
  const std::uint64_t sum = fnv1a(w.bytes().data(), w.bytes().size());
  w.put(sum);
  return w.take();
}

namespace {

ByteReader open_checkpoint(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 4 + 2 + 8 + 8, ErrorKind::format, "checkpoint too short");
  const std::size_t body = bytes.size() - 8;
  ByteReader tail(bytes.data() + body, 8);
  require(tail.get<std::uint64_t>() == fnv1a(bytes.data(), body), ErrorKind::format,
          "checkpoint checksum mismatch");
  ByteReader r(bytes.data(), body);
  char magic[4];
  r.get_bytes(magic, 4);
  require(std::equal(magic, magic + 4, kMagic), ErrorKind::format, "not a MEST checkpoint");
  require(r.get<std::uint16_t>() == kVersion, ErrorKind::format,
          "unsupported checkpoint version");
  return r;
}

MetricsRow get_metrics_row(ByteReader& r) {
  MetricsRow m;
  m.epoch = r.get<std::uint64_t>();
  m.lr = r.get<double>();
  m.train_loss = r.get<double>();
  m.train_acc = r.get<double>();
  m.test_acc = r.get<double>();
  m.nnz_total = r.get<std::uint64_t>();
  m.sparsity_actual = r.get<double>();
  m.dataset_size = r.get<std::uint64_t>();
  m.p_current = r.get<double>();
  m.footprint_bits = r.get<double>();
  return m;
}

}  // namespace

void Trainer::resume_from(std::span<const std::uint8_t> bytes) {
  ByteReader r = open_checkpoint(bytes);
  require(r.get<std::uint64_t>() == config_hash(cfg_), ErrorKind::config,
          "checkpoint was written by a different config");
  TrainingState st;
  st.epoch = r.get<std::uint64_t>();
  st.step = r.get<std::uint64_t>();
  const unsigned bw = r.get<std::uint8_t>();
  require(bw == cfg_.storage_bits, ErrorKind::format, "checkpoint storage width mismatch");
  st.compressed = r.get<std::uint8_t>() != 0;
  st.net = state_.net;
  const std::size_t nodes = st.net.layers().size();
  st.momentum_w.resize(nodes);
  st.momentum_b.resize(nodes);
  st.last_grads.resize(nodes);
  const auto count = r.get<std::uint32_t>();
  require(count == st.net.weighted().size(), ErrorKind::format,
          "checkpoint layer count differs from the model");
  for (std::size_t n : st.net.weighted()) {
    require(r.get<std::uint32_t>() == n, ErrorKind::format, "checkpoint node order differs");
    auto& p = st.net.params()[n];
    const bool sparse = r.get<std::uint8_t>() != 0;
    require(sparse == p.mask.has_value(), ErrorKind::format,
            "checkpoint sparsity layout differs from the model");
    const Shape ws = p.weight.shape();
    if (sparse) {
      const auto cl = deserialize_compressed(r);
      require(cl.layout == p.mask->layout() && cl.scheme == p.mask->scheme(),
              ErrorKind::format, "checkpoint layer layout differs");
      auto [wt, mask] = decode(cl);
      p.weight = wt.reshaped(ws);
      p.mask = std::move(mask);
      const auto mom = deserialize_compressed(r);
      st.momentum_w[n] = to_dense(mom).reshaped(ws);
      if (r.get<std::uint8_t>()) st.last_grads[n] = to_dense(deserialize_compressed(r)).reshaped(ws);
    } else {
      p.weight = get_tensor(r, ws, bw);
      st.momentum_w[n] = get_tensor(r, ws, bw);
      if (r.get<std::uint8_t>()) st.last_grads[n] = get_tensor(r, ws, bw);
    }
    p.bias = get_tensor(r, p.bias.shape(), bw);
    st.momentum_b[n] = get_tensor(r, p.bias.shape(), bw);
  }
  st.flog = ForgettingLog::deserialize(r);
  st.view = deserialize_view(r);
  const auto rows = r.get<std::uint64_t>();
  require(rows == st.epoch, ErrorKind::format, "checkpoint metrics do not match its epoch");
  for (std::uint64_t i = 0; i < rows; ++i) st.metrics.push_back(get_metrics_row(r));
  require(r.at_end(), ErrorKind::format, "trailing bytes in checkpoint");
  state_ = std::move(st);
  timings_.clear();
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,lr,train_loss,train_acc,test_acc,nnz_total,sparsity_actual,dataset_size,"
        "p_current,footprint_bits\n";
  for (const auto& m : rows)
    os << m.epoch << ',' << m.lr << ',' << m.train_loss << ',' << m.train_acc << ','
       << m.test_acc << ',' << m.nnz_total << ',' << m.sparsity_actual << ','
       << m.dataset_size << ',' << m.p_current << ',' << m.footprint_bits << '\n';
  return os.str();
}

std::string timings_csv(const std::vector<EpochTiming>& rows) {
  std::ostringstream os;
  os << "epoch,train_ms,eval_ms,dataset_size\n";
  for (const auto& t : rows)
    os << t.epoch << ',' << t.train_ms << ',' << t.eval_ms << ',' << t.dataset_size << '\n';
  return os.str();
}

CheckpointLogs read_checkpoint_logs(std::span<const std::uint8_t> bytes) {
  ByteReader r = open_checkpoint(bytes);
  CheckpointLogs out;
  CheckpointSummary& s = out.summary;
  s.version = kVersion;
  s.config_hash = r.get<std::uint64_t>();
  s.epoch = r.get<std::uint64_t>();
  s.step = r.get<std::uint64_t>();
  s.storage_bits = r.get<std::uint8_t>();
  r.get<std::uint8_t>();
  const auto count = r.get<std::uint32_t>();
  auto skip_tensor = [&] {
    const auto n = r.get<std::uint64_t>();
    const std::size_t bytes_each = s.storage_bits / 8;
    require(n <= r.remaining() / bytes_each, ErrorKind::format, "checkpoint tensor truncated");
    std::vector<std::uint8_t> sink(n * bytes_each);
    r.get_bytes(sink.data(), sink.size());
    return n;
  };
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointSummary::Layer L;
    L.node = r.get<std::uint32_t>();
    if (r.get<std::uint8_t>()) {
      const auto cl = deserialize_compressed(r);
      L.scheme = to_string(cl.scheme);
      L.weights = cl.layout.size();
      L.nnz = cl.nnz();
      deserialize_compressed(r);
      if (r.get<std::uint8_t>()) deserialize_compressed(r);
    } else {
      L.scheme = "dense";
      L.weights = L.nnz = skip_tensor();
      skip_tensor();
      if (r.get<std::uint8_t>()) skip_tensor();
    }
    skip_tensor();
    skip_tensor();
    s.layers.push_back(L);
  }
  out.flog = ForgettingLog::deserialize(r);
  out.view = deserialize_view(r);
  s.dataset_size = out.view.size();
  s.metrics_rows = r.get<std::uint64_t>();
  for (std::size_t i = 0; i < s.metrics_rows; ++i) out.metrics.push_back(get_metrics_row(r));
  require(r.at_end(), ErrorKind::format, "trailing bytes in checkpoint");
  return out;
}

CheckpointSummary inspect_checkpoint(std::span<const std::uint8_t> bytes) {
  return read_checkpoint_logs(bytes).summary;
}

std::string checkpoint_summary_json(const CheckpointSummary& s) {
  std::ostringstream os;
  os << "{\n  \"version\": " << s.version << ",\n  \"config_hash\": \"" << std::hex
     << s.config_hash << std::dec << "\",\n  \"epoch\": " << s.epoch
     << ",\n  \"step\": " << s.step << ",\n  \"storage_bits\": " << s.storage_bits
     << ",\n  \"dataset_size\": " << s.dataset_size
     << ",\n  \"metrics_rows\": " << s.metrics_rows << ",\n  \"layers\": [";
  for (std::size_t i = 0; i < s.layers.size(); ++i) {
    const auto& L = s.layers[i];
    os << (i ? "," : "") << "\n    {\"node\": " << L.node << ", \"scheme\": \"" << L.scheme
       << "\", \"weights\": " << L.weights << ", \"nnz\": " << L.nnz << "}";
  }
  os << "\n  ]\n}\n";
  return os.str();
}

FlopsReport flops_report(const RunConfig& cfg, const Network& net, const SparsityPlan& plan,
                         std::size_t train_size, std::optional<std::size_t> compressed_size) {
  FlopsReport r;
  std::vector<Shape> shapes(net.layers().size());
  Shape in = {1};
  for (auto d : net.input_shape()) in.push_back(d);
  for (std::size_t n = 0; n < net.layers().size(); ++n) {
    const auto& l = net.layers()[n];
    const auto& ins = net.inputs_of(n);
    const Shape& src = ins.empty() || ins[0] < 0 ? in : shapes[static_cast<std::size_t>(ins[0])];
    if (l.kind == LayerKind::softmax_xent) break;
    shapes[n] = output_shape(l, src);
    if (!l.has_weights()) continue;
    LayerFlops lf;
    lf.node = n;
    lf.kind = to_string(l.kind);
    const std::size_t spatial =
        l.kind == LayerKind::conv2d ? shapes[n][2] * shapes[n][3] : 1;
    lf.macs = static_cast<std::uint64_t>(l.weight_count()) * spatial;
    lf.sparsity = plan.layer_s[n];
    r.layers.push_back(lf);
    r.inference_dense += 2.0 * static_cast<double>(lf.macs);
    r.inference_sparse += 2.0 * static_cast<double>(lf.macs) * (1.0 - lf.sparsity);
  }
  const std::size_t e1 = cfg.de_e1();
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const double examples = static_cast<double>(
        cfg.de.enabled && compressed_size && e >= e1 ? *compressed_size : train_size);
    const double off = cfg.mutation.train_offset(e);
    for (const auto& lf : r.layers) {
      const double density = plan.schemes[lf.node] ? 1.0 - (lf.sparsity + off) : 1.0;
      r.training_dense += 3.0 * 2.0 * static_cast<double>(lf.macs) * static_cast<double>(train_size);
      r.training_sparse += 3.0 * 2.0 * static_cast<double>(lf.macs) * density * examples;
    }
  }
  return r;
}

std::string flops_csv(const FlopsReport& r) {
  std::ostringstream os;
  os.precision(12);
  os << "node,kind,macs_per_example,sparsity,inference_flops\n";
  for (const auto& l : r.layers)
    os << l.node << ',' << l.kind << ',' << l.macs << ',' << l.sparsity << ','
       << 2.0 * static_cast<double>(l.macs) * (1.0 - l.sparsity) << '\n';
  os << "total,inference_dense,," << ",," << r.inference_dense << '\n';
  os << "total,inference_sparse,,,," << r.inference_sparse << '\n';
  os << "total,training_dense,,,," << r.training_dense << '\n';
  os << "total,training_sparse,,,," << r.training_sparse << '\n';
  return os.str();
}

}  // namespace mest
