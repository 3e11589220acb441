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

#include "mest/mutation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "mest/error.hpp"
#include "mest/rng.hpp"

namespace mest {
namespace {

constexpr double kEps = 1e-12;

// Flat positions covered by unit `u` of a non-pattern scheme.
template <class F>
void for_each_position(const WeightLayout& l, const Scheme& s, std::size_t u,
                       F&& f) {
  switch (s.kind) {
    case SchemeKind::unstructured:
      f(u);
      return;
    case SchemeKind::channel: {
      const std::size_t ka = l.kernel_area();
      for (std::size_t r = 0; r < l.filters; ++r)
        for (std::size_t k = 0; k < ka; ++k) f(r * l.cols() + u * ka + k);
      return;
    }
    case SchemeKind::block: {
      const std::size_t per_row = l.cols() / s.block_n;
      const std::size_t br = u / per_row, bc = u % per_row;
      for (std::size_t i = 0; i < s.block_m; ++i)
        for (std::size_t j = 0; j < s.block_n; ++j)
          f((br * s.block_m + i) * l.cols() + bc * s.block_n + j);
      return;
    }
    case SchemeKind::pattern:
      break;
  }
  fail(ErrorKind::state, "pattern units are addressed per kernel");
}

bool unit_active(const Mask& m, std::size_t u) {
  const auto& s = m.scheme();
  switch (s.kind) {
    case SchemeKind::unstructured: return m.test(u);
    case SchemeKind::channel: return m.channel_active(u);
    case SchemeKind::block: {
      const std::size_t per_row = m.layout().cols() / s.block_n;
      return m.block_active(u / per_row, u % per_row);
    }
    case SchemeKind::pattern: break;
  }
  return false;
}

void set_unit(Mask& m, std::size_t u, bool on) {
  const auto& s = m.scheme();
  switch (s.kind) {
    case SchemeKind::unstructured: m.set(u, on); return;
    case SchemeKind::channel: m.set_channel(u, on); return;
    case SchemeKind::block: {
      const std::size_t per_row = m.layout().cols() / s.block_n;
      m.set_block(u / per_row, u % per_row, on);
      return;
    }
    case SchemeKind::pattern: break;
  }
}

std::size_t active_units(const Mask& m) {
  std::size_t n = 0;
  const std::size_t units = unit_count(m.layout(), m.scheme());
  for (std::size_t u = 0; u < units; ++u) n += unit_active(m, u);
  return n;
}

std::size_t kernels_in_filter(const Mask& m, std::size_t f) {
  std::size_t n = 0;
  for (std::size_t c = 0; c < m.layout().channels; ++c) n += m.kernel_active(f, c);
  return n;
}

// Sorts (score, unit) ascending and returns the first `count` units.
std::vector<std::size_t> lowest(std::vector<std::pair<double, std::size_t>> v,
                                std::size_t count) {
  std::sort(v.begin(), v.end());
  std::vector<std::size_t> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(v[i].second);
  return out;
}

}  // namespace

Tensor importance(const Tensor& weight, const Tensor& grad, double lambda) {
  require(std::isfinite(lambda), ErrorKind::numeric, "lambda must be finite");
  require(grad.size() == 0 || grad.shape() == weight.shape(),
          ErrorKind::dimension, "gradient shape differs from weight shape");
  Tensor out(weight.shape());
  for (std::size_t i = 0; i < weight.size(); ++i) {
    const double g = grad.size() ? grad[i] : 0.0;
    require(std::isfinite(weight[i]) && std::isfinite(g), ErrorKind::numeric,
            "non-finite weight or gradient in importance score");
    out[i] = std::abs(weight[i]) + std::abs(lambda * g);
  }
  return out;
}

Mask arg_remove_to(const Mask& mask, double t, std::span<const double> scores) {
  const auto& l = mask.layout();
  const auto& s = mask.scheme();
  require(scores.size() == mask.size(), ErrorKind::dimension,
          "score count differs from mask size");
  const std::size_t keep = kept_units(l, s, t);
  Mask out = mask;

  if (s.kind == SchemeKind::pattern) {
    const std::size_t ka = l.kernel_area();
    for (std::size_t f = 0; f < l.filters; ++f) {
      const std::size_t have = kernels_in_filter(mask, f);
      require(have >= keep, ErrorKind::feasibility,
              "remove target is denser than the current mask");
      std::vector<std::pair<double, std::size_t>> cand;
      for (std::size_t c = 0; c < l.channels; ++c) {
        if (!mask.kernel_active(f, c)) continue;
        double sum = 0;
        const std::size_t base = f * l.cols() + c * ka;
        for (std::size_t k = 0; k < ka; ++k)
          if (mask.test(base + k)) sum += scores[base + k];
        cand.emplace_back(sum, c);
      }
      for (std::size_t c : lowest(std::move(cand), have - keep))
        out.set_kernel(f, c, -1);
    }
    return out;
  }

  const std::size_t have = active_units(mask);
  require(have >= keep, ErrorKind::feasibility,
          "remove target is denser than the current mask");
  const std::size_t units = unit_count(l, s);
  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(have);
  for (std::size_t u = 0; u < units; ++u) {
    if (!unit_active(mask, u)) continue;
    double sum = 0;
    for_each_position(l, s, u, [&](std::size_t i) { sum += scores[i]; });
    cand.emplace_back(sum, u);
  }
  for (std::size_t u : lowest(std::move(cand), have - keep)) set_unit(out, u, false);
  return out;
}

Mask arg_grow_to(const Mask& mask, double t, std::uint64_t seed) {
  const auto& l = mask.layout();
  const auto& s = mask.scheme();
  const std::size_t keep = kept_units(l, s, t);
  Mask out = mask;

  if (s.kind == SchemeKind::pattern) {
    for (std::size_t f = 0; f < l.filters; ++f) {
      const std::size_t have = kernels_in_filter(mask, f);
      require(have <= keep, ErrorKind::feasibility,
              "grow target is sparser than the current mask");
      std::vector<std::size_t> empty;
      for (std::size_t c = 0; c < l.channels; ++c)
        if (!mask.kernel_active(f, c)) empty.push_back(c);
      require(empty.size() >= keep - have, ErrorKind::feasibility,
              "not enough empty kernels to grow");
      Rng rng(derive_seed(seed, {f}));
      rng.shuffle(empty);
      for (std::size_t i = 0; i < keep - have; ++i)
        out.set_kernel(f, empty[i], static_cast<int>(rng.below(kPatternStyles)));
    }
    return out;
  }

  const std::size_t have = active_units(mask);
  require(have <= keep, ErrorKind::feasibility,
          "grow target is sparser than the current mask");
  const std::size_t units = unit_count(l, s);
  std::vector<std::size_t> empty;
  empty.reserve(units - have);
  for (std::size_t u = 0; u < units; ++u)
    if (!unit_active(mask, u)) empty.push_back(u);
  require(empty.size() >= keep - have, ErrorKind::feasibility,
          "not enough empty units to grow");
  // Partial Fisher-Yates: the first `need` slots become a uniform sample.
  Rng rng(seed);
  const std::size_t need = keep - have;
  for (std::size_t i = 0; i < need; ++i) {
    const std::size_t j = i + rng.below(empty.size() - i);
    std::swap(empty[i], empty[j]);
    set_unit(out, empty[i], true);
  }
  return out;
}

void apply_mask(Tensor& values, const Mask& mask) {
  require(values.size() == mask.size(), ErrorKind::dimension,
          "tensor size differs from mask size");
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!mask.test(i)) values[i] = 0.0;
}

std::string to_string(MutationMode mode) {
  switch (mode) {
    case MutationMode::none: return "none";
    case MutationMode::em: return "em";
    case MutationMode::ems: return "ems";
    case MutationMode::vanilla: return "vanilla";
  }
  return "?";
}

MutationMode parse_mutation_mode(std::string_view text) {
  if (text == "none" || text == "static") return MutationMode::none;
  if (text == "em") return MutationMode::em;
  if (text == "ems" || text == "em&s" || text == "em_s") return MutationMode::ems;
  if (text == "vanilla") return MutationMode::vanilla;
  fail(ErrorKind::config, "unknown mutation mode '" + std::string(text) + "'");
}

void MutationSchedule::validate() const {
  require(end > 0, ErrorKind::config, "end must be positive");
  if (mode == MutationMode::none) return;
  require(delta >= 1, ErrorKind::config, "delta must be at least 1");
  require(stop < end, ErrorKind::config, "stop must precede end");
  require(stop % delta == 0, ErrorKind::config,
          "stop must be a multiple of delta");
  require(!milestones.empty() && milestones.front().epoch == 0,
          ErrorKind::config, "milestones must start at epoch 0");
  for (std::size_t i = 0; i < milestones.size(); ++i) {
    const auto& m = milestones[i];
    require(m.p > 0.0 && m.p < 1.0, ErrorKind::config, "p must lie in (0,1)");
    require(m.epoch % delta == 0, ErrorKind::config,
            "milestones must fall on mutation epochs");
    if (i > 0) {
      require(m.epoch > milestones[i - 1].epoch, ErrorKind::config,
              "milestones must be epoch-ascending");
      require(m.p <= milestones[i - 1].p, ErrorKind::config,
              "p must not increase across milestones");
    }
  }
  require(std::isfinite(lambda) && lambda >= 0.0, ErrorKind::config,
          "lambda must be finite and non-negative");
}

double MutationSchedule::p_at(std::size_t epoch) const {
  if (milestones.empty()) return 0.0;
  if (mode == MutationMode::vanilla) return milestones.front().p;
  double p = milestones.front().p;
  for (const auto& m : milestones)
    if (m.epoch <= epoch) p = m.p;
  return p;
}

double MutationSchedule::train_offset(std::size_t epoch) const {
  if (mode != MutationMode::ems || epoch >= stop) return 0.0;
  return -p_at(epoch - epoch % delta);
}

double MutationSchedule::p_max() const {
  double p = 0.0;
  for (const auto& m : milestones) p = std::max(p, m.p);
  return p;
}

std::vector<MutationStep> plan_epoch(const MutationSchedule& schedule,
                                     std::size_t epoch) {
  std::vector<MutationStep> steps;
  const auto& sc = schedule;
  if (sc.mode == MutationMode::none || epoch % sc.delta != 0 || epoch > sc.stop)
    return steps;
  if (sc.mode == MutationMode::ems) {
    // Close the previous window, then open the next one.
    if (epoch > 0) steps.push_back({StepKind::remove_to, 0.0});
    if (epoch < sc.stop) steps.push_back({StepKind::grow_to, -sc.p_at(epoch)});
    return steps;
  }
  // EM and vanilla need a gradient from a finished epoch.
  if (epoch == 0 || epoch >= sc.stop) return steps;
  const double p = sc.p_at(epoch);
  steps.push_back({StepKind::remove_to, p});
  steps.push_back({StepKind::grow_to, 0.0});
  return steps;
}

void validate_schedule_for(const Network& net, std::span<const double> layer_s,
                           const MutationSchedule& schedule) {
  schedule.validate();
  if (schedule.mode == MutationMode::none) return;
  const double p = schedule.p_max();
  const double sign = schedule.mode == MutationMode::ems ? -1.0 : 1.0;
  for (std::size_t node : net.weighted()) {
    const auto& mask = net.params()[node].mask;
    if (!mask) continue;
    const double s = layer_s[node];
    const double t = s + sign * p;
    require(t >= -kEps && t < 1.0, ErrorKind::feasibility,
            "layer " + std::to_string(node) + ": sparsity " + std::to_string(s) +
                " cannot move by p=" + std::to_string(p));
    check_feasible(mask->layout(), mask->scheme(), std::max(t, 0.0));
  }
}

std::vector<MutationEvent> em_epoch_hook(Network& net,
                                         std::span<const Tensor> last_grads,
                                         std::span<const double> layer_s,
                                         const MutationSchedule& schedule,
                                         std::size_t epoch, std::uint64_t seed,
                                         const MutationObserver& observer) {
  std::vector<MutationEvent> events;
  const auto steps = plan_epoch(schedule, epoch);
  if (steps.empty()) return events;
  require(layer_s.size() >= net.layers().size(), ErrorKind::dimension,
          "layer sparsity list shorter than the network");
  for (std::size_t node : net.weighted()) {
    auto& prm = net.params()[node];
    if (!prm.mask) continue;
    const Tensor empty;
    const Tensor& g = node < last_grads.size() ? last_grads[node] : empty;
    for (std::size_t k = 0; k < steps.size(); ++k) {
      const auto& step = steps[k];
      const double target = std::max(0.0, layer_s[node] + step.offset);
      MutationEvent ev{epoch, node, step.kind, target, prm.mask->nnz(), 0};
      if (step.kind == StepKind::remove_to) {
        const Tensor scr = importance(prm.weight, g, schedule.lambda);
        *prm.mask = arg_remove_to(*prm.mask, target, scr.span());
        apply_mask(prm.weight, *prm.mask);
      } else {
        *prm.mask = arg_grow_to(*prm.mask, target,
                                derive_seed(seed, {0x6120, epoch, node, k}));
      }
      prm.mask->check_invariants();
      ev.nnz_after = prm.mask->nnz();
      if (observer) observer(ev);
      events.push_back(ev);
    }
  }
  return events;
}

}  // namespace mest
