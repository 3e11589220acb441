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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mest/io.hpp"

namespace mest {

struct ExampleStats {
  std::uint32_t epochs = 0;  // observations recorded
  std::uint32_t forgets = 0;  // correct -> incorrect transitions
  std::uint32_t learns = 0;   // first correct, or incorrect -> correct
  bool ever_correct = false;
  bool last_correct = false;

  friend bool operator==(const ExampleStats&, const ExampleStats&) = default;
};

struct CurvePoint {
  std::size_t epoch = 0;
  std::size_t unforgettable = 0;     // ever correct, never forgotten so far
  std::size_t forgetting_events = 0;  // transitions recorded this epoch

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

class ForgettingLog {
 public:
  ForgettingLog() = default;
  explicit ForgettingLog(std::size_t examples, bool keep_history = false);

  std::size_t size() const noexcept { return stats_.size(); }
  std::size_t epochs() const noexcept { return curve_.size(); }
  const std::vector<ExampleStats>& stats() const noexcept { return stats_; }
  const std::vector<CurvePoint>& curve() const noexcept { return curve_; }
  bool has_history() const noexcept { return keep_history_; }
  /// history()[epoch][example]; empty unless constructed with history.
  const std::vector<std::vector<std::uint8_t>>& history() const noexcept {
    return history_;
  }

  /// One observation per example; `correct.size()` must equal size().
  void record_epoch(std::span<const std::uint8_t> correct);

  void serialize(ByteWriter& out) const;
  static ForgettingLog deserialize(ByteReader& in);

  friend bool operator==(const ForgettingLog&, const ForgettingLog&) = default;

 private:
  std::vector<ExampleStats> stats_;
  std::vector<CurvePoint> curve_;
  bool keep_history_ = false;
  std::vector<std::vector<std::uint8_t>> history_;
};

/// {i : ever_correct(i) and f(i) == 0}, ascending.
std::vector<std::size_t> unforgettable_set(const ForgettingLog& log);

struct DatasetView {
  std::size_t base_size = 0;
  std::vector<std::size_t> kept;  // ascending indices into the base dataset
  int th = -1;
  std::size_t e1 = 0;
  std::uint64_t seed = 0;

  static DatasetView identity(std::size_t n);
  std::size_t size() const noexcept { return kept.size(); }
  friend bool operator==(const DatasetView&, const DatasetView&) = default;
};

/// Removes examples with ever_correct and f <= th. th = -1 removes nothing.
DatasetView compress_dataset(const ForgettingLog& log, int th,
                             std::size_t e1 = 0, std::uint64_t seed = 0);

struct TwoPhasePlan {
  std::size_t e1 = 0;
  int th = 0;
  std::size_t end = 0;

  /// Throws a config error unless 0 < e1 < end.
  void validate() const;
  bool records(std::size_t epoch) const { return epoch < e1; }
  bool compresses_at(std::size_t epoch) const { return epoch == e1; }
};

TwoPhasePlan two_phase_plan(std::size_t e1, int th, std::size_t end);

/// CSV: example_id,ever_correct,f_count,learn_count,removed_flag
std::string forgetting_csv(const ForgettingLog& log, const DatasetView& view);
/// CSV: epoch,unforgettable,forgetting_events
std::string forgetting_curve_csv(const ForgettingLog& log);
/// Header comment with e1, th and seed, then one kept index per line.
std::string manifest_text(const DatasetView& view);
DatasetView parse_manifest(const std::string& text);

void serialize(const DatasetView& view, ByteWriter& out);
DatasetView deserialize_view(ByteReader& in);

}  // namespace mest
