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

#include "mest/forgetting.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "mest/error.hpp"

namespace mest {

ForgettingLog::ForgettingLog(std::size_t examples, bool keep_history)
    : stats_(examples), keep_history_(keep_history) {}

void ForgettingLog::record_epoch(std::span<const std::uint8_t> correct) {
  require(correct.size() == stats_.size(), ErrorKind::dimension,
          "correctness vector has " + std::to_string(correct.size()) +
              " entries, log tracks " + std::to_string(stats_.size()));
  CurvePoint pt;
  pt.epoch = curve_.size();
  for (std::size_t i = 0; i < stats_.size(); ++i) {
    auto& st = stats_[i];
    const bool c = correct[i] != 0;
    if (st.epochs > 0 && st.last_correct && !c) {
      ++st.forgets;
      ++pt.forgetting_events;
    }
    if (c && (st.epochs == 0 || !st.last_correct)) ++st.learns;
    st.ever_correct = st.ever_correct || c;
    st.last_correct = c;
    ++st.epochs;
    if (st.ever_correct && st.forgets == 0) ++pt.unforgettable;
  }
  curve_.push_back(pt);
  if (keep_history_) history_.emplace_back(correct.begin(), correct.end());
}

void ForgettingLog::serialize(ByteWriter& out) const {
  out.put(static_cast<std::uint64_t>(stats_.size()));
  out.put(static_cast<std::uint8_t>(keep_history_));
  for (const auto& st : stats_) {
    out.put(st.epochs);
    out.put(st.forgets);
    out.put(st.learns);
    out.put(static_cast<std::uint8_t>(st.ever_correct | (st.last_correct << 1)));
  }
  out.put(static_cast<std::uint64_t>(curve_.size()));
  for (const auto& pt : curve_) {
    out.put(static_cast<std::uint64_t>(pt.unforgettable));
    out.put(static_cast<std::uint64_t>(pt.forgetting_events));
  }
  if (keep_history_)
    for (const auto& h : history_) out.put_bytes(h.data(), h.size());
}

ForgettingLog ForgettingLog::deserialize(ByteReader& in) {
  const auto n = in.get<std::uint64_t>();
  require(n <= in.remaining(), ErrorKind::format, "forgetting log size corrupt");
  ForgettingLog log(n, in.get<std::uint8_t>() != 0);
  for (auto& st : log.stats_) {
    st.epochs = in.get<std::uint32_t>();
    st.forgets = in.get<std::uint32_t>();
    st.learns = in.get<std::uint32_t>();
    const auto flags = in.get<std::uint8_t>();
    require(flags < 4, ErrorKind::format, "forgetting log flags corrupt");
    st.ever_correct = flags & 1;
    st.last_correct = flags & 2;
  }
  const auto epochs = in.get<std::uint64_t>();
  require(epochs <= in.remaining(), ErrorKind::format, "forgetting curve size corrupt");
  for (std::uint64_t e = 0; e < epochs; ++e) {
    CurvePoint pt;
    pt.epoch = e;
    pt.unforgettable = in.get<std::uint64_t>();
    pt.forgetting_events = in.get<std::uint64_t>();
    log.curve_.push_back(pt);
  }
  if (log.keep_history_) {
    for (std::uint64_t e = 0; e < epochs; ++e) {
      std::vector<std::uint8_t> h(n);
      in.get_bytes(h.data(), h.size());
      log.history_.push_back(std::move(h));
    }
  }
  return log;
}

std::vector<std::size_t> unforgettable_set(const ForgettingLog& log) {
  require(log.epochs() > 0, ErrorKind::state, "no epochs recorded");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& st = log.stats()[i];
    if (st.ever_correct && st.forgets == 0) out.push_back(i);
  }
  return out;
}

DatasetView DatasetView::identity(std::size_t n) {
  DatasetView v;
  v.base_size = n;
  v.kept.resize(n);
  for (std::size_t i = 0; i < n; ++i) v.kept[i] = i;
  return v;
}

DatasetView compress_dataset(const ForgettingLog& log, int th, std::size_t e1,
                             std::uint64_t seed) {
  require(th >= -1, ErrorKind::config, "threshold must be >= -1");
  require(log.epochs() > 0 || th == -1, ErrorKind::state,
          "compression needs at least one recorded epoch");
  DatasetView v;
  v.base_size = log.size();
  v.th = th;
  v.e1 = e1;
  v.seed = seed;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& st = log.stats()[i];
    const bool removed =
        th >= 0 && st.ever_correct && st.forgets <= static_cast<std::uint32_t>(th);
    if (!removed) v.kept.push_back(i);
  }
  require(!v.kept.empty(), ErrorKind::feasibility,
          "compression would remove every training example");
  return v;
}

void TwoPhasePlan::validate() const {
  require(e1 > 0 && e1 < end, ErrorKind::config,
          "phase-1 length must satisfy 0 < e1 < epochs");
  require(th >= -1, ErrorKind::config, "threshold must be >= -1");
}

TwoPhasePlan two_phase_plan(std::size_t e1, int th, std::size_t end) {
  TwoPhasePlan p{e1, th, end};
  p.validate();
  return p;
}

std::string forgetting_csv(const ForgettingLog& log, const DatasetView& view) {
  require(view.base_size == log.size(), ErrorKind::dimension,
          "dataset view does not match the log");
  std::vector<std::uint8_t> kept(log.size(), 0);
  for (auto i : view.kept) kept[i] = 1;
  std::ostringstream os;
  os << "example_id,ever_correct,f_count,learn_count,removed_flag\n";
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& st = log.stats()[i];
    os << i << ',' << int(st.ever_correct) << ',' << st.forgets << ','
       << st.learns << ',' << int(!kept[i]) << '\n';
  }
  return os.str();
}

std::string forgetting_curve_csv(const ForgettingLog& log) {
  std::ostringstream os;
  os << "epoch,unforgettable,forgetting_events\n";
  for (const auto& pt : log.curve())
    os << pt.epoch << ',' << pt.unforgettable << ',' << pt.forgetting_events << '\n';
  return os.str();
}

std::string manifest_text(const DatasetView& view) {
  std::ostringstream os;
  os << "# e1=" << view.e1 << " th=" << view.th << " seed=" << view.seed
     << " base=" << view.base_size << '\n';
  for (auto i : view.kept) os << i << '\n';
  return os.str();
}

DatasetView parse_manifest(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  require(static_cast<bool>(std::getline(is, line)) && line.rfind("# ", 0) == 0,
          ErrorKind::format, "manifest header missing");
  DatasetView v;
  long long e1 = -1, th = -2, base = -1;
  unsigned long long seed = 0;
  require(std::sscanf(line.c_str(), "# e1=%lld th=%lld seed=%llu base=%lld", &e1,
                      &th, &seed, &base) == 4 && e1 >= 0 && th >= -1 && base >= 0,
          ErrorKind::format, "manifest header malformed");
  v.e1 = static_cast<std::size_t>(e1);
  v.th = static_cast<int>(th);
  v.seed = seed;
  v.base_size = static_cast<std::size_t>(base);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::size_t idx = 0;
    auto [p, ec] = std::from_chars(line.data(), line.data() + line.size(), idx);
    require(ec == std::errc() && p == line.data() + line.size(), ErrorKind::format,
            "manifest line '" + line + "' is not an index");
    require(idx < v.base_size && (v.kept.empty() || idx > v.kept.back()),
            ErrorKind::format, "manifest indices must be ascending and in range");
    v.kept.push_back(idx);
  }
  return v;
}

void serialize(const DatasetView& view, ByteWriter& out) {
  out.put(static_cast<std::uint64_t>(view.base_size));
  out.put(static_cast<std::int32_t>(view.th));
  out.put(static_cast<std::uint64_t>(view.e1));
  out.put(view.seed);
  out.put(static_cast<std::uint64_t>(view.kept.size()));
  for (auto i : view.kept) out.put(static_cast<std::uint32_t>(i));
}

DatasetView deserialize_view(ByteReader& in) {
  DatasetView v;
  v.base_size = in.get<std::uint64_t>();
  v.th = in.get<std::int32_t>();
  v.e1 = in.get<std::uint64_t>();
  v.seed = in.get<std::uint64_t>();
  const auto n = in.get<std::uint64_t>();
  require(n <= v.base_size && n * 4 <= in.remaining(), ErrorKind::format,
          "dataset view size corrupt");
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto idx = in.get<std::uint32_t>();
    require(idx < v.base_size && (v.kept.empty() || idx > v.kept.back()),
            ErrorKind::format, "dataset view indices corrupt");
    v.kept.push_back(idx);
  }
  return v;
}

}  // namespace mest
