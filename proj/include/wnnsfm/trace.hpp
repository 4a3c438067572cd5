// Copyright 2026 The wnnsfm Authors. All Rights Reserved.
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

#include <wnnsfm/core.hpp>
#include <wnnsfm/observations.hpp>

#include <chrono>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace wnnsfm {

/// Elapsed-time source for traces. A disabled clock always reports zero,
/// which makes trace files reproducible byte for byte.
class TraceClock {
 public:
  static TraceClock wall() { return TraceClock(true); }
  static TraceClock disabled() { return TraceClock(false); }

  double elapsed() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

  bool enabled() const noexcept { return enabled_; }

 private:
  explicit TraceClock(bool enabled)
      : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}

  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

struct TraceRow {
  std::string phase;
  Index iter = 0;
  double elapsed = 0.0;
  double objective = 0.0;
  double data_term = 0.0;
  double reg_term = 0.0;
  Index rank = 0;

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

/// Per-iteration solver record.
class SolveTrace {
 public:
  static constexpr const char* kHeader =
      "phase,iter,elapsed_s,objective,data_term,reg_term,rank";

  void append(TraceRow row) { rows_.push_back(std::move(row)); }

  void append(const SolveTrace& other) {
    rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
  }

  const std::vector<TraceRow>& rows() const noexcept { return rows_; }
  bool empty() const noexcept { return rows_.empty(); }
  std::size_t size() const noexcept { return rows_.size(); }
  const TraceRow& back() const { return rows_.back(); }

  void write_csv(std::ostream& out) const {
    out << kHeader << '\n';
    for (const auto& r : rows_)
      out << r.phase << ',' << r.iter << ',' << format_real(r.elapsed) << ','
          << format_real(r.objective) << ',' << format_real(r.data_term) << ','
          << format_real(r.reg_term) << ',' << r.rank << '\n';
  }

  static SolveTrace read_csv(std::istream& in) {
    SolveTrace trace;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line) || line != kHeader)
      throw ParseError(1, "trace CSV header mismatch");
    line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::vector<std::string> f;
      std::size_t start = 0;
      for (;;) {
        const auto pos = line.find(',', start);
        f.push_back(line.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
      }
      if (f.size() != 7) throw ParseError(line_no, "expected 7 trace fields");
      trace.append({f[0], detail::parse_index(f[1], line_no),
                    detail::parse_real(f[2], line_no),
                    detail::parse_real(f[3], line_no),
                    detail::parse_real(f[4], line_no),
                    detail::parse_real(f[5], line_no),
                    detail::parse_index(f[6], line_no)});
    }
    return trace;
  }

 private:
  std::vector<TraceRow> rows_;
};

}  // namespace wnnsfm
