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

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace wnnsfm {

/// Image measurement m_ij of point j in frame i.
struct Observation {
  Index frame = 0;
  Index point = 0;
  double u = 0.0;
  double v = 0.0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Tracks over F frames and P points; the entry list defines the visibility
/// set. Entries keep their input order.
class ObservationSet {
 public:
  ObservationSet() = default;

  ObservationSet(Index frames, Index points, std::vector<Observation> entries)
      : frames_(frames), points_(points), entries_(std::move(entries)) {
    if (frames_ < 0 || points_ < 0)
      throw ValidationError("ObservationSet: negative frame or point count");
    std::set<std::pair<Index, Index>> seen;
    for (const auto& o : entries_) {
      if (o.frame < 0 || o.frame >= frames_ || o.point < 0 ||
          o.point >= points_)
        throw ValidationError("ObservationSet: index (" +
                              std::to_string(o.frame) + ", " +
                              std::to_string(o.point) + ") out of range");
      if (!std::isfinite(o.u) || !std::isfinite(o.v))
        throw ValidationError("ObservationSet: non-finite coordinate at (" +
                              std::to_string(o.frame) + ", " +
                              std::to_string(o.point) + ")");
      if (!seen.emplace(o.frame, o.point).second)
        throw ValidationError("ObservationSet: duplicate observation (" +
                              std::to_string(o.frame) + ", " +
                              std::to_string(o.point) + ")");
    }
  }

  Index frames() const noexcept { return frames_; }
  Index points() const noexcept { return points_; }
  Index size() const noexcept { return static_cast<Index>(entries_.size()); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<Observation>& entries() const noexcept { return entries_; }

  /// Dense 2F x P measurement matrix, zeros where unobserved.
  Matrix measurement_matrix() const {
    Matrix M = Matrix::Zero(2 * frames_, points_);
    for (const auto& o : entries_) {
      M(2 * o.frame, o.point) = o.u;
      M(2 * o.frame + 1, o.point) = o.v;
    }
    return M;
  }

  friend bool operator==(const ObservationSet&,
                         const ObservationSet&) = default;

 private:
  Index frames_ = 0;
  Index points_ = 0;
  std::vector<Observation> entries_;
};

namespace detail {

// Strips comment lines and blanks; returns false at end of input.
inline bool next_content_line(std::istream& in, std::string& line,
                              std::size_t& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    return true;
  }
  return false;
}

inline double parse_real(const std::string& token, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double value = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return value;
  } catch (const std::exception&) {
    throw ParseError(line_no, "expected a real number, got '" + token + "'");
  }
}

inline Index parse_index(const std::string& token, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const long long value = std::stoll(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return static_cast<Index>(value);
  } catch (const std::exception&) {
    throw ParseError(line_no, "expected an integer, got '" + token + "'");
  }
}

inline std::vector<std::string> split(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> tokens;
  std::string tok;
  while (ss >> tok) tokens.push_back(tok);
  return tokens;
}

inline std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace detail

/// Parses the observation text format: a header line `F P`, then one
/// `i j u v` line per observation. Lines starting with `#` are comments.
inline ObservationSet read_observations(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!detail::next_content_line(in, line, line_no))
    throw ParseError(line_no, "missing 'F P' header");
  auto header = detail::split(line);
  if (header.size() != 2) throw ParseError(line_no, "header must be 'F P'");
  const Index F = detail::parse_index(header[0], line_no);
  const Index P = detail::parse_index(header[1], line_no);
  if (F < 0 || P < 0) throw ParseError(line_no, "negative F or P");

  std::vector<Observation> entries;
  while (detail::next_content_line(in, line, line_no)) {
    auto tok = detail::split(line);
    if (tok.size() != 4)
      throw ParseError(line_no, "expected 'i j u v', got " +
                                    std::to_string(tok.size()) + " fields");
    entries.push_back({detail::parse_index(tok[0], line_no),
                       detail::parse_index(tok[1], line_no),
                       detail::parse_real(tok[2], line_no),
                       detail::parse_real(tok[3], line_no)});
  }
  return ObservationSet(F, P, std::move(entries));
}

inline ObservationSet load_observations(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  return read_observations(in);
}

inline void write_observations(std::ostream& out, const ObservationSet& obs) {
  out << obs.frames() << ' ' << obs.points() << '\n';
  for (const auto& o : obs.entries())
    out << o.frame << ' ' << o.point << ' ' << format_real(o.u) << ' '
        << format_real(o.v) << '\n';
}

inline void save_observations(const std::filesystem::path& path,
                              const ObservationSet& obs) {
  auto out = detail::open_for_write(path);
  write_observations(out, obs);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

struct NormalizedObservations {
  ObservationSet obs;
  double scale = 1.0;
};

/// Divides every measurement by the Frobenius norm of the observed entries.
inline NormalizedObservations normalize_measurements(const ObservationSet& obs) {
  if (obs.empty())
    throw DegenerateInputError("normalize_measurements: no observations");
  double sum = 0.0;
  for (const auto& o : obs.entries()) sum += o.u * o.u + o.v * o.v;
  const double scale = std::sqrt(sum);
  if (!(scale > 0.0))
    throw DegenerateInputError("normalize_measurements: all measurements zero");
  std::vector<Observation> entries = obs.entries();
  for (auto& o : entries) {
    o.u /= scale;
    o.v /= scale;
  }
  return {ObservationSet(obs.frames(), obs.points(), std::move(entries)),
          scale};
}

}  // namespace wnnsfm
