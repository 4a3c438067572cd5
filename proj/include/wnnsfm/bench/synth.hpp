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


// Synthetic deforming scenes: K shape bases, random rotations and
// translations, perspective or orthographic projection.

#pragma once

#include <wnnsfm/nrsfm.hpp>
#include <wnnsfm/observations.hpp>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace wnnsfm::bench {

enum class Camera { kPerspective, kOrthographic };

inline Camera parse_camera(const std::string& name) {
  if (name == "perspective") return Camera::kPerspective;
  if (name == "orthographic") return Camera::kOrthographic;
  throw ParameterError("unknown camera model '" + name +
                       "' (perspective|orthographic)");
}

inline std::string camera_name(Camera c) {
  return c == Camera::kPerspective ? "perspective" : "orthographic";
}

struct SynthSpec {
  Index frames = 10;
  Index points = 20;
  Index K = 2;
  /// Gaussian noise std in normalized measurement units (the clean
  /// observed measurements have unit Frobenius norm).
  double noise_std = 0.0;
  double missing_fraction = 0.0;
  Camera camera = Camera::kPerspective;
  /// Distance of the shape centroid along the optical axis.
  double depth_offset = 10.0;
  /// Amplitude of the non-rigid bases relative to the mean shape.
  double deformation = 0.5;
  /// Frame written to the ground-truth structure file.
  Index eval_frame = 0;

  void validate() const {
    if (frames < 1 || points < 1)
      throw ParameterError("synth: frames and points must be >= 1");
    if (K < 1) throw ParameterError("synth: K must be >= 1");
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
      throw ParameterError("synth: noise_std must be finite and >= 0");
    if (!(missing_fraction >= 0.0 && missing_fraction < 1.0))
      throw ParameterError("synth: missing_fraction must lie in [0, 1)");
    if (!(deformation >= 0.0))
      throw ParameterError("synth: deformation must be >= 0");
    if (eval_frame < 0 || eval_frame >= frames)
      throw ParameterError("synth: eval_frame out of range");
    if (camera == Camera::kPerspective && !(depth_offset > 0.0))
      throw ParameterError("synth: depth_offset must be > 0");
  }
};

struct SynthScene {
  SynthSpec spec;
  ObservationSet obs;
  std::vector<Rotation> rotations;
  NrsfmSolution generative;  // B: F x K, C: 3P x K, t: 3F
  Matrix structure;          // R g(B C^T) + t 1^T, 3F x P
  Matrix ground_truth;       // frame `eval_frame` shape, 3 x P
  double noise_scale = 0.0;  // noise std in raw measurement units
};

/// Visibility pattern with round((1 - f) F P) entries that always covers
/// the pairs (k mod F, k mod P), k < max(F, P), so every frame and point
/// is observed.
inline std::vector<std::pair<Index, Index>> sample_visibility(
    Index F, Index P, double missing_fraction, std::mt19937_64& rng) {
  const Index total = F * P;
  const Index count =
      static_cast<Index>(std::llround((1.0 - missing_fraction) * total));
  const Index floor = std::max(F, P);
  if (count < floor)
    throw ValidationError(
        "synth: missing_fraction leaves " + std::to_string(count) +
        " observations, fewer than the " + std::to_string(floor) +
        " needed to cover every frame and point");
  std::vector<char> chosen(static_cast<std::size_t>(total), 0);
  for (Index k = 0; k < floor; ++k) chosen[(k % F) * P + (k % P)] = 1;
  std::vector<Index> rest;
  for (Index idx = 0; idx < total; ++idx)
    if (!chosen[idx]) rest.push_back(idx);
  std::shuffle(rest.begin(), rest.end(), rng);
  for (Index k = 0; k < count - floor; ++k) chosen[rest[k]] = 1;
  std::vector<std::pair<Index, Index>> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index idx = 0; idx < total; ++idx)
    if (chosen[idx]) out.emplace_back(idx / P, idx % P);
  return out;
}

inline Rotation random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Vector4d q;
  do {
    for (Index i = 0; i < 4; ++i) q[i] = normal(rng);
  } while (q.norm() < 1e-3);
  q.normalize();
  return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

inline SynthScene synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  const Index F = spec.frames, P = spec.points, K = spec.K;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SynthScene scene;
  scene.spec = spec;
  Matrix B(F, K), C(3 * P, K);
  for (Index i = 0; i < F; ++i) {
    B(i, 0) = 1.0;
    for (Index k = 1; k < K; ++k) B(i, k) = normal(rng);
  }
  for (Index k = 0; k < K; ++k) {
    const double amp = k == 0 ? 1.0 : spec.deformation;
    for (Index r = 0; r < 3 * P; ++r) C(r, k) = amp * normal(rng);
  }
  // Centre the mean shape so the depth offset measures distance.
  for (Index c = 0; c < 3; ++c) {
    const double mean = C.col(0).segment(c * P, P).mean();
    C.col(0).segment(c * P, P).array() -= mean;
  }

  scene.rotations.resize(static_cast<std::size_t>(F));
  Vector t(3 * F);
  for (Index i = 0; i < F; ++i) {
    scene.rotations[i] = random_rotation(rng);
    t[3 * i] = 0.1 * normal(rng);
    t[3 * i + 1] = 0.1 * normal(rng);
    t[3 * i + 2] =
        spec.camera == Camera::kPerspective ? spec.depth_offset : 0.0;
  }
  scene.generative = {Factorization(B, C), t};

  const Matrix sharp = B * C.transpose();
  Matrix W = reshape_from_sharp(sharp);
  for (Index i = 0; i < F; ++i) {
    W.middleRows(3 * i, 3) = scene.rotations[i] * W.middleRows(3 * i, 3);
    W.middleRows(3 * i, 3).colwise() += t.segment(3 * i, 3);
  }
  scene.structure = W;
  scene.ground_truth = frame_structure(sharp, spec.eval_frame);

  const auto visible = sample_visibility(F, P, spec.missing_fraction, rng);
  std::vector<Observation> entries;
  entries.reserve(visible.size());
  double sum = 0.0;
  for (const auto& [i, j] : visible) {
    double u = W(3 * i, j), v = W(3 * i + 1, j);
    if (spec.camera == Camera::kPerspective) {
      const double z = W(3 * i + 2, j);
      if (!(z > 0.0))
        throw ValidationError("synth: point " + std::to_string(j) +
                              " lies behind camera " + std::to_string(i) +
                              "; increase depth_offset");
      u /= z;
      v /= z;
    }
    sum += u * u + v * v;
    entries.push_back({i, j, u, v});
  }
  scene.noise_scale = spec.noise_std * std::sqrt(sum);
  if (spec.noise_std > 0.0)
    for (auto& o : entries) {
      o.u += scene.noise_scale * normal(rng);
      o.v += scene.noise_scale * normal(rng);
    }
  scene.obs = ObservationSet(F, P, std::move(entries));
  return scene;
}

/// RMS distance of the points from their centroid.
inline double scene_scale(const Matrix& S) {
  if (S.cols() == 0) return 0.0;
  const Matrix centred = S.colwise() - S.rowwise().mean();
  return std::sqrt(centred.squaredNorm() / static_cast<double>(S.cols()));
}

/// Dense matrix file: `rows cols`, then one line per row.
inline void write_matrix(std::ostream& out, const Matrix& M) {
  out << M.rows() << ' ' << M.cols() << '\n';
  for (Index r = 0; r < M.rows(); ++r) {
    for (Index c = 0; c < M.cols(); ++c)
      out << (c ? " " : "") << format_real(M(r, c));
    out << '\n';
  }
}

inline Matrix read_matrix(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!detail::next_content_line(in, line, line_no))
    throw ParseError(line_no, "missing 'rows cols' header");
  auto head = detail::split(line);
  if (head.size() != 2) throw ParseError(line_no, "header must be 'rows cols'");
  const Index rows = detail::parse_index(head[0], line_no);
  const Index cols = detail::parse_index(head[1], line_no);
  if (rows < 0 || cols < 0) throw ParseError(line_no, "negative size");
  Matrix M(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    if (!detail::next_content_line(in, line, line_no))
      throw ParseError(line_no, "unexpected end of matrix");
    auto tok = detail::split(line);
    if (static_cast<Index>(tok.size()) != cols)
      throw ParseError(line_no, "expected " + std::to_string(cols) + " reals");
    for (Index c = 0; c < cols; ++c) M(r, c) = detail::parse_real(tok[c], line_no);
  }
  return M;
}

/// Writes observations.txt, rotations.txt, ground_truth.txt and the
/// generative factors (factor_B.txt, factor_C.txt, translation.txt).
inline void save_scene(const std::filesystem::path& dir, const SynthScene& s) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  save_observations(dir / "observations.txt", s.obs);
  save_rotations(dir / "rotations.txt", s.rotations);
  save_structure(dir / "ground_truth.txt", s.ground_truth);
  auto write = [&](const char* name, const Matrix& M) {
    auto out = detail::open_for_write(dir / name);
    write_matrix(out, M);
  };
  write("factor_B.txt", s.generative.fact.B());
  write("factor_C.txt", s.generative.fact.C());
  write("translation.txt", s.generative.t);
}

}  // namespace wnnsfm::bench
