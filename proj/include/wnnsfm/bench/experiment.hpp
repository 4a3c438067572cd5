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


// Experiment pipelines behind the command-line tool.

#pragma once

#include <wnnsfm/bench/config.hpp>
#include <wnnsfm/bench/synth.hpp>
#include <wnnsfm/nrsfm.hpp>
#include <wnnsfm/solvers.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

namespace wnnsfm::bench {

// ---------------------------------------------------------------------------
// CSV records

namespace csv {

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> f;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    f.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return f;
}

inline void expect_header(std::istream& in, const std::string& header) {
  std::string line;
  if (!std::getline(in, line) || line != header)
    throw ParseError(1, "CSV header mismatch, expected '" + header + "'");
}

}  // namespace csv

/// One row of summary.csv.
struct SummaryRow {
  std::string mode;
  std::string pipeline;
  std::uint64_t seed = 0;
  double eta = 0.0;
  Index p = 0;
  double final_objective = 0.0;
  double log10_objective = 0.0;
  double data_term = 0.0;
  double reg_term = 0.0;
  Index rank = 0;
  bool converged = false;
  bool stalled = false;
  Index admm_iterations = 0;
  Index lm_iterations = 0;
  double recon_error = std::numeric_limits<double>::quiet_NaN();

  static constexpr const char* kHeader =
      "mode,pipeline,seed,eta,p,final_objective,log10_objective,data_term,"
      "reg_term,rank,converged,stalled,admm_iterations,lm_iterations,"
      "recon_error";

  void write(std::ostream& out) const {
    out << mode << ',' << pipeline << ',' << seed << ',' << format_real(eta)
        << ',' << p << ',' << format_real(final_objective) << ','
        << format_real(log10_objective) << ',' << format_real(data_term) << ','
        << format_real(reg_term) << ',' << rank << ',' << (converged ? 1 : 0)
        << ',' << (stalled ? 1 : 0) << ',' << admm_iterations << ','
        << lm_iterations << ',' << format_real(recon_error) << '\n';
  }

  static SummaryRow parse(const std::string& line, std::size_t line_no) {
    const auto f = csv::split(line);
    if (f.size() != 15) throw ParseError(line_no, "expected 15 summary fields");
    using detail::parse_index;
    using detail::parse_real;
    SummaryRow r;
    r.mode = f[0];
    r.pipeline = f[1];
    r.seed = static_cast<std::uint64_t>(std::stoull(f[2]));
    r.eta = parse_real(f[3], line_no);
    r.p = parse_index(f[4], line_no);
    r.final_objective = parse_real(f[5], line_no);
    r.log10_objective = parse_real(f[6], line_no);
    r.data_term = parse_real(f[7], line_no);
    r.reg_term = parse_real(f[8], line_no);
    r.rank = parse_index(f[9], line_no);
    r.converged = parse_index(f[10], line_no) != 0;
    r.stalled = parse_index(f[11], line_no) != 0;
    r.admm_iterations = parse_index(f[12], line_no);
    r.lm_iterations = parse_index(f[13], line_no);
    r.recon_error = parse_real(f[14], line_no);
    return r;
  }
};

inline void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << SummaryRow::kHeader << '\n';
  for (const auto& r : rows) r.write(out);
}

inline std::vector<SummaryRow> read_summary(std::istream& in) {
  csv::expect_header(in, SummaryRow::kHeader);
  std::vector<SummaryRow> rows;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty()) rows.push_back(SummaryRow::parse(line, line_no));
  }
  return rows;
}

/// One row of comparison.csv.
struct ComparisonRow {
  std::string problem;
  double eta = 0.0;
  std::uint64_t seed = 0;
  std::string solver;  // admm | combined
  double final_objective = 0.0;
  double log10_objective = 0.0;
  Index rank = 0;
  bool stalled = false;

  static constexpr const char* kHeader =
      "problem,eta,seed,solver,final_objective,log10_objective,rank,stalled";

  void write(std::ostream& out) const {
    out << problem << ',' << format_real(eta) << ',' << seed << ',' << solver
        << ',' << format_real(final_objective) << ','
        << format_real(log10_objective) << ',' << rank << ','
        << (stalled ? 1 : 0) << '\n';
  }

  static ComparisonRow parse(const std::string& line, std::size_t line_no) {
    const auto f = csv::split(line);
    if (f.size() != 8) throw ParseError(line_no, "expected 8 comparison fields");
    ComparisonRow r;
    r.problem = f[0];
    r.eta = detail::parse_real(f[1], line_no);
    r.seed = static_cast<std::uint64_t>(std::stoull(f[2]));
    r.solver = f[3];
    r.final_objective = detail::parse_real(f[4], line_no);
    r.log10_objective = detail::parse_real(f[5], line_no);
    r.rank = detail::parse_index(f[6], line_no);
    r.stalled = detail::parse_index(f[7], line_no) != 0;
    return r;
  }
};

inline std::vector<ComparisonRow> read_comparison(std::istream& in) {
  csv::expect_header(in, ComparisonRow::kHeader);
  std::vector<ComparisonRow> rows;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty()) rows.push_back(ComparisonRow::parse(line, line_no));
  }
  return rows;
}

/// Plain-text matplotlib script plotting log10(objective) of trace.csv
/// against elapsed time and iteration.
inline std::string trace_plot_script(const std::string& trace_file,
                                     const std::string& image_file) {
  return "# Plots log10(objective) from " + trace_file +
         " against time and iteration.\n"
         "import csv\n"
         "import math\n"
         "import matplotlib\n"
         "matplotlib.use('Agg')\n"
         "import matplotlib.pyplot as plt\n\n"
         "phases = {}\n"
         "with open('" + trace_file + "') as f:\n"
         "    for row in csv.DictReader(f):\n"
         "        obj = float(row['objective'])\n"
         "        if obj <= 0:\n"
         "            continue\n"
         "        p = phases.setdefault(row['phase'], ([], [], []))\n"
         "        p[0].append(float(row['elapsed_s']))\n"
         "        p[1].append(int(row['iter']))\n"
         "        p[2].append(math.log10(obj))\n\n"
         "fig, (ax_t, ax_i) = plt.subplots(1, 2, figsize=(10, 4))\n"
         "offset = 0\n"
         "for name, (t, it, y) in phases.items():\n"
         "    ax_t.plot(t, y, label=name)\n"
         "    ax_i.plot([offset + i for i in it], y, label=name)\n"
         "    if it and not name.endswith('-final'):\n"
         "        offset += max(it)\n"
         "ax_t.set_xlabel('elapsed [s]')\n"
         "ax_i.set_xlabel('iteration')\n"
         "for ax in (ax_t, ax_i):\n"
         "    ax.set_ylabel('log10 objective')\n"
         "    ax.legend()\n"
         "fig.tight_layout()\n"
         "fig.savefig('" + image_file + "')\n";
}

inline std::string comparison_plot_script() {
  return "# Bar chart of final log10 objectives from comparison.csv.\n"
         "import csv\n"
         "import matplotlib\n"
         "matplotlib.use('Agg')\n"
         "import matplotlib.pyplot as plt\n\n"
         "rows = list(csv.DictReader(open('comparison.csv')))\n"
         "problems = sorted({r['problem'] for r in rows})\n"
         "fig, ax = plt.subplots(figsize=(max(6, len(problems)), 4))\n"
         "width = 0.4\n"
         "for k, solver in enumerate(['admm', 'combined']):\n"
         "    ys = [next(float(r['log10_objective']) for r in rows\n"
         "               if r['problem'] == p and r['solver'] == solver)\n"
         "          for p in problems]\n"
         "    ax.bar([i + k * width for i in range(len(problems))], ys, width,\n"
         "           label=solver)\n"
         "ax.set_xticks([i + width / 2 for i in range(len(problems))])\n"
         "ax.set_xticklabels(problems, rotation=45, ha='right')\n"
         "ax.set_ylabel('log10 objective')\n"
         "ax.legend()\n"
         "fig.tight_layout()\n"
         "fig.savefig('comparison.png')\n";
}

// ---------------------------------------------------------------------------
// Pipelines

struct RunOutcome {
  SummaryRow summary;
  SolveTrace trace;
  Factorization fact;
  Vector t;  // NRSfM only
  Matrix estimate;  // NRSfM: evaluation-frame shape, 3 x P
};

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& text) {
  auto out = detail::open_for_write(path);
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline TraceClock make_clock(const ExperimentConfig& cfg) {
  return cfg.timing ? TraceClock::wall() : TraceClock::disabled();
}

inline double resolve_eta(const ExperimentConfig& cfg) {
  return cfg.eta.value_or(presets::kNrsfmEta);
}

inline Index resolve_p(const ExperimentConfig& cfg) {
  return cfg.p.value_or(3 * cfg.K + 1);
}

/// Schedules over `length` singular values; `free` defaults to 3K + 1.
inline WeightVector resolve_weights(const ExperimentConfig& cfg, Index length,
                                    const std::string& fallback) {
  const std::string name = cfg.schedule.value_or(fallback);
  const Index free = cfg.free.value_or(3 * cfg.K + 1);
  if (name == "nuclear")
    return WeightVector::nuclear(
        length, cfg.mu.value_or(cfg.mode == Mode::kNrsfm
                                    ? presets::kNrsfmNuclear
                                    : presets::kNuclearRigid));
  if (name == "truncated")
    return WeightVector::truncated(length, cfg.mu.value_or(presets::kTruncated),
                                   free);
  if (name == "linear")
    return WeightVector::linear_ramp(
        length, cfg.mu.value_or(presets::kLinearRamp), free);
  if (name == "zero") return WeightVector::zeros(length);
  if (name == "explicit") {
    if (cfg.weights.empty())
      throw ConfigError("schedule 'explicit' needs the 'weights' key");
    return WeightVector(Eigen::Map<const Vector>(
        cfg.weights.data(), static_cast<Index>(cfg.weights.size())));
  }
  throw ConfigError("unknown schedule '" + name + "'");
}

struct ProblemData {
  ObservationSet obs;
  std::vector<Rotation> rotations;  // empty when not given
  std::optional<Matrix> ground_truth;
};

/// Loads the files named in the config or, without an observation file,
/// generates a synthetic scene and stores it under out/scene.
inline ProblemData load_problem(const ExperimentConfig& cfg, bool need_rotations) {
  ProblemData data;
  if (cfg.observations.empty()) {
    SynthSpec spec = cfg.synth;
    spec.K = cfg.K;
    const SynthScene scene = synth_generate(spec, cfg.seed);
    save_scene(std::filesystem::path(cfg.out) / "scene", scene);
    data.obs = scene.obs;
    data.rotations = scene.rotations;
    data.ground_truth = scene.ground_truth;
    return data;
  }
  data.obs = load_observations(cfg.observations);
  if (!cfg.rotations.empty()) data.rotations = load_rotations(cfg.rotations);
  else if (need_rotations)
    throw ConfigError("mode nrsfm needs 'rotations' when 'observations' is set");
  if (!cfg.ground_truth.empty()) data.ground_truth = load_structure(cfg.ground_truth);
  return data;
}

inline void finish_summary(SummaryRow& s, const SolveTrace& trace) {
  s.final_objective = trace.back().objective;
  s.log10_objective = std::log10(s.final_objective);
  s.data_term = trace.back().data_term;
  s.reg_term = trace.back().reg_term;
  s.rank = trace.back().rank;
}

inline RunOutcome run_lr(const ExperimentConfig& cfg, const ProblemData& data) {
  const TraceClock clock = make_clock(cfg);
  const double eta = resolve_eta(cfg);
  ObservationSet obs = data.obs;
  double scale = 1.0;
  if (cfg.normalize.value_or(true)) {
    NormalizedObservations n = normalize_measurements(obs);
    obs = std::move(n.obs);
    scale = n.scale;
  }
  const PoseOperator op = build_pose_operator(obs, eta, scale);
  const Index p = resolve_p(cfg);
  if (p < 1) throw ConfigError("p must be >= 1");
  const WeightVector a =
      resolve_weights(cfg, std::min(op.rows(), op.cols()), "truncated");

  RunOutcome out;
  out.summary.mode = mode_name(Mode::kLrRecovery);
  out.summary.pipeline = pipeline_name(cfg.pipeline);
  out.summary.seed = cfg.seed;
  out.summary.eta = eta;
  out.summary.p = p;
  switch (cfg.pipeline) {
    case Pipeline::kAdmm: {
      AdmmResult r = admm_solve(op, a, p, cfg.admm, clock);
      out.trace = r.trace;
      out.fact = balanced_factor_from_svd(r.X, std::max<Index>(p, r.rank)).fact;
      out.summary.converged = r.converged;
      out.summary.stalled = r.stalled;
      out.summary.admm_iterations = r.iterations;
      break;
    }
    case Pipeline::kLm: {
      const Matrix X0 = regularization_free_init(op);
      FactorSolveResult r = lm_refine(
          op, a.resized(p), balanced_factor_from_svd(X0, p).fact, cfg.lm, clock);
      out.trace = r.trace;
      out.fact = r.fact;
      out.summary.converged = r.converged;
      out.summary.stalled = r.stalled;
      out.summary.lm_iterations = r.lm_iterations;
      break;
    }
    case Pipeline::kCombined: {
      CombinedResult r = combined_solve(op, a, p, cfg.admm, cfg.lm, clock);
      out.trace = r.trace;
      out.fact = r.refined.fact;
      out.summary.converged = r.refined.converged;
      out.summary.stalled = r.refined.stalled || r.admm.stalled;
      out.summary.admm_iterations = r.admm.iterations;
      out.summary.lm_iterations = r.refined.lm_iterations;
      break;
    }
  }
  finish_summary(out.summary, out.trace);
  return out;
}

inline RunOutcome run_nrsfm(const ExperimentConfig& cfg, const ProblemData& data) {
  const TraceClock clock = make_clock(cfg);
  const double eta = resolve_eta(cfg);
  ObservationSet obs = data.obs;
  double scale = 1.0;
  if (cfg.normalize.value_or(false)) {
    NormalizedObservations n = normalize_measurements(obs);
    obs = std::move(n.obs);
    scale = n.scale;
  }
  const NrsfmProblem problem(obs, data.rotations, cfg.K, eta, scale);
  WeightVector a;
  if (cfg.schedule.value_or("weight-rule") == "weight-rule")
    a = weights_from_init(nrsfm_closed_form(problem), cfg.K, cfg.xi, cfg.eps);
  else
    a = resolve_weights(cfg, cfg.K, "nuclear");

  RunOutcome out;
  out.summary.mode = mode_name(Mode::kNrsfm);
  out.summary.pipeline = pipeline_name(cfg.pipeline);
  out.summary.seed = cfg.seed;
  out.summary.eta = eta;
  out.summary.p = cfg.K;
  NrsfmSolution sol;
  switch (cfg.pipeline) {
    case Pipeline::kAdmm: {
      NrsfmAdmmResult r = nrsfm_admm(problem, a, cfg.admm, clock);
      out.trace = r.admm.trace;
      sol = nrsfm_balanced_start(r.admm.X, r.t, cfg.K);
      out.summary.converged = r.admm.converged;
      out.summary.stalled = r.admm.stalled;
      out.summary.admm_iterations = r.admm.iterations;
      break;
    }
    case Pipeline::kLm: {
      const Matrix X0 = reshape_to_sharp(nrsfm_closed_form(problem));
      const NrsfmSolution start = nrsfm_balanced_start(
          X0, problem.best_translation(vec(X0)), cfg.K);
      NrsfmResult r = nrsfm_refine(problem, a, start, cfg.lm, clock);
      out.trace = r.trace;
      sol = r.solution;
      out.summary.converged = r.converged;
      out.summary.stalled = r.stalled;
      out.summary.lm_iterations = r.lm_iterations;
      break;
    }
    case Pipeline::kCombined: {
      NrsfmResult r = nrsfm_solve(problem, a, cfg.lm, cfg.admm, clock);
      out.trace = r.trace;
      sol = r.solution;
      out.summary.converged = r.converged;
      out.summary.stalled = r.stalled;
      out.summary.admm_iterations = r.admm.iterations;
      out.summary.lm_iterations = r.lm_iterations;
      break;
    }
  }
  finish_summary(out.summary, out.trace);
  const Index frame = cfg.synth.eval_frame;
  if (frame < 0 || frame >= problem.frames())
    throw ConfigError("eval_frame out of range");
  // Undo the measurement scaling so the estimate is in input units.
  out.estimate = frame_structure(sol.sharp(), frame) * scale;
  if (data.ground_truth) {
    const Matrix& gt = *data.ground_truth;
    if (gt.cols() != problem.points())
      throw DimensionError("ground truth has " + std::to_string(gt.cols()) +
                           " points, observations " +
                           std::to_string(problem.points()));
    out.summary.recon_error = reconstruction_error(out.estimate, gt, true);
  }
  out.fact = sol.fact;
  out.t = sol.t;
  return out;
}

inline void write_run(const std::filesystem::path& dir, const RunOutcome& run) {
  ensure_dir(dir);
  {
    auto f = detail::open_for_write(dir / "trace.csv");
    run.trace.write_csv(f);
  }
  {
    auto f = detail::open_for_write(dir / "summary.csv");
    write_summary(f, {run.summary});
  }
  write_text(dir / "plot_objective.py",
             trace_plot_script("trace.csv", "objective.png"));
  auto write = [&](const char* name, const Matrix& M) {
    auto f = detail::open_for_write(dir / name);
    write_matrix(f, M);
  };
  write("solution_B.txt", run.fact.B());
  write("solution_C.txt", run.fact.C());
  if (run.t.size() > 0) write("solution_t.txt", run.t);
  if (run.estimate.size() > 0) save_structure(dir / "structure.txt", run.estimate);
}

// ---------------------------------------------------------------------------
// Oracle, comparison and report

struct OracleOutcome {
  PermutationReport report;
};

inline OracleOutcome run_oracle(const ExperimentConfig& cfg) {
  Vector sigma = Eigen::Map<const Vector>(
      cfg.oracle_sigma.data(), static_cast<Index>(cfg.oracle_sigma.size()));
  const WeightVector a(Eigen::Map<const Vector>(
      cfg.oracle_weights.data(),
      static_cast<Index>(cfg.oracle_weights.size())));
  OracleOutcome out;
  out.report = verify_optimal_permutation(SingularSpectrum(std::move(sigma)), a,
                                          cfg.oracle_trials, cfg.seed,
                                          cfg.oracle_exhaustive);
  const std::filesystem::path dir(cfg.out);
  ensure_dir(dir);
  auto f = detail::open_for_write(dir / "oracle.csv");
  f << "trials,violations,min_sampled,analytic_min\n"
    << out.report.trials << ',' << out.report.violations << ','
    << format_real(out.report.min_sampled) << ','
    << format_real(out.report.analytic_min) << '\n';
  return out;
}

struct ComparisonOutcome {
  std::vector<ComparisonRow> rows;
  Index violations = 0;
};

/// ADMM alone against ADMM followed by LM on synthetic recovery problems,
/// one per (eta, seed). A problem violates dominance when the combined
/// objective exceeds the ADMM objective by more than 1e-12 max(1, f_admm).
inline ComparisonOutcome compare_solvers(const ExperimentConfig& cfg) {
  if (cfg.compare_seeds < 1) throw ConfigError("compare.seeds must be >= 1");
  const std::filesystem::path dir(cfg.out);
  ensure_dir(dir);
  ComparisonOutcome out;
  const TraceClock clock = make_clock(cfg);
  for (const double eta : cfg.compare_etas) {
    for (Index k = 0; k < cfg.compare_seeds; ++k) {
      const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(k);
      SynthSpec spec = cfg.synth;
      spec.K = cfg.K;
      const SynthScene scene = synth_generate(spec, seed);
      const NormalizedObservations n = normalize_measurements(scene.obs);
      const PoseOperator op = build_pose_operator(n.obs, eta, n.scale);
      const Index p = resolve_p(cfg);
      const WeightVector a =
          resolve_weights(cfg, std::min(op.rows(), op.cols()), "truncated");
      const CombinedResult r = combined_solve(op, a, p, cfg.admm, cfg.lm, clock);
      const std::string name =
          "eta" + format_real(eta) + "_seed" + std::to_string(seed);
      const double f_admm = r.admm.objective;
      const double f_comb = r.refined.objective;
      out.rows.push_back({name, eta, seed, "admm", f_admm, std::log10(f_admm),
                          r.admm.rank, r.admm.stalled});
      out.rows.push_back({name, eta, seed, "combined", f_comb,
                          std::log10(f_comb), r.refined.rank,
                          r.refined.stalled});
      if (!(f_comb <= f_admm + 1e-12 * std::max(1.0, std::abs(f_admm))))
        ++out.violations;
    }
  }
  auto f = detail::open_for_write(dir / "comparison.csv");
  f << ComparisonRow::kHeader << '\n';
  for (const auto& r : out.rows) r.write(f);
  write_text(dir / "plot_comparison.py", comparison_plot_script());
  return out;
}

struct ReportOutcome {
  std::vector<SummaryRow> rows;
  std::vector<std::string> runs;
};

/// Collects every summary.csv below `dir` (sorted by path) into
/// report.csv and writes per-(mode, pipeline, eta) means to aggregate.csv.
inline ReportOutcome build_report(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw IoError("report: '" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() == "summary.csv")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  ReportOutcome out;
  for (const auto& path : files) {
    auto in = detail::open_for_read(path);
    for (auto& row : read_summary(in)) {
      out.rows.push_back(std::move(row));
      out.runs.push_back(fs::relative(path.parent_path(), dir).generic_string());
    }
  }
  {
    auto f = detail::open_for_write(dir / "report.csv");
    f << "run," << SummaryRow::kHeader << '\n';
    for (std::size_t i = 0; i < out.rows.size(); ++i) {
      f << out.runs[i] << ',';
      out.rows[i].write(f);
    }
  }
  struct Acc {
    Index count = 0;
    double log_sum = 0.0;
    double err_sum = 0.0;
    Index err_count = 0;
  };
  std::map<std::tuple<std::string, std::string, double>, Acc> groups;
  for (const auto& r : out.rows) {
    Acc& g = groups[{r.mode, r.pipeline, r.eta}];
    ++g.count;
    g.log_sum += r.log10_objective;
    if (std::isfinite(r.recon_error)) {
      g.err_sum += r.recon_error;
      ++g.err_count;
    }
  }
  auto f = detail::open_for_write(dir / "aggregate.csv");
  f << "mode,pipeline,eta,runs,mean_log10_objective,mean_recon_error\n";
  for (const auto& [key, g] : groups) {
    const double err = g.err_count > 0
                           ? g.err_sum / static_cast<double>(g.err_count)
                           : std::numeric_limits<double>::quiet_NaN();
    f << std::get<0>(key) << ',' << std::get<1>(key) << ','
      << format_real(std::get<2>(key)) << ',' << g.count << ','
      << format_real(g.log_sum / static_cast<double>(g.count)) << ','
      << format_real(err) << '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Entry point

enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kValidation = 3 };

/// Maps a failure to the documented exit code.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kUsage;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const ParseError*>(&e))
    return kIo;
  return kValidation;
}

/// Runs the configured experiment, writing results under cfg.out. Stalls
/// are reported in the summary and still exit 0.
inline int run_experiment(const ExperimentConfig& cfg, std::ostream& log,
                          std::ostream& err) {
  try {
    const std::filesystem::path dir(cfg.out);
    switch (cfg.mode) {
      case Mode::kSynth: {
        SynthSpec spec = cfg.synth;
        spec.K = cfg.K;
        const SynthScene scene = synth_generate(spec, cfg.seed);
        save_scene(dir, scene);
        log << "synth: " << scene.obs.size() << " observations, F = "
            << spec.frames << ", P = " << spec.points << ", K = " << spec.K
            << " -> " << dir.string() << '\n';
        return kOk;
      }
      case Mode::kLrRecovery:
      case Mode::kNrsfm: {
        const bool nrsfm = cfg.mode == Mode::kNrsfm;
        const ProblemData data = load_problem(cfg, nrsfm);
        const RunOutcome run = nrsfm ? run_nrsfm(cfg, data) : run_lr(cfg, data);
        write_run(dir, run);
        const SummaryRow& s = run.summary;
        log << s.mode << " (" << s.pipeline << "): objective "
            << format_real(s.final_objective) << ", rank " << s.rank
            << (s.stalled ? ", stalled" : "") << '\n';
        return kOk;
      }
      case Mode::kOracle: {
        const OracleOutcome o = run_oracle(cfg);
        log << "oracle: " << o.report.trials << " trials, "
            << o.report.violations << " violations\n";
        return kOk;
      }
      case Mode::kCompare: {
        const ComparisonOutcome c = compare_solvers(cfg);
        log << "compare: " << c.rows.size() / 2 << " problems, "
            << c.violations << " dominance violations\n";
        if (c.violations > 0) {
          err << "error: combined objective above ADMM objective on "
              << c.violations << " problem(s)\n";
          return kValidation;
        }
        return kOk;
      }
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kOk;
}

}  // namespace wnnsfm::bench
