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


#include "oracles.hpp"

#include <wnnsfm/bench/experiment.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <sys/wait.h>

namespace wnnsfm {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("wnnsfm_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(Reshape, SharpRoundTripAndPermutation) {
  std::mt19937_64 rng(101);
  const Matrix X = oracle::gaussian(9, 4, rng);  // F = 3, P = 4
  const Matrix S = reshape_to_sharp(X);
  ASSERT_EQ(S.rows(), 3);
  ASSERT_EQ(S.cols(), 12);
  // Row i of X# lists x, then y, then z of every point in frame i.
  EXPECT_EQ(S(1, 4 + 2), X(3 * 1 + 1, 2));
  EXPECT_EQ(reshape_from_sharp(S), X);
  EXPECT_LT((reshape_permutation(3, 4) * vec(S) - vec(X)).norm(), 1e-15);
  EXPECT_EQ(frame_structure(S, 2), X.middleRows(6, 3));
  EXPECT_THROW(reshape_to_sharp(Matrix::Zero(4, 2)), DimensionError);
}

TEST(Rotations, TextRoundTripAndValidation) {
  std::mt19937_64 rng(103);
  std::vector<Rotation> R{oracle::qr_rotation(rng), oracle::qr_rotation(rng)};
  std::stringstream ss;
  write_rotations(ss, R);
  const auto back = read_rotations(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1], R[1]);
  std::istringstream bad("1\n1 0 0\n0 1 0\n0 0 -1\n");
  EXPECT_THROW(read_rotations(bad), ValidationError);
  std::istringstream short_file("1\n1 0 0\n");
  EXPECT_THROW(read_rotations(short_file), ParseError);
}

TEST(Structure, TextRoundTrip) {
  std::mt19937_64 rng(107);
  const Matrix S = oracle::gaussian(3, 5, rng);
  std::stringstream ss;
  write_structure(ss, S);
  EXPECT_EQ(read_structure(ss), S);
}

struct SmallProblem {
  bench::SynthScene scene;
  NrsfmProblem problem;
};

SmallProblem make_problem(std::uint64_t seed, double eta, Index K = 2,
                          double missing = 0.0) {
  bench::SynthSpec spec;
  spec.frames = 4;
  spec.points = 6;
  spec.K = K;
  spec.missing_fraction = missing;
  bench::SynthScene scene = bench::synth_generate(spec, seed);
  NrsfmProblem problem(scene.obs, scene.rotations, K, eta);
  return {std::move(scene), std::move(problem)};
}

TEST(Nrsfm, ProjectedStructureMatchesDirectRotation) {
  std::mt19937_64 rng(109);
  const SmallProblem sp = make_problem(1, 0.3);
  const Matrix sharp = oracle::gaussian(4, 18, rng);
  const Vector t = oracle::gaussian(12, 1, rng);
  const Matrix W = sp.problem.projected_structure(sharp, t);
  for (Index i = 0; i < 4; ++i) {
    const Matrix expect = (sp.scene.rotations[i] * frame_structure(sharp, i))
                              .colwise() + Eigen::Vector3d(t.segment(3 * i, 3));
    EXPECT_LT((W.middleRows(3 * i, 3) - expect).norm(), 1e-12);
  }
  // Both designs reproduce the same residual.
  const Vector r = sp.problem.structure_design() * vec(sharp) +
                   sp.problem.translation_design() * t -
                   sp.problem.pose_operator().b();
  EXPECT_NEAR(r.squaredNorm(),
              oracle::pose_double_sum(sp.scene.obs, 0.3, W), 1e-10);
}

TEST(Nrsfm, GenerativeSolutionFitsExactDataAtMatchedEta) {
  bench::SynthSpec spec;
  spec.frames = 5;
  spec.points = 10;
  spec.camera = bench::Camera::kOrthographic;
  const auto scene = bench::synth_generate(spec, 3);
  const NrsfmProblem problem(scene.obs, scene.rotations, 2, 1.0);
  EXPECT_LT(problem.data_loss(scene.generative.sharp(), scene.generative.t),
            1e-24);
  EXPECT_EQ(numerical_rank(oracle::singular_values_eig(scene.generative.sharp())),
            2);
}

TEST(Nrsfm, JacobianMatchesFiniteDifferencesWithTranslation) {
  std::mt19937_64 rng(113);
  const SmallProblem sp = make_problem(2, 0.4, 2, 0.2);
  const WeightVector a = oracle::ascending_weights(2, rng, 0.1);
  const NrsfmLmProblem lm(sp.problem, a);
  const Vector z = oracle::gaussian(4 * 2 + 18 * 2 + 12, 1, rng);
  const LmEvaluation e = lm.evaluate(z, true);
  const Vector grad = 2.0 * (e.J.transpose() * e.r);
  const Vector fd = oracle::fd_gradient(
      [&](const Vector& x) { return lm.evaluate(x, false).r.squaredNorm(); }, z);
  EXPECT_LT((grad - fd).norm() / fd.norm(), 1e-6);
  EXPECT_LT((grad.tail(12) - fd.tail(12)).norm() / fd.tail(12).norm(), 1e-6);
}

TEST(Nrsfm, BestTranslationIsStationary) {
  std::mt19937_64 rng(127);
  const SmallProblem sp = make_problem(4, 0.2);
  const Matrix sharp = oracle::gaussian(4, 18, rng);
  const Vector t = sp.problem.best_translation(vec(sharp));
  const double f0 = sp.problem.data_loss(sharp, t);
  for (int k = 0; k < 50; ++k)
    EXPECT_GE(sp.problem.data_loss(sharp, t + 1e-4 * oracle::gaussian(12, 1, rng)),
              f0 - 1e-14);
}

TEST(Nrsfm, WeightRuleIsInverseSingularValues) {
  std::mt19937_64 rng(131);
  const Matrix X0 = oracle::gaussian(12, 5, rng);
  const WeightVector a = weights_from_init(X0, 2, 0.5, 1e-8);
  const Vector s = oracle::singular_values_eig(reshape_to_sharp(X0));
  EXPECT_NEAR(a[0], 0.5 / (s[0] + 1e-8), 1e-12);
  EXPECT_NEAR(a[1], 0.5 / (s[1] + 1e-8), 1e-12);
  EXPECT_THROW(weights_from_init(X0, 2, 0.0, 1e-8), ParameterError);
}

TEST(Nrsfm, SolveKeepsRankKAndDominatesAdmm) {
  const SmallProblem sp = make_problem(5, 0.05);
  const WeightVector a =
      weights_from_init(nrsfm_closed_form(sp.problem), 2, 5e-3, 1e-8);
  const NrsfmResult r = nrsfm_solve(sp.problem, a, {}, {}, TraceClock::disabled());
  EXPECT_LE(r.rank, 2);
  EXPECT_LE(r.objective, r.admm.objective);
  EXPECT_EQ(r.solution.fact.width(), 2);
}

TEST(Nrsfm, ReconstructionErrorMatchesAffineOracle) {
  std::mt19937_64 rng(137);
  const Matrix gt = oracle::gaussian(3, 8, rng);
  const Rotation R = oracle::qr_rotation(rng);
  const Matrix est = ((2.5 * R * gt).colwise() + Eigen::Vector3d(1, -2, 3)) +
                     1e-3 * oracle::gaussian(3, 8, rng);
  const double err = reconstruction_error(est, gt, true);
  EXPECT_LT(err, 1e-2);
  // Exact similarity pair: both alignments recover gt.
  const Matrix exact = (2.5 * R * gt).colwise() + Eigen::Vector3d(1, -2, 3);
  EXPECT_LT(reconstruction_error(exact, gt, true), 1e-10);
  EXPECT_LT(oracle::affine_aligned_error(exact, gt), 1e-10);
  EXPECT_GE(err, oracle::affine_aligned_error(est, gt) - 1e-12);
  EXPECT_NEAR(reconstruction_error(gt, gt, false), 0.0, 0.0);
  EXPECT_THROW(reconstruction_error(gt.leftCols(2), gt.leftCols(2), true),
               SizeError);
}

TEST(Synth, InvariantsAndMissingCount) {
  bench::SynthSpec spec;
  spec.frames = 6;
  spec.points = 10;
  spec.missing_fraction = 0.3;
  const auto scene = bench::synth_generate(spec, 9);
  EXPECT_EQ(scene.obs.size(), 42);  // round(0.7 * 60)
  std::vector<int> per_frame(6, 0), per_point(10, 0);
  for (const auto& o : scene.obs.entries()) {
    ++per_frame[o.frame];
    ++per_point[o.point];
  }
  for (int c : per_frame) EXPECT_GE(c, 1);
  for (int c : per_point) EXPECT_GE(c, 1);
  EXPECT_EQ(numerical_rank(oracle::singular_values_eig(scene.generative.sharp())),
            2);
  spec.missing_fraction = 0.9;
  EXPECT_THROW(bench::synth_generate(spec, 9), ValidationError);
}

TEST(Synth, SavedFilesAreDeterministic) {
  bench::SynthSpec spec;
  spec.noise_std = 0.01;
  const fs::path d1 = scratch_dir("synth1"), d2 = scratch_dir("synth2");
  bench::save_scene(d1, bench::synth_generate(spec, 42));
  bench::save_scene(d2, bench::synth_generate(spec, 42));
  for (const char* f : {"observations.txt", "rotations.txt", "ground_truth.txt",
                        "factor_B.txt", "factor_C.txt", "translation.txt"})
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
  const auto obs = load_observations(d1 / "observations.txt");
  EXPECT_EQ(obs, bench::synth_generate(spec, 42).obs);
}

TEST(Config, ParsesKeysCommentsAndPresets) {
  std::istringstream in(
      "# experiment\n"
      "preset = nrsfm-nuclear\n"
      "mu = 2e-3   # override\n"
      "admm.max_iters = 50\n"
      "lm.rel_tol = 1e-12\n"
      "synth.camera = orthographic\n"
      "compare.etas = 0.1, 0.9\n");
  const bench::ExperimentConfig cfg = bench::parse_config(in);
  EXPECT_EQ(cfg.mode, bench::Mode::kNrsfm);
  EXPECT_EQ(cfg.schedule, "nuclear");
  EXPECT_EQ(cfg.mu, 2e-3);
  EXPECT_EQ(cfg.admm.max_iters, 50);
  EXPECT_EQ(cfg.lm.rel_tol, 1e-12);
  EXPECT_EQ(cfg.synth.camera, bench::Camera::kOrthographic);
  EXPECT_EQ(cfg.compare_etas, (std::vector<double>{0.1, 0.9}));
}

TEST(Config, RejectsUnknownRepeatedAndMalformedKeys) {
  std::istringstream unknown("nope = 1\n");
  EXPECT_THROW(bench::parse_config(unknown), bench::ConfigError);
  std::istringstream repeated("K = 1\nK = 2\n");
  EXPECT_THROW(bench::parse_config(repeated), bench::ConfigError);
  std::istringstream malformed("K 1\n");
  EXPECT_THROW(bench::parse_config(malformed), bench::ConfigError);
  std::istringstream bad_value("K = two\n");
  EXPECT_THROW(bench::parse_config(bad_value), bench::ConfigError);
  EXPECT_THROW(bench::load_config("/nonexistent.cfg"), IoError);
}

TEST(Experiment, SummaryRoundTripAndLogLoss) {
  bench::ExperimentConfig cfg;
  cfg.K = 1;
  cfg.timing = false;
  cfg.synth.frames = 6;
  cfg.synth.points = 10;
  cfg.out = scratch_dir("lr").string();
  const bench::ProblemData data = bench::load_problem(cfg, false);
  const bench::RunOutcome run = bench::run_lr(cfg, data);
  EXPECT_EQ(run.summary.log10_objective, std::log10(run.trace.back().objective));
  EXPECT_EQ(run.summary.rank, 4);  // 3K + 1 on noiseless data
  bench::write_run(cfg.out, run);
  std::ifstream in(fs::path(cfg.out) / "summary.csv");
  const auto rows = bench::read_summary(in);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].final_objective, run.summary.final_objective);
  EXPECT_EQ(rows[0].log10_objective, run.summary.log10_objective);
  EXPECT_TRUE(std::isnan(rows[0].recon_error));
  std::ifstream tin(fs::path(cfg.out) / "trace.csv");
  EXPECT_EQ(SolveTrace::read_csv(tin).rows(), run.trace.rows());
}

TEST(Experiment, PipelinesShareTheObjective) {
  bench::ExperimentConfig cfg;
  cfg.mode = bench::Mode::kNrsfm;
  cfg.timing = false;
  cfg.synth.frames = 5;
  cfg.synth.points = 8;
  cfg.out = scratch_dir("pipelines").string();
  const bench::ProblemData data = bench::load_problem(cfg, true);
  double combined = 0.0, admm = 0.0;
  for (auto p : {bench::Pipeline::kCombined, bench::Pipeline::kAdmm,
                 bench::Pipeline::kLm}) {
    cfg.pipeline = p;
    const bench::RunOutcome run = bench::run_nrsfm(cfg, data);
    EXPECT_TRUE(std::isfinite(run.summary.recon_error));
    EXPECT_EQ(run.estimate.rows(), 3);
    if (p == bench::Pipeline::kCombined) combined = run.summary.final_objective;
    if (p == bench::Pipeline::kAdmm) admm = run.summary.final_objective;
  }
  EXPECT_LE(combined, admm);
}

TEST(Experiment, ComparisonWritesRowsAndReparses) {
  bench::ExperimentConfig cfg;
  cfg.mode = bench::Mode::kCompare;
  cfg.K = 1;
  cfg.timing = false;
  cfg.compare_seeds = 2;
  cfg.synth.noise_std = 0.0025;
  cfg.out = scratch_dir("compare").string();
  const bench::ComparisonOutcome c = bench::compare_solvers(cfg);
  EXPECT_EQ(c.rows.size(), 8u);
  EXPECT_EQ(c.violations, 0);
  std::ifstream in(fs::path(cfg.out) / "comparison.csv");
  const auto back = bench::read_comparison(in);
  ASSERT_EQ(back.size(), c.rows.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].final_objective, c.rows[i].final_objective);
    EXPECT_EQ(back[i].log10_objective, std::log10(back[i].final_objective));
  }
}

TEST(Experiment, ZeroWeightsReachPseudoInverseObjective) {
  bench::ExperimentConfig cfg;
  cfg.K = 1;
  cfg.schedule = "zero";
  cfg.timing = false;
  cfg.compare_seeds = 2;
  cfg.synth.noise_std = 0.0025;
  cfg.p = 20;
  cfg.out = scratch_dir("compare_zero").string();
  const bench::ComparisonOutcome c = bench::compare_solvers(cfg);
  for (const auto& row : c.rows) {
    bench::SynthSpec spec = cfg.synth;
    spec.K = 1;
    const auto n = normalize_measurements(bench::synth_generate(spec, row.seed).obs);
    const PoseOperator op = build_pose_operator(n.obs, row.eta, n.scale);
    const double ref = op.loss(regularization_free_init(op));
    // Full visibility is fitted exactly, so ref is zero to rounding.
    EXPECT_LE(std::abs(row.final_objective - ref), 1e-6 * ref + 1e-20)
        << row.problem << " " << row.solver;
  }
}

TEST(Experiment, ReportAggregatesSummaries) {
  const fs::path dir = scratch_dir("report");
  bench::SummaryRow r;
  r.mode = "nrsfm";
  r.pipeline = "combined";
  r.final_objective = 0.01;
  r.log10_objective = -2.0;
  r.recon_error = 0.5;
  for (const char* sub : {"b", "a"}) {
    fs::create_directories(dir / sub);
    std::ofstream out(dir / sub / "summary.csv");
    bench::write_summary(out, {r});
  }
  const bench::ReportOutcome rep = bench::build_report(dir);
  EXPECT_EQ(rep.runs, (std::vector<std::string>{"a", "b"}));
  const std::string agg = slurp(dir / "aggregate.csv");
  EXPECT_NE(agg.find("nrsfm,combined,0,2,-2,0.5"), std::string::npos) << agg;
  EXPECT_THROW(bench::build_report(dir / "missing"), IoError);
}

// ---------------------------------------------------------------------------
// Command-line tool

int run_cli(const std::string& args) {
  const std::string cmd = std::string(WNNSFM_CLI_PATH) + " " + args +
                          " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch_dir("cli_codes");
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("bogus"), 1);
  EXPECT_EQ(run_cli("solve-lr --set nope=1"), 1);
  EXPECT_EQ(run_cli("solve-lr --config /nonexistent.cfg"), 2);
  EXPECT_EQ(run_cli("solve-nrsfm --set observations=/nonexistent.txt "
                    "--set rotations=/nonexistent.txt --out " +
                    (dir / "x").string()),
            2);
  EXPECT_EQ(run_cli("synth --set synth.missing=0.95 --out " +
                    (dir / "y").string()),
            3);
  EXPECT_EQ(run_cli("oracle --out " + (dir / "o").string()), 0);
  EXPECT_NE(slurp(dir / "o" / "oracle.csv").find("\n1000,0,"), std::string::npos);
}

TEST(Cli, FileBackedNrsfmRun) {
  const fs::path dir = scratch_dir("cli_files");
  ASSERT_EQ(run_cli("synth --set synth.frames=6 --set synth.points=10 --out " +
                    (dir / "scene").string()),
            0);
  const fs::path cfg = dir / "run.cfg";
  {
    std::ofstream out(cfg);
    out << "observations = " << (dir / "scene" / "observations.txt").string()
        << "\nrotations = " << (dir / "scene" / "rotations.txt").string()
        << "\nground_truth = " << (dir / "scene" / "ground_truth.txt").string()
        << "\ntiming = off\n";
  }
  ASSERT_EQ(run_cli("solve-nrsfm --config " + cfg.string() + " --out " +
                    (dir / "run").string()),
            0);
  std::ifstream in(dir / "run" / "summary.csv");
  const auto rows = bench::read_summary(in);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_TRUE(std::isfinite(rows[0].recon_error));
  EXPECT_TRUE(fs::exists(dir / "run" / "plot_objective.py"));
  EXPECT_EQ(run_cli("report " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "report.csv"));
}

TEST(Cli, SameSeedSameOutputs) {
  const fs::path dir = scratch_dir("cli_determinism");
  const std::string args = "solve-lr --seed 7 --set K=1 --set timing=off "
                           "--set synth.noise=0.003 --out ";
  ASSERT_EQ(run_cli(args + (dir / "a").string()), 0);
  ASSERT_EQ(run_cli(args + (dir / "b").string()), 0);
  EXPECT_EQ(slurp(dir / "a" / "trace.csv"), slurp(dir / "b" / "trace.csv"));
  EXPECT_EQ(slurp(dir / "a" / "summary.csv"), slurp(dir / "b" / "summary.csv"));
  EXPECT_FALSE(slurp(dir / "a" / "trace.csv").empty());
}

}  // namespace
}  // namespace wnnsfm
