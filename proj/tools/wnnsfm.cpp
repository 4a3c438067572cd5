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


// wnnsfm command-line tool.

#include <wnnsfm/bench/experiment.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using wnnsfm::bench::ExperimentConfig;
using wnnsfm::bench::Mode;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key = value configuration file");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--set", f.sets, "override one config key (key=value)")
      ->type_name("KEY=VALUE");
}

// Config file, then --set overrides, then the subcommand's mode and the
// --seed/--out flags.
ExperimentConfig build_config(const CommonFlags& f, Mode mode) {
  ExperimentConfig cfg;
  if (!f.config.empty()) cfg = wnnsfm::bench::load_config(f.config);
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw wnnsfm::bench::ConfigError("--set expects key=value, got '" + s +
                                       "'");
    cfg.set(wnnsfm::bench::detail_cfg::trim(s.substr(0, eq)),
            wnnsfm::bench::detail_cfg::trim(s.substr(eq + 1)));
  }
  cfg.mode = mode;
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out = *f.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted nuclear norm recovery and non-rigid SfM"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
    Mode mode;
  };
  const Sub subs[] = {
      {"synth", "generate a synthetic NRSfM scene", Mode::kSynth},
      {"solve-lr", "low-rank recovery on pOSE measurements", Mode::kLrRecovery},
      {"solve-nrsfm", "NRSfM with known rotations", Mode::kNrsfm},
      {"oracle", "sampled check of the permutation lower bound", Mode::kOracle},
      {"compare", "ADMM against ADMM + LM on synthetic batches", Mode::kCompare},
  };
  CommonFlags flags;
  std::vector<std::pair<CLI::App*, Mode>> commands;
  for (const auto& s : subs) {
    CLI::App* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, flags);
    commands.emplace_back(cmd, s.mode);
  }
  std::string report_dir;
  CLI::App* report = app.add_subcommand(
      "report", "collect summary.csv files below a directory");
  report->add_option("dir", report_dir, "directory holding experiment outputs")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : wnnsfm::bench::kUsage;
  }

  if (report->parsed()) {
    try {
      const auto r = wnnsfm::bench::build_report(report_dir);
      std::cout << "report: " << r.rows.size() << " runs -> " << report_dir
                << "/report.csv\n";
      const std::string script =
          "# Mean log10 objective per (mode, pipeline, eta) from "
          "aggregate.csv.\n"
          "import csv\n"
          "import matplotlib\n"
          "matplotlib.use('Agg')\n"
          "import matplotlib.pyplot as plt\n\n"
          "rows = list(csv.DictReader(open('aggregate.csv')))\n"
          "labels = [f\"{r['mode']}/{r['pipeline']}/eta={r['eta']}\" for r "
          "in rows]\n"
          "fig, ax = plt.subplots(figsize=(max(6, len(rows)), 4))\n"
          "ax.bar(range(len(rows)), [float(r['mean_log10_objective']) for r "
          "in rows])\n"
          "ax.set_xticks(range(len(rows)))\n"
          "ax.set_xticklabels(labels, rotation=45, ha='right')\n"
          "ax.set_ylabel('mean log10 objective')\n"
          "fig.tight_layout()\n"
          "fig.savefig('report.png')\n";
      wnnsfm::bench::write_text(std::filesystem::path(report_dir) /
                                    "plot_report.py",
                                script);
      return wnnsfm::bench::kOk;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return wnnsfm::bench::exit_code_for(e);
    }
  }

  for (const auto& [cmd, mode] : commands) {
    if (!cmd->parsed()) continue;
    ExperimentConfig cfg;
    try {
      cfg = build_config(flags, mode);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return wnnsfm::bench::exit_code_for(e);
    }
    return wnnsfm::bench::run_experiment(cfg, std::cout, std::cerr);
  }
  return wnnsfm::bench::kUsage;
}
