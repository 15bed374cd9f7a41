#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pathchaos/experiments.hpp"
#include "pathchaos/report.hpp"

using namespace pathchaos;

namespace {

struct CommonOptions {
  std::string config;
  std::string preset;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "config file (key = value with [sections])");
  cmd->add_option("--preset", o.preset, "start from a named preset");
  cmd->add_option("--out", o.out, "output directory (default: $PATHCHAOS_OUT or pathchaos-out)");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--threads", o.threads, "worker threads; changes speed, never results");
}

std::string output_dir(const CommonOptions& o) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv("PATHCHAOS_OUT"); env && *env) return env;
  return "pathchaos-out";
}

ExperimentConfig build_config(const CommonOptions& o, const std::string& default_scenario) {
  ExperimentConfig cfg;
  if (!o.preset.empty()) {
    cfg = preset(o.preset);
  } else {
    cfg.scenario = default_scenario;
  }
  if (!o.config.empty()) cfg = load_config(o.config, cfg);
  if (o.seed) cfg.master_seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  if (!o.out.empty()) cfg.out_dir = o.out;
  return cfg;
}

bool has_sweep(const ExperimentConfig& c) {
  return !c.sweep_n.empty() || !c.sweep_m.empty() || !c.sweep_t.empty() || !c.sweep_eta.empty();
}

std::vector<RunReport> run_any(const ExperimentConfig& cfg) {
  if (has_sweep(cfg)) {
    SweepResult s = run_sweep(cfg);
    std::vector<RunReport> out = std::move(s.points);
    out.push_back(std::move(s.aggregate));
    return out;
  }
  return {run_scenario(cfg)};
}

int finish(const std::vector<RunReport>& reports, const ExperimentConfig& cfg, const CommonOptions& o) {
  const std::string dir = cfg.out_dir.empty() ? output_dir(o) : cfg.out_dir;
  const EmitResult res = emit_report(reports, dir, std::cout, cfg.write_csv, cfg.write_json);
  for (const auto& f : res.files) std::cerr << "wrote " << f << "\n";
  return res.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interacting-particle relative-entropy experiments"};
  app.require_subcommand(1);

  // subcommand -> (default scenario, required kind)
  const std::map<std::string, std::pair<std::string, ScenarioKind>> runs{
      {"simulate", {"simulate", ScenarioKind::simulate}},
      {"kl-bound", {"kl-bound", ScenarioKind::forward}},
      {"reversed", {"reversed", ScenarioKind::reversed}},
      {"oracle", {"oracle-validation", ScenarioKind::oracle}},
      {"concentration", {"concentration", ScenarioKind::concentration}},
      {"dpi-suite", {"dpi-suite", ScenarioKind::dpi}},
  };
  const std::map<std::string, std::string> help{
      {"simulate", "simulate one realization of the interacting system and dump its paths"},
      {"kl-bound", "Girsanov functional along interacting paths against the theory curve"},
      {"reversed", "reversed functional along mean-field paths against its explicit cap"},
      {"oracle", "Gaussian oracle cross-validation on the Linear kernel"},
      {"concentration", "exponential-moment and Marcinkiewicz-Zygmund checks"},
      {"dpi-suite", "data-processing, Fenchel-Young, Gaussian channel and Pinsker checks"},
  };

  std::map<std::string, CommonOptions> opts;
  std::map<std::string, CLI::App*> cmds;
  for (const auto& [name, spec] : runs) {
    cmds[name] = app.add_subcommand(name, help.at(name));
    add_common(cmds[name], opts[name]);
  }
  CommonOptions sweep_opts;
  CLI::App* sweep = app.add_subcommand("sweep", "expand [sweep] lists for the forward or reversed functional");
  add_common(sweep, sweep_opts);

  CommonOptions report_opts;
  std::vector<std::string> report_presets, report_files;
  bool report_all = false, list_presets = false;
  CLI::App* report = app.add_subcommand("report", "run presets, or re-summarize saved JSON reports");
  add_common(report, report_opts);
  report->add_option("--run", report_presets, "presets to run");
  report->add_flag("--all", report_all, "run every preset");
  report->add_flag("--list", list_presets, "list preset names");
  report->add_option("files", report_files, "saved JSON reports to summarize");

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [name, spec] : runs) {
      if (!cmds[name]->parsed()) continue;
      const CommonOptions& o = opts[name];
      ExperimentConfig cfg = build_config(o, spec.first);
      if (scenario_kind(cfg.scenario) != spec.second)
        throw ConfigError("scenario '" + cfg.scenario + "' cannot run under '" + name + "'");
      return finish(run_any(cfg), cfg, o);
    }
    if (sweep->parsed()) {
      ExperimentConfig cfg = build_config(sweep_opts, "kl-bound");
      SweepResult s = run_sweep(cfg);
      std::vector<RunReport> out = std::move(s.points);
      out.push_back(std::move(s.aggregate));
      return finish(out, cfg, sweep_opts);
    }
    if (report->parsed()) {
      if (list_presets) {
        for (const auto& p : preset_names()) std::cout << p << "\n";
        return 0;
      }
      std::vector<RunReport> reports;
      for (const auto& f : report_files) reports.push_back(read_report(f));
      if (report_all) report_presets = preset_names();
      ExperimentConfig last;
      for (const auto& p : report_presets) {
        CommonOptions o = report_opts;
        o.preset = p;
        last = build_config(o, p);
        for (auto& r : run_any(last)) reports.push_back(std::move(r));
      }
      if (!report_files.empty() && report_presets.empty()) {
        const EmitResult res = emit_report(reports, "", std::cout);
        return res.all_pass ? 0 : 1;
      }
      return finish(reports, last, report_opts);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
