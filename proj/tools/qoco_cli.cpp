#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qoco/harness.hpp"

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const unsigned long long v = std::stoull(item, &used);
    if (used != item.size()) throw qoco::ConfigError("bad seed '" + item + "'");
    seeds.push_back(v);
  }
  if (seeds.empty()) throw qoco::ConfigError("--seeds needs at least one value");
  return seeds;
}

struct Common {
  std::string config;
  std::string out;
  std::string seeds;
  bool warn_only = false;
};

int execute(const Common& c, bool write_traces, bool require_sweep) {
  qoco::ExperimentConfig cfg = qoco::load_config(c.config);
  if (!c.seeds.empty()) {
    cfg.seeds = parse_seeds(c.seeds);
    cfg.echo["seeds"] = cfg.seeds;
  }
  if (!write_traces) cfg.write_traces = false;
  if (require_sweep && cfg.horizons.size() < 3) throw qoco::ConfigError("a sweep needs at least 3 horizons");
  qoco::RunOptions options;
  if (!c.out.empty()) options.out_dir = std::filesystem::path(c.out);
  const qoco::ExperimentReport report = qoco::run_experiment(cfg, options);
  std::cout << qoco::summarize_report(report.report);
  if (report.ok()) return 0;
  std::cerr << (c.warn_only ? "warning: " : "error: ") << report.certificate_failures
            << " certificate violations, " << report.expectation_failures << " failed expectations\n";
  return c.warn_only ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Queue-driven constrained online convex optimization experiments"};
  app.require_subcommand(1);

  Common run_opts, sweep_opts, verify_opts;
  auto add_common = [](CLI::App* sub, Common& c, bool out_required) {
    sub->add_option("--config", c.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    auto* out = sub->add_option("--out", c.out, "Output directory for traces and report.json");
    if (out_required) out->required();
    sub->add_option("--seeds", c.seeds, "Comma-separated seeds overriding the config");
    sub->add_flag("--warn-only", c.warn_only, "Exit 0 even when certificates or expectations fail");
  };
  CLI::App* run = app.add_subcommand("run", "Run every (horizon, seed) cell and write traces and a report");
  add_common(run, run_opts, true);
  CLI::App* sweep = app.add_subcommand("sweep", "Like run, but requires at least 3 horizons for slope fits");
  add_common(sweep, sweep_opts, true);
  CLI::App* verify = app.add_subcommand("verify", "Run certificates and expectations without writing traces");
  add_common(verify, verify_opts, false);

  std::string report_path;
  CLI::App* report = app.add_subcommand("report", "Summarize an existing report.json");
  report->add_option("--out", report_path, "Output directory of a previous run, or a report.json path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return execute(run_opts, true, false);
    if (sweep->parsed()) return execute(sweep_opts, true, true);
    if (verify->parsed()) return execute(verify_opts, false, false);
    if (report->parsed()) {
      std::filesystem::path p(report_path);
      if (std::filesystem::is_directory(p)) p /= "report.json";
      std::ifstream in(p);
      if (!in) throw qoco::ConfigError("cannot open " + p.string());
      const nlohmann::json j = nlohmann::json::parse(in);
      std::cout << qoco::summarize_report(j);
      return j.value("status", "fail") == "pass" ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
