#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "podbin/cli.hpp"
#include "podbin/service.hpp"

int main(int argc, char** argv) {
  using namespace podbin::cli;
  CLI::App app{"PoD-BIN dose finding: simulation, decisions and trial conduct"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate trials and print operating characteristics");
  simulate->add_option("--config", sim.config_path, "Config file (design.*, mcmc.*, sim.*)")->required();
  simulate->add_option("--scenarios", sim.scenarios_path, "Scenario file (default: built-in S1-S6)");
  simulate->add_option("--reps", sim.reps, "Replicates per scenario");
  simulate->add_option("--seed", sim.seed, "Master seed");
  simulate->add_option("--mode", sim.mode, "podbin or benchmark")
      ->check(CLI::IsMember({"podbin", "benchmark"}));
  simulate->add_option("--parallel", sim.parallel, "Worker threads");
  simulate->add_option("--out", sim.out_path, "Results file (JSON lines)");

  DecideArgs dec;
  auto* decide = app.add_subcommand("decide", "Decision for the next cohort of a trial document");
  decide->add_option("--trial", dec.trial_path, "Trial document (JSON lines)")->required();
  decide->add_option("--seed", dec.seed, "Inference seed (default: the trial's)");
  decide->add_flag("--json", dec.json, "Print the full decision payload");

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "Summarize a results file");
  report->add_option("--in", rep.in_path, "Results file")->required();
  report->add_option("--format", rep.format, "table or csv")->check(CLI::IsMember({"table", "csv"}));

  const char* env_dir = std::getenv("PODBIN_DATA_DIR");
  std::string data_dir = env_dir ? env_dir : "podbin-data";
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Run the trial-conduct HTTP API");
  serve->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--data-dir", data_dir, "Trial documents directory (env PODBIN_DATA_DIR)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  if (*simulate) return cmd_simulate(sim, std::cout, std::cerr);
  if (*decide) return cmd_decide(dec, std::cout, std::cerr);
  if (*report) return cmd_report(rep, std::cout, std::cerr);
  try {
    return podbin::service::serve(data_dir, host, port);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
}
