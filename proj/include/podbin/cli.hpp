#pragma once

// Batch commands behind the podbin executable. Each returns a process exit
// code: 0 success, 2 bad input, 3 failed replicates.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace podbin::cli {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitReplicates = 3;

struct SimulateArgs {
  std::string config_path;
  std::string scenarios_path;  // empty: the built-in paper scenarios
  std::optional<int> reps;     // unset fields fall back to the sim.* keys
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<int> parallel;
  std::string out_path;  // empty: no results file
};

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);

struct DecideArgs {
  std::string trial_path;
  std::optional<std::uint64_t> seed;
  bool json = false;
};

int cmd_decide(const DecideArgs& args, std::ostream& out, std::ostream& err);

struct ReportArgs {
  std::string in_path;
  std::string format = "table";
};

int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err);

}  // namespace podbin::cli
