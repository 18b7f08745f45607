#include "podbin/cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>

#include "podbin/io.hpp"
#include "podbin/service.hpp"

namespace podbin::cli {

namespace {

std::vector<OperatingCharacteristics> summarize(const io::ResultsFile& file) {
  std::vector<OperatingCharacteristics> ocs;
  for (const auto& s : file.scenarios) {
    std::vector<TrialResult> rs;
    for (const auto& r : file.results)
      if (r.scenario == s.id) rs.push_back(r);
    if (rs.empty()) continue;
    bool any_ok = false;
    for (const auto& r : rs) any_ok = any_ok || !r.failure;
    if (!any_ok) {
      OperatingCharacteristics oc;
      oc.scenario = s.id;
      oc.mode = file.mode;
      oc.failures = static_cast<int>(rs.size());
      ocs.push_back(oc);
      continue;
    }
    ocs.push_back(operating_characteristics(rs, s, file.config));
  }
  return ocs;
}

}  // namespace

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
  io::ResultsFile file;
  int parallel = 1;
  try {
    const auto config = io::load_config(args.config_path);
    file.config = config.design;
    file.reps = args.reps.value_or(config.sim.reps);
    file.seed = args.seed.value_or(config.sim.seed);
    file.mode = args.mode ? design_mode_from_string(*args.mode) : config.sim.mode;
    parallel = args.parallel.value_or(config.sim.parallel);
    if (file.reps < 1) throw DomainError("--reps must be >= 1");
    if (parallel < 1) throw DomainError("--parallel must be >= 1");
    file.scenarios = args.scenarios_path.empty() ? paper_scenarios()
                                                 : io::load_scenarios(args.scenarios_path);
    for (const auto& s : file.scenarios) {
      if (s.num_doses() != file.config.num_doses) {
        throw DomainError("scenario '" + s.id + "' has " + std::to_string(s.num_doses()) +
                          " doses but design.num_doses = " + std::to_string(file.config.num_doses));
      }
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }

  for (std::size_t i = 0; i < file.scenarios.size(); ++i) {
    auto rs = run_replicates(file.scenarios[i], static_cast<int>(i), file.config, file.mode,
                             file.reps, file.seed, parallel);
    file.results.insert(file.results.end(), std::make_move_iterator(rs.begin()),
                        std::make_move_iterator(rs.end()));
  }

  if (!args.out_path.empty()) {
    std::ofstream f(args.out_path, std::ios::binary);
    io::write_results(f, file);
    if (!f.flush()) {
      err << "error: cannot write " << args.out_path << '\n';
      return kExitInput;
    }
  }
  out << io::format_oc_table(summarize(file));

  int failed = 0;
  for (const auto& r : file.results) {
    if (!r.failure) continue;
    if (failed++ == 0) err << "failed replicates:\n";
    err << "  scenario " << r.scenario << " seed " << r.seed << ": " << *r.failure << '\n';
  }
  return failed > 0 ? kExitReplicates : kExitOk;
}

int cmd_decide(const DecideArgs& args, std::ostream& out, std::ostream& err) {
  io::json payload;
  try {
    const auto doc = io::load_trial_document(args.trial_path);
    payload = service::decision_payload(doc, args.seed);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  if (args.json) {
    out << payload.dump(2) << '\n';
    return kExitOk;
  }
  const std::string status = payload.at("status");
  out << "status: " << status << '\n';
  if (status == "FirstCohort") {
    out << "action: assign dose 1 to cohort 1\n";
    return kExitOk;
  }
  if (status != "Decided") return kExitOk;
  out << "dose: " << payload.at("dose").get<int>() << " (stage " << payload.at("stage").get<std::string>()
      << ", " << payload.at("pending").get<int>() << " pending)\n";
  const auto& pod = payload.at("pod");
  out << std::fixed << std::setprecision(6) << "PoD: DeEscalate=" << pod.at("DeEscalate").get<double>()
      << " Stay=" << pod.at("Stay").get<double>() << " Escalate=" << pod.at("Escalate").get<double>()
      << '\n';
  const auto& action = payload.at("action");
  out << "action: " << action.at("label").get<std::string>() << '\n';
  if (!action.at("suspension_reason").is_null()) {
    out << "suspension_reason: " << action.at("suspension_reason").get<std::string>() << '\n';
  } else {
    out << "next_dose: " << payload.at("next_dose").get<int>() << '\n';
  }
  return kExitOk;
}

int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err) {
  if (args.format != "table" && args.format != "csv") {
    err << "error: --format must be table or csv\n";
    return kExitInput;
  }
  io::ResultsFile file;
  try {
    std::ifstream in(args.in_path);
    if (!in) throw io::FormatError(args.in_path, 0, "", "cannot open file");
    file = io::read_results(in, args.in_path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  const auto ocs = summarize(file);
  out << (args.format == "csv" ? io::format_oc_csv(ocs) : io::format_oc_table(ocs));
  return kExitOk;
}

}  // namespace podbin::cli
