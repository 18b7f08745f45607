#pragma once

// Text and JSON formats: the flat key=value config, scenario files, results
// lines and trial documents (a header line followed by one line per event).

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "podbin/engine.hpp"
#include "podbin/sim.hpp"

namespace podbin::io {

using nlohmann::json;

// Malformed input, with the offending line (0 when unknown) and key.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::string source, int line, std::string key, const std::string& message);
  const std::string& source() const { return source_; }
  int line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  std::string source_;
  int line_;
  std::string key_;
};

struct SimSettings {
  int reps = 1000;
  std::uint64_t seed = 20240101;
  int parallel = 1;
  DesignMode mode = DesignMode::PodBin;
};

struct ConfigFile {
  DesignConfig design;
  SimSettings sim;
};

// design.*, mcmc.* and sim.* keys; '#' starts a comment. Unknown keys,
// duplicates and bad values are errors. The result is validated.
ConfigFile parse_config(std::istream& in, const std::string& source = "<config>");
ConfigFile load_config(const std::string& path);
std::string format_config(const ConfigFile& config);

// Sections "[id]" followed by p_mt, p_dlt and optional time_model,
// weibull_q_mt, weibull_q_dlt, accrual_rate keys. Lists are comma separated.
std::vector<Scenario> parse_scenarios(std::istream& in, const std::string& source = "<scenarios>");
std::vector<Scenario> load_scenarios(const std::string& path);
std::string format_scenarios(const std::vector<Scenario>& scenarios);

json to_json(const DesignConfig& config);
// Missing fields take their defaults. Throws FormatError.
DesignConfig design_config_from_json(const json& j);

json to_json(const Event& event);
Event event_from_json(const json& j);

json to_json(const PatientRecord& p);
json to_json(const DecisionDistribution& d);
json to_json(const Action& a);
json to_json(const DecisionRecord& d);
json to_json(const DecisionDetail& d);
json to_json(const MtdResult& r);
json to_json(const TrialState& s);
json to_json(const TrialResult& r);
json to_json(const OperatingCharacteristics& oc);
json to_json(const Scenario& s);
Scenario scenario_from_json(const json& j);

TrialResult trial_result_from_json(const json& j);
Action action_from_string(const std::string& s);

// A header line with the design and scenarios, then one line per replicate
// in scenario then replicate order. Nothing depends on the thread count.
struct ResultsFile {
  DesignConfig config;
  DesignMode mode = DesignMode::PodBin;
  int reps = 0;
  std::uint64_t seed = 0;
  std::vector<Scenario> scenarios;
  std::vector<TrialResult> results;
};

void write_results(std::ostream& out, const ResultsFile& file);
ResultsFile read_results(std::istream& in, const std::string& source = "<results>");

struct TrialDocument {
  std::string trial_id;
  DesignConfig config;
  DesignMode mode = DesignMode::PodBin;
  std::string created;  // ISO-8601 wall clock, informational only
  std::vector<Event> events;
};

std::string format_header(const TrialDocument& doc);
std::string format_event_line(std::size_t seq, const Event& event);
TrialDocument parse_trial_document(std::istream& in, const std::string& source = "<trial>");
TrialDocument load_trial_document(const std::string& path);
void write_trial_document(std::ostream& out, const TrialDocument& doc);

// Fixed-width operating-characteristics table, or CSV with a header row.
std::string format_oc_table(const std::vector<OperatingCharacteristics>& ocs);
std::string format_oc_csv(const std::vector<OperatingCharacteristics>& ocs);

}  // namespace podbin::io
