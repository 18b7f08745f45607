#include "podbin/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <variant>

namespace podbin::io {

FormatError::FormatError(std::string source, int line, std::string key, const std::string& message)
    : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : std::string()) +
                         (key.empty() ? std::string() : ": '" + key + "'") + ": " + message),
      source_(std::move(source)),
      line_(line),
      key_(std::move(key)) {}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string format_double(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

// Throws std::invalid_argument with a short reason; callers add location.
double parse_double(const std::string& s) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  double x = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || std::isnan(x)) {
    throw std::invalid_argument("expected a number, got '" + s + "'");
  }
  return x;
}

template <typename Int>
Int parse_integer(const std::string& s) {
  Int x = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected an integer, got '" + s + "'");
  }
  return x;
}

std::string to_string(CutoffUpdate u) { return u == CutoffUpdate::Metropolis ? "metropolis" : "uniform"; }

CutoffUpdate cutoff_update_from_string(const std::string& s) {
  if (s == "metropolis") return CutoffUpdate::Metropolis;
  if (s == "uniform") return CutoffUpdate::Uniform;
  throw std::invalid_argument("expected metropolis|uniform, got '" + s + "'");
}

DesignMode mode_from_string(const std::string& s) {
  if (s == "podbin") return DesignMode::PodBin;
  if (s == "benchmark") return DesignMode::Benchmark;
  throw std::invalid_argument("expected podbin|benchmark, got '" + s + "'");
}

using FieldRef = std::variant<int*, double*, std::uint64_t*, CutoffUpdate*, DesignMode*>;

struct Field {
  const char* key;
  FieldRef (*ref)(ConfigFile&);
};

// Every config key, in file order.
const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      {"design.num_doses", [](ConfigFile& c) -> FieldRef { return &c.design.num_doses; }},
      {"design.window", [](ConfigFile& c) -> FieldRef { return &c.design.window; }},
      {"design.target_dlt", [](ConfigFile& c) -> FieldRef { return &c.design.target_dlt; }},
      {"design.target_mt", [](ConfigFile& c) -> FieldRef { return &c.design.target_mt; }},
      {"design.severity_weight", [](ConfigFile& c) -> FieldRef { return &c.design.severity_weight; }},
      {"design.ei_lower", [](ConfigFile& c) -> FieldRef { return &c.design.ei_lower; }},
      {"design.ei_upper", [](ConfigFile& c) -> FieldRef { return &c.design.ei_upper; }},
      {"design.lambda_e", [](ConfigFile& c) -> FieldRef { return &c.design.lambda_e; }},
      {"design.lambda_d", [](ConfigFile& c) -> FieldRef { return &c.design.lambda_d; }},
      {"design.stage2_threshold", [](ConfigFile& c) -> FieldRef { return &c.design.stage2_threshold; }},
      {"design.cohort_size", [](ConfigFile& c) -> FieldRef { return &c.design.cohort_size; }},
      {"design.max_n", [](ConfigFile& c) -> FieldRef { return &c.design.max_n; }},
      {"design.safety_threshold", [](ConfigFile& c) -> FieldRef { return &c.design.safety_threshold; }},
      {"design.rng_seed", [](ConfigFile& c) -> FieldRef { return &c.design.rng_seed; }},
      {"mcmc.burn_in", [](ConfigFile& c) -> FieldRef { return &c.design.mcmc.burn_in; }},
      {"mcmc.retained", [](ConfigFile& c) -> FieldRef { return &c.design.mcmc.retained; }},
      {"mcmc.thin", [](ConfigFile& c) -> FieldRef { return &c.design.mcmc.thin; }},
      {"mcmc.cutoff_proposal_scale",
       [](ConfigFile& c) -> FieldRef { return &c.design.mcmc.cutoff_proposal_scale; }},
      {"mcmc.cutoff_update", [](ConfigFile& c) -> FieldRef { return &c.design.mcmc.cutoff_update; }},
      {"mcmc.cutoff_max", [](ConfigFile& c) -> FieldRef { return &c.design.mcmc.cutoff_max; }},
      {"mcmc.beta_max", [](ConfigFile& c) -> FieldRef { return &c.design.mcmc.beta_max; }},
      {"mcmc.intercept_prior_sd",
       [](ConfigFile& c) -> FieldRef { return &c.design.mcmc.intercept_prior_sd; }},
      {"sim.reps", [](ConfigFile& c) -> FieldRef { return &c.sim.reps; }},
      {"sim.seed", [](ConfigFile& c) -> FieldRef { return &c.sim.seed; }},
      {"sim.parallel", [](ConfigFile& c) -> FieldRef { return &c.sim.parallel; }},
      {"sim.mode", [](ConfigFile& c) -> FieldRef { return &c.sim.mode; }},
  };
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (key == f.key) return &f;
  return nullptr;
}

void assign(FieldRef ref, const std::string& value) {
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double>) *p = parse_double(value);
        else if constexpr (std::is_same_v<T, CutoffUpdate>) *p = cutoff_update_from_string(value);
        else if constexpr (std::is_same_v<T, DesignMode>) *p = mode_from_string(value);
        else *p = parse_integer<T>(value);
      },
      ref);
}

std::string render(FieldRef ref) {
  return std::visit(
      [](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double>) return format_double(*p);
        else if constexpr (std::is_same_v<T, CutoffUpdate>) return to_string(*p);
        else if constexpr (std::is_same_v<T, DesignMode>) return podbin::to_string(*p);
        else return std::to_string(*p);
      },
      ref);
}

json field_json(FieldRef ref) {
  return std::visit(
      [](auto* p) -> json {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double>) return std::isinf(*p) ? json(nullptr) : json(*p);
        else if constexpr (std::is_same_v<T, CutoffUpdate>) return to_string(*p);
        else if constexpr (std::is_same_v<T, DesignMode>) return podbin::to_string(*p);
        else return *p;
      },
      ref);
}

void field_from_json(FieldRef ref, const json& j) {
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double>) {
          *p = j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
        } else if constexpr (std::is_same_v<T, CutoffUpdate>) {
          *p = cutoff_update_from_string(j.get<std::string>());
        } else if constexpr (std::is_same_v<T, DesignMode>) {
          *p = mode_from_string(j.get<std::string>());
        } else {
          *p = j.get<T>();
        }
      },
      ref);
}

struct Line {
  int number;
  int section_line;
  std::string section;
  std::string key;
  std::string value;
};

std::vector<Line> tokenize(std::istream& in, const std::string& source, bool sections) {
  std::vector<Line> out;
  std::string raw, section;
  int number = 0, section_line = 0;
  while (std::getline(in, raw)) {
    ++number;
    const auto hash = raw.find('#');
    const std::string text = trim(std::string_view(raw).substr(0, hash));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (!sections) throw FormatError(source, number, "", "sections are not allowed here");
      if (text.back() != ']' || text.size() < 3) {
        throw FormatError(source, number, "", "malformed section header '" + text + "'");
      }
      section = trim(std::string_view(text).substr(1, text.size() - 2));
      section_line = number;
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw FormatError(source, number, "", "expected key = value");
    Line line{number, section_line, section, trim(std::string_view(text).substr(0, eq)),
              trim(std::string_view(text).substr(eq + 1))};
    if (line.key.empty()) throw FormatError(source, number, "", "empty key");
    if (line.value.empty()) throw FormatError(source, number, line.key, "empty value");
    out.push_back(std::move(line));
  }
  return out;
}

// Extracts the quoted key from a validation message.
std::string quoted_key(const std::string& message) {
  const auto a = message.find('\'');
  const auto b = a == std::string::npos ? a : message.find('\'', a + 1);
  return b == std::string::npos ? std::string() : message.substr(a + 1, b - a - 1);
}

std::vector<double> parse_list(const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item)));
  return out;
}

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + format_double(xs[i]);
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path, 0, "", "cannot open file");
  return in;
}

template <typename T>
json optional_json(const std::optional<T>& x) {
  return x ? json(*x) : json(nullptr);
}

}  // namespace

ConfigFile parse_config(std::istream& in, const std::string& source) {
  ConfigFile config;
  std::vector<std::pair<std::string, int>> seen;
  for (const auto& line : tokenize(in, source, false)) {
    const Field* f = find_field(line.key);
    if (!f) throw FormatError(source, line.number, line.key, "unknown key");
    for (const auto& [k, n] : seen) {
      if (k == line.key) {
        throw FormatError(source, line.number, line.key,
                          "duplicate key (first set on line " + std::to_string(n) + ")");
      }
    }
    seen.emplace_back(line.key, line.number);
    try {
      assign(f->ref(config), line.value);
    } catch (const std::invalid_argument& e) {
      throw FormatError(source, line.number, line.key, e.what());
    }
  }
  try {
    config.design.validate();
  } catch (const DomainError& e) {
    const std::string key = quoted_key(e.what());
    int number = 0;
    for (const auto& [k, n] : seen)
      if (k == key) number = n;
    throw FormatError(source, number, key, e.what());
  }
  auto require_positive = [&](const char* key, int value) {
    if (value < 1) {
      int number = 0;
      for (const auto& [k, n] : seen)
        if (k == key) number = n;
      throw FormatError(source, number, key, "must be >= 1");
    }
  };
  require_positive("sim.reps", config.sim.reps);
  require_positive("sim.parallel", config.sim.parallel);
  return config;
}

ConfigFile load_config(const std::string& path) {
  auto in = open_input(path);
  return parse_config(in, path);
}

std::string format_config(const ConfigFile& config) {
  std::string out;
  ConfigFile copy = config;
  std::string section;
  for (const auto& f : fields()) {
    const std::string key = f.key;
    const std::string head = key.substr(0, key.find('.'));
    if (head != section && !section.empty()) out += "\n";
    section = head;
    out += key + " = " + render(f.ref(copy)) + "\n";
  }
  return out;
}

std::vector<Scenario> parse_scenarios(std::istream& in, const std::string& source) {
  std::vector<Scenario> out;
  std::vector<int> header_lines;
  std::string current;
  for (const auto& line : tokenize(in, source, true)) {
    if (line.section.empty()) {
      throw FormatError(source, line.number, line.key, "key outside a [scenario] section");
    }
    if (line.section != current) {
      for (const auto& s : out)
        if (s.id == line.section) {
          throw FormatError(source, line.number, "", "scenario '" + line.section + "' defined twice");
        }
      current = line.section;
      out.emplace_back().id = current;
      header_lines.push_back(line.section_line);
    }
    Scenario& s = out.back();
    try {
      if (line.key == "p_mt") s.p_mt = parse_list(line.value);
      else if (line.key == "p_dlt") s.p_dlt = parse_list(line.value);
      else if (line.key == "time_model") s.time_model = time_model_from_string(line.value);
      else if (line.key == "weibull_q_mt") s.weibull_q_mt = parse_double(line.value);
      else if (line.key == "weibull_q_dlt") s.weibull_q_dlt = parse_double(line.value);
      else if (line.key == "accrual_rate") s.accrual_rate = parse_double(line.value);
      else throw FormatError(source, line.number, line.key, "unknown scenario key");
    } catch (const std::invalid_argument& e) {
      throw FormatError(source, line.number, line.key, e.what());
    } catch (const DomainError& e) {
      throw FormatError(source, line.number, line.key, e.what());
    }
  }
  if (out.empty()) throw FormatError(source, 0, "", "no scenarios defined");
  for (std::size_t i = 0; i < out.size(); ++i) {
    try {
      out[i].validate();
    } catch (const DomainError& e) {
      throw FormatError(source, header_lines[i], "", e.what());
    }
  }
  return out;
}

std::vector<Scenario> load_scenarios(const std::string& path) {
  auto in = open_input(path);
  return parse_scenarios(in, path);
}

std::string format_scenarios(const std::vector<Scenario>& scenarios) {
  std::string out;
  for (const auto& s : scenarios) {
    if (!out.empty()) out += "\n";
    out += "[" + s.id + "]\n";
    out += "p_mt = " + join(s.p_mt) + "\n";
    out += "p_dlt = " + join(s.p_dlt) + "\n";
    out += "time_model = " + to_string(s.time_model) + "\n";
    if (s.time_model == TimeModel::Weibull) {
      out += "weibull_q_mt = " + format_double(s.weibull_q_mt) + "\n";
      out += "weibull_q_dlt = " + format_double(s.weibull_q_dlt) + "\n";
    }
    out += "accrual_rate = " + format_double(s.accrual_rate) + "\n";
  }
  return out;
}

json to_json(const DesignConfig& config) {
  ConfigFile file;
  file.design = config;
  json j = json::object();
  for (const auto& f : fields()) {
    const std::string key = f.key;
    const auto dot = key.find('.');
    const std::string head = key.substr(0, dot), name = key.substr(dot + 1);
    if (head == "design") j[name] = field_json(f.ref(file));
    else if (head == "mcmc") j["mcmc"][name] = field_json(f.ref(file));
  }
  return j;
}

DesignConfig design_config_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("config", 0, "", "expected an object");
  ConfigFile file;
  for (const auto& [name, value] : j.items()) {
    if (name == "mcmc") {
      if (!value.is_object()) throw FormatError("config", 0, "mcmc", "expected an object");
      for (const auto& [mname, mvalue] : value.items()) {
        const Field* f = find_field("mcmc." + mname);
        if (!f) throw FormatError("config", 0, "mcmc." + mname, "unknown key");
        try {
          field_from_json(f->ref(file), mvalue);
        } catch (const std::exception& e) {
          throw FormatError("config", 0, "mcmc." + mname, e.what());
        }
      }
      continue;
    }
    const Field* f = find_field("design." + name);
    if (!f) throw FormatError("config", 0, name, "unknown key");
    try {
      field_from_json(f->ref(file), value);
    } catch (const std::exception& e) {
      throw FormatError("config", 0, name, e.what());
    }
  }
  try {
    file.design.validate();
  } catch (const DomainError& e) {
    throw FormatError("config", 0, quoted_key(e.what()), e.what());
  }
  return file.design;
}

json to_json(const Event& event) {
  json j{{"type", to_string(event.type)}, {"time", event.time}};
  if (event.type == Event::Type::Onset) {
    j["patient"] = event.patient;
    j["toxicity"] = to_string(event.toxicity);
  }
  return j;
}

Event event_from_json(const json& j) {
  try {
    if (!j.is_object()) throw FormatError("event", 0, "", "expected an object");
    const auto type = event_type_from_string(j.at("type").get<std::string>());
    const double time = j.at("time").get<double>();
    if (!std::isfinite(time) || time < 0) throw FormatError("event", 0, "time", "must be finite and >= 0");
    switch (type) {
      case Event::Type::Arrival: return Event::arrival(time);
      case Event::Type::FollowupTick: return Event::tick(time);
      case Event::Type::Onset:
        return Event::onset(j.at("patient").get<PatientId>(),
                            toxicity_from_string(j.at("toxicity").get<std::string>()), time);
    }
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError("event", 0, "", e.what());
  }
  throw FormatError("event", 0, "type", "unknown event type");
}

json to_json(const PatientRecord& p) {
  return {{"id", p.id},
          {"dose", p.dose},
          {"enroll_time", p.enroll_time},
          {"follow_up", p.follow_up},
          {"pending", p.pending},
          {"mt_onset", optional_json(p.mt_onset)},
          {"dlt_onset", optional_json(p.dlt_onset)},
          {"category", to_int(p.observed_category())}};
}

json to_json(const DecisionDistribution& d) {
  return {{"DeEscalate", d.prob[0]}, {"Stay", d.prob[1]}, {"Escalate", d.prob[2]},
          {"optimal", to_string(d.optimal)}};
}

json to_json(const Action& a) {
  json j{{"kind", to_string(a.kind)}, {"label", to_string(a)}};
  j["suspension_reason"] = a.reason ? json(to_string(*a.reason)) : json(nullptr);
  if (a.kind == ActionKind::ExcludeFrom) j["dose"] = a.dose;
  return j;
}

Action action_from_string(const std::string& s) {
  auto inner = [&](const std::string& prefix) -> std::optional<std::string> {
    if (s.rfind(prefix + "(", 0) == 0 && s.back() == ')') {
      return s.substr(prefix.size() + 1, s.size() - prefix.size() - 2);
    }
    return std::nullopt;
  };
  if (auto r = inner("Suspend")) return Action::suspend(suspend_reason_from_string(*r));
  if (auto d = inner("ExcludeFrom")) return Action::exclude_from(parse_integer<int>(*d));
  if (s == "Terminate") return Action::terminate();
  return Action::from_move(move_from_string(s));
}

json to_json(const DecisionRecord& d) {
  json j{{"index", d.index},
         {"time", d.time},
         {"dose", d.dose},
         {"stage", to_string(d.stage)},
         {"pending", d.pending},
         {"action", to_json(d.action)},
         {"next_dose", d.next_dose},
         {"seed", d.seed}};
  j["pod"] = d.pod ? to_json(*d.pod) : json(nullptr);
  j["oracle"] = d.oracle ? json(to_string(*d.oracle)) : json(nullptr);
  j["inconsistency"] = d.inconsistency ? json(to_string(*d.inconsistency)) : json(nullptr);
  return j;
}

json to_json(const DecisionDetail& d) {
  json j{{"status", to_string(d.status)}};
  if (d.status == DecisionDetail::Status::FirstCohort) {
    j["next_dose"] = 1;
    j["action"] = nullptr;
    j["pod"] = nullptr;
    j["completions"] = json::array();
    return j;
  }
  if (d.status != DecisionDetail::Status::Decided) {
    j["action"] = nullptr;
    j["pod"] = nullptr;
    j["completions"] = json::array();
    return j;
  }
  const json rec = to_json(d.record);
  for (const auto& [k, v] : rec.items()) j[k] = v;
  json completions = json::array();
  for (const auto& [id, q] : d.completions) {
    completions.push_back({{"patient", id}, {"probs", {q(0), q(1), q(2), q(3)}}});
  }
  j["completions"] = completions;
  return j;
}

json to_json(const MtdResult& r) {
  auto vec = [](const std::vector<double>& xs) {
    json a = json::array();
    for (double x : xs) a.push_back(std::isnan(x) ? json(nullptr) : json(x));
    return a;
  };
  return {{"reason", r.reason == MtdResult::Reason::Selected ? "Selected" : "AllTooToxic"},
          {"selected", optional_json(r.selected)},
          {"tb_posterior", vec(r.tb_posterior)},
          {"tb_isotonic", vec(r.tb_isotonic)}};
}

json to_json(const TrialState& s) {
  json patients = json::array();
  for (const auto& p : s.patients) patients.push_back(to_json(p));
  json decisions = json::array();
  for (const auto& d : s.decisions) decisions.push_back(to_json(d));
  json doses = json::array();
  for (int d = 1; d <= s.config.num_doses; ++d) {
    const auto completed = s.completed_at(d);
    doses.push_back({{"dose", d},
                     {"excluded", s.is_excluded(d)},
                     {"pending", s.pending_at(d)},
                     {"completed", completed.size()}});
  }
  return {{"config", to_json(s.config)},
          {"clock", s.clock},
          {"stage", to_string(s.stage)},
          {"current_dose", s.current_dose},
          {"excluded_from", s.excluded_from > 0 ? json(s.excluded_from) : json(nullptr)},
          {"highest_available", s.highest_available()},
          {"suspended", s.suspended ? json(to_string(*s.suspended)) : json(nullptr)},
          {"terminated", s.terminated},
          {"terminated_at", optional_json(s.terminated_at)},
          {"enrolled", s.enrolled()},
          {"cohort_slots", s.cohort_slots},
          {"queue", s.queue},
          {"turned_away", s.turned_away},
          {"finished", s.finished()},
          {"duration", s.duration()},
          {"doses", doses},
          {"patients", patients},
          {"decisions", decisions}};
}

json to_json(const TrialResult& r) {
  json patients = json::array();
  for (const auto& p : r.patients) {
    patients.push_back({p.id, p.dose, p.enroll_time, to_int(p.category)});
  }
  json decisions = json::array();
  for (const auto& d : r.decisions) {
    decisions.push_back({{"t", d.time},
                         {"dose", d.dose},
                         {"stage", to_string(d.stage)},
                         {"pending", d.pending},
                         {"pod", d.pod ? json(d.pod->prob) : json(nullptr)},
                         {"action", to_string(d.action)},
                         {"next", d.next_dose},
                         {"oracle", d.oracle ? json(to_string(*d.oracle)) : json(nullptr)},
                         {"tag", d.inconsistency ? json(to_string(*d.inconsistency)) : json(nullptr)}});
  }
  return {{"scenario", r.scenario},
          {"mode", to_string(r.mode)},
          {"seed", r.seed},
          {"mtd", optional_json(r.mtd)},
          {"terminated", r.terminated},
          {"duration", r.duration},
          {"turned_away", r.turned_away},
          {"patients", patients},
          {"decisions", decisions},
          {"failure", optional_json(r.failure)}};
}

TrialResult trial_result_from_json(const json& j) {
  TrialResult r;
  r.scenario = j.at("scenario").get<std::string>();
  r.mode = design_mode_from_string(j.at("mode").get<std::string>());
  r.seed = j.at("seed").get<std::uint64_t>();
  if (!j.at("mtd").is_null()) r.mtd = j.at("mtd").get<int>();
  r.terminated = j.at("terminated").get<bool>();
  r.duration = j.at("duration").get<double>();
  r.turned_away = j.at("turned_away").get<int>();
  for (const auto& p : j.at("patients")) {
    r.patients.push_back({p.at(0).get<PatientId>(), p.at(1).get<int>(), p.at(2).get<double>(),
                          category_from_int(p.at(3).get<int>())});
  }
  int index = 0;
  for (const auto& d : j.at("decisions")) {
    DecisionRecord rec;
    rec.index = index++;
    rec.time = d.at("t").get<double>();
    rec.dose = d.at("dose").get<int>();
    rec.stage = d.at("stage").get<std::string>() == "II" ? Stage::II : Stage::I;
    rec.pending = d.at("pending").get<int>();
    if (!d.at("pod").is_null()) {
      DecisionDistribution dist;
      dist.prob = d.at("pod").get<std::array<double, 3>>();
      dist.optimal = optimal_decision(dist.prob);
      rec.pod = dist;
    }
    rec.action = action_from_string(d.at("action").get<std::string>());
    rec.next_dose = d.at("next").get<int>();
    if (!d.at("oracle").is_null()) rec.oracle = move_from_string(d.at("oracle").get<std::string>());
    if (!d.at("tag").is_null()) {
      const auto tag = d.at("tag").get<std::string>();
      for (int i = 0; i < 6; ++i)
        if (to_string(static_cast<Inconsistency>(i)) == tag) rec.inconsistency = static_cast<Inconsistency>(i);
    }
    r.decisions.push_back(rec);
  }
  if (!j.at("failure").is_null()) r.failure = j.at("failure").get<std::string>();
  return r;
}

json to_json(const OperatingCharacteristics& oc) {
  json tags = json::object();
  for (int i = 0; i < 6; ++i) tags[to_string(static_cast<Inconsistency>(i))] = oc.inconsistency[i];
  return {{"scenario", oc.scenario},
          {"mode", to_string(oc.mode)},
          {"replicates", oc.replicates},
          {"failures", oc.failures},
          {"true_mtd", oc.true_mtd},
          {"PCS", oc.pcs},
          {"PCA", oc.pca},
          {"POA", oc.poa},
          {"POS", oc.pos},
          {"POMT", oc.pomt},
          {"PODLT", oc.podlt},
          {"selection", oc.selection},
          {"none_selected", oc.none_selected},
          {"allocation", oc.allocation},
          {"inconsistency", tags},
          {"rolling_decisions", oc.rolling_decisions},
          {"duration_mean", oc.duration_mean},
          {"duration_sd", oc.duration_sd}};
}

json to_json(const Scenario& s) {
  return {{"id", s.id},
          {"p_mt", s.p_mt},
          {"p_dlt", s.p_dlt},
          {"time_model", to_string(s.time_model)},
          {"weibull_q_mt", s.weibull_q_mt},
          {"weibull_q_dlt", s.weibull_q_dlt},
          {"accrual_rate", s.accrual_rate}};
}

Scenario scenario_from_json(const json& j) {
  Scenario s;
  s.id = j.at("id").get<std::string>();
  s.p_mt = j.at("p_mt").get<std::vector<double>>();
  s.p_dlt = j.at("p_dlt").get<std::vector<double>>();
  s.time_model = time_model_from_string(j.at("time_model").get<std::string>());
  s.weibull_q_mt = j.at("weibull_q_mt").get<double>();
  s.weibull_q_dlt = j.at("weibull_q_dlt").get<double>();
  s.accrual_rate = j.at("accrual_rate").get<double>();
  s.validate();
  return s;
}

void write_results(std::ostream& out, const ResultsFile& file) {
  json scenarios = json::array();
  for (const auto& s : file.scenarios) scenarios.push_back(to_json(s));
  const json header{{"kind", "podbin-results"},
                    {"config", to_json(file.config)},
                    {"mode", to_string(file.mode)},
                    {"reps", file.reps},
                    {"seed", file.seed},
                    {"scenarios", scenarios}};
  out << header.dump() << '\n';
  for (const auto& r : file.results) out << to_json(r).dump() << '\n';
}

ResultsFile read_results(std::istream& in, const std::string& source) {
  ResultsFile file;
  std::string line;
  int number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        if (j.value("kind", "") != "podbin-results") {
          throw FormatError(source, number, "kind", "not a results file");
        }
        file.config = design_config_from_json(j.at("config"));
        file.mode = design_mode_from_string(j.at("mode").get<std::string>());
        file.reps = j.at("reps").get<int>();
        file.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& s : j.at("scenarios")) file.scenarios.push_back(scenario_from_json(s));
        have_header = true;
      } else {
        file.results.push_back(trial_result_from_json(j));
      }
    } catch (const FormatError& e) {
      throw FormatError(source, number, e.key(), e.what());
    } catch (const std::exception& e) {
      throw FormatError(source, number, "", e.what());
    }
  }
  if (!have_header) throw FormatError(source, 0, "", "empty results file");
  return file;
}

std::string format_header(const TrialDocument& doc) {
  const json j{{"kind", "podbin-trial"},
               {"trial_id", doc.trial_id},
               {"created", doc.created},
               {"mode", to_string(doc.mode)},
               {"config", to_json(doc.config)}};
  return j.dump();
}

std::string format_event_line(std::size_t seq, const Event& event) {
  json payload = json::object();
  if (event.type == Event::Type::Onset) {
    payload["patient"] = event.patient;
    payload["toxicity"] = to_string(event.toxicity);
  }
  const json j{{"seq", seq}, {"time", event.time}, {"type", to_string(event.type)}, {"payload", payload}};
  return j.dump();
}

TrialDocument parse_trial_document(std::istream& in, const std::string& source) {
  TrialDocument doc;
  std::string line;
  int number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        if (j.value("kind", "") != "podbin-trial") {
          throw FormatError(source, number, "kind", "not a trial document");
        }
        doc.trial_id = j.at("trial_id").get<std::string>();
        doc.created = j.value("created", "");
        doc.mode = design_mode_from_string(j.value("mode", "podbin"));
        doc.config = design_config_from_json(j.at("config"));
        have_header = true;
        continue;
      }
      const auto seq = j.at("seq").get<std::size_t>();
      if (seq != doc.events.size() + 1) {
        throw FormatError(source, number, "seq",
                          "expected " + std::to_string(doc.events.size() + 1) + ", got " +
                              std::to_string(seq));
      }
      json flat = j.at("payload");
      flat["type"] = j.at("type");
      flat["time"] = j.at("time");
      doc.events.push_back(event_from_json(flat));
    } catch (const FormatError& e) {
      if (e.line() > 0) throw;
      throw FormatError(source, number, e.key(), e.what());
    } catch (const std::exception& e) {
      throw FormatError(source, number, "", e.what());
    }
  }
  if (!have_header) throw FormatError(source, 0, "", "missing trial header");
  return doc;
}

TrialDocument load_trial_document(const std::string& path) {
  auto in = open_input(path);
  return parse_trial_document(in, path);
}

void write_trial_document(std::ostream& out, const TrialDocument& doc) {
  out << format_header(doc) << '\n';
  for (std::size_t i = 0; i < doc.events.size(); ++i) {
    out << format_event_line(i + 1, doc.events[i]) << '\n';
  }
}

namespace {

std::string fixed(double x, int precision = 1) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << x;
  return os.str();
}

std::vector<std::pair<std::string, std::string>> oc_row(const OperatingCharacteristics& oc) {
  std::string truth;
  for (std::size_t i = 0; i < oc.true_mtd.size(); ++i) truth += (i ? "+" : "") + std::to_string(oc.true_mtd[i]);
  std::vector<std::pair<std::string, std::string>> row{
      {"Scenario", oc.scenario},
      {"Design", to_string(oc.mode)},
      {"Reps", std::to_string(oc.replicates)},
      {"MTD", truth.empty() ? "none" : truth},
      {"PCS", fixed(oc.pcs)},
      {"PCA", fixed(oc.pca)},
      {"POA", fixed(oc.poa)},
      {"POS", fixed(oc.pos)},
      {"POMT", fixed(oc.pomt)},
      {"PODLT", fixed(oc.podlt)},
  };
  for (int i = 0; i < 6; ++i) row.emplace_back(to_string(static_cast<Inconsistency>(i)), fixed(oc.inconsistency[i], 2));
  row.emplace_back("Dur", fixed(oc.duration_mean));
  row.emplace_back("None", fixed(oc.none_selected));
  for (std::size_t d = 0; d < oc.selection.size(); ++d) {
    row.emplace_back("Sel" + std::to_string(d + 1), fixed(oc.selection[d]));
  }
  row.emplace_back("Failed", std::to_string(oc.failures));
  return row;
}

}  // namespace

std::string format_oc_table(const std::vector<OperatingCharacteristics>& ocs) {
  if (ocs.empty()) return {};
  std::vector<std::vector<std::pair<std::string, std::string>>> rows;
  for (const auto& oc : ocs) rows.push_back(oc_row(oc));
  std::size_t columns = 0;
  for (const auto& r : rows) columns = std::max(columns, r.size());
  std::vector<std::size_t> width(columns, 0);
  std::vector<std::string> names(columns);
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) {
      names[c] = r[c].first;
      width[c] = std::max({width[c], r[c].first.size(), r[c].second.size()});
    }
  std::ostringstream os;
  auto cell = [&](std::size_t c, const std::string& s) {
    os << (c ? "  " : "") << (c < 4 ? std::left : std::right) << std::setw(static_cast<int>(width[c])) << s;
  };
  for (std::size_t c = 0; c < columns; ++c) cell(c, names[c]);
  os << '\n';
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < columns; ++c) cell(c, c < r.size() ? r[c].second : "");
    os << '\n';
  }
  return os.str();
}

std::string format_oc_csv(const std::vector<OperatingCharacteristics>& ocs) {
  if (ocs.empty()) return {};
  std::ostringstream os;
  const auto head = oc_row(ocs.front());
  for (std::size_t c = 0; c < head.size(); ++c) os << (c ? "," : "") << head[c].first;
  os << '\n';
  for (const auto& oc : ocs) {
    const auto row = oc_row(oc);
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << row[c].second;
    os << '\n';
  }
  return os.str();
}

}  // namespace podbin::io
