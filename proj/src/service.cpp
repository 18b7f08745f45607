#include "podbin/service.hpp"

#include <ctime>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

// After the Eigen headers: <resolv.h> defines a _res macro.
#include <httplib.h>

namespace podbin::service {

namespace fs = std::filesystem;

namespace {

std::string now_iso8601() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string new_trial_id() {
  static std::mutex mutex;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mutex);
  std::ostringstream os;
  os << "trial-" << std::hex << (rng() & 0xffffffffffffULL);
  return os.str();
}

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
  return true;
}

TrialState replay_document(const io::TrialDocument& doc) {
  return replay(doc.config, doc.events, conduct_options(doc.mode));
}

}  // namespace

EngineOptions conduct_options(DesignMode mode) {
  EngineOptions options;
  options.mode = mode;
  options.arrivals = ArrivalPolicy::Queue;
  return options;
}

json decision_payload(const io::TrialDocument& doc, std::optional<std::uint64_t> seed) {
  io::TrialDocument copy = doc;
  if (seed) copy.config.rng_seed = *seed;
  const TrialState state = replay_document(copy);
  json j = io::to_json(next_assignment(state, conduct_options(copy.mode)));
  j["trial_id"] = doc.trial_id;
  j["clock"] = state.clock;
  j["current_dose"] = state.current_dose;
  return j;
}

json state_payload(const io::TrialDocument& doc, const TrialState& state) {
  json j = io::to_json(state);
  j["trial_id"] = doc.trial_id;
  j["mode"] = to_string(doc.mode);
  j["created"] = doc.created;
  j["events"] = doc.events.size();
  return j;
}

TrialStore::TrialStore(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
  for (const auto& entry : fs::directory_iterator(dir_)) {
    if (entry.path().extension() != ".jsonl") continue;
    try {
      auto trial = std::make_shared<Trial>();
      trial->doc = io::load_trial_document(entry.path().string());
      trial->state = replay_document(trial->doc);
      trials_[trial->doc.trial_id] = trial;
    } catch (const std::exception& e) {
      load_errors_.push_back(entry.path().string() + ": " + e.what());
    }
  }
}

std::vector<std::string> TrialStore::ids() const {
  std::lock_guard lock(index_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : trials_) out.push_back(id);
  return out;
}

fs::path TrialStore::path_of(const std::string& id) const { return dir_ / (id + ".jsonl"); }

std::shared_ptr<TrialStore::Trial> TrialStore::find(const std::string& id) const {
  std::lock_guard lock(index_mutex_);
  const auto it = trials_.find(id);
  if (it == trials_.end()) throw ApiError(404, "unknown trial '" + id + "'");
  return it->second;
}

json TrialStore::create(const DesignConfig& config, DesignMode mode) {
  auto trial = std::make_shared<Trial>();
  trial->doc.config = config;
  trial->doc.mode = mode;
  trial->doc.created = now_iso8601();
  trial->state = new_trial(config);

  std::lock_guard lock(index_mutex_);
  do {
    trial->doc.trial_id = new_trial_id();
  } while (trials_.count(trial->doc.trial_id) || fs::exists(path_of(trial->doc.trial_id)));
  {
    std::ofstream out(path_of(trial->doc.trial_id));
    out << io::format_header(trial->doc) << '\n';
    if (!out.flush()) throw ApiError(500, "cannot write trial file");
  }
  trials_[trial->doc.trial_id] = trial;
  return state_payload(trial->doc, trial->state);
}

json TrialStore::get(const std::string& id) const {
  const auto trial = find(id);
  std::lock_guard lock(trial->mutex);
  return state_payload(trial->doc, trial->state);
}

json TrialStore::append(const std::string& id, const std::vector<Event>& events) {
  const auto trial = find(id);
  std::lock_guard lock(trial->mutex);
  TrialState next = trial->state;
  const auto options = conduct_options(trial->doc.mode);
  json outcomes = json::array();
  for (std::size_t i = 0; i < events.size(); ++i) {
    try {
      const auto r = advance(next, events[i], options);
      outcomes.push_back({{"seq", trial->doc.events.size() + i + 1},
                          {"enrolled", r.enrolled},
                          {"queued", r.queued},
                          {"turned_away", r.turned_away}});
    } catch (const EventError& e) {
      throw ApiError(409, "event " + std::to_string(i) + ": " + e.what());
    } catch (const DomainError& e) {
      throw ApiError(400, "event " + std::to_string(i) + ": " + e.what());
    }
  }
  {
    std::ofstream out(path_of(id), std::ios::app);
    for (std::size_t i = 0; i < events.size(); ++i) {
      out << io::format_event_line(trial->doc.events.size() + i + 1, events[i]) << '\n';
    }
    if (!out.flush()) throw ApiError(500, "cannot append to trial file");
  }
  trial->doc.events.insert(trial->doc.events.end(), events.begin(), events.end());
  trial->state = std::move(next);
  json j = state_payload(trial->doc, trial->state);
  j["outcomes"] = outcomes;
  return j;
}

json TrialStore::decision(const std::string& id, std::optional<std::uint64_t> seed) const {
  const auto trial = find(id);
  io::TrialDocument snapshot;
  {
    std::lock_guard lock(trial->mutex);
    snapshot = trial->doc;
  }
  return decision_payload(snapshot, seed);
}

json TrialStore::whatif(const std::string& id, const std::vector<OrdinalCategory>& finals) const {
  const auto trial = find(id);
  std::lock_guard lock(trial->mutex);
  const auto& state = trial->state;
  std::vector<PatientId> pending;
  for (const auto& p : state.patients)
    if (p.pending && p.dose == state.current_dose) pending.push_back(p.id);
  Move move;
  try {
    move = whatif_decision(state, finals);
  } catch (const DomainError& e) {
    throw ApiError(400, e.what());
  }
  const int next = move == Move::Escalate ? state.current_dose + 1
                   : move == Move::DeEscalate ? state.current_dose - 1
                                              : state.current_dose;
  return {{"trial_id", id},
          {"dose", state.current_dose},
          {"pending_patients", pending},
          {"action", to_string(move)},
          {"next_dose", next}};
}

json TrialStore::finalize(const std::string& id) const {
  const auto trial = find(id);
  std::lock_guard lock(trial->mutex);
  try {
    json j = io::to_json(podbin::finalize(trial->state));
    j["trial_id"] = id;
    return j;
  } catch (const PreconditionError& e) {
    throw ApiError(422, e.what());
  }
}

namespace {

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body.empty() ? std::string("{}") : req.body);
  } catch (const json::exception& e) {
    throw ApiError(400, std::string("invalid JSON: ") + e.what());
  }
}

std::vector<Event> events_from_body(const json& body) {
  std::vector<Event> events;
  try {
    if (body.contains("events")) {
      if (!body.at("events").is_array()) throw ApiError(400, "'events' must be an array");
      for (const auto& e : body.at("events")) events.push_back(io::event_from_json(e));
    } else {
      events.push_back(io::event_from_json(body));
    }
  } catch (const io::FormatError& e) {
    throw ApiError(400, e.what());
  }
  if (events.empty()) throw ApiError(400, "no events given");
  return events;
}

std::optional<std::uint64_t> seed_param(const httplib::Request& req) {
  if (!req.has_param("seed")) return std::nullopt;
  const std::string s = req.get_param_value("seed");
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ApiError(400, "seed must be an unsigned integer");
  }
}

template <typename Fn>
httplib::Server::Handler wrap(Fn fn, int success = 200) {
  return [fn, success](const httplib::Request& req, httplib::Response& res) {
    json body;
    int status = success;
    try {
      body = fn(req);
    } catch (const ApiError& e) {
      status = e.status();
      body = {{"error", e.what()}, {"status", status}};
    } catch (const std::exception& e) {
      status = 500;
      body = {{"error", e.what()}, {"status", status}};
    }
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
}

std::string trial_id(const httplib::Request& req) {
  const std::string id = req.path_params.at("id");
  if (!valid_id(id)) throw ApiError(404, "unknown trial '" + id + "'");
  return id;
}

}  // namespace

void install_routes(httplib::Server& server, TrialStore& store) {
  server.Get("/api/trials", wrap([&](const httplib::Request&) {
    return json{{"trials", store.ids()}};
  }));
  server.Post("/api/trials", wrap([&](const httplib::Request& req) {
    const json body = parse_body(req);
    DesignConfig config;
    DesignMode mode = DesignMode::PodBin;
    try {
      if (body.contains("config")) config = io::design_config_from_json(body.at("config"));
      if (body.contains("mode")) mode = design_mode_from_string(body.at("mode").get<std::string>());
    } catch (const std::exception& e) {
      throw ApiError(400, e.what());
    }
    return store.create(config, mode);
  }, 201));
  server.Get("/api/trials/:id", wrap([&](const httplib::Request& req) {
    return store.get(trial_id(req));
  }));
  server.Post("/api/trials/:id/events", wrap([&](const httplib::Request& req) {
    const std::string id = trial_id(req);
    return store.append(id, events_from_body(parse_body(req)));
  }));
  server.Get("/api/trials/:id/decision", wrap([&](const httplib::Request& req) {
    return store.decision(trial_id(req), seed_param(req));
  }));
  server.Post("/api/trials/:id/whatif", wrap([&](const httplib::Request& req) {
    const std::string id = trial_id(req);
    const json body = parse_body(req);
    std::vector<OrdinalCategory> finals;
    try {
      for (const auto& c : body.at("categories")) finals.push_back(category_from_int(c.get<int>()));
    } catch (const std::exception& e) {
      throw ApiError(400, std::string("'categories' must list categories 1..4: ") + e.what());
    }
    return store.whatif(id, finals);
  }));
  server.Post("/api/trials/:id/finalize", wrap([&](const httplib::Request& req) {
    return store.finalize(trial_id(req));
  }));
}

int serve(const fs::path& data_dir, const std::string& host, int port) {
  TrialStore store(data_dir);
  for (const auto& e : store.load_errors()) std::cerr << "skipped trial file " << e << '\n';
  httplib::Server server;
  install_routes(server, store);
  std::cerr << "serving " << store.ids().size() << " trials from " << data_dir.string() << " on "
            << host << ":" << port << '\n';
  if (!server.listen(host, port)) {
    std::cerr << "cannot listen on " << host << ":" << port << '\n';
    return 1;
  }
  return 0;
}

}  // namespace podbin::service
