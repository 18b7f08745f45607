#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "podbin/cli.hpp"
#include "podbin/service.hpp"

// After the Eigen headers: <resolv.h> defines a _res macro.
#include <httplib.h>

using namespace podbin;
using namespace podbin::service;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("podbin-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int status_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ApiError& e) {
    return e.status();
  }
  return 200;
}

json ev(const Event& e) { return io::to_json(e); }

// Dose 1 clean, dose 2 in follow-up with one MT so far; stage II from n*=3.
std::vector<Event> rolling_events() {
  return {Event::arrival(0), Event::arrival(1), Event::arrival(2), Event::tick(30),
          Event::arrival(30), Event::arrival(31), Event::arrival(32),
          Event::onset(4, Toxicity::MT, 35), Event::tick(45)};
}

DesignConfig small_config() {
  DesignConfig c;
  c.stage2_threshold = 3;
  c.mcmc.burn_in = 300;
  c.mcmc.retained = 500;
  return c;
}

}  // namespace

TEST_CASE("fresh trial assigns dose 1 to the first cohort") {
  TempDir dir;
  TrialStore store(dir.path);
  const auto created = store.create(DesignConfig{}, DesignMode::PodBin);
  const std::string id = created.at("trial_id");
  CHECK(store.get(id).at("enrolled") == 0);
  const auto d = store.decision(id, std::nullopt);
  CHECK(d.at("status") == "FirstCohort");
  CHECK(d.at("next_dose") == 1);
}

TEST_CASE("store errors map to HTTP statuses") {
  TempDir dir;
  TrialStore store(dir.path);
  const std::string id = store.create(DesignConfig{}, DesignMode::PodBin).at("trial_id");
  CHECK(status_of([&] { store.get("nope"); }) == 404);
  store.append(id, {Event::arrival(5)});
  CHECK(status_of([&] { store.append(id, {Event::tick(4)}); }) == 409);
  CHECK(status_of([&] { store.append(id, {Event::onset(9, Toxicity::MT, 6)}); }) == 409);
  CHECK(status_of([&] { store.finalize(id); }) == 422);
  CHECK(status_of([&] { store.whatif(id, {}); }) == 400);

  // A rejected batch leaves nothing behind.
  CHECK(status_of([&] { store.append(id, {Event::arrival(6), Event::tick(1)}); }) == 409);
  CHECK(store.get(id).at("events") == 1);
  CHECK(store.get(id).at("enrolled") == 1);
}

TEST_CASE("restart rebuilds every trial from its event log") {
  TempDir dir;
  std::string id;
  json before, decision_before;
  {
    TrialStore store(dir.path);
    id = store.create(small_config(), DesignMode::PodBin).at("trial_id");
    store.create(DesignConfig{}, DesignMode::Benchmark);
    for (const auto& e : rolling_events()) store.append(id, {e});
    before = store.get(id);
    decision_before = store.decision(id, std::nullopt);
  }
  TrialStore again(dir.path);
  CHECK(again.ids().size() == 2);
  CHECK(again.load_errors().empty());
  CHECK(again.get(id) == before);
  CHECK(again.decision(id, std::nullopt) == decision_before);
}

TEST_CASE("decisions are side-effect free and agree with the CLI") {
  TempDir dir;
  TrialStore store(dir.path);
  const std::string id = store.create(small_config(), DesignMode::PodBin).at("trial_id");
  store.append(id, rolling_events());
  const auto a = store.decision(id, std::nullopt);
  const auto b = store.decision(id, std::nullopt);
  CHECK(a == b);
  CHECK(store.get(id).at("decisions").size() == 1);
  CHECK(a.at("status") == "Decided");
  CHECK(a.at("pending") == 3);
  const auto& pod = a.at("pod");
  CHECK(pod.at("DeEscalate").get<double>() + pod.at("Stay").get<double>() +
            pod.at("Escalate").get<double>() ==
        doctest::Approx(1.0));
  CHECK(a.at("completions").size() == 3);

  const auto seeded = store.decision(id, 99);
  CHECK(seeded.at("seed") != a.at("seed"));

  for (std::optional<std::uint64_t> seed : {std::optional<std::uint64_t>{}, std::optional<std::uint64_t>{99}}) {
    std::ostringstream out, err;
    cli::DecideArgs args{(dir.path / (id + ".jsonl")).string(), seed, true};
    REQUIRE(cli::cmd_decide(args, out, err) == cli::kExitOk);
    CHECK(json::parse(out.str()) == (seed ? seeded : a));
  }
}

TEST_CASE("what-if is never more conservative for milder completions") {
  TempDir dir;
  TrialStore store(dir.path);
  const std::string id = store.create(small_config(), DesignMode::PodBin).at("trial_id");
  store.append(id, rolling_events());
  auto rank = [](const json& j) {
    const std::string a = j.at("action");
    return a == "DeEscalate" ? 0 : a == "Stay" ? 1 : 2;
  };
  const std::vector<OrdinalCategory> mild(3, OrdinalCategory::NoToxicity);
  const std::vector<OrdinalCategory> severe(3, OrdinalCategory::Both);
  const auto m = store.whatif(id, mild);
  const auto s = store.whatif(id, severe);
  CHECK(rank(m) >= rank(s));
  CHECK(m.at("pending_patients") == json::array({4, 5, 6}));
  CHECK(s.at("action") == "DeEscalate");
  CHECK(store.get(id).at("events") == rolling_events().size());
}

TEST_CASE("finalize on a terminated trial reports all doses too toxic") {
  TempDir dir;
  TrialStore store(dir.path);
  const std::string id = store.create(DesignConfig{}, DesignMode::PodBin).at("trial_id");
  store.append(id, {Event::arrival(0), Event::arrival(1), Event::arrival(2),
                    Event::onset(1, Toxicity::DLT, 3), Event::onset(2, Toxicity::DLT, 4),
                    Event::onset(3, Toxicity::DLT, 5)});
  CHECK(store.get(id).at("terminated") == true);
  const auto r = store.finalize(id);
  CHECK(r.at("reason") == "AllTooToxic");
  CHECK(r.at("selected").is_null());
}

TEST_CASE("HTTP API end to end") {
  TempDir dir;
  TrialStore store(dir.path);
  httplib::Server server;
  install_routes(server, store);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);

  auto post = [&](const std::string& path, const json& body) {
    return client.Post(path, body.dump(), "application/json");
  };

  auto res = post("/api/trials", {{"config", io::to_json(small_config())}});
  REQUIRE(res);
  CHECK(res->status == 201);
  const std::string id = json::parse(res->body).at("trial_id");
  const std::string base = "/api/trials/" + id;

  res = client.Get(base + "/decision");
  CHECK(json::parse(res->body).at("status") == "FirstCohort");

  json events = json::array();
  for (const auto& e : rolling_events()) events.push_back(ev(e));
  res = post(base + "/events", {{"events", events}});
  CHECK(res->status == 200);
  CHECK(json::parse(res->body).at("enrolled") == 6);

  res = post(base + "/events", ev(Event::tick(10)));
  CHECK(res->status == 409);
  res = client.Post(base + "/events", "{not json", "application/json");
  CHECK(res->status == 400);
  res = post(base + "/events", {{"type", "Onset"}, {"time", 50}});
  CHECK(res->status == 400);
  res = client.Get("/api/trials/missing");
  CHECK(res->status == 404);
  res = post(base + "/finalize", json::object());
  CHECK(res->status == 422);
  res = post("/api/trials", {{"config", {{"lambda_e", 7}}}});
  CHECK(res->status == 400);

  res = client.Get(base + "/decision");
  CHECK(res->status == 200);
  CHECK(json::parse(res->body) == store.decision(id, std::nullopt));
  res = client.Get(base + "/decision?seed=abc");
  CHECK(res->status == 400);

  res = post(base + "/whatif", {{"categories", {1, 1, 1}}});
  CHECK(res->status == 200);
  res = post(base + "/whatif", {{"categories", {1, 9, 1}}});
  CHECK(res->status == 400);

  res = post(base + "/events", ev(Event::tick(70)));
  CHECK(res->status == 200);
  res = post(base + "/finalize", json::object());
  CHECK(res->status == 200);
  CHECK(json::parse(res->body).at("reason") == "Selected");

  res = client.Get("/api/trials");
  CHECK(json::parse(res->body).at("trials") == json::array({id}));

  server.stop();
  thread.join();
}
