#pragma once

// Trial conduct: an on-disk store of trial documents and the HTTP API on top
// of it. Every trial is one append-only JSONL file; state is rebuilt by replay.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "podbin/io.hpp"

namespace httplib {
class Server;
}

namespace podbin::service {

using io::json;

// An error with the HTTP status it maps to.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, const std::string& message) : std::runtime_error(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

EngineOptions conduct_options(DesignMode mode);

// Decision for the next cohort of a trial. `seed` replaces the stored
// inference seed. Shared by the CLI and the service so both agree exactly.
json decision_payload(const io::TrialDocument& doc, std::optional<std::uint64_t> seed = {});

json state_payload(const io::TrialDocument& doc, const TrialState& state);

class TrialStore {
 public:
  // Loads and replays every trial file in `dir`, creating it if needed.
  explicit TrialStore(std::filesystem::path dir);

  std::vector<std::string> ids() const;
  std::vector<std::string> load_errors() const { return load_errors_; }

  json create(const DesignConfig& config, DesignMode mode);
  json get(const std::string& id) const;
  // Appends events in order; all or none are applied.
  json append(const std::string& id, const std::vector<Event>& events);
  json decision(const std::string& id, std::optional<std::uint64_t> seed) const;
  json whatif(const std::string& id, const std::vector<OrdinalCategory>& pending_finals) const;
  json finalize(const std::string& id) const;

 private:
  struct Trial {
    mutable std::mutex mutex;
    io::TrialDocument doc;
    TrialState state;
  };

  std::shared_ptr<Trial> find(const std::string& id) const;
  std::filesystem::path path_of(const std::string& id) const;

  std::filesystem::path dir_;
  mutable std::mutex index_mutex_;
  std::map<std::string, std::shared_ptr<Trial>> trials_;
  std::vector<std::string> load_errors_;
};

// Installs the /api routes on a server.
void install_routes(httplib::Server& server, TrialStore& store);

// Blocks serving on host:port until the process is stopped.
int serve(const std::filesystem::path& data_dir, const std::string& host, int port);

}  // namespace podbin::service
