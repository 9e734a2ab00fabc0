#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "json.hpp"
#include "sacode/agreement.hpp"
#include "sacode/ingest.hpp"
#include "sacode/session.hpp"

namespace httplib {
class Server;
}

namespace sacode {

struct ServiceConfig {
  std::filesystem::path tree;     // empty: built-in default tree
  std::filesystem::path dataset;  // CSV or JSON, read through `mapping`
  std::filesystem::path mapping;  // empty: canonical column names
  std::filesystem::path state_dir = "sessions";
  // Extra record sets for /analyze, one <name>.json CoderRecordSet per file.
  std::filesystem::path records_dir;
  std::string token;  // non-empty: require "Authorization: Bearer <token>"
  bool merge_t_tprime = false;
  std::string host = "127.0.0.1";
  int port = 8080;
};

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
  std::string authorization;
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";

  nlohmann::json json() const { return nlohmann::json::parse(body); }
};

/// The HTTP surface over sessions and analysis. `handle` is the whole API;
/// `serve` only adapts it to a socket.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();

  ApiResponse handle(const ApiRequest& request);

  /// Blocks until stop(). Throws std::runtime_error when the port cannot be bound.
  void serve();
  /// Binds an ephemeral port on `host` and returns it; pair with serve_bound().
  int bind_any_port();
  void serve_bound();
  void stop();

  const CodingTree& tree() const { return *tree_; }
  const Dataset& dataset() const { return *dataset_; }

 private:
  struct Entry {
    std::mutex mutex;
    Session session;
    explicit Entry(Session s) : session(std::move(s)) {}
  };

  std::shared_ptr<Entry> find(const std::string& id);
  void persist(const Session& s) const;
  std::optional<CoderRecordSet> record_set(const std::string& name);
  void register_routes();

  ApiResponse create_session(const ApiRequest& r);
  ApiResponse session_route(const ApiRequest& r, const std::vector<std::string>& parts);
  ApiResponse analyze_route(const ApiRequest& r, bool report);

  ServiceConfig config_;
  std::shared_ptr<const CodingTree> tree_;
  std::shared_ptr<const Dataset> dataset_;
  std::map<std::string, CoderRecordSet> imported_;  // coder id -> codings found in the dataset file
  std::mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::unique_ptr<httplib::Server> server_;
  bool bound_ = false;
};

nlohmann::json api_session_view(const Session& s, int item_index);

}  // namespace sacode
