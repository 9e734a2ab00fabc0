#include "sacode/service.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

#include "httplib.h"
#include "sacode/report.hpp"

namespace sacode {

using nlohmann::json;

namespace {

struct HttpError {
  int status;
  std::string kind;
  std::string message;
};

ApiResponse json_response(int status, const json& body) { return {status, body.dump(2) + "\n", "application/json"}; }

ApiResponse error_response(const HttpError& e) {
  return json_response(e.status, json{{"error", e.kind}, {"message", e.message}});
}

HttpError from_session_error(const SessionError& e) {
  using K = SessionError::Kind;
  switch (e.kind()) {
    case K::kUnknownItem: return {404, "unknown_item", e.what()};
    case K::kNotCursor: return {409, "not_cursor", e.what()};
    case K::kFinalized: return {409, "finalized", e.what()};
    case K::kNothingToUndo: return {409, "nothing_to_undo", e.what()};
    case K::kSecondFork: return {422, "second_fork", e.what()};
    case K::kForkRefused: return {422, "fork_refused", e.what()};
    case K::kNotComplete: return {422, "not_complete", e.what()};
    case K::kBadSublabel: return {422, "bad_sublabel", e.what()};
    case K::kMismatch: return {409, "mismatch", e.what()};
    case K::kInvalidArgument: break;
  }
  return {400, "invalid_argument", e.what()};
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string p;
  while (std::getline(ss, p, '/')) {
    if (!p.empty()) parts.push_back(p);
  }
  return parts;
}

int parse_index(const std::string& s) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw HttpError{400, "invalid_argument", "item index must be an integer, got '" + s + "'"};
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  try {
    json j = json::parse(body);
    if (!j.is_object()) throw HttpError{400, "invalid_json", "request body must be a JSON object"};
    return j;
  } catch (const json::parse_error& e) {
    throw HttpError{400, "invalid_json", e.what()};
  }
}

template <typename T>
T field(const json& body, const char* name) {
  if (!body.contains(name)) throw HttpError{400, "invalid_argument", std::string("missing field '") + name + "'"};
  try {
    return body.at(name).get<T>();
  } catch (const json::exception&) {
    throw HttpError{400, "invalid_argument", std::string("field '") + name + "' has the wrong type"};
  }
}

bool valid_id(const std::string& id) {
  static const std::regex kId("[A-Za-z0-9][A-Za-z0-9_.-]{0,63}");
  return std::regex_match(id, kId);
}

std::string new_session_id(const std::string& coder) {
  static std::mt19937_64 rng{std::random_device{}()};
  std::ostringstream o;
  o << std::hex << (rng() & 0xffffffffULL);
  std::string prefix;
  for (char c : coder) prefix += std::isalnum(static_cast<unsigned char>(c)) ? c : '-';
  return prefix.substr(0, 24) + "-" + o.str();
}

json tag_view(const CodingTree& tree, const Tag& t) {
  json labels = json::array();
  for (const auto& l : t.sublabels) labels.push_back(l);
  return json{{"code", t.code},
              {"display_name", tree.has_code(t.code) ? tree.code(t.code).display_name : t.code},
              {"sequence", to_json(t.sequence)},
              {"sublabels", labels}};
}

}  // namespace

json api_session_view(const Session& s, int item_index) {
  const CodingTree& tree = s.tree();
  const AdviceItem& item = s.item(item_index);
  const ItemState st = s.state(item_index);
  const bool has_log = !s.log(item_index).empty();

  json actions = json::array();
  json question = nullptr;
  if (st.cursor) {
    const QuestionNode& q = tree.question(*st.cursor);
    question = json{{"id", q.id}, {"text", q.text}, {"annotation", q.annotation}};
    actions.push_back("yes");
    actions.push_back("no");
    if (!st.fork_question && !tree.is_collapsed(q.id)) actions.push_back("both");
  }
  json sublabels = json::array();
  if (st.status != ItemStatus::kFinalized) {
    for (std::size_t i = 0; i < st.tags.size(); ++i) {
      for (const auto& l : tree.code(st.tags[i].code).sublabels) {
        sublabels.push_back(json{{"tag", i}, {"label", l}, {"set", st.tags[i].has_sublabel(l)}});
      }
    }
    if (!sublabels.empty()) actions.push_back("sublabel");
  }
  if (st.status == ItemStatus::kComplete) actions.push_back("finalize");
  if (has_log) actions.push_back("undo");

  json tags = json::array();
  for (const auto& t : st.tags) tags.push_back(tag_view(tree, t));
  const auto next = s.first_unfinished_item();
  return json{{"session_id", s.id()},
              {"coder_id", s.coder_id()},
              {"revision", s.revision()},
              {"progress", {{"finalized", s.finalized_count()}, {"total", s.dataset().size()}}},
              {"next_item", next ? json(*next) : json(nullptr)},
              {"item",
               {{"index", item.index},
                {"text", item.text},
                {"category", item.category ? json(*item.category) : json(nullptr)},
                {"status", to_string(st.status)},
                {"question", question},
                {"tags", tags},
                {"fork_question", st.fork_question ? json(*st.fork_question) : json(nullptr)},
                {"second_branch_pending", st.second_branch_pending},
                {"iot_specific", st.iot_specific}}},
              {"available_actions", actions},
              {"available_sublabels", sublabels}};
}

Service::Service(ServiceConfig config) : config_(std::move(config)) {
  CodingTree tree = config_.tree.empty() ? CodingTree::default_tree() : CodingTree::load(config_.tree);
  if (config_.merge_t_tprime) tree = tree.with_t_tprime_equal(true);
  tree_ = std::make_shared<const CodingTree>(std::move(tree));

  const ColumnMapping mapping = config_.mapping.empty() ? ColumnMapping::canonical() : ColumnMapping::load(config_.mapping);
  if (config_.dataset.empty()) throw std::invalid_argument("service needs a dataset file");
  const Table table = load_table(config_.dataset);
  dataset_ = std::make_shared<const Dataset>(parse_dataset(table, mapping));
  const bool has_codings = !mapping.coders.empty() && std::all_of(mapping.coders.begin(), mapping.coders.end(),
                                                                   [&](const CoderColumns& c) { return table.has_column(c.tag1); });
  if (has_codings) {
    for (auto& set : parse_codings(table, mapping, *tree_)) imported_.emplace(set.coder_id, std::move(set));
  }

  std::filesystem::create_directories(config_.state_dir);
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(config_.state_dir)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f);
    Session s = Session::from_json(json::parse(in), tree_, dataset_);
    const std::string id = s.id();
    sessions_.emplace(id, std::make_shared<Entry>(std::move(s)));
  }
}

Service::~Service() { stop(); }

std::shared_ptr<Service::Entry> Service::find(const std::string& id) {
  std::lock_guard lock(registry_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw HttpError{404, "unknown_session", "no session '" + id + "'"};
  return it->second;
}

void Service::persist(const Session& s) const {
  const auto path = config_.state_dir / (s.id() + ".json");
  const auto tmp = config_.state_dir / (s.id() + ".json.tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << s.to_json().dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

ApiResponse Service::handle(const ApiRequest& r) {
  try {
    if (!config_.token.empty() && r.authorization != "Bearer " + config_.token) {
      throw HttpError{401, "unauthorized", "missing or wrong bearer token"};
    }
    const auto parts = split_path(r.path);
    if (parts.empty()) throw HttpError{404, "not_found", "no route for " + r.path};
    if (parts[0] == "sessions") {
      if (parts.size() == 1) {
        if (r.method != "POST") throw HttpError{405, "method_not_allowed", "use POST /sessions"};
        return create_session(r);
      }
      return session_route(r, parts);
    }
    if (parts.size() == 1 && (parts[0] == "analyze" || parts[0] == "report")) {
      if (r.method != "GET") throw HttpError{405, "method_not_allowed", "use GET /" + parts[0]};
      return analyze_route(r, parts[0] == "report");
    }
    throw HttpError{404, "not_found", "no route for " + r.path};
  } catch (const HttpError& e) {
    return error_response(e);
  } catch (const SessionError& e) {
    return error_response(from_session_error(e));
  } catch (const AnalysisError& e) {
    return error_response({422, "analysis_error", e.what()});
  } catch (const ReportError& e) {
    return error_response({400, "report_error", e.what()});
  } catch (const std::exception& e) {
    return error_response({500, "internal", e.what()});
  }
}

ApiResponse Service::create_session(const ApiRequest& r) {
  const json body = parse_body(r.body);
  const auto coder = field<std::string>(body, "coder_id");
  if (coder.empty()) throw HttpError{400, "invalid_argument", "coder_id is empty"};
  std::string id = body.contains("session_id") ? field<std::string>(body, "session_id") : new_session_id(coder);
  if (!valid_id(id)) throw HttpError{400, "invalid_argument", "session id may use letters, digits, '.', '_' and '-'"};

  std::shared_ptr<Entry> entry;
  {
    std::lock_guard lock(registry_mutex_);
    if (sessions_.count(id)) throw HttpError{409, "session_exists", "session '" + id + "' already exists"};
    entry = std::make_shared<Entry>(Session::start(tree_, dataset_, coder, id));
    sessions_.emplace(id, entry);
  }
  std::lock_guard lock(entry->mutex);
  persist(entry->session);
  const int first = dataset_->front().index;
  json view = api_session_view(entry->session, first);
  return json_response(201, json{{"session_id", id}, {"view", view}});
}

ApiResponse Service::session_route(const ApiRequest& r, const std::vector<std::string>& parts) {
  auto entry = find(parts[1]);
  std::lock_guard lock(entry->mutex);
  Session& s = entry->session;

  if (parts.size() == 2) {
    if (r.method != "GET") throw HttpError{405, "method_not_allowed", "use GET"};
    const auto next = s.first_unfinished_item();
    const int ix = next ? *next : dataset_->back().index;
    return json_response(200, api_session_view(s, ix));
  }
  if (parts.size() == 3 && parts[2] == "export") {
    if (r.method != "GET") throw HttpError{405, "method_not_allowed", "use GET"};
    return json_response(200, to_json(s.export_records()));
  }
  if (parts.size() < 4 || parts[2] != "items") throw HttpError{404, "not_found", "no route for " + r.path};
  const int ix = parse_index(parts[3]);
  s.item(ix);

  if (parts.size() == 4) {
    if (r.method != "GET") throw HttpError{405, "method_not_allowed", "use GET"};
    return json_response(200, api_session_view(s, ix));
  }
  if (parts.size() != 5) throw HttpError{404, "not_found", "no route for " + r.path};
  if (r.method != "POST") throw HttpError{405, "method_not_allowed", "use POST"};

  const json body = parse_body(r.body);
  if (body.contains("revision") && field<std::size_t>(body, "revision") != s.revision()) {
    throw HttpError{409, "stale_revision",
                    "session is at revision " + std::to_string(s.revision()) + ", request was built against " +
                        std::to_string(body.at("revision").get<std::size_t>())};
  }
  const std::string& action = parts[4];
  json extra = json::object();
  if (action == "answer") {
    s.answer(ix, field<std::string>(body, "q"), answer_choice_from_string(field<std::string>(body, "a")));
  } else if (action == "sublabel") {
    const auto pos = body.contains("tag") ? field<std::size_t>(body, "tag") : std::size_t{0};
    s.set_sublabel(ix, pos, field<std::string>(body, "label"));
  } else if (action == "iot") {
    s.set_iot_specific(ix, field<bool>(body, "value"));
  } else if (action == "undo") {
    s.undo(ix);
  } else if (action == "finalize") {
    extra["record"] = to_json(s.finalize_item(ix));
  } else {
    throw HttpError{404, "not_found", "unknown action '" + action + "'"};
  }
  persist(s);
  json view = api_session_view(s, ix);
  if (!extra.empty()) view["record"] = extra["record"];
  return json_response(200, view);
}

std::optional<CoderRecordSet> Service::record_set(const std::string& name) {
  {
    std::shared_ptr<Entry> entry;
    {
      std::lock_guard lock(registry_mutex_);
      auto it = sessions_.find(name);
      if (it != sessions_.end()) entry = it->second;
    }
    if (entry) {
      std::lock_guard lock(entry->mutex);
      return entry->session.export_records();
    }
  }
  if (auto it = imported_.find(name); it != imported_.end()) return it->second;
  if (!config_.records_dir.empty() && valid_id(name)) {
    const auto path = config_.records_dir / (name + ".json");
    if (std::filesystem::exists(path)) return load_record_set(path);
  }
  return std::nullopt;
}

ApiResponse Service::analyze_route(const ApiRequest& r, bool report) {
  auto param = [&](const char* k) {
    auto it = r.query.find(k);
    if (it == r.query.end() || it->second.empty()) {
      throw HttpError{400, "invalid_argument", std::string("query parameter '") + k + "' is required"};
    }
    return it->second;
  };
  const std::string a_name = param("setA");
  const std::string b_name = param("setB");
  auto a = record_set(a_name);
  auto b = record_set(b_name);
  if (!a) throw HttpError{404, "unknown_record_set", "no record set '" + a_name + "'"};
  if (!b) throw HttpError{404, "unknown_record_set", "no record set '" + b_name + "'"};

  CodingTree tree = *tree_;
  if (auto it = r.query.find("merge_t_tprime"); it != r.query.end() && (it->second == "1" || it->second == "true")) {
    tree = tree.with_t_tprime_equal(true);
  }
  const Analysis analysis = analyze(*a, *b, *dataset_, tree);
  if (!report) return json_response(200, to_json(analysis));

  BundleMetadata meta;
  meta.dataset_hash = dataset_hash(*dataset_);
  meta.generated_at = report_timestamp();
  const json bundle = make_bundle(analysis, tree, meta);
  auto it = r.query.find("format");
  if (it == r.query.end() || it->second == "json") return json_response(200, bundle);
  const TableFormat f = table_format_from_string(it->second);
  std::string text;
  for (const auto& d : render_tables(bundle, f)) text += d.content + (f == TableFormat::kCsv ? "\n" : "\n\n");
  return {200, text, f == TableFormat::kCsv ? "text/csv" : f == TableFormat::kMarkdown ? "text/markdown" : "text/plain"};
}

void Service::register_routes() {
  server_ = std::make_unique<httplib::Server>();
  auto adapt = [this](const httplib::Request& req, httplib::Response& res) {
    ApiRequest r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.query[k] = v;
    r.body = req.body;
    r.authorization = req.get_header_value("Authorization");
    const ApiResponse out = handle(r);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  server_->Get(".*", adapt);
  server_->Post(".*", adapt);
}

void Service::serve() {
  if (!server_) register_routes();
  if (!bound_) {
    if (!server_->bind_to_port(config_.host, config_.port)) {
      throw std::runtime_error("cannot bind " + config_.host + ":" + std::to_string(config_.port) + " (port busy?)");
    }
    bound_ = true;
  }
  server_->listen_after_bind();
}

int Service::bind_any_port() {
  if (!server_) register_routes();
  const int port = server_->bind_to_any_port(config_.host);
  if (port < 0) throw std::runtime_error("cannot bind any port on " + config_.host);
  bound_ = true;
  return port;
}

void Service::serve_bound() { serve(); }

void Service::stop() {
  if (server_) server_->stop();
}

}  // namespace sacode
