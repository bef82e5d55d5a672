#pragma once

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <regex>
#include <semaphore>
#include <string>
#include <thread>

#include "softgrasp/cascade.hpp"
#include "softgrasp/json_io.hpp"
#include "softgrasp/scene.hpp"
#include "softgrasp/study.hpp"
#include "softgrasp/urdf.hpp"

namespace softgrasp {

struct ServiceOptions {
  std::filesystem::path data_dir = "studio-data";
  int workers = 0;  // 0: hardware concurrency
  std::uint64_t default_seed = 0;
  int restarts = 5;
};

struct ServiceResponse {
  int status = 200;
  Json body;
};

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Design sessions persisted as one JSON file each under <data>/sessions.
// One solve per session at a time; solves across sessions are bounded by the
// worker count.
class StudioService {
 public:
  explicit StudioService(ServiceOptions options)
      : options_(std::move(options)),
        slots_(options_.workers > 0 ? options_.workers
                                    : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))) {
    std::filesystem::create_directories(session_dir());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(session_dir())) {
      if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      auto s = std::make_shared<Session>();
      s->doc = parse_json_text(read_text_file(f), f.string());
      const std::string id = s->doc.at("id").get<std::string>();
      next_id_ = std::max(next_id_, std::stoi(id.substr(1)) + 1);
      sessions_[id] = s;
    }
  }

  ServiceResponse handle(const std::string& method, const std::string& path, const std::string& body,
                         const std::string& content_type = "application/json") {
    try {
      return route(method, path, body, content_type);
    } catch (const HttpError& e) {
      return {e.status, {{"error", e.kind}, {"message", e.message}}};
    } catch (const Error& e) {
      return {400, {{"error", to_string(e.kind())}, {"subject", e.subject()}, {"message", e.what()}}};
    } catch (const Json::exception& e) {
      return {400, {{"error", "SchemaViolation"}, {"message", e.what()}}};
    }
  }

  // Blocks until the server stops. Port 0 picks a free port; see bound_port().
  void serve(const std::string& host, int port) {
    httplib::Server server;
    auto bind = [this](const httplib::Request& req, httplib::Response& res) {
      const auto ct = req.get_header_value("Content-Type");
      const ServiceResponse r = handle(req.method, req.path, req.body, ct);
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    server.Get(".*", bind);
    server.Post(".*", bind);
    const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorKind::InvalidProblem, host + ":" + std::to_string(port), "cannot bind");
    server_.store(&server);
    bound_port_.store(bound);
    server.listen_after_bind();
    server_.store(nullptr);
    bound_port_.store(0);
  }

  void stop() {
    if (auto* s = server_.load()) s->stop();
  }

  int bound_port() const { return bound_port_.load(); }

  const std::filesystem::path& data_dir() const { return options_.data_dir; }

 private:
  struct HttpError {
    int status;
    std::string kind;
    std::string message;
  };
  struct Session {
    std::mutex mutex;
    bool solving = false;
    Json doc;
  };

  std::filesystem::path session_dir() const { return options_.data_dir / "sessions"; }

  void persist(const Json& doc) {
    const auto path = session_dir() / (doc.at("id").get<std::string>() + ".json");
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      out << doc.dump(1);
    }
    std::filesystem::rename(tmp, path);
  }

  std::shared_ptr<Session> session(const std::string& id) {
    std::lock_guard lock(registry_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw HttpError{404, "UnknownSession", "no design session '" + id + "'"};
    return it->second;
  }

  static Json parse_body(const std::string& body) {
    Json j = Json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw HttpError{400, "SchemaViolation", "body must be a JSON object"};
    return j;
  }

  static Json summary(const Json& doc) {
    Json variants = Json::array();
    for (const auto& v : doc["variants"]) variants.push_back(v["id"]);
    Json tasks = Json::array();
    for (const auto& t : doc["tasks"]) tasks.push_back(t["id"]);
    Json solves = Json::array();
    for (const auto& s : doc["solves"]) {
      solves.push_back({{"solveId", s["id"]},
                        {"variant", s["variant"]},
                        {"task", s["task"]},
                        {"seed", s["seed"]},
                        {"status", s["solution"]["status"]},
                        {"energy", s["solution"]["energy"]}});
    }
    return {{"id", doc["id"]},           {"name", doc["name"]},         {"created", doc["created"]},
            {"modified", doc["modified"]}, {"variants", variants},       {"tasks", tasks},
            {"solves", solves}};
  }

  static const Json* find_by_id(const Json& list, const std::string& id) {
    for (const auto& e : list) {
      if (e["id"] == id) return &e;
    }
    return nullptr;
  }

  static HandModel base_model(const Json& doc) {
    HandModel m = parse_urdf(doc["urdf"].get<std::string>());
    return attach_patches(m, patches_from_json(doc["patches"]));
  }

  static std::vector<JointEdit> variant_edits(const Json& doc, const std::string& variant) {
    const Json* v = find_by_id(doc["variants"], variant);
    if (!v) throw HttpError{404, "UnknownVariant", "no variant '" + variant + "'"};
    return edits_from_json((*v)["edits"]);
  }

  ServiceResponse create_design(const std::string& body, const std::string& content_type) {
    Json req;
    if (content_type.find("xml") != std::string::npos) {
      req = {{"urdf", body}};
    } else {
      req = parse_body(body);
    }
    const std::string urdf = json_detail::string(json_detail::field(req, "urdf", "design"), "design.urdf");
    HandModel model = parse_urdf(urdf);
    Json patches = req.value("patches", Json::array());
    model = attach_patches(model, patches_from_json(patches));
    CouplingModel coupling =
        req.contains("coupling") ? coupling_from_json(req["coupling"]) : independent_coupling(model);
    coupling.check_partition(model);

    std::string id;
    {
      std::lock_guard lock(registry_mutex_);
      id = "s" + std::to_string(next_id_++);
    }
    const std::string now = utc_now();
    Json doc = {{"id", id},
                {"name", req.value("name", model.name())},
                {"created", now},
                {"modified", now},
                {"urdf", urdf},
                {"patches", patches},
                {"coupling", to_json(coupling)},
                {"variants", Json::array({{{"id", "base"}, {"edits", Json::array()}}})},
                {"tasks", Json::array()},
                {"solves", Json::array()},
                {"next_solve", 1}};
    auto s = std::make_shared<Session>();
    s->doc = doc;
    persist(doc);
    {
      std::lock_guard lock(registry_mutex_);
      sessions_[id] = s;
    }
    return {201, summary(doc)};
  }

  ServiceResponse add_variant(const std::shared_ptr<Session>& s, const std::string& body) {
    const Json req = parse_body(body);
    std::unique_lock lock(s->mutex);
    if (s->solving) throw HttpError{409, "Busy", "a solve is running for this session"};
    Json& doc = s->doc;
    std::vector<JointEdit> edits;
    if (req.contains("base")) edits = variant_edits(doc, json_detail::string(req["base"], "variant.base"));
    const auto extra = edits_from_json(req.value("edits", Json::array()), "variant.edits");
    edits.insert(edits.end(), extra.begin(), extra.end());
    apply_edits(base_model(doc), edits);  // validates joint names
    std::string id = req.contains("id") ? json_detail::string(req["id"], "variant.id")
                                        : "v" + std::to_string(doc["variants"].size());
    if (find_by_id(doc["variants"], id)) throw HttpError{400, "DuplicateName", "variant '" + id + "' exists"};
    Json ej = Json::array();
    for (const auto& e : edits) ej.push_back(to_json(e));
    doc["variants"].push_back({{"id", id}, {"edits", ej}});
    doc["modified"] = utc_now();
    persist(doc);
    return {201, {{"id", id}, {"edits", ej}}};
  }

  ServiceResponse add_task(const std::shared_ptr<Session>& s, const std::string& body) {
    const Json req = parse_body(body);
    Json task_json = req.contains("task") ? req["task"] : req;
    if (task_json.contains("object_mesh") && task_json["object_mesh"].is_string()) {
      throw HttpError{400, "SchemaViolation", "object_mesh must be inline {vertices, triangles} over HTTP"};
    }
    GraspTask task = task_from_json(task_json);
    std::unique_lock lock(s->mutex);
    if (s->solving) throw HttpError{409, "Busy", "a solve is running for this session"};
    Json& doc = s->doc;
    const GraspScene check(base_model(doc), task);  // validates pairs against the hand
    (void)check;
    std::string id = req.contains("id") ? json_detail::string(req["id"], "task.id")
                     : !task.name.empty() ? task.name
                                          : "t" + std::to_string(doc["tasks"].size() + 1);
    if (find_by_id(doc["tasks"], id)) throw HttpError{400, "DuplicateName", "task '" + id + "' exists"};
    if (task.name.empty()) task.name = id;
    doc["tasks"].push_back({{"id", id}, {"task", to_json(task, true)}});
    doc["modified"] = utc_now();
    persist(doc);
    return {201, {{"id", id}}};
  }

  ServiceResponse solve(const std::shared_ptr<Session>& s, const std::string& body) {
    const Json req = parse_body(body);
    const std::string variant = json_detail::string(json_detail::field(req, "variant", "solve"), "solve.variant");
    const std::string task_id = json_detail::string(json_detail::field(req, "task", "solve"), "solve.task");
    const std::uint64_t seed =
        req.contains("seed") ? static_cast<std::uint64_t>(json_detail::integer(req["seed"], "solve.seed"))
                             : options_.default_seed;
    Json snapshot;
    {
      std::unique_lock lock(s->mutex);
      if (s->solving) throw HttpError{409, "Busy", "a solve is already running for this session"};
      if (!find_by_id(s->doc["variants"], variant)) throw HttpError{404, "UnknownVariant", variant};
      if (!find_by_id(s->doc["tasks"], task_id)) throw HttpError{404, "UnknownTask", task_id};
      s->solving = true;
      snapshot = s->doc;
    }
    struct Release {
      Session* s;
      ~Release() {
        std::lock_guard lock(s->mutex);
        s->solving = false;
      }
    } release{s.get()};

    const HandModel model = apply_edits(base_model(snapshot), variant_edits(snapshot, variant));
    const CouplingModel coupling = coupling_from_json(snapshot["coupling"]);
    const GraspTask task = task_from_json((*find_by_id(snapshot["tasks"], task_id))["task"]);
    std::optional<CascadeSchedule> schedule;
    if (req.contains("schedule")) schedule = schedule_from_json(req["schedule"]);
    GraspSolveOptions opt;
    opt.restarts = req.contains("restarts") ? json_detail::integer(req["restarts"], "solve.restarts") : options_.restarts;
    opt.cascade.solve.seed = seed;

    GraspSolution sol;
    {
      slots_.acquire();
      struct Slot {
        std::counting_semaphore<1024>& sem;
        ~Slot() { sem.release(); }
      } slot{slots_};
      try {
        sol = solve_grasp(model, coupling, task, schedule, opt);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::NumericalFailure || e.kind() == ErrorKind::RankDeficientConstraints) {
          throw HttpError{422, to_string(e.kind()), e.what()};
        }
        throw;
      }
    }

    std::unique_lock lock(s->mutex);
    Json& doc = s->doc;
    const std::string solve_id = std::to_string(doc["next_solve"].get<int>());
    doc["next_solve"] = doc["next_solve"].get<int>() + 1;
    const Json solution = to_json(sol, coupling);
    const Json scene = build_scene(model, task, sol, {task_id, variant, solve_id});
    doc["solves"].push_back(
        {{"id", solve_id}, {"variant", variant}, {"task", task_id}, {"seed", seed}, {"solution", solution}, {"scene", scene}});
    doc["modified"] = utc_now();
    persist(doc);
    const int status = sol.status == SolveStatus::NumericalFailure ? 422 : 200;
    return {status, {{"solveId", solve_id}, {"solution", solution}, {"scene", scene}}};
  }

  // Latest solve per (variant, task); unsolved cells are listed as NotSolved.
  static ServiceResponse report(const Json& doc) {
    Json rows = Json::array();
    std::vector<std::pair<std::string, double>> means;
    for (const auto& v : doc["variants"]) {
      double sum = 0;
      int n = 0;
      bool complete = true;
      for (const auto& t : doc["tasks"]) {
        const Json* latest = nullptr;
        for (const auto& s : doc["solves"]) {
          if (s["variant"] == v["id"] && s["task"] == t["id"]) latest = &s;
        }
        Json row = {{"variant", v["id"]}, {"task", t["id"]}};
        if (!latest) {
          row["status"] = "NotSolved";
          complete = false;
        } else {
          const Json& sol = (*latest)["solution"];
          row["solveId"] = (*latest)["id"];
          row["seed"] = (*latest)["seed"];
          row["status"] = sol["status"];
          row["energy"] = sol["energy"];
          row["constraint_violation"] = sol["constraint_violation"];
          row["per_pair"] = sol["per_pair"];
          sum += sol["energy"].get<double>();
          ++n;
        }
        rows.push_back(row);
      }
      means.emplace_back(v["id"].get<std::string>(),
                         complete && n ? sum / n : std::numeric_limits<double>::infinity());
    }
    std::stable_sort(means.begin(), means.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    Json ranking = Json::array();
    for (const auto& [name, mean] : means) {
      ranking.push_back({{"variant", name}, {"mean_energy", std::isfinite(mean) ? Json(mean) : Json(nullptr)}});
    }
    return {200, {{"id", doc["id"]}, {"rows", rows}, {"ranking", ranking}}};
  }

  ServiceResponse route(const std::string& method, const std::string& path, const std::string& body,
                        const std::string& content_type) {
    static const std::regex designs(R"(^/api/designs/?$)");
    static const std::regex design(R"(^/api/designs/([A-Za-z0-9_-]+)/?$)");
    static const std::regex sub(R"(^/api/designs/([A-Za-z0-9_-]+)/(variants|tasks|solve|report)/?$)");
    static const std::regex scene(R"(^/api/designs/([A-Za-z0-9_-]+)/scenes/([A-Za-z0-9_-]+)/?$)");
    std::smatch m;
    if (std::regex_match(path, designs)) {
      if (method == "POST") return create_design(body, content_type);
      if (method == "GET") {
        Json list = Json::array();
        std::vector<std::shared_ptr<Session>> all;
        {
          std::lock_guard lock(registry_mutex_);
          for (const auto& [id, s] : sessions_) all.push_back(s);
        }
        for (const auto& s : all) {
          std::lock_guard lock(s->mutex);
          list.push_back(summary(s->doc));
        }
        return {200, list};
      }
    } else if (std::regex_match(path, m, design)) {
      if (method == "GET") {
        auto s = session(m[1]);
        std::lock_guard lock(s->mutex);
        return {200, summary(s->doc)};
      }
    } else if (std::regex_match(path, m, sub)) {
      auto s = session(m[1]);
      const std::string what = m[2];
      if (method == "POST" && what == "variants") return add_variant(s, body);
      if (method == "POST" && what == "tasks") return add_task(s, body);
      if (method == "POST" && what == "solve") return solve(s, body);
      if (method == "GET" && what == "report") {
        std::lock_guard lock(s->mutex);
        return report(s->doc);
      }
    } else if (std::regex_match(path, m, scene)) {
      if (method == "GET") {
        auto s = session(m[1]);
        std::lock_guard lock(s->mutex);
        const Json* solve = find_by_id(s->doc["solves"], m[2]);
        if (!solve) throw HttpError{404, "UnknownSolve", std::string(m[2])};
        return {200, (*solve)["scene"]};
      }
    }
    throw HttpError{404, "NotFound", method + " " + path};
  }

  ServiceOptions options_;
  std::counting_semaphore<1024> slots_;
  std::mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  int next_id_ = 1;
  std::atomic<httplib::Server*> server_{nullptr};
  std::atomic<int> bound_port_{0};
};

}  // namespace softgrasp
