#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "softgrasp/presets.hpp"
#include "softgrasp/service.hpp"

using namespace softgrasp;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("softgrasp_test_service_" + name);
  fs::remove_all(p);
  return p;
}

ServiceOptions options_for(const fs::path& dir) {
  ServiceOptions o;
  o.data_dir = dir;
  o.workers = 1;
  o.restarts = 1;
  return o;
}

Json design_body() {
  const HandModel h = presets::default_hand_with_patches();
  const Json patches = patches_to_json(h)["patches"];
  return {{"urdf", serialize_urdf(h)}, {"name", "test hand"}, {"coupling", to_json(presets::default_coupling())},
          {"patches", patches}};
}

Json task_body(const std::string& object) {
  const GraspTask t =
      presets::make_study_task(presets::default_hand_with_patches(), presets::default_coupling(), {object, object});
  return to_json(t, true);
}

// session with the base variant and two tasks
std::string seed_session(StudioService& svc) {
  const auto r = svc.handle("POST", "/api/designs", design_body().dump());
  EXPECT_EQ(r.status, 201) << r.body;
  const std::string id = r.body["id"];
  EXPECT_EQ(svc.handle("POST", "/api/designs/" + id + "/tasks", task_body("box").dump()).status, 201);
  EXPECT_EQ(svc.handle("POST", "/api/designs/" + id + "/tasks", task_body("lemon").dump()).status, 201);
  return id;
}

}  // namespace

TEST(Service, CreateListAndFetchDesign) {
  StudioService svc(options_for(fresh_dir("create")));
  const auto created = svc.handle("POST", "/api/designs", design_body().dump());
  ASSERT_EQ(created.status, 201) << created.body;
  EXPECT_EQ(created.body["id"], "s1");
  EXPECT_EQ(created.body["name"], "test hand");
  EXPECT_EQ(created.body["variants"], Json::array({"base"}));
  const auto list = svc.handle("GET", "/api/designs", "");
  ASSERT_EQ(list.status, 200);
  ASSERT_EQ(list.body.size(), 1u);
  EXPECT_EQ(svc.handle("GET", "/api/designs/s1", "").body, created.body);
  EXPECT_EQ(svc.handle("GET", "/api/designs/s9", "").status, 404);
  EXPECT_EQ(svc.handle("GET", "/api/nothing", "").status, 404);
}

TEST(Service, RawUrdfBodyGetsIndependentCoupling) {
  StudioService svc(options_for(fresh_dir("raw")));
  const auto r = svc.handle("POST", "/api/designs", serialize_urdf(presets::default_hand()), "application/xml");
  ASSERT_EQ(r.status, 201) << r.body;
}

TEST(Service, BadDesignsRejected) {
  StudioService svc(options_for(fresh_dir("bad")));
  auto r = svc.handle("POST", "/api/designs", "<robot", "application/xml");
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["error"], "MalformedXml");
  r = svc.handle("POST", "/api/designs", "[1,2]");
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["error"], "SchemaViolation");
  Json body = design_body();
  body["coupling"]["independent"] = Json::array({"index_j1"});
  EXPECT_EQ(svc.handle("POST", "/api/designs", body.dump()).status, 400);
  EXPECT_EQ(svc.handle("GET", "/api/designs", "").body.size(), 0u);
}

TEST(Service, VariantsAndTasksValidated) {
  StudioService svc(options_for(fresh_dir("variants")));
  const std::string id = seed_session(svc);
  const std::string base = "/api/designs/" + id;
  const Json edit = {{"joint", "thumb_mount"}, {"delta", {{"translation", {0, 0.01, 0}}}}};
  auto r = svc.handle("POST", base + "/variants", Json{{"id", "fwd"}, {"edits", {edit}}}.dump());
  EXPECT_EQ(r.status, 201) << r.body;
  r = svc.handle("POST", base + "/variants", Json{{"id", "fwd"}}.dump());
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["error"], "DuplicateName");
  // derived variants carry their base's edits first
  r = svc.handle("POST", base + "/variants", Json{{"id", "fwd2"}, {"base", "fwd"}, {"edits", {edit}}}.dump());
  ASSERT_EQ(r.status, 201);
  EXPECT_EQ(r.body["edits"].size(), 2u);
  r = svc.handle("POST", base + "/variants", Json{{"edits", {{{"joint", "nope"}, {"delta", Json::object()}}}}}.dump());
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["error"], "UnknownJoint");

  Json path_task = task_body("glass");
  path_task["object_mesh"] = "objects/glass.obj";
  EXPECT_EQ(svc.handle("POST", base + "/tasks", path_task.dump()).status, 400);
  Json bad_pair = task_body("glass");
  bad_pair["pairs"][0][0] = "no_patch";
  r = svc.handle("POST", base + "/tasks", bad_pair.dump());
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["error"], "UnknownPatch");
  EXPECT_EQ(svc.handle("POST", base + "/tasks", task_body("box").dump()).body["error"], "DuplicateName");
  EXPECT_EQ(svc.handle("POST", "/api/designs/s77/tasks", task_body("box").dump()).status, 404);
  const Json summary = svc.handle("GET", base, "").body;
  EXPECT_EQ(summary["variants"], Json::array({"base", "fwd", "fwd2"}));
  EXPECT_EQ(summary["tasks"], Json::array({"box", "lemon"}));
}

TEST(Service, SolveReportAndScenes) {
  StudioService svc(options_for(fresh_dir("solve")));
  const std::string id = seed_session(svc);
  const std::string base = "/api/designs/" + id;
  ASSERT_EQ(svc.handle("POST", base + "/variants", Json{{"id", "same"}}.dump()).status, 201);

  auto r = svc.handle("GET", base + "/report", "");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["rows"].size(), 4u);
  EXPECT_EQ(r.body["rows"][0]["status"], "NotSolved");
  EXPECT_TRUE(r.body["ranking"][0]["mean_energy"].is_null());

  const auto a = svc.handle("POST", base + "/solve", Json{{"variant", "base"}, {"task", "box"}, {"seed", 4}}.dump());
  ASSERT_EQ(a.status, 200) << a.body;
  EXPECT_EQ(a.body["solveId"], "1");
  EXPECT_EQ(a.body["solution"]["status"], "Converged");
  EXPECT_EQ(a.body["solution"]["seed"], 4);
  EXPECT_NO_THROW(validate_scene(a.body["scene"]));

  // an edit-free variant must reproduce the base result
  const auto b = svc.handle("POST", base + "/solve", Json{{"variant", "same"}, {"task", "box"}, {"seed", 4}}.dump());
  ASSERT_EQ(b.status, 200);
  EXPECT_NEAR(b.body["solution"]["energy"].get<double>(), a.body["solution"]["energy"].get<double>(), 1e-10);

  // the solve matches a direct library call with the same inputs
  GraspSolveOptions opt;
  opt.restarts = 1;
  opt.cascade.solve.seed = 4;
  const GraspSolution direct = solve_grasp(presets::default_hand_with_patches(), presets::default_coupling(),
                                           task_from_json(task_body("box")), std::nullopt, opt);
  EXPECT_EQ(a.body["solution"]["energy"].get<double>(), direct.energy);

  EXPECT_EQ(svc.handle("POST", base + "/solve", Json{{"variant", "zzz"}, {"task", "box"}}.dump()).status, 404);
  EXPECT_EQ(svc.handle("POST", base + "/solve", Json{{"variant", "base"}, {"task", "zzz"}}.dump()).status, 404);
  EXPECT_EQ(svc.handle("POST", base + "/solve", Json{{"task", "box"}}.dump()).status, 400);

  for (const char* t : {"lemon"}) {
    for (const char* v : {"base", "same"}) {
      ASSERT_EQ(svc.handle("POST", base + "/solve", Json{{"variant", v}, {"task", t}, {"seed", 4}}.dump()).status, 200);
    }
  }
  r = svc.handle("GET", base + "/report", "");
  for (const auto& row : r.body["rows"]) EXPECT_EQ(row["status"], "Converged") << row;
  EXPECT_FALSE(r.body["ranking"][0]["mean_energy"].is_null());
  EXPECT_NEAR(r.body["ranking"][0]["mean_energy"].get<double>(), r.body["ranking"][1]["mean_energy"].get<double>(),
              1e-10);

  const auto scene = svc.handle("GET", base + "/scenes/1", "");
  ASSERT_EQ(scene.status, 200);
  EXPECT_EQ(scene.body, a.body["scene"]);
  EXPECT_EQ(svc.handle("GET", base + "/scenes/99", "").status, 404);
  EXPECT_EQ(svc.handle("GET", base, "").body["solves"].size(), 4u);
}

TEST(Service, NonFiniteEnergyIsUnprocessable) {
  StudioService svc(options_for(fresh_dir("nonfinite")));
  const auto r0 = svc.handle("POST", "/api/designs", design_body().dump());
  const std::string base = "/api/designs/" + r0.body["id"].get<std::string>();
  Json far = task_body("box");
  // squared distances overflow to inf
  for (auto& patch : far["patches"]) {
    for (auto& v : patch["points"]) v[0] = v[0].get<double>() + 1e300;
  }
  ASSERT_EQ(svc.handle("POST", base + "/tasks", far.dump()).status, 201);
  const auto r = svc.handle("POST", base + "/solve", Json{{"variant", "base"}, {"task", "box"}}.dump());
  EXPECT_EQ(r.status, 422) << r.body;
}

TEST(Service, ConcurrentMutationIsBusy) {
  StudioService svc(options_for(fresh_dir("busy")));
  const std::string id = seed_session(svc);
  const std::string base = "/api/designs/" + id;
  std::atomic<bool> done{false};
  std::thread solver([&] {
    svc.handle("POST", base + "/solve", Json{{"variant", "base"}, {"task", "lemon"}, {"restarts", 40}}.dump());
    done = true;
  });
  bool saw_busy = false, saw_second_solve_busy = false;
  int n = 0;
  while (!done && !(saw_busy && saw_second_solve_busy)) {
    const auto v = svc.handle("POST", base + "/variants", Json{{"id", "v" + std::to_string(n++)}}.dump());
    if (v.status == 409) saw_busy = true;
    if (saw_busy && !saw_second_solve_busy) {
      const auto s = svc.handle("POST", base + "/solve", Json{{"variant", "base"}, {"task", "box"}}.dump());
      saw_second_solve_busy = s.status == 409;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  solver.join();
  EXPECT_TRUE(saw_busy);
  EXPECT_TRUE(saw_second_solve_busy);
  // other sessions are unaffected, and the lock is released afterwards
  EXPECT_EQ(svc.handle("POST", base + "/variants", Json{{"id", "after"}}.dump()).status, 201);
}

TEST(Service, ReloadFromDiskServesIdenticalDocuments) {
  const fs::path dir = fresh_dir("reload");
  std::vector<std::string> paths;
  std::vector<Json> before;
  {
    StudioService svc(options_for(dir));
    const std::string id = seed_session(svc);
    const std::string base = "/api/designs/" + id;
    ASSERT_EQ(svc.handle("POST", base + "/solve", Json{{"variant", "base"}, {"task", "box"}}.dump()).status, 200);
    paths = {"/api/designs", base, base + "/report", base + "/scenes/1"};
    for (const auto& p : paths) before.push_back(svc.handle("GET", p, "").body);
  }
  EXPECT_FALSE(fs::exists(dir / "sessions/s1.json.tmp"));
  StudioService again(options_for(dir));
  for (std::size_t i = 0; i < paths.size(); ++i) EXPECT_EQ(again.handle("GET", paths[i], "").body, before[i]) << paths[i];
  // ids keep counting after a reload
  EXPECT_EQ(again.handle("POST", "/api/designs", design_body().dump()).body["id"], "s2");
  const auto s = again.handle("POST", "/api/designs/s1/solve", Json{{"variant", "base"}, {"task", "lemon"}}.dump());
  EXPECT_EQ(s.body["solveId"], "2");
}

TEST(Service, HttpRoundTrip) {
  StudioService svc(options_for(fresh_dir("http")));
  std::thread server([&] { svc.serve("127.0.0.1", 0); });
  for (int i = 0; i < 2000 && svc.bound_port() == 0; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  ASSERT_NE(svc.bound_port(), 0);
  httplib::Client cli("127.0.0.1", svc.bound_port());
  auto created = cli.Post("/api/designs", design_body().dump(), "application/json");
  for (int i = 0; i < 100 && !created; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    created = cli.Post("/api/designs", design_body().dump(), "application/json");
  }
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  const std::string id = Json::parse(created->body)["id"];
  auto t = cli.Post("/api/designs/" + id + "/tasks", task_body("lemon").dump(), "application/json");
  ASSERT_TRUE(t);
  EXPECT_EQ(t->status, 201);
  auto s = cli.Post("/api/designs/" + id + "/solve", Json{{"variant", "base"}, {"task", "lemon"}}.dump(),
                    "application/json");
  ASSERT_TRUE(s);
  EXPECT_EQ(s->status, 200);
  auto scene = cli.Get("/api/designs/" + id + "/scenes/1");
  ASSERT_TRUE(scene);
  EXPECT_EQ(scene->get_header_value("Content-Type"), "application/json");
  EXPECT_NO_THROW(validate_scene(Json::parse(scene->body)));
  auto missing = cli.Get("/api/designs/nope");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  svc.stop();
  server.join();
}
