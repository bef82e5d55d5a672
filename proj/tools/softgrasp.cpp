#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include "softgrasp/json_io.hpp"
#include "softgrasp/scene.hpp"
#include "softgrasp/service.hpp"
#include "softgrasp/study.hpp"
#include "softgrasp/urdf.hpp"

using namespace softgrasp;
namespace fs = std::filesystem;

namespace {

// exit codes
constexpr int kOk = 0;
constexpr int kNotFound = 1;
constexpr int kInvalid = 2;
constexpr int kMissingMesh = 3;
constexpr int kNotConverged = 4;

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::FileNotFound:
      return kNotFound;
    case ErrorKind::MeshNotFound:
      return kMissingMesh;
    default:
      return kInvalid;
  }
}

int report_error(const Error& e, Json extra = Json::object()) {
  Json d = {{"kind", to_string(e.kind())}, {"subject", e.subject()}, {"message", e.what()}};
  d.update(extra);
  std::cerr << d.dump() << "\n";
  return exit_code_for(e.kind());
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::FileNotFound, path.string(), "cannot open for writing");
  out << text;
}

std::optional<std::uint64_t> env_seed() {
  if (const char* s = std::getenv("STUDIO_SEED"); s && *s) return std::stoull(s);
  return std::nullopt;
}

int cmd_validate(const fs::path& urdf) {
  const HandModel model = load_urdf_file(urdf, false);
  const auto missing = missing_meshes(model, urdf.parent_path());
  if (!missing.empty()) {
    return report_error(Error(ErrorKind::MeshNotFound, urdf.string(), "unresolved mesh references"),
                        {{"unresolved", missing}});
  }
  HandModel full = resolve_meshes(model, urdf.parent_path());
  const auto sidecar = patch_sidecar_path(urdf);
  if (fs::exists(sidecar)) full = load_patch_sidecar(full, sidecar);
  Json ok = {{"valid", true},
             {"links", full.links().size()},
             {"joints", full.joints().size()},
             {"patches", full.patches().size()}};
  std::cout << ok.dump() << "\n";
  return kOk;
}

int cmd_fit(const fs::path& input, const fs::path& output, const std::vector<std::string>& extra) {
  const auto data = parse_trajectory_csv(read_text_file(input), input.string());
  CouplingFitOptions opt;
  opt.extra_independent = extra;
  const CouplingFit fit = fit_coupling(data, opt);
  write_file(output, to_json(fit.coupling).dump(2) + "\n");
  for (const auto& f : fit.fingers) {
    std::printf("%-10s samples=%-4zu", f.finger.c_str(), f.samples);
    for (std::size_t k = 0; k < f.coefficients.size(); ++k) std::printf(" m%zu=%.12g", k + 2, f.coefficients[k]);
    std::printf(" rms=%.3e rad\n", f.residual_rms);
  }
  return kOk;
}

struct SolveArgs {
  fs::path urdf, coupling, task, out;
  std::optional<fs::path> schedule;
  std::optional<std::uint64_t> seed;
  bool allow_partial = false;
  int restarts = 5;
  int workers = 1;
};

int cmd_solve(const SolveArgs& a) {
  const HandModel model = load_hand(a.urdf);
  const CouplingModel coupling = load_coupling_file(a.coupling);
  GraspTask task = load_task_file(a.task);
  if (task.name.empty()) task.name = a.task.stem().string();
  std::optional<CascadeSchedule> schedule;
  if (a.schedule) schedule = schedule_from_json(parse_json_text(read_text_file(*a.schedule), a.schedule->string()));

  GraspSolveOptions opt;
  opt.restarts = a.restarts;
  opt.workers = a.workers;
  opt.cascade.solve.seed = a.seed ? *a.seed : env_seed().value_or(0);
  const GraspSolution sol = solve_grasp(model, coupling, task, schedule, opt);

  write_file(a.out / "solution.json", to_json(sol, coupling).dump(2) + "\n");
  write_file(a.out / "scene.json", build_scene(model, task, sol, {task.name, "", ""}).dump() + "\n");
  std::printf("status=%s energy=%.6e violation=%.3e seed=%llu restart=%d\n", to_string(sol.status), sol.energy,
              sol.constraint_violation, static_cast<unsigned long long>(sol.seed), sol.restart);
  if (sol.status != SolveStatus::Converged && !a.allow_partial) return kNotConverged;
  return kOk;
}

int cmd_study(const fs::path& config_path, const fs::path& out, std::optional<std::uint64_t> seed,
              std::optional<int> workers) {
  StudyConfig config = load_study_config(config_path);
  if (seed) {
    config.seed = *seed;
  } else if (auto s = env_seed()) {
    config.seed = *s;
  }
  if (workers) config.workers = *workers;
  const DesignReport report = run_study(load_study_inputs(config));
  write_file(out / "report.json", to_json(report).dump(2) + "\n");
  const std::string table = report_table(report);
  write_file(out / "report.txt", table);
  std::cout << table;
  return kOk;
}

int cmd_serve(const std::string& host, int port, const fs::path& data, int workers) {
  ServiceOptions opt;
  opt.data_dir = data;
  opt.workers = workers;
  opt.default_seed = env_seed().value_or(0);
  StudioService service(opt);
  // the announcement waits for the bind so --port 0 reports the real port
  std::jthread announce([&](std::stop_token st) {
    while (!st.stop_requested() && service.bound_port() == 0) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    if (service.bound_port() != 0) {
      std::fprintf(stderr, "serving on http://%s:%d, data in %s\n", host.c_str(), service.bound_port(),
                   data.string().c_str());
    }
  });
  service.serve(host, port);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"soft hand grasp synthesis toolkit"};
  app.require_subcommand(1);

  fs::path validate_urdf;
  auto* validate = app.add_subcommand("validate", "check a URDF, its meshes and patch sidecar");
  validate->add_option("urdf", validate_urdf)->required();

  fs::path fit_in, fit_out;
  std::vector<std::string> fit_extra;
  auto* fit = app.add_subcommand("fit-coupling", "least-squares coupling from a trajectory CSV");
  fit->add_option("--input", fit_in)->required();
  fit->add_option("--output", fit_out)->required();
  fit->add_option("--independent", fit_extra, "extra separately actuated joint (repeatable)");

  SolveArgs sa;
  std::uint64_t solve_seed = 0;
  auto* solve = app.add_subcommand("solve", "synthesize a grasp for one task");
  solve->add_option("--urdf", sa.urdf)->required();
  solve->add_option("--coupling", sa.coupling)->required();
  solve->add_option("--task", sa.task)->required();
  auto* schedule_opt = solve->add_option("--schedule", "cascade schedule JSON");
  auto* seed_opt = solve->add_option("--seed", solve_seed);
  solve->add_flag("--allow-partial", sa.allow_partial, "exit 0 even when not Converged");
  solve->add_option("--restarts", sa.restarts)->check(CLI::PositiveNumber);
  solve->add_option("--workers", sa.workers)->check(CLI::PositiveNumber);
  solve->add_option("--out", sa.out)->required();

  fs::path study_config, study_out;
  std::uint64_t study_seed = 0;
  int study_workers = 1;
  auto* study = app.add_subcommand("study", "run a variant x task design study");
  study->add_option("--config", study_config)->required();
  study->add_option("--out", study_out)->required();
  auto* study_seed_opt = study->add_option("--seed", study_seed);
  auto* study_workers_opt = study->add_option("--workers", study_workers)->check(CLI::PositiveNumber);

  int port = 8080;
  int serve_workers = 0;
  std::string host = "127.0.0.1";
  fs::path data = std::getenv("STUDIO_DATA") ? fs::path(std::getenv("STUDIO_DATA")) : fs::path("studio-data");
  auto* serve = app.add_subcommand("serve", "HTTP design-session service");
  serve->add_option("--port", port);
  serve->add_option("--host", host);
  serve->add_option("--data", data);
  serve->add_option("--workers", serve_workers, "concurrent solves (0: processors)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return cmd_validate(validate_urdf);
    if (*fit) return cmd_fit(fit_in, fit_out, fit_extra);
    if (*solve) {
      if (*schedule_opt) sa.schedule = schedule_opt->as<std::string>();
      if (*seed_opt) sa.seed = solve_seed;
      return cmd_solve(sa);
    }
    if (*study) {
      return cmd_study(study_config, study_out, *study_seed_opt ? std::optional(study_seed) : std::nullopt,
                       *study_workers_opt ? std::optional(study_workers) : std::nullopt);
    }
    if (*serve) return cmd_serve(host, port, data, serve_workers);
  } catch (const Error& e) {
    return report_error(e);
  } catch (const std::exception& e) {
    std::cerr << Json{{"kind", "InternalError"}, {"message", e.what()}}.dump() << "\n";
    return kInvalid;
  }
  return kOk;
}
