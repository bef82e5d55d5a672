#pragma once

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <filesystem>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "softgrasp/cascade.hpp"
#include "softgrasp/json_io.hpp"

namespace softgrasp {

// yaml-cpp keeps scalars untyped; numbers and booleans are recovered here so
// YAML and JSON configs end up as the same document.
inline Json yaml_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Sequence: {
      Json arr = Json::array();
      for (const auto& e : node) arr.push_back(yaml_to_json(e));
      return arr;
    }
    case YAML::NodeType::Map: {
      Json obj = Json::object();
      for (const auto& kv : node) obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return obj;
    }
    case YAML::NodeType::Scalar: {
      const std::string s = node.Scalar();
      if (node.Tag() == "!") return s;  // quoted
      long long i = 0;
      double d = 0;
      bool b = false;
      if (YAML::convert<long long>::decode(node, i)) return i;
      if (YAML::convert<double>::decode(node, d)) return d;
      if (YAML::convert<bool>::decode(node, b)) return b;
      return s;
    }
    default:
      return nullptr;
  }
}

inline Json load_config_document(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  const auto ext = detail::lowercase(path.extension().string());
  if (ext == ".json") return parse_json_text(text, path.string());
  try {
    return yaml_to_json(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::SchemaViolation, path.string(), e.what());
  }
}

struct StudyVariant {
  std::string name;
  std::vector<JointEdit> edits;
};

struct StudyConfig {
  std::filesystem::path base_urdf;
  std::filesystem::path coupling;
  std::optional<std::filesystem::path> schedule;
  std::vector<StudyVariant> variants;
  std::vector<std::filesystem::path> tasks;
  std::uint64_t seed = 0;
  int restarts = 5;
  int workers = 1;
};

inline StudyConfig study_config_from_json(const Json& j, const std::filesystem::path& base_dir) {
  using namespace json_detail;
  StudyConfig c;
  auto path = [&](const Json& v, const std::string& where) {
    std::filesystem::path p = string(v, where);
    return p.is_absolute() ? p : base_dir / p;
  };
  c.base_urdf = path(field(j, "base_urdf", "study"), "study.base_urdf");
  c.coupling = path(field(j, "coupling", "study"), "study.coupling");
  if (j.contains("schedule")) c.schedule = path(j["schedule"], "study.schedule");
  if (j.contains("seed")) c.seed = static_cast<std::uint64_t>(integer(j["seed"], "study.seed"));
  if (j.contains("restarts")) c.restarts = integer(j["restarts"], "study.restarts");
  if (j.contains("workers")) c.workers = integer(j["workers"], "study.workers");
  const Json& variants = field(j, "variants", "study");
  if (!variants.is_array() || variants.empty()) fail("study.variants", "expected a non-empty list");
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const std::string w = "study.variants[" + std::to_string(i) + "]";
    StudyVariant v;
    v.name = string(field(variants[i], "name", w), w + ".name");
    if (variants[i].contains("edits") && !variants[i]["edits"].is_null()) {
      v.edits = edits_from_json(variants[i]["edits"], w + ".edits");
    }
    for (const auto& prev : c.variants) {
      if (prev.name == v.name) fail(w, "duplicate variant name '" + v.name + "'");
    }
    c.variants.push_back(std::move(v));
  }
  const Json& tasks = field(j, "tasks", "study");
  if (!tasks.is_array() || tasks.empty()) fail("study.tasks", "expected a non-empty list of task paths");
  for (const auto& t : tasks) c.tasks.push_back(path(t, "study.tasks"));
  return c;
}

inline StudyConfig load_study_config(const std::filesystem::path& path) {
  return study_config_from_json(load_config_document(path), path.parent_path());
}

struct ReportRow {
  std::string variant;
  std::string task;
  bool failed = false;
  std::string error;  // when failed
  GraspSolution solution;
};

struct DesignReport {
  std::vector<ReportRow> rows;  // variant-major
  std::vector<std::pair<std::string, double>> ranking;  // variant, mean energy
  std::uint64_t seed = 0;
};

// Variants ordered by mean energy over their cells. Variants with failed cells
// rank after complete ones; ties keep config order.
inline std::vector<std::pair<std::string, double>> rank_variants(const std::vector<ReportRow>& rows,
                                                                  const std::vector<std::string>& order) {
  struct Entry {
    std::string name;
    double mean;
    bool complete;
    std::size_t index;
  };
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < order.size(); ++i) {
    double sum = 0;
    int n = 0;
    bool complete = true;
    for (const auto& r : rows) {
      if (r.variant != order[i]) continue;
      if (r.failed) {
        complete = false;
        continue;
      }
      sum += r.solution.energy;
      ++n;
    }
    entries.push_back({order[i], n ? sum / n : std::numeric_limits<double>::infinity(), complete, i});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.complete != b.complete) return a.complete;
    return a.mean < b.mean;
  });
  std::vector<std::pair<std::string, double>> out;
  for (const auto& e : entries) out.emplace_back(e.name, e.mean);
  return out;
}

struct StudyInputs {
  HandModel base;
  CouplingModel coupling;
  std::optional<CascadeSchedule> schedule;
  std::vector<StudyVariant> variants;
  std::vector<GraspTask> tasks;
  GraspSolveOptions options;
};

// Full variant x task grid; a failing cell is recorded and the run continues.
inline DesignReport run_study(const StudyInputs& in) {
  struct Cell {
    std::size_t v, t;
  };
  std::vector<Cell> cells;
  for (std::size_t v = 0; v < in.variants.size(); ++v) {
    for (std::size_t t = 0; t < in.tasks.size(); ++t) cells.push_back({v, t});
  }
  std::vector<std::optional<HandModel>> models(in.variants.size());
  std::vector<std::string> model_errors(in.variants.size());
  for (std::size_t v = 0; v < in.variants.size(); ++v) {
    try {
      models[v] = apply_edits(in.base, in.variants[v].edits);
    } catch (const std::exception& e) {
      model_errors[v] = e.what();
    }
  }
  GraspSolveOptions cell_options = in.options;
  cell_options.workers = 1;

  auto solve_cell = [&](const Cell& c) {
    ReportRow row;
    row.variant = in.variants[c.v].name;
    row.task = in.tasks[c.t].name;
    if (!models[c.v]) {
      row.failed = true;
      row.error = model_errors[c.v];
      return row;
    }
    try {
      row.solution = solve_grasp(*models[c.v], in.coupling, in.tasks[c.t], in.schedule, cell_options);
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
    return row;
  };

  DesignReport report;
  report.seed = in.options.cascade.solve.seed;
  report.rows.resize(cells.size());
  const int workers = std::max(1, in.options.workers);
  if (workers == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) report.rows[i] = solve_cell(cells[i]);
  } else {
    for (std::size_t start = 0; start < cells.size(); start += static_cast<std::size_t>(workers)) {
      std::vector<std::future<ReportRow>> batch;
      for (std::size_t i = start; i < std::min(cells.size(), start + workers); ++i) {
        batch.push_back(std::async(std::launch::async, solve_cell, cells[i]));
      }
      for (std::size_t i = 0; i < batch.size(); ++i) report.rows[start + i] = batch[i].get();
    }
  }
  std::vector<std::string> order;
  for (const auto& v : in.variants) order.push_back(v.name);
  report.ranking = rank_variants(report.rows, order);
  return report;
}

inline StudyInputs load_study_inputs(const StudyConfig& config) {
  StudyInputs in{load_hand(config.base_urdf), load_coupling_file(config.coupling), std::nullopt, config.variants, {}, {}};
  if (config.schedule) {
    in.schedule = schedule_from_json(parse_json_text(read_text_file(*config.schedule), config.schedule->string()));
  }
  for (const auto& t : config.tasks) {
    GraspTask task = load_task_file(t);
    if (task.name.empty()) task.name = t.stem().string();
    in.tasks.push_back(std::move(task));
  }
  in.options.restarts = config.restarts;
  in.options.workers = config.workers;
  in.options.cascade.solve.seed = config.seed;
  return in;
}

inline Json to_json(const DesignReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json j = {{"variant", row.variant}, {"task", row.task}};
    if (row.failed) {
      j["status"] = "Failed";
      j["error"] = row.error;
    } else {
      Json per_pair = Json::array();
      for (const auto& p : row.solution.breakdown.per_pair) {
        per_pair.push_back({{"hand", p.hand}, {"object", p.object}, {"energy", p.energy}});
      }
      j["status"] = to_string(row.solution.status);
      j["energy"] = row.solution.energy;
      j["constraint_violation"] = row.solution.constraint_violation;
      j["per_pair"] = per_pair;
      j["full_angles"] = to_json(row.solution.full_angles);
    }
    rows.push_back(j);
  }
  Json ranking = Json::array();
  for (const auto& [name, mean] : r.ranking) {
    ranking.push_back({{"variant", name}, {"mean_energy", std::isfinite(mean) ? Json(mean) : Json(nullptr)}});
  }
  return {{"seed", r.seed}, {"rows", rows}, {"ranking", ranking}};
}

inline std::string report_table(const DesignReport& r) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %-16s %-16s %14s %12s\n", "variant", "task", "status", "energy_m2",
                "violation");
  out << line;
  for (const auto& row : r.rows) {
    if (row.failed) {
      std::snprintf(line, sizeof line, "%-16s %-16s %-16s %14s %12s\n", row.variant.c_str(), row.task.c_str(),
                    "Failed", "-", "-");
    } else {
      std::snprintf(line, sizeof line, "%-16s %-16s %-16s %14.6e %12.3e\n", row.variant.c_str(), row.task.c_str(),
                    to_string(row.solution.status), row.solution.energy, row.solution.constraint_violation);
    }
    out << line;
  }
  out << "\nranking (mean energy):\n";
  int rank = 1;
  for (const auto& [name, mean] : r.ranking) {
    std::snprintf(line, sizeof line, "%3d. %-16s %14.6e\n", rank++, name.c_str(), mean);
    out << line;
  }
  return out.str();
}

}  // namespace softgrasp
