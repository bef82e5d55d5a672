// Regenerates the sample data/ tree: default hand URDF with palm mesh and patch
// sidecar, coupling, study objects and tasks, and a 4-variant study config.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "softgrasp/json_io.hpp"
#include "softgrasp/presets.hpp"
#include "softgrasp/urdf.hpp"

using namespace softgrasp;
namespace fs = std::filesystem;

namespace {

void write(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  std::cout << "wrote " << path.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"generate sample assets"};
  fs::path out = "data";
  app.add_option("--out", out);
  CLI11_PARSE(app, argc, argv);

  presets::HandOptions opt;
  opt.palm_mesh = "meshes/palm.stl";
  HandModel hand = presets::default_hand(opt);
  for (const auto& p : presets::default_patches()) hand = attach_patch(hand, p);
  write(out / "hand/meshes/palm.stl", to_binary_stl(box_mesh(opt.palm_size)));
  write(out / "hand/soft_hand.urdf", serialize_urdf(hand));
  write(patch_sidecar_path(out / "hand/soft_hand.urdf"), patches_to_json(hand).dump(2) + "\n");

  const CouplingModel coupling = presets::default_coupling();
  write(out / "coupling/coupling.json", to_json(coupling).dump(2) + "\n");
  write(out / "coupling/trajectories.csv", presets::synthetic_trajectory_csv(0.8, 0.6, 0.01, 7));

  const HandModel solid = presets::default_hand_with_patches();
  for (const auto& name : presets::study_objects()) {
    GraspTask task = presets::make_study_task(solid, coupling, {name, name});
    write(out / "objects" / (name + ".obj"), to_obj(task.object_mesh));
    task.object_mesh_path = "../objects/" + name + ".obj";
    write(out / "tasks" / (name + ".json"), to_json(task).dump(2) + "\n");
  }

  // zero-energy by construction: object patches cut from FK of a known pose
  Eigen::VectorXd theta(coupling.cols());
  theta << 0.6, 0.5, 0.7, 0.65, 0.5, -0.2, 0.8;
  const GraspTask constructive = presets::make_constructive_task(
      solid, coupling, theta, RigidTransform::from_xyz_rpy(Vec3(0.01, 0.0, 0.005), Vec3(0.05, 0.0, 0.1)),
      {"index_tip", "middle_tip", "ring_tip", "little_tip", "thumb_tip"});
  write(out / "tasks/constructive.json", to_json(constructive, true).dump(2) + "\n");

  write(out / "study.yaml", R"(# base design plus three thumb placements, graded on the four study objects
base_urdf: hand/soft_hand.urdf
coupling: coupling/coupling.json
seed: 0
restarts: 5
variants:
  - name: baseline
  - name: thumb_forward
    edits:
      - joint: thumb_mount
        delta: {translation: [0.0, 0.02, 0.0], rpy: [0.0, 0.0, 0.0]}
  - name: thumb_opposed
    edits:
      - joint: thumb_mount
        delta: {translation: [0.0, 0.0, 0.0], rpy: [0.0, 0.0, -0.5]}
  - name: thumb_angled
    edits:
      - joint: thumb_mount
        delta: {translation: [-0.01, 0.0, 0.0], rpy: [0.0, 0.4, 0.3]}
tasks:
  - tasks/bowl.json
  - tasks/box.json
  - tasks/lemon.json
  - tasks/glass.json
)");
  return 0;
}
