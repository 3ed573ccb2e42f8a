// Writes the bundled maps and goal files.
#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <string>

#include "mtp/map_io.hpp"

namespace {

using namespace mtp;

GridGeometry box(double sx, double sy, double sz, double res = 0.1) {
  GridGeometry g;
  g.dims = {static_cast<int>(std::lround(sx / res)), static_cast<int>(std::lround(sy / res)),
            static_cast<int>(std::lround(sz / res))};
  g.resolution = res;
  return g;
}

GoalSequence goalsAt(std::vector<Vec3> positions) {
  GoalSequence goals;
  goals.positions = std::move(positions);
  return goals;
}

/// 12 x 12 x 3 m with 15 floor-to-ceiling columns of radius 0.3 m; the route
/// threads between them with the last goal 1.8 m from the far wall.
void forest(OccupancyGrid& occ, GoalSequence& goals) {
  occ = OccupancyGrid(box(12.0, 12.0, 3.0));
  const double columns[15][2] = {{3.0, 2.5}, {3.0, 7.0}, {2.8, 9.5},  {5.0, 4.0},  {5.2, 8.0},
                                 {6.0, 1.5}, {6.4, 5.3}, {6.0, 10.5}, {7.8, 3.5},  {8.3, 8.2},
                                 {9.5, 1.8}, {9.6, 6.8}, {9.4, 10.2}, {4.2, 11.0}, {10.8, 4.0}};
  for (const auto& c : columns) occ.fillCylinder(Vec3(c[0], c[1], 0.0), 0.3, 3.0);
  goals = goalsAt({Vec3(1.2, 6.0, 1.5), Vec3(4.2, 6.3, 1.5), Vec3(7.2, 5.7, 1.5),
                   Vec3(10.2, 6.0, 1.5)});
}

/// 8 x 8 x 3 m with a 1 m cube between two goals.
void cube(OccupancyGrid& occ, GoalSequence& goals) {
  occ = OccupancyGrid(box(8.0, 8.0, 3.0));
  occ.fillBox(Vec3(3.5, 3.5, 1.0), Vec3(4.5, 4.5, 2.0));
  goals = goalsAt({Vec3(1.0, 4.0, 1.5), Vec3(7.0, 4.0, 1.5)});
}

/// Obstacle-free 8 x 4 x 3 m box with two goals.
void empty(OccupancyGrid& occ, GoalSequence& goals) {
  occ = OccupancyGrid(box(8.0, 4.0, 3.0));
  goals = goalsAt({Vec3(1.5, 2.0, 1.5), Vec3(6.5, 2.0, 1.5)});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Write the bundled fixture maps and goal files"};
  std::string out_dir = "data";
  app.add_option("out_dir", out_dir, "output directory");
  CLI11_PARSE(app, argc, argv);

  std::filesystem::create_directories(out_dir);
  const std::vector<std::pair<std::string, void (*)(OccupancyGrid&, GoalSequence&)>> fixtures{
    {"forest", forest}, {"cube", cube}, {"empty", empty}};
  try {
    for (const auto& [name, make] : fixtures) {
      OccupancyGrid occ(box(1.0, 1.0, 1.0));
      GoalSequence goals;
      make(occ, goals);
      const std::string base = (std::filesystem::path(out_dir) / name).string();
      saveVoxmap(base + ".voxmap", occ);
      saveGoals(base + ".goals", goals);
      std::printf("wrote %s.voxmap and %s.goals\n", base.c_str(), base.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
