// Builds a scene in code, runs the agents until the target is reached and
// prints a few trace lines.
#include "vispath/engine.hpp"
#include "vispath/scenario_io.hpp"

#include <iostream>

int main() {
  using namespace vispath;

  WorldState w;
  w.agents = default_agents();
  w.pose = ManikinPose{-1.0, -1.0, deg_to_rad(30.0)};
  w.obstacles.emplace_back(std::make_shared<const TriMesh>(make_box_mesh({-0.6, -0.3, 0.0}, {0.6, 0.3, 0.75})),
                           0.0, 1.5, 0.0, deg_to_rad(20.0));
  w.target_stack = {Point3(0.3, 1.5, 0.75)};
  w.tolerances.pos = 0.9;

  Engine engine(w);
  run_script(engine, {}, 2000);

  for (const auto& r : engine.trace()) {
    if (r.tick % 5 != 0 && r.status != TaskStatus::reached) continue;
    std::cout << "tick " << r.tick << "  x " << r.pose.x << "  y " << r.pose.y << "  collision "
              << r.diagnostics.collision_length << "  " << to_string(r.status) << '\n';
  }
  return engine.reached() ? 0 : 2;
}
