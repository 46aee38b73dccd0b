// Procedural obstacle meshes for synthetic desk-scale scenes.
#pragma once

#include "vispath/geometry.hpp"

#include <array>
#include <vector>

namespace vispath {

struct WallSpec {
  double x_min = -2.0, x_max = 2.0;  // extent along x
  double z_min = 0.0, z_max = 2.4;   // height
  double y_center = 0.0;
  double thickness = 0.1;
};

struct WindowSpec {
  double x_min = -0.3, x_max = 0.3;
  double z_min = 1.3, z_max = 1.9;
};

/// Closed slab in the x-z plane with a rectangular through-hole (32
/// triangles). The window must lie strictly inside the wall outline.
inline TriMesh make_wall_with_window(const WallSpec& wall, const WindowSpec& win) {
  if (!(wall.x_min < win.x_min && win.x_max < wall.x_max && wall.z_min < win.z_min && win.z_max < wall.z_max)) {
    throw GeometryError("make_wall_with_window: window must lie strictly inside the wall");
  }
  const double y0 = wall.y_center - 0.5 * wall.thickness;
  const double y1 = wall.y_center + 0.5 * wall.thickness;
  const std::array<std::array<double, 2>, 4> outer{
      {{wall.x_min, wall.z_min}, {wall.x_max, wall.z_min}, {wall.x_max, wall.z_max}, {wall.x_min, wall.z_max}}};
  const std::array<std::array<double, 2>, 4> inner{
      {{win.x_min, win.z_min}, {win.x_max, win.z_min}, {win.x_max, win.z_max}, {win.x_min, win.z_max}}};

  // Vertex layout: [outer front 0-3, inner front 4-7, outer back 8-11, inner back 12-15].
  std::vector<Point3> v;
  for (double y : {y0, y1}) {
    for (const auto& p : outer) v.emplace_back(p[0], y, p[1]);
    for (const auto& p : inner) v.emplace_back(p[0], y, p[1]);
  }
  std::vector<std::array<int, 3>> t;
  auto quad = [&](int a, int b, int c, int d) {
    t.push_back({a, b, c});
    t.push_back({a, c, d});
  };
  for (int k = 0; k < 4; ++k) {
    const int n = (k + 1) % 4;
    quad(k, n, 4 + n, 4 + k);                // front ring
    quad(8 + k, 12 + k, 12 + n, 8 + n);      // back ring
    quad(k, 8 + k, 8 + n, n);                // outer rim
    quad(4 + k, 4 + n, 12 + n, 12 + k);      // window tunnel
  }
  return TriMesh(std::move(v), std::move(t));
}

}  // namespace vispath
