// Triangle-mesh geometry: meshes, rigid placement, broad-phase spheres,
// triangle/triangle intersection and the collision-line metric.
#pragma once

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vispath {

using Vec3 = Eigen::Vector3d;
using Point3 = Eigen::Vector3d;
using Rigid3 = Eigen::Isometry3d;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Wrap an angle into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

using Triangle = std::array<Point3, 3>;

struct Segment3 {
  Point3 a = Point3::Zero();
  Point3 b = Point3::Zero();

  double length() const { return (b - a).norm(); }
};

struct Sphere {
  Point3 center = Point3::Zero();
  double radius = 0.0;
};

inline double triangle_area(const Triangle& t) {
  return 0.5 * (t[1] - t[0]).cross(t[2] - t[0]).norm();
}

/// Containing sphere: centroid center, max-distance radius, then one Ritter
/// style tightening pass. Not minimal, within 2x of optimum.
inline Sphere bounding_sphere(std::span<const Point3> points) {
  if (points.empty()) throw GeometryError("bounding_sphere: empty mesh");
  Point3 centroid = Point3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  double r_centroid = 0.0;
  for (const auto& p : points) r_centroid = std::max(r_centroid, (p - centroid).norm());

  // Tightening: start from the two mutually far points and grow to cover.
  const Point3& far_a = *std::max_element(points.begin(), points.end(), [&](const Point3& l, const Point3& r) {
    return (l - centroid).squaredNorm() < (r - centroid).squaredNorm();
  });
  const Point3& far_b = *std::max_element(points.begin(), points.end(), [&](const Point3& l, const Point3& r) {
    return (l - far_a).squaredNorm() < (r - far_a).squaredNorm();
  });
  Point3 c = 0.5 * (far_a + far_b);
  double r = 0.5 * (far_b - far_a).norm();
  for (const auto& p : points) {
    const double d = (p - c).norm();
    if (d > r) {
      const double grown = 0.5 * (r + d);
      c += (p - c) * ((grown - r) / d);
      r = grown;
    }
  }
  // Final exact radius about the chosen center guards against rounding drift.
  double r_exact = 0.0;
  for (const auto& p : points) r_exact = std::max(r_exact, (p - c).norm());
  if (r_exact <= r_centroid) return {c, r_exact};
  return {centroid, r_centroid};
}

/// Indexed triangle mesh with a cached bounding sphere. Degenerate triangles
/// (area <= 1e-12 m^2) are dropped at construction and counted.
class TriMesh {
 public:
  static constexpr double kMinTriangleArea = 1e-12;

  TriMesh() = default;

  TriMesh(std::vector<Point3> vertices, std::vector<std::array<int, 3>> triangles)
      : vertices_(std::move(vertices)) {
    if (vertices_.empty()) throw GeometryError("TriMesh: empty mesh");
    const int n = static_cast<int>(vertices_.size());
    triangles_.reserve(triangles.size());
    for (const auto& t : triangles) {
      for (int idx : t) {
        if (idx < 0 || idx >= n) {
          throw GeometryError("TriMesh: triangle index " + std::to_string(idx) + " out of range for " +
                              std::to_string(n) + " vertices");
        }
      }
      if (triangle_area({vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]}) <= kMinTriangleArea) {
        ++dropped_;
        continue;
      }
      triangles_.push_back(t);
    }
    sphere_ = vispath::bounding_sphere(vertices_);
  }

  const std::vector<Point3>& vertices() const { return vertices_; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  const Sphere& bounding_sphere() const { return sphere_; }
  std::size_t dropped_degenerate() const { return dropped_; }

  Triangle triangle(std::size_t i) const {
    const auto& t = triangles_[i];
    return {vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]};
  }

  double surface_area() const {
    double a = 0.0;
    for (std::size_t i = 0; i < triangles_.size(); ++i) a += triangle_area(triangle(i));
    return a;
  }

 private:
  std::vector<Point3> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  Sphere sphere_;
  std::size_t dropped_ = 0;
};

using MeshPtr = std::shared_ptr<const TriMesh>;

/// Translation plus rotation about the vertical axis.
inline Rigid3 planar_transform(double x, double y, double z, double theta) {
  Rigid3 t = Rigid3::Identity();
  t.translate(Vec3(x, y, z));
  t.rotate(Eigen::AngleAxisd(theta, Vec3::UnitZ()));
  return t;
}

/// A mesh placed in the world. The mesh itself is shared and never mutated;
/// vertices are transformed on demand.
struct PosedMesh {
  MeshPtr mesh;
  Rigid3 pose = Rigid3::Identity();

  PosedMesh() = default;
  PosedMesh(MeshPtr m, const Rigid3& p) : mesh(std::move(m)), pose(p) {}
  PosedMesh(MeshPtr m, double x, double y, double z, double theta)
      : mesh(std::move(m)), pose(planar_transform(x, y, z, wrap_angle(theta))) {}

  Sphere world_sphere() const {
    const auto& s = mesh->bounding_sphere();
    return {pose * s.center, s.radius};
  }

  std::vector<Point3> world_vertices() const {
    std::vector<Point3> out;
    out.reserve(mesh->vertices().size());
    for (const auto& v : mesh->vertices()) out.push_back(pose * v);
    return out;
  }

  /// World-frame triangles.
  std::vector<Triangle> world_triangles() const {
    const auto verts = world_vertices();
    std::vector<Triangle> out;
    out.reserve(mesh->triangles().size());
    for (const auto& t : mesh->triangles()) out.push_back({verts[t[0]], verts[t[1]], verts[t[2]]});
    return out;
  }
};

inline bool spheres_overlap(const Sphere& a, const Sphere& b) {
  return (a.center - b.center).norm() <= a.radius + b.radius;
}

namespace detail {

// Plane-side classification threshold (meters).
inline constexpr double kPlaneEps = 1e-12;

inline int side(double d) {
  if (d > kPlaneEps) return 1;
  if (d < -kPlaneEps) return -1;
  return 0;
}

// Points where triangle `t` meets the other triangle's plane, given signed
// vertex distances `d`: vertices on the plane plus edge crossings.
struct Crossings {
  std::array<Point3, 4> pts;
  int count = 0;
};

inline Crossings plane_crossings(const Triangle& t, const std::array<double, 3>& d) {
  Crossings c;
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3;
    const int si = side(d[i]);
    const int sj = side(d[j]);
    if (si == 0) c.pts[c.count++] = t[i];
    if (si * sj < 0) c.pts[c.count++] = t[i] + (t[j] - t[i]) * (d[i] / (d[i] - d[j]));
  }
  return c;
}

inline std::pair<double, double> project_interval(const Crossings& c, const Point3& origin, const Vec3& dir) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int k = 0; k < c.count; ++k) {
    const auto& p = c.pts[k];
    const double s = (p - origin).dot(dir);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return {lo, hi};
}

inline bool straddles(const std::array<double, 3>& d) {
  bool pos = false;
  bool neg = false;
  for (double v : d) {
    pos = pos || side(v) > 0;
    neg = neg || side(v) < 0;
  }
  return pos && neg;
}

}  // namespace detail

/// Intersection segment of two triangles crossing transversally. Coplanar,
/// disjoint and merely touching configurations yield no segment: a triangle
/// must have vertices strictly on both sides of the other's plane.
inline std::optional<Segment3> tri_tri_intersection(const Triangle& a, const Triangle& b) {
  const Vec3 na = (a[1] - a[0]).cross(a[2] - a[0]).normalized();
  const Vec3 nb = (b[1] - b[0]).cross(b[2] - b[0]).normalized();

  std::array<double, 3> da{};
  std::array<double, 3> db{};
  for (int i = 0; i < 3; ++i) {
    da[i] = nb.dot(a[i] - b[0]);
    db[i] = na.dot(b[i] - a[0]);
  }
  if (!detail::straddles(da) || !detail::straddles(db)) return std::nullopt;

  const Vec3 dir = na.cross(nb);
  const double dir_norm = dir.norm();
  if (dir_norm < 1e-15) return std::nullopt;
  const Vec3 unit = dir / dir_norm;

  // Crossing points of either triangle lie on the planes' common line.
  const auto pa = detail::plane_crossings(a, da);
  const auto pb = detail::plane_crossings(b, db);
  const Point3& origin = pa.pts[0];
  const auto [alo, ahi] = detail::project_interval(pa, origin, unit);
  const auto [blo, bhi] = detail::project_interval(pb, origin, unit);
  const double lo = std::max(alo, blo);
  const double hi = std::min(ahi, bhi);
  if (!(hi - lo > 0.0)) return std::nullopt;
  return Segment3{origin + unit * lo, origin + unit * hi};
}

struct CollisionResult {
  std::vector<Segment3> segments;
  double total_length = 0.0;
  std::size_t pairs_tested = 0;
  std::optional<Vec3> gradient;

  void absorb(CollisionResult&& other) {
    segments.insert(segments.end(), other.segments.begin(), other.segments.end());
    total_length += other.total_length;
    pairs_tested += other.pairs_tested;
  }
};

/// Collision line between two posed meshes: bounding-sphere cull, then every
/// triangle pair. The total length is l = sum of segment lengths.
inline CollisionResult collision_line(const PosedMesh& a, const PosedMesh& b) {
  CollisionResult result;
  if (!spheres_overlap(a.world_sphere(), b.world_sphere())) return result;
  const auto ta = a.world_triangles();
  const auto tb = b.world_triangles();
  for (const auto& x : ta) {
    for (const auto& y : tb) {
      ++result.pairs_tested;
      if (auto seg = tri_tri_intersection(x, y)) {
        result.total_length += seg->length();
        result.segments.push_back(*seg);
      }
    }
  }
  return result;
}

/// Summed collision line of every subject member against every obstacle.
inline CollisionResult collision_line(std::span<const PosedMesh> subject, std::span<const PosedMesh> obstacles) {
  CollisionResult result;
  for (const auto& s : subject) {
    for (const auto& o : obstacles) result.absorb(collision_line(s, o));
  }
  return result;
}

inline double collision_length(std::span<const PosedMesh> subject, std::span<const PosedMesh> obstacles) {
  double total = 0.0;
  for (const auto& s : subject) {
    for (const auto& o : obstacles) total += collision_line(s, o).total_length;
  }
  return total;
}

/// Closed segment vs triangle (Moller-Trumbore). Endpoint contact within
/// 1e-9 of the segment parameter range is ignored.
inline bool segment_hits_triangle(const Segment3& s, const Triangle& t) {
  constexpr double kEps = 1e-12;
  const Vec3 dir = s.b - s.a;
  const Vec3 e1 = t[1] - t[0];
  const Vec3 e2 = t[2] - t[0];
  const Vec3 p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < kEps) return false;
  const double inv = 1.0 / det;
  const Vec3 tv = s.a - t[0];
  const double u = tv.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 q = tv.cross(e1);
  const double v = dir.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return false;
  const double param = e2.dot(q) * inv;
  return param > 1e-9 && param < 1.0 - 1e-9;
}

inline bool segment_meets_sphere(const Segment3& s, const Sphere& sphere) {
  const Vec3 d = s.b - s.a;
  const double len2 = d.squaredNorm();
  double t = len2 > 0.0 ? (sphere.center - s.a).dot(d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (s.a + d * t - sphere.center).norm() <= sphere.radius;
}

/// True iff the segment crosses any obstacle triangle.
inline bool segment_occluded(const Segment3& s, std::span<const PosedMesh> obstacles) {
  for (const auto& o : obstacles) {
    if (!segment_meets_sphere(s, o.world_sphere())) continue;
    for (const auto& t : o.world_triangles()) {
      if (segment_hits_triangle(s, t)) return true;
    }
  }
  return false;
}

/// Open faceted lateral surface of a cone with apex `vertex`, axis towards
/// `target`, base ring of `facets` points in the plane through `target`
/// orthogonal to the axis.
inline TriMesh make_cone_mesh(const Point3& vertex, const Point3& target, double half_angle, int facets) {
  const Vec3 axis = target - vertex;
  const double len = axis.norm();
  if (len <= 1e-9) throw GeometryError("make_cone_mesh: degenerate direction (vertex == target)");
  if (!(half_angle > 0.0 && half_angle < std::numbers::pi / 2)) {
    throw GeometryError("make_cone_mesh: half angle must be in (0, pi/2)");
  }
  if (facets < 3) throw GeometryError("make_cone_mesh: need at least 3 facets");

  const Vec3 u = axis / len;
  const Vec3 ref = std::abs(u.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  const Vec3 e1 = u.cross(ref).normalized();
  const Vec3 e2 = u.cross(e1);
  const double radius = len * std::tan(half_angle);

  std::vector<Point3> verts;
  verts.reserve(static_cast<std::size_t>(facets) + 1);
  verts.push_back(vertex);
  for (int k = 0; k < facets; ++k) {
    const double phi = 2.0 * std::numbers::pi * k / facets;
    verts.push_back(target + radius * (std::cos(phi) * e1 + std::sin(phi) * e2));
  }
  std::vector<std::array<int, 3>> tris;
  tris.reserve(static_cast<std::size_t>(facets));
  for (int k = 0; k < facets; ++k) tris.push_back({0, k + 1, (k + 1) % facets + 1});
  return TriMesh(std::move(verts), std::move(tris));
}

/// Axis-aligned box mesh (12 triangles, outward winding).
inline TriMesh make_box_mesh(const Point3& lo, const Point3& hi) {
  std::vector<Point3> v;
  for (int i = 0; i < 8; ++i) {
    v.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
  }
  std::vector<std::array<int, 3>> t = {
      {0, 2, 3}, {0, 3, 1},  // -z
      {4, 5, 7}, {4, 7, 6},  // +z
      {0, 1, 5}, {0, 5, 4},  // -y
      {2, 6, 7}, {2, 7, 3},  // +y
      {0, 4, 6}, {0, 6, 2},  // -x
      {1, 3, 7}, {1, 7, 5},  // +x
  };
  return TriMesh(std::move(v), std::move(t));
}

}  // namespace vispath
