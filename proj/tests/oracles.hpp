// Test-only reference computations. These deliberately avoid the library's
// code paths: no broad phase, no plane-interval projection, hand-written
// rotation matrices.
#pragma once

#include "vispath/geometry.hpp"
#include "vispath/manikin.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <vector>

namespace vispath::oracle {

// Edge/triangle crossing points: every triangle edge clipped against the
// other triangle's plane, kept when the crossing lies inside that triangle.
// The intersection segment spans the two farthest such points.
inline std::optional<Segment3> tri_tri_by_edges(const Triangle& a, const Triangle& b) {
  auto signed_dist = [](const Triangle& t, const Point3& p) {
    const Vec3 n = (t[1] - t[0]).cross(t[2] - t[0]).normalized();
    return n.dot(p - t[0]);
  };
  auto straddles = [&](const Triangle& t, const Triangle& other) {
    bool pos = false, neg = false;
    for (const auto& p : t) {
      const double d = signed_dist(other, p);
      pos = pos || d > 1e-12;
      neg = neg || d < -1e-12;
    }
    return pos && neg;
  };
  if (!straddles(a, b) || !straddles(b, a)) return std::nullopt;

  auto inside = [](const Triangle& t, const Point3& p) {
    // Barycentric test with a small slack for points on edges.
    const Vec3 v0 = t[1] - t[0], v1 = t[2] - t[0], v2 = p - t[0];
    const double d00 = v0.dot(v0), d01 = v0.dot(v1), d11 = v1.dot(v1), d20 = v2.dot(v0), d21 = v2.dot(v1);
    const double den = d00 * d11 - d01 * d01;
    const double v = (d11 * d20 - d01 * d21) / den;
    const double w = (d00 * d21 - d01 * d20) / den;
    const double eps = 1e-12;
    return v >= -eps && w >= -eps && v + w <= 1.0 + eps;
  };
  std::vector<Point3> pts;
  auto clip_edges = [&](const Triangle& t, const Triangle& other) {
    for (int i = 0; i < 3; ++i) {
      const Point3& p = t[i];
      const Point3& q = t[(i + 1) % 3];
      const double dp = signed_dist(other, p);
      const double dq = signed_dist(other, q);
      if (std::abs(dp) <= 1e-12 && inside(other, p)) pts.push_back(p);
      if ((dp > 1e-12 && dq < -1e-12) || (dp < -1e-12 && dq > 1e-12)) {
        const Point3 x = p + (q - p) * (dp / (dp - dq));
        if (inside(other, x)) pts.push_back(x);
      }
    }
  };
  clip_edges(a, b);
  clip_edges(b, a);
  if (pts.size() < 2) return std::nullopt;
  Segment3 best;
  double best_len = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double l = (pts[i] - pts[j]).norm();
      if (l > best_len) {
        best_len = l;
        best = {pts[i], pts[j]};
      }
    }
  }
  if (best_len <= 0.0) return std::nullopt;
  return best;
}

/// All triangle pairs, no broad phase.
inline double all_pairs_length(const PosedMesh& a, const PosedMesh& b) {
  double total = 0.0;
  for (const auto& x : a.world_triangles()) {
    for (const auto& y : b.world_triangles()) {
      if (auto s = tri_tri_by_edges(x, y)) total += s->length();
    }
  }
  return total;
}

inline double all_pairs_length(const std::vector<PosedMesh>& subject, const std::vector<PosedMesh>& obstacles) {
  double total = 0.0;
  for (const auto& s : subject)
    for (const auto& o : obstacles) total += all_pairs_length(s, o);
  return total;
}

/// Five-point derivative of a scalar function at step h.
inline double stencil5(const std::function<double(double)>& f, double x, double h) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

inline Eigen::Matrix3d rot_z(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}
inline Eigen::Matrix3d rot_x(double a) {
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}
inline Eigen::Matrix3d rot_y(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}

/// Straight-line eye center: floor point, up the neck, through the head
/// rotation to the eye offset.
inline Point3 eye_center_chain(double x, double y, double heading, double alpha, double beta, double yaw,
                               double neck, double fwd, double up) {
  const Eigen::Matrix3d trunk = rot_z(heading);
  const Eigen::Matrix3d head = rot_z(yaw) * rot_x(alpha) * rot_y(beta);
  return Point3(x, y, 0) + trunk * Point3(0, 0, neck) + trunk * head * Point3(0, fwd, up);
}

inline Triangle random_triangle(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  while (true) {
    Triangle t{Point3(u(rng), u(rng), u(rng)), Point3(u(rng), u(rng), u(rng)), Point3(u(rng), u(rng), u(rng))};
    if (triangle_area(t) > 1e-3) return t;
  }
}

}  // namespace vispath::oracle
