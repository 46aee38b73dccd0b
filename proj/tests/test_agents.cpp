#include "oracles.hpp"
#include "vispath/agents.hpp"
#include "vispath/engine.hpp"
#include "vispath/scenes.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

namespace vispath {
namespace {

constexpr double kPi = std::numbers::pi;

MeshPtr share(TriMesh m) { return std::make_shared<const TriMesh>(std::move(m)); }

WorldState world_with_target(const Point3& t) {
  WorldState w;
  w.agents = default_agents();
  w.target_stack = {t};
  return w;
}

TEST(Attraction, ZeroAtTargetFloorProjection) {
  // Target straight below the eye: no planar offset and no defined heading.
  EXPECT_EQ(attraction_propose(world_with_target(Point3(0, 0, 0.5))), Contribution{});
}

TEST(Attraction, AlreadyAlignedPullsStraight) {
  const Contribution c = attraction_propose(world_with_target(Point3(0, 10, 1.6)));
  EXPECT_EQ(c.dx, 0.0);
  EXPECT_EQ(c.dy, 10.0);
  EXPECT_EQ(c.dtheta, 0.0);
  EXPECT_EQ(c.dalpha, 0.0);
  EXPECT_EQ(c.dtheta_head, 0.0);
}

TEST(Attraction, TargetDueEastTurnsRight) {
  const Contribution c = attraction_propose(world_with_target(Point3(5, 0, 1.6)));
  // Signed angle from the trunk forward (0, 1) to the direction (1, 0).
  const double fx = 0, fy = 1, dx = 1, dy = 0;
  const double ref = std::atan2(fx * dy - fy * dx, fx * dx + fy * dy);
  EXPECT_NEAR(ref, -kPi / 2, 1e-15);
  EXPECT_NEAR(c.dtheta, ref, 1e-12);
}

TEST(Attraction, HeadingErrorAgainstAtan2ForRandomPoses) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> p(-5, 5), a(-kPi, kPi);
  for (int i = 0; i < 200; ++i) {
    WorldState w = world_with_target(Point3(p(rng), p(rng), 1.2));
    w.pose = {p(rng), p(rng), a(rng)};
    const Contribution c = attraction_propose(w);
    const Vec3 f = w.pose.forward();
    const Vec3 d = w.target() - eye_center(w.pose, w.joints, w.body);
    const double ref = std::atan2(f.x() * d.y() - f.y() * d.x(), f.x() * d.x() + f.y() * d.y());
    EXPECT_NEAR(c.dtheta, ref, 1e-9);
    EXPECT_NEAR(c.dx, w.target().x() - w.pose.x, 1e-12);
  }
}

TEST(Repulsion, ZeroWithoutCollision) {
  WorldState w = world_with_target(Point3(0, 5, 1.6));
  w.obstacles = {PosedMesh(share(make_box_mesh({3, 3, 0}, {4, 4, 1})), Rigid3::Identity())};
  EXPECT_EQ(repulsion_propose(w), Contribution{});
}

TEST(Repulsion, RetreatsFromPillarOnTheRight) {
  WorldState w = world_with_target(Point3(0, 5, 1.6));
  w.obstacles = {PosedMesh(share(make_box_mesh({0.15, -0.05, -0.1}, {0.25, 0.05, 3.0})), Rigid3::Identity())};
  const Contribution c = repulsion_propose(w);
  EXPECT_LT(c.dx, 0.0);
  EXPECT_EQ(c.dalpha, 0.0);
  EXPECT_EQ(c.dtheta_head, 0.0);

  auto length_x = [&](double x) {
    return collision_length(place_members({x, w.pose.y, w.pose.theta}, w.joints, w.body), w.obstacles);
  };
  const double ref = oracle::stencil5(length_x, w.pose.x, w.gradient_steps.h_pos / 10);
  EXPECT_GT(ref, 0.0);
}

TEST(Repulsion, SymmetricSlotEscapesAlongY) {
  WorldState w = world_with_target(Point3(0, 5, 1.6));
  // Two pillars biting equally into both sides of the trunk, offset forward.
  w.obstacles = {PosedMesh(share(make_box_mesh({-0.25, 0.0, -0.1}, {-0.15, 0.2, 3.0})), Rigid3::Identity()),
                 PosedMesh(share(make_box_mesh({0.15, 0.0, -0.1}, {0.25, 0.2, 3.0})), Rigid3::Identity())};
  const Contribution c = repulsion_propose(w);
  EXPECT_NEAR(c.dx, 0.0, 1e-9);
  EXPECT_LT(c.dy, 0.0);
}

TEST(HeadOrientation, AlignedIsZero) {
  const Contribution c = head_orientation_propose(world_with_target(Point3(0, 3, 1.6)));
  EXPECT_NEAR(c.dalpha, 0.0, 1e-15);
  EXPECT_NEAR(c.dtheta_head, 0.0, 1e-15);
  EXPECT_EQ(c.dx, 0.0);
  EXPECT_EQ(c.dtheta, 0.0);
}

TEST(HeadOrientation, SaturatedYawStaysPut) {
  WorldState w = world_with_target(Point3(-3, 0.5, 1.0));
  w.joints.theta = w.limits.theta.max;
  const Contribution c = head_orientation_propose(w);
  EXPECT_EQ(c.dtheta_head, 0.0);
  EXPECT_LT(c.dalpha, 0.0);
}

TEST(HeadOrientation, SphericalCoordinatesOfTarget) {
  const double az = 0.3, el = -0.2, d = 2.0;
  const Vec3 dir(-std::sin(az) * std::cos(el), std::cos(az) * std::cos(el), std::sin(el));
  const Contribution c = head_orientation_propose(world_with_target(Point3(0, 0, 1.6) + d * dir));
  EXPECT_NEAR(c.dalpha, el, 1e-12);
  EXPECT_NEAR(c.dtheta_head, az, 1e-12);

  // Applying the raw increment aligns the vision axis with u.
  WorldState w = world_with_target(Point3(0, 0, 1.6) + d * dir);
  w.joints.alpha += c.dalpha;
  w.joints.theta += c.dtheta_head;
  EXPECT_NEAR((vision_axis(w.pose, w.joints) - dir).norm(), 0.0, 1e-12);
}

TEST(HeadOrientation, NeverProposesBeyondLimits) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> p(-4, 4), a(-kPi, kPi), z(0, 3);
  for (int i = 0; i < 500; ++i) {
    WorldState w = world_with_target(Point3(p(rng), p(rng), z(rng)));
    w.pose = {p(rng), p(rng), a(rng)};
    w.joints = clamp_joints({a(rng), 0, a(rng)}, w.limits);
    const Contribution c = head_orientation_propose(w);
    const HeadJoints next{w.joints.alpha + c.dalpha, 0, w.joints.theta + c.dtheta_head};
    EXPECT_TRUE(within_limits(next, w.limits)) << i;
  }
}

TEST(Visibility, UnobstructedAlignedWidens) {
  const WorldState w = world_with_target(Point3(0, 3, 1.6));
  const auto v = visibility_propose_detailed(w);
  EXPECT_TRUE(v.warning.empty());
  EXPECT_EQ(v.raw.cone_delta, w.cone.delta_eps);
  EXPECT_EQ(v.raw.dx, 0.0);
  EXPECT_EQ(v.raw.dy, 0.0);
  EXPECT_EQ(v.raw.dtheta, 0.0);
}

TEST(Visibility, MisalignedNarrowsAndHoldsAtMinimum) {
  WorldState w = world_with_target(Point3(3, 0, 1.6));
  ASSERT_EQ(w.cone.eps_c, w.cone.eps_min);
  const auto v = visibility_propose_detailed(w);
  EXPECT_EQ(v.raw.cone_delta, -w.cone.delta_eps);
  apply_contribution(w, normalize(v.raw, w.normalization));
  EXPECT_EQ(w.cone.eps_c, w.cone.eps_min);
}

TEST(Visibility, ConeClippingWallOnTheRightPushesLeft) {
  WorldState w = world_with_target(Point3(0, 3, 1.6));
  w.cone.eps_c = 0.2;
  w.obstacles = {PosedMesh(share(make_box_mesh({0.15, 1.5, 0}, {2, 1.7, 3})), Rigid3::Identity())};
  ASSERT_GT(cone_collision_length(w, w.pose, w.joints), 0.0);
  const auto v = visibility_propose_detailed(w);
  EXPECT_LT(v.raw.dx, 0.0);

  auto length_x = [&](double x) { return cone_collision_length(w, {x, w.pose.y, w.pose.theta}, w.joints); };
  const double ref = oracle::stencil5(length_x, w.pose.x, w.gradient_steps.h_pos / 10);
  EXPECT_GT(ref, 0.0);
}

TEST(Visibility, DegenerateEyeAtTargetWarns) {
  const auto v = visibility_propose_detailed(world_with_target(Point3(0, 0, 1.6)));
  EXPECT_FALSE(v.warning.empty());
  EXPECT_EQ(v.raw, Contribution{});
}

TEST(Visibility, ConeSequenceUnderFrozenSnapshot) {
  WorldState w = world_with_target(Point3(0, 3, 1.6));
  std::vector<double> seq{w.cone.eps_c};
  for (int i = 0; i < 40; ++i) {
    apply_contribution(w, normalize(visibility_propose(w), w.normalization));
    seq.push_back(w.cone.eps_c);
  }
  for (std::size_t i = 1; i < seq.size(); ++i) {
    const double expected = std::min(w.cone.eps_max, seq[i - 1] + w.cone.delta_eps);
    EXPECT_NEAR(seq[i], expected, 1e-15);
  }
  EXPECT_EQ(seq.back(), w.cone.eps_max);
}

TEST(Operator, EmptyQueueIsZero) {
  const WorldState w = world_with_target(Point3(0, 3, 1.6));
  EXPECT_EQ(operator_propose(w), Contribution{});
  EXPECT_FALSE(propose(w.agents.back(), w).consumed_input);
}

TEST(Operator, SaturatedInputMovesDeltaPos) {
  WorldState w = world_with_target(Point3(0, 30, 1.6));
  for (auto& a : w.agents) a.active = a.kind == AgentKind::operator_input;
  configure(w, command::OperatorMove{1, 0, 0});
  const WorldState next = step(w);
  EXPECT_NEAR(next.pose.x, 0.05, 1e-15);
  EXPECT_EQ(next.pose.y, 0.0);
  EXPECT_TRUE(next.operator_queue.empty());
  ASSERT_EQ(next.last_consumed_inputs.size(), 1u);
}

TEST(Operator, ScriptedInputsConsumedAtFirings) {
  WorldState w = world_with_target(Point3(0, 30, 1.6));
  Engine engine(w);
  Script script;
  script.commands = {{0, command::OperatorMove{0.01, 0, 0}}, {9, command::OperatorMove{0, 0.01, 0}}};
  run_script(engine, script, 20);
  std::vector<std::int64_t> consumed_at;
  for (const auto& r : engine.trace())
    if (!r.consumed_inputs.empty()) consumed_at.push_back(r.tick);
  EXPECT_EQ(consumed_at, (std::vector<std::int64_t>{0, 9}));
}

TEST(Operator, InputStampedLaterWaitsForItsTick) {
  WorldState w = world_with_target(Point3(0, 30, 1.6));
  w.operator_queue.push_back({0.01, 0, 0, 5, 1});
  EXPECT_EQ(operator_propose(w), Contribution{});
  w.tick = 9;
  EXPECT_EQ(operator_propose(w).dx, 0.01);
}

TEST(AgentProperty, PureOverSnapshot) {
  WorldState w = world_with_target(Point3(1, 3, 1.2));
  w.pose = {0.2, -0.1, 0.3};
  w.cone.eps_c = 0.2;
  w.obstacles = {PosedMesh(share(make_box_mesh({0.15, 1.5, 0}, {2, 1.7, 3})), Rigid3::Identity()),
                 PosedMesh(share(make_box_mesh({0.2, -0.1, -0.1}, {0.4, 0.1, 3})), Rigid3::Identity())};
  for (const auto& a : w.agents) {
    const Proposal p1 = propose(a, w);
    const Proposal p2 = propose(a, w);
    EXPECT_EQ(p1.raw, p2.raw) << a.name;
  }
}

TEST(AgentProperty, AttractionZeroOnlyAtAlignedTarget) {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> p(-2, 2), a(-kPi, kPi);
  for (int i = 0; i < 200; ++i) {
    WorldState w = world_with_target(Point3(p(rng), p(rng), 1.0));
    w.pose = {p(rng), p(rng), a(rng)};
    EXPECT_NE(attraction_propose(w), Contribution{});
  }
}

// Descent: one normalized repulsion move should not lengthen the collision
// line, apart from a small share of kink configurations. Contacts are
// sampled against a wall with a window and against a desk.
TEST(AgentProperty, RepulsionDescends) {
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), a(-kPi, kPi);
  const std::vector<std::vector<PosedMesh>> scenes{
      {PosedMesh(share(make_wall_with_window(WallSpec{}, WindowSpec{})), Rigid3::Identity())},
      {PosedMesh(share(make_box_mesh({-0.5, -0.3, 0}, {0.5, 0.3, 0.75})), Rigid3::Identity())}};
  const std::array<std::array<double, 2>, 2> spread{{{1.5, 0.35}, {0.75, 0.55}}};
  int colliding = 0, descended = 0;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    WorldState w = world_with_target(Point3(0, 5, 1.6));
    w.obstacles = scenes[s];
    int here = 0;
    while (here < 200) {
      w.pose = {spread[s][0] * unit(rng), spread[s][1] * unit(rng), a(rng)};
      const double before = collision_length(place_members(w.pose, w.joints, w.body), w.obstacles);
      if (before == 0.0) continue;
      ++here;
      WorldState moved = w;
      apply_contribution(moved, normalize(repulsion_propose(w), w.normalization));
      const double after = collision_length(place_members(moved.pose, moved.joints, moved.body), moved.obstacles);
      descended += after <= before;
    }
    colliding += here;
  }
  EXPECT_GE(descended, 0.95 * colliding) << descended << " of " << colliding;
}

}  // namespace
}  // namespace vispath
