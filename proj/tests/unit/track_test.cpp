#include <gtest/gtest.h>

#include <map>
#include <set>

#include "helpers.hpp"

using namespace preempt;
using namespace preempt::track;
using testing_util::canonical_target;
using testing_util::frame_at;
using testing_util::observe;
using testing_util::row_blocks;

namespace {

PoseFrame pointer(std::int64_t t, Point p) { return make_frame(t, {p}, nullptr); }

TEST(DetectTouch, NoneWhenAllFingertipsOutside) {
  const auto blocks = row_blocks();
  EXPECT_FALSE(detect_touch(pointer(0, {600, 600}), blocks));
}

TEST(DetectTouch, FingertipInsideSingleBlock) {
  std::vector<Block> one{{BlockId{3}, Color::Blue, BBox{100, 100, 40, 40}, BlockState::Resting, {}}};
  EXPECT_EQ(detect_touch(pointer(0, {100, 100}), one), BlockId{3});
}

TEST(DetectTouch, OverlapGoesToNearerCenter) {
  // Fingertip at (100,100); centers 5 px and 20 px away.
  std::vector<Block> two{{BlockId{0}, Color::Red, BBox{120, 100, 60, 60}, BlockState::Resting, {}},
                         {BlockId{1}, Color::Pink, BBox{105, 100, 60, 60}, BlockState::Resting, {}}};
  EXPECT_EQ(detect_touch(pointer(0, {100, 100}), two), BlockId{1});
}

TEST(DetectTouch, EqualDistanceGoesToLowerColor) {
  std::vector<Block> two{{BlockId{0}, Color::Pink, BBox{110, 100, 60, 60}, BlockState::Resting, {}},
                         {BlockId{1}, Color::Orange, BBox{90, 100, 60, 60}, BlockState::Resting, {}}};
  EXPECT_EQ(detect_touch(pointer(0, {100, 100}), two), BlockId{1});
}

TEST(DetectTouch, OnlyFingertipsCount) {
  const auto blocks = row_blocks();
  std::vector<Point> kp(21, Point{600, 600});
  kp[0] = {100, 100};  // wrist over Red
  EXPECT_FALSE(detect_touch(make_frame(0, kp, nullptr), blocks));
  kp[hand::kTipLandmarks[4]] = {100, 100};  // pinky tip
  EXPECT_EQ(detect_touch(make_frame(0, kp, nullptr), blocks), BlockId{0});
}

TEST(Fingertips, IndexSetsPerK) {
  EXPECT_EQ(hand::fingertip_indices(1), (std::vector<std::size_t>{0}));
  EXPECT_EQ(hand::fingertip_indices(21), (std::vector<std::size_t>{4, 8, 12, 16, 20}));
  EXPECT_EQ(hand::fingertip_indices(42), (std::vector<std::size_t>{4, 8, 12, 16, 20, 25, 29, 33, 37, 41}));
}

// Scripted scene driver: moves the pointer and the blocks frame by frame.
struct Script {
  SceneState state = make_scene(row_blocks(), canonical_target());
  std::vector<Block> world = row_blocks();
  std::int64_t t = 0;

  std::optional<PlacementEvent> step(Point hand, std::optional<int> carry = {}) {
    if (carry) world[static_cast<std::size_t>(*carry)].bbox = {hand.x, hand.y, 40, 40};
    auto [next, ev] = update_scene(state, frame_at(t++, hand), observe(world));
    state = std::move(next);
    return ev;
  }
  // Touch, carry onto the plate, release by pulling the hand straight down.
  std::optional<PlacementEvent> place(int id) {
    const Point home = world[static_cast<std::size_t>(id)].bbox.center();
    step(home);
    step(home, id);
    step({360, 360}, id);
    return step({360, 450});
  }
};

TEST(UpdateScene, NoEventWhileStillTouched) {
  Script s;
  s.step({100, 100});
  EXPECT_EQ(s.state.block(BlockId{0}).state, BlockState::Candidate);
  EXPECT_EQ(s.state.last_interacted, BlockId{0});
  EXPECT_FALSE(s.step({360, 360}, 0));
  EXPECT_EQ(s.state.block(BlockId{0}).state, BlockState::Candidate);
}

TEST(UpdateScene, CorrectReleaseAdvancesIndex) {
  Script s;
  const auto ev = s.place(0);
  ASSERT_TRUE(ev);
  EXPECT_TRUE(ev->correct);
  EXPECT_EQ(ev->color, Color::Red);
  EXPECT_EQ(s.state.next_required_index, 1);
  EXPECT_EQ(s.state.block(BlockId{0}).state, BlockState::Placed);
  EXPECT_FALSE(s.state.last_interacted);
  ASSERT_EQ(s.state.placed_sequence.size(), 1u);
}

TEST(UpdateScene, WrongReleaseKeepsIndex) {
  Script s;
  const auto ev = s.place(3);
  ASSERT_TRUE(ev);
  EXPECT_FALSE(ev->correct);
  EXPECT_EQ(ev->color, Color::Blue);
  EXPECT_EQ(s.state.next_required_index, 0);
  EXPECT_EQ(s.state.placed_sequence.size(), 1u);
}

TEST(UpdateScene, RemovalReturnsBlockToResting) {
  Script s;
  s.place(3);
  ASSERT_EQ(s.state.block(BlockId{3}).state, BlockState::Placed);
  s.world[3].bbox = {340, 100, 40, 40};
  s.step({600, 600});
  EXPECT_EQ(s.state.block(BlockId{3}).state, BlockState::Resting);
  ASSERT_EQ(s.state.removals.size(), 1u);
  EXPECT_EQ(s.state.removals[0].block, BlockId{3});
  EXPECT_EQ(s.state.placed_sequence.size(), 1u);  // append-only
}

TEST(UpdateScene, CandidateTimesOutAndClearsLastInteracted) {
  Script s;
  s.step({100, 100});
  for (int i = 0; i < 29; ++i) s.step({600, 600});
  EXPECT_EQ(s.state.block(BlockId{0}).state, BlockState::Candidate);
  EXPECT_EQ(s.state.last_interacted, BlockId{0});
  s.step({600, 600});
  EXPECT_EQ(s.state.block(BlockId{0}).state, BlockState::Resting);
  EXPECT_FALSE(s.state.last_interacted);
}

TEST(UpdateScene, LastInteractedFollowsNewestTouch) {
  Script s;
  s.step({100, 100});
  s.step({180, 100});
  EXPECT_EQ(s.state.last_interacted, BlockId{1});
  s.step({600, 600});
  EXPECT_EQ(s.state.last_interacted, BlockId{1});
}

TEST(UpdateScene, RejectsNonMonotonicFrames) {
  Script s;
  s.step({600, 600});
  EXPECT_THROW(update_scene(s.state, frame_at(0, {600, 600}), observe(s.world)), DataError);
}

TEST(UpdateScene, RejectsMissingBoxes) {
  Script s;
  auto obs = observe(s.world);
  obs.pop_back();
  EXPECT_THROW(update_scene(s.state, frame_at(0, {600, 600}), obs), DataError);
}

TEST(UpdateScene, AbsentBoxKeepsLastPosition) {
  Script s;
  auto obs = observe(s.world);
  obs[2].present = false;
  obs[2].bbox = {0, 0, 0, 0};
  auto [next, ev] = update_scene(s.state, frame_at(0, {600, 600}), obs);
  EXPECT_EQ(next.block(BlockId{2}).bbox, s.world[2].bbox);
}

TEST(Scene, TargetMustBePermutation) {
  auto t = canonical_target();
  t[1] = t[0];
  EXPECT_THROW(make_scene(row_blocks(), t), DataError);
  EXPECT_THROW(make_scene(row_blocks(), {Color::Red}), DataError);
}

TEST(Scene, RegionMustFitInCrop) {
  AssemblyRegion r;
  r.center = {700, 360};
  EXPECT_THROW(r.validate(), ConfigError);
  EXPECT_NO_THROW(AssemblyRegion{}.validate());
}

TEST(Frame, ValidationRejectsBadFrames) {
  PoseFrame f = make_frame(0, {Point{1, 1}}, nullptr);
  EXPECT_NO_THROW(validate_frame(f));
  f.velocities.clear();
  EXPECT_THROW(validate_frame(f), DataError);
  EXPECT_THROW(validate_frame(make_frame(0, std::vector<Point>(5), nullptr)), DataError);
  EXPECT_THROW(validate_frame(make_frame(0, {Point{std::nan(""), 1}}, nullptr)), DataError);
}

// Random scripted trajectories: a pointer wanders, grabs the block under
// it with some probability, carries it, and drops it anywhere (often on
// the plate).
struct RandomWalk {
  std::mt19937_64 rng;
  explicit RandomWalk(std::uint64_t seed) : rng(seed) {}
  double u(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

  std::vector<std::pair<PoseFrame, std::vector<BlockObservation>>> run(int frames) {
    auto world = row_blocks();
    std::vector<std::pair<PoseFrame, std::vector<BlockObservation>>> out;
    Point p{360, 500};
    std::optional<std::size_t> held;
    for (int t = 0; t < frames; ++t) {
      const double r = u(0, 1);
      if (r < 0.1) {
        p = world[static_cast<std::size_t>(u(0, 6.999))].bbox.center();
      } else if (r < 0.2) {
        p = {u(330, 390), u(340, 380)};
      } else {
        p = p + Point{u(-15, 15), u(-15, 15)};
      }
      p.x = std::clamp(p.x, 1.0, 719.0);
      p.y = std::clamp(p.y, 1.0, 719.0);
      if (!held) {
        for (std::size_t i = 0; i < world.size(); ++i)
          if (world[i].bbox.contains(p) && u(0, 1) < 0.5) held = i;
      } else if (u(0, 1) < 0.15) {
        held.reset();
        p = p + Point{0, 60};
      }
      if (held) world[*held].bbox = {p.x, p.y, 40, 40};
      out.push_back({frame_at(t, p), observe(world)});
    }
    return out;
  }
};

TEST(SceneProperties, TransitionsFollowTheStateMachine) {
  const std::set<std::pair<BlockState, BlockState>> allowed{{BlockState::Resting, BlockState::Candidate},
                                                            {BlockState::Candidate, BlockState::Placed},
                                                            {BlockState::Candidate, BlockState::Resting},
                                                            {BlockState::Placed, BlockState::Resting}};
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    SceneState s = make_scene(row_blocks(), canonical_target());
    for (const auto& [frame, obs] : RandomWalk(seed).run(400)) {
      auto [next, ev] = update_scene(s, frame, obs);
      int placed_now = 0;
      for (std::size_t i = 0; i < s.blocks.size(); ++i) {
        const auto a = s.blocks[i].state, b = next.blocks[i].state;
        // Removal and a fresh touch can both land in one frame.
        const bool removed_now = std::any_of(next.removals.begin(), next.removals.end(), [&](const auto& r) {
          return r.block == next.blocks[i].id && r.frame == frame.t;
        });
        if (a == BlockState::Placed && b == BlockState::Candidate) {
          EXPECT_TRUE(removed_now) << "seed " << seed << " t " << frame.t;
        } else if (a != b) {
          EXPECT_TRUE(allowed.contains({a, b})) << "seed " << seed << " t " << frame.t;
        }
        if (a != BlockState::Placed && b == BlockState::Placed) ++placed_now;
        if (b == BlockState::Placed) {
          EXPECT_TRUE(next.region.contains(next.blocks[i].bbox.center()));
        }
      }
      EXPECT_LE(placed_now, 1);
      EXPECT_EQ(placed_now == 1, ev.has_value());
      // Index equals the length of the correct prefix of events.
      EXPECT_GE(next.next_required_index, s.next_required_index);
      EXPECT_LE(next.next_required_index, kNumColors);
      // placed_sequence is append-only.
      ASSERT_GE(next.placed_sequence.size(), s.placed_sequence.size());
      for (std::size_t i = 0; i < s.placed_sequence.size(); ++i) EXPECT_EQ(next.placed_sequence[i], s.placed_sequence[i]);
      s = std::move(next);
    }
  }
}

TEST(SceneProperties, TouchingWithoutPlacingLeavesSequenceEmpty) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    SceneState s = make_scene(row_blocks(), canonical_target());
    const auto world = row_blocks();
    for (int t = 0; t < 200; ++t) {
      const auto& b = world[rng() % world.size()];
      const Point p = rng() % 2 ? b.bbox.center() : Point{600, 650};
      s = update_scene(s, frame_at(t, p), observe(world)).first;
    }
    EXPECT_TRUE(s.placed_sequence.empty());
    EXPECT_EQ(s.next_required_index, 0);
  }
}

TEST(SceneProperties, ReplayIsDeterministic) {
  const auto stream = RandomWalk(99).run(300);
  auto run = [&] {
    std::vector<SceneState> states;
    SceneState s = make_scene(row_blocks(), canonical_target());
    for (const auto& [frame, obs] : stream) {
      s = update_scene(s, frame, obs).first;
      states.push_back(s);
    }
    return states;
  };
  EXPECT_EQ(run(), run());
}

TEST(PlacedColors, ExcludesRemovedOnRequest) {
  std::vector<PlacementRecord> placed{{Color::Blue, BlockId{3}, 10}, {Color::Red, BlockId{0}, 30}};
  std::vector<RemovalRecord> removed{{BlockId{3}, 20}};
  EXPECT_EQ(placed_colors(placed, removed, false), (std::vector<Color>{Color::Blue, Color::Red}));
  EXPECT_EQ(placed_colors(placed, removed, true), (std::vector<Color>{Color::Red}));
}

}  // namespace
