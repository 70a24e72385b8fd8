#include <doctest.h>
#include <stdexcept>

#include <cmath>
#include <set>

#include "ntp/taskgen.hpp"
#include "ntp/worldsim.hpp"

using namespace ntp;
using sim::Api;
using sim::WorldState;

namespace {

tasks::TaskInstance sorting_task(std::array<int, 4> map, std::array<int, 4> counts) {
  tasks::TaskInstance t;
  t.family = tasks::Family::ObjectSorting;
  tasks::SortingGoal g;
  g.container_of = map;
  g.counts = counts;
  t.goal = g;
  return t;
}

tasks::TaskInstance stacking_task(std::vector<std::vector<int>> towers, int blocks) {
  tasks::TaskInstance t;
  t.family = tasks::Family::BlockStacking;
  tasks::StackingGoal g;
  g.num_blocks = blocks;
  g.towers = std::move(towers);
  t.goal = g;
  return t;
}

}  // namespace

TEST_SUITE("worldsim") {

TEST_CASE("reset: sorting task with 4 objects, open gripper, nothing held") {
  WorldState w = tasks::reset(sorting_task({0, 1, 2, 3}, {1, 1, 1, 1}), 7);
  CHECK(w.objects.size() == 4);
  CHECK_FALSE(w.gripper.closed);
  CHECK_FALSE(w.gripper.held.has_value());
  CHECK(w.step_count == 0);
}

TEST_CASE("reset: same task and seed is bit-identical") {
  auto task = sorting_task({1, 1, 2, 0}, {2, 1, 3, 1});
  WorldState a = tasks::reset(task, 99);
  WorldState b = tasks::reset(task, 99);
  CHECK(a == b);
}

TEST_CASE("reset: 8 resting blocks keep pairwise x,y separation >= 1 cm") {
  WorldState w = tasks::reset(stacking_task({{0, 1}, {2}, {3}, {4}, {5}, {6}, {7}}, 8), 3);
  REQUIRE(w.objects.size() == 8);
  for (size_t i = 0; i < w.objects.size(); ++i) {
    CHECK(w.objects[i].supported_by == std::optional<int>(sim::kTableId));
    for (size_t j = i + 1; j < w.objects.size(); ++j) {
      double d = sim::xy_dist(w.objects[i].position, w.objects[j].position);
      CHECK(d >= 0.01);
    }
  }
}

TEST_CASE("reset: workspace bounds hold for every placement") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    WorldState w = tasks::reset(sorting_task({0, 1, 2, 3}, {10, 10, 10, 10}), seed);
    for (const auto& o : w.objects) {
      CHECK(std::abs(o.position.x) <= 1.0);
      CHECK(std::abs(o.position.y) <= 1.0);
      CHECK(o.position.z >= 0.0);
    }
  }
}

TEST_CASE("move_to: gripper parks 5 cm above the target position") {
  WorldState w = tasks::reset(sorting_task({0, 0, 0, 0}, {1, 1, 1, 1}), 5);
  const auto obj = *w.find_object(20);  // category 2, first instance
  sim::step_api(w, Api::MoveTo, 20);
  CHECK(w.gripper.position.x == doctest::Approx(obj.position.x));
  CHECK(w.gripper.position.y == doctest::Approx(obj.position.y));
  CHECK(w.gripper.position.z == doctest::Approx(obj.position.z + 0.05));
  CHECK(w.step_count == 1);
}

TEST_CASE("grip directly above an object grasps it; held tracks the gripper") {
  WorldState w = tasks::reset(sorting_task({0, 0, 0, 0}, {1, 1, 1, 1}), 5);
  sim::step_api(w, Api::MoveTo, 0);
  sim::ApiEvent e = sim::step_api(w, Api::Grip, std::nullopt);
  CHECK_FALSE(e.grasp_miss);
  CHECK(w.gripper.held == std::optional<int>(0));
  CHECK(w.gripper.closed);
  sim::step_api(w, Api::MoveTo, 10);
  CHECK(w.find_object(0)->position == w.gripper.position);
}

TEST_CASE("grip away from everything is a recorded miss, not an error") {
  WorldState w = tasks::reset(sorting_task({0, 0, 0, 0}, {1, 1, 1, 1}), 5);
  sim::ApiEvent e = sim::step_api(w, Api::Grip, std::nullopt);
  CHECK(e.grasp_miss);
  CHECK_FALSE(w.gripper.held.has_value());
  CHECK(w.gripper.closed);
}

TEST_CASE("move_to with an invalid target raises an api-argument error") {
  WorldState w = tasks::reset(sorting_task({0, 0, 0, 0}, {1, 1, 1, 1}), 5);
  CHECK_THROWS_AS(sim::step_api(w, Api::MoveTo, 9), std::invalid_argument);   // absent slot
  CHECK_THROWS_AS(sim::step_api(w, Api::MoveTo, 999), std::invalid_argument);
  CHECK_THROWS_AS(sim::step_api(w, Api::MoveTo, std::nullopt), std::invalid_argument);
}

TEST_CASE("release into a container roots the object there and sorting succeeds") {
  auto task = sorting_task({1, 0, 0, 0}, {1, 0, 0, 0});
  // counts of zero are not instantiable; use one object in category 0 only
  tasks::SortingGoal g = task.sorting();
  g.counts = {1, 1, 1, 1};
  g.container_of = {1, 1, 1, 1};
  task.goal = g;
  WorldState w = tasks::reset(task, 12);
  int container = 40 + 1;
  for (int slot : {0, 10, 20, 30}) {
    sim::step_api(w, Api::MoveTo, slot);
    sim::step_api(w, Api::Grip, std::nullopt);
    sim::step_api(w, Api::MoveTo, container);
    sim::step_api(w, Api::Release, std::nullopt);
    CHECK(w.find_object(slot)->supported_by == std::optional<int>(container));
  }
  CHECK(tasks::success(w, task));
  CHECK_FALSE(w.gripper.held.has_value());
}

TEST_CASE("stacking: release above a block stacks exactly on top of it") {
  WorldState w = tasks::reset(stacking_task({{1, 0}}, 4), 21);
  sim::step_api(w, Api::MoveTo, 0);
  sim::step_api(w, Api::Grip, std::nullopt);
  sim::step_api(w, Api::MoveTo, 1);
  sim::step_api(w, Api::Release, std::nullopt);
  const auto* b0 = w.find_object(0);
  const auto* b1 = w.find_object(1);
  CHECK(b0->supported_by == std::optional<int>(1));
  CHECK(b0->position.x == doctest::Approx(b1->position.x));
  CHECK(b0->position.y == doctest::Approx(b1->position.y));
  CHECK(b0->position.z == doctest::Approx(b1->position.z + b0->height));
}

TEST_CASE("replaying an api log from the same reset reproduces the state bit-exactly") {
  auto task = sorting_task({2, 0, 3, 1}, {2, 2, 1, 3});
  WorldState w1 = tasks::reset(task, 77);
  WorldState w2 = tasks::reset(task, 77);
  std::vector<std::pair<Api, std::optional<int>>> script = {
      {Api::MoveTo, 0},  {Api::Grip, std::nullopt}, {Api::MoveTo, 42}, {Api::Release, std::nullopt},
      {Api::MoveTo, 10}, {Api::Grip, std::nullopt}, {Api::MoveTo, 40}, {Api::Release, std::nullopt},
  };
  for (auto& [api, arg] : script) sim::step_api(w1, api, arg);
  for (auto& [api, arg] : script) sim::step_api(w2, api, arg);
  CHECK(w1 == w2);
}

TEST_CASE("single-held invariant after arbitrary api sequences") {
  auto task = sorting_task({0, 1, 2, 3}, {2, 2, 2, 2});
  WorldState w = tasks::reset(task, 31);
  Rng rng(5150);
  std::vector<int> targets;
  for (const auto& o : w.objects) targets.push_back(o.id);
  for (const auto& c : w.containers) targets.push_back(c.id);
  for (int step = 0; step < 300; ++step) {
    int pick = static_cast<int>(rng.uniform_index(3));
    if (pick == 0) sim::step_api(w, Api::MoveTo, targets[rng.uniform_index(targets.size())]);
    if (pick == 1) sim::step_api(w, Api::Grip, std::nullopt);
    if (pick == 2) sim::step_api(w, Api::Release, std::nullopt);
    int held = 0;
    for (const auto& o : w.objects) held += o.held() ? 1 : 0;
    CHECK(held <= 1);
    CHECK((w.gripper.held.has_value() ? 1 : 0) == held);
    // support graph is a forest rooted at table or containers
    for (const auto& o : w.objects) {
      if (o.held()) continue;
      auto root = sim::chain_root(w, o.id);
      REQUIRE(root.has_value());
      CHECK((*root == sim::kTableId || *root >= w.object_slots));
    }
  }
}

TEST_CASE("observe: gripper at an object's position gives a zero slot") {
  WorldState w = tasks::reset(stacking_task({{0, 1}}, 4), 2);
  w.gripper.position = w.find_object(0)->position;
  sim::Observation obs = sim::observe(w);
  CHECK(obs[0] == 0.0);
  CHECK(obs[1] == 0.0);
  CHECK(obs[2] == 0.0);
}

TEST_CASE("observe: absent slots carry the +1000 sentinel in all coordinates") {
  // O_max = 8 via an 8-block stacking layout with only 4 blocks present
  sim::ResetSpec spec;
  spec.object_slots = 8;
  for (int i = 0; i < 4; ++i) spec.objects.push_back({i, 0, 0.05});
  WorldState w = sim::make_world(spec, 9);
  sim::Observation obs = sim::observe(w);
  REQUIRE(obs.size() == 3 * 8 + 1);
  for (int slot = 4; slot < 8; ++slot)
    for (int k = 0; k < 3; ++k) CHECK(obs[3 * slot + k] == 1000.0);
  CHECK(obs.back() == 1.0);  // open
}

TEST_CASE("observe: invariant under rigid translation of the whole scene") {
  auto task = sorting_task({3, 2, 1, 0}, {2, 1, 2, 1});
  WorldState w = tasks::reset(task, 55);
  sim::step_api(w, Api::MoveTo, 0);
  sim::Observation before = sim::observe(w);
  // translate gripper, every object, and the containers (the fixed scene)
  for (auto& o : w.objects) o.position.x += 0.1;
  for (auto& c : w.containers) c.position.x += 0.1;
  w.gripper.position.x += 0.1;
  sim::Observation after = sim::observe(w);
  REQUIRE(before.size() == after.size());
  for (size_t i = 0; i < before.size(); ++i) CHECK(after[i] == doctest::Approx(before[i]).epsilon(1e-12));
}

TEST_CASE("adversary: prob 0 leaves the state unchanged") {
  WorldState w = tasks::reset(stacking_task({{0, 1, 2}}, 4), 4);
  sim::step_api(w, Api::MoveTo, 1);
  sim::step_api(w, Api::Grip, std::nullopt);
  sim::step_api(w, Api::MoveTo, 0);
  sim::step_api(w, Api::Release, std::nullopt);
  WorldState before = w;
  Rng rng(1);
  CHECK_FALSE(sim::apply_adversary(w, rng, 0.0));
  CHECK(w == before);
}

TEST_CASE("adversary: prob 1 scatters exactly the two upper blocks of a 3-tower") {
  WorldState w = tasks::reset(stacking_task({{0, 1, 2}, {3}}, 4), 8);
  // build tower 0<-1<-2 by hand
  for (auto [a, b] : {std::pair{1, 0}, std::pair{2, 1}}) {
    sim::step_api(w, Api::MoveTo, a);
    sim::step_api(w, Api::Grip, std::nullopt);
    sim::step_api(w, Api::MoveTo, b);
    sim::step_api(w, Api::Release, std::nullopt);
  }
  REQUIRE(sim::supported_through(w, 2, 0));
  auto pos3 = w.find_object(3)->position;
  Rng rng(77);
  CHECK(sim::apply_adversary(w, rng, 1.0));
  CHECK(w.find_object(0)->supported_by == std::optional<int>(sim::kTableId));
  CHECK(w.find_object(1)->supported_by == std::optional<int>(sim::kTableId));
  CHECK(w.find_object(2)->supported_by == std::optional<int>(sim::kTableId));
  CHECK(w.find_object(3)->position == pos3);  // untouched bystander
}

TEST_CASE("adversary: topple frequency matches prob 0.25 within 0.02") {
  WorldState base = tasks::reset(stacking_task({{0, 1}, {2}, {3}}, 4), 10);
  sim::step_api(base, Api::MoveTo, 1);
  sim::step_api(base, Api::Grip, std::nullopt);
  sim::step_api(base, Api::MoveTo, 0);
  sim::step_api(base, Api::Release, std::nullopt);
  Rng rng(2024);
  int topples = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    WorldState w = base;
    if (sim::apply_adversary(w, rng, 0.25)) ++topples;
  }
  double freq = static_cast<double>(topples) / trials;
  CHECK(freq == doctest::Approx(0.25).epsilon(0.08));  // 0.25 +- 0.02
}

TEST_CASE("api log jsonl round-trip") {
  std::vector<sim::ApiEvent> log;
  sim::ApiEvent a;
  a.step = 0;
  a.api = Api::MoveTo;
  a.target = 12;
  log.push_back(a);
  sim::ApiEvent b;
  b.step = 1;
  b.api = Api::Grip;
  b.grasp_miss = true;
  log.push_back(b);
  auto text = sim::api_log_to_jsonl(log);
  auto back = sim::api_log_from_jsonl(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].target == std::optional<int>(12));
  CHECK(back[1].grasp_miss);
  CHECK(sim::api_log_to_jsonl(back) == text);
}

}  // TEST_SUITE
