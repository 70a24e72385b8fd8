#include <doctest.h>
#include <stdexcept>

#include <set>

#include "ntp/expert.hpp"
#include "ntp/taskgen.hpp"

using namespace ntp;
using tasks::Axis;
using tasks::Family;

TEST_SUITE("taskgen") {

TEST_CASE("sorting task space enumerates exactly 256 maps") {
  auto all = tasks::enumerate_sorting_tasks();
  CHECK(all.size() == 256);
  std::set<std::string> keys;
  for (const auto& t : all) keys.insert(tasks::equivalence_key(t));
  CHECK(keys.size() == 256);
}

TEST_CASE("the 4-task cover touches every category-container pair exactly once per category") {
  auto cover = tasks::sorting_training_cover();
  REQUIRE(cover.size() == 4);
  for (int c = 0; c < 4; ++c) {
    std::set<int> containers;
    for (const auto& t : cover) containers.insert(t.sorting().container_of[c]);
    CHECK(containers == std::set<int>{0, 1, 2, 3});
  }
}

TEST_CASE("sorting semantics split: 4 seen, 252 unseen, disjoint") {
  Rng rng(1);
  auto split = tasks::make_splits(Family::ObjectSorting, Axis::Semantics, rng, 4);
  CHECK(split.seen.size() == 4);
  CHECK(split.unseen.size() == 252);
  std::set<std::string> seen_keys, unseen_keys;
  for (const auto& t : split.seen) seen_keys.insert(tasks::equivalence_key(t));
  for (const auto& t : split.unseen) unseen_keys.insert(tasks::equivalence_key(t));
  for (const auto& k : seen_keys) CHECK(unseen_keys.count(k) == 0);
}

TEST_CASE("stacking enumeration counts distinct end configurations") {
  // Partitions of n labeled blocks into ordered towers, minus the
  // all-singleton layout: n=4 -> 73-1, n=5 -> 501-1.
  CHECK(tasks::enumerate_stacking_goals(4).size() == 72);
  CHECK(tasks::enumerate_stacking_goals(5).size() == 500);
}

TEST_CASE("stacking goals deduplicate by end configuration") {
  tasks::StackingGoal a;
  a.num_blocks = 4;
  a.towers = {{0, 1}, {2, 3}};
  tasks::StackingGoal b;
  b.num_blocks = 4;
  b.towers = {{2, 3}, {0, 1}};  // same configuration, different build order
  tasks::TaskInstance ta{Family::BlockStacking, a};
  tasks::TaskInstance tb{Family::BlockStacking, b};
  CHECK(tasks::equivalence_key(ta) == tasks::equivalence_key(tb));
  CHECK(tasks::instance_key(ta) != tasks::instance_key(tb));
}

TEST_CASE("stacking splits are disjoint under end-configuration equivalence") {
  Rng rng(7);
  auto split = tasks::make_splits(Family::BlockStacking, Axis::Semantics, rng, 100, 5);
  CHECK(split.seen.size() == 100);
  CHECK(split.unseen.size() >= 100);
  std::set<std::string> seen_keys;
  for (const auto& t : split.seen) seen_keys.insert(tasks::equivalence_key(t));
  for (const auto& t : split.unseen) CHECK(seen_keys.count(tasks::equivalence_key(t)) == 0);
}

TEST_CASE("topology split holds out permuted build orders of seen configurations") {
  Rng rng(9);
  auto split = tasks::make_splits(Family::BlockStacking, Axis::Topology, rng, 50, 5);
  std::set<std::string> seen_instances;
  std::set<std::string> seen_configs;
  for (const auto& t : split.seen) {
    seen_instances.insert(tasks::instance_key(t));
    seen_configs.insert(tasks::equivalence_key(t));
  }
  CHECK(!split.unseen.empty());
  for (const auto& t : split.unseen) {
    CHECK(seen_configs.count(tasks::equivalence_key(t)) == 1);   // same end configuration
    CHECK(seen_instances.count(tasks::instance_key(t)) == 0);    // different build order
  }
}

TEST_CASE("cleanup sampling respects the documented ranges") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    auto t = tasks::sample_task(Family::TableCleanup, rng);
    CHECK(t.cleanup().num_bowls >= 1);
    CHECK(t.cleanup().num_bowls <= 4);
    CHECK(t.cleanup().num_forks >= 0);
    CHECK(t.cleanup().num_forks <= 20);
  }
}

TEST_CASE("invalid axis/family combinations raise a configuration error") {
  Rng rng(13);
  CHECK_THROWS_AS(tasks::make_splits(Family::ObjectSorting, Axis::Topology, rng, 4),
                  std::invalid_argument);
  CHECK_THROWS_AS(tasks::make_splits(Family::TableCleanup, Axis::Semantics, rng, 4),
                  std::invalid_argument);
}

TEST_CASE("success: freshly reset stacking task with a nontrivial goal is false") {
  tasks::TaskInstance t;
  t.family = Family::BlockStacking;
  tasks::StackingGoal g;
  g.num_blocks = 4;
  g.towers = {{0, 1, 2}, {3}};
  t.goal = g;
  auto w = tasks::reset(t, 3);
  CHECK_FALSE(tasks::success(w, t));
}

TEST_CASE("success: one object in the wrong container fails sorting") {
  tasks::TaskInstance t;
  t.family = Family::ObjectSorting;
  tasks::SortingGoal g;
  g.container_of = {0, 1, 2, 3};
  g.counts = {1, 1, 1, 1};
  t.goal = g;
  auto w = tasks::reset(t, 4);
  auto sort_into = [&](int slot, int container) {
    sim::step_api(w, sim::Api::MoveTo, slot);
    sim::step_api(w, sim::Api::Grip, std::nullopt);
    sim::step_api(w, sim::Api::MoveTo, 40 + container);
    sim::step_api(w, sim::Api::Release, std::nullopt);
  };
  sort_into(0, 0);
  sort_into(10, 1);
  sort_into(20, 2);
  sort_into(30, 0);  // wrong: category 3 maps to container 3
  CHECK_FALSE(tasks::success(w, t));
  // fix it
  sort_into(30, 3);
  CHECK(tasks::success(w, t));
}

TEST_CASE("success is monotone-stable: observations do not flip it") {
  tasks::TaskInstance t;
  t.family = Family::BlockStacking;
  tasks::StackingGoal g;
  g.num_blocks = 4;
  g.towers = {{2, 0}};
  t.goal = g;
  auto w = tasks::reset(t, 5);
  sim::step_api(w, sim::Api::MoveTo, 0);
  sim::step_api(w, sim::Api::Grip, std::nullopt);
  sim::step_api(w, sim::Api::MoveTo, 2);
  sim::step_api(w, sim::Api::Release, std::nullopt);
  REQUIRE(tasks::success(w, t));
  for (int i = 0; i < 5; ++i) {
    (void)sim::observe(w);
    CHECK(tasks::success(w, t));
  }
}

TEST_CASE("task and split json round-trips") {
  Rng rng(17);
  auto t = tasks::sample_task(Family::BlockStacking, rng, 1, 10, 5);
  auto back = tasks::task_from_json(tasks::task_to_json(t));
  CHECK(tasks::instance_key(back) == tasks::instance_key(t));

  auto split = tasks::make_splits(Family::ObjectSorting, Axis::Length, rng, 4);
  auto split_back = tasks::split_from_json(tasks::split_to_json(split));
  CHECK(split_back.seen.size() == split.seen.size());
  CHECK(split_back.unseen.size() == split.unseen.size());
  CHECK(split_back.unseen_count_hi == split.unseen_count_hi);
  CHECK(tasks::split_to_json(split_back) == tasks::split_to_json(split));
}

}  // TEST_SUITE
