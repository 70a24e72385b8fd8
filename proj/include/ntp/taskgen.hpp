#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ntp/util.hpp"
#include "ntp/worldsim.hpp"

namespace ntp::tasks {

enum class Family { BlockStacking, ObjectSorting, TableCleanup };
enum class Axis { Length, Topology, Semantics };

const char* family_name(Family f);
const char* axis_name(Axis a);
Family family_from_name(const std::string& s);
Axis axis_from_name(const std::string& s);

// ---- Object Sorting ------------------------------------------------------
// 4 categories, 4 containers; canonical slots are category-blocked:
// category c owns slots [c*kMaxPerCategory, (c+1)*kMaxPerCategory).
constexpr int kSortCategories = 4;
constexpr int kSortContainers = 4;
constexpr int kMaxPerCategory = 10;

struct SortingGoal {
  std::array<int, kSortCategories> container_of{};  // category -> container index
  // objects per category; 0 means "unspecified, draw from the split's range"
  std::array<int, kSortCategories> counts{};
};

// ---- Block Stacking ------------------------------------------------------
struct StackingGoal {
  int num_blocks = 8;
  // towers listed in build order, each bottom-up; every block id < num_blocks
  std::vector<std::vector<int>> towers;
  std::vector<std::pair<int, int>> pairs() const;  // (above, below) in build order
};

// ---- Table Clean-up ------------------------------------------------------
constexpr int kMaxBowls = 4;
constexpr int kMaxForks = 20;

struct CleanupGoal {
  int num_bowls = 1;
  int num_forks = 0;
  std::vector<int> bowl_order;  // stacking order, bottom first
};

struct TaskInstance {
  Family family = Family::ObjectSorting;
  std::variant<StackingGoal, SortingGoal, CleanupGoal> goal;

  const SortingGoal& sorting() const { return std::get<SortingGoal>(goal); }
  const StackingGoal& stacking() const { return std::get<StackingGoal>(goal); }
  const CleanupGoal& cleanup() const { return std::get<CleanupGoal>(goal); }
};

struct DatasetSplit {
  Family family = Family::ObjectSorting;
  Axis axis = Axis::Semantics;
  uint64_t seed = 0;
  std::vector<TaskInstance> seen;
  std::vector<TaskInstance> unseen;
  // count range used when instantiating sorting goals with unspecified counts
  int seen_count_lo = 1, seen_count_hi = 4;
  int unseen_count_lo = 1, unseen_count_hi = 10;
};

// Canonical key of the end configuration; two tasks with equal keys are the
// same task. Stacking ignores build order (support-pair multiset), cleanup
// includes the bowl stack order since it is part of the end state.
std::string equivalence_key(const TaskInstance& task);
// Full instance identity including build order and instance counts.
std::string instance_key(const TaskInstance& task);

// World layout for a task. Slot ids: sorting 0..39 objects + 40..43
// containers; stacking 0..num_blocks-1; cleanup 0..3 bowls, 4..23 forks,
// 24 bin.
sim::ResetSpec world_spec(const TaskInstance& task);
int object_slot_count(Family family, int stacking_blocks = 8);
int container_count(Family family);
int category_of_slot(Family family, int slot);

// Success predicate g(s, t); pure.
bool success(const sim::WorldState& state, const TaskInstance& task);

// Uniform task sampling. Sorting counts drawn in [count_lo, count_hi];
// stacking goals uniform over distinct end configurations (>=1 pair) of
// num_blocks blocks; cleanup uniform over (bowls, forks) with default order.
TaskInstance sample_task(Family family, Rng& rng, int count_lo = 1, int count_hi = kMaxPerCategory,
                         int stacking_blocks = 8);

// Materializes unspecified sorting counts; identity for other families.
TaskInstance instantiate(const TaskInstance& task, Rng& rng, int count_lo, int count_hi);

// All 256 sorting category->container maps, counts unspecified.
std::vector<TaskInstance> enumerate_sorting_tasks();
// The 4-map training cover: map_k(c) = (c + k) mod 4.
std::vector<TaskInstance> sorting_training_cover();

// All distinct stacking end configurations (canonical tower order, >=1 pair).
// Exact enumeration; supported for num_blocks <= 8.
std::vector<StackingGoal> enumerate_stacking_goals(int num_blocks);

// Train/eval splits along one generalization axis. Throws on axis/family
// combinations that do not make sense (e.g. sorting topology).
DatasetSplit make_splits(Family family, Axis axis, Rng& rng, int n_train, int stacking_blocks = 8);

// Convenience reset matching the worldsim contract.
sim::WorldState reset(const TaskInstance& task, uint64_t seed);

std::string task_to_json(const TaskInstance& task);
TaskInstance task_from_json(const std::string& text);
std::string split_to_json(const DatasetSplit& split);
DatasetSplit split_from_json(const std::string& text);

}  // namespace ntp::tasks
