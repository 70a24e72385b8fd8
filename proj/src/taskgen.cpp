#include "ntp/taskgen.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ntp::tasks {

namespace {

constexpr double kContainerFloor = 0.10;
constexpr double kCubeHeight = 0.05;
constexpr double kBowlHeight = 0.05;
constexpr double kForkHeight = 0.01;  // flat; 20 of them must stack within the workspace

std::vector<sim::ContainerState> sorting_containers() {
  std::vector<sim::ContainerState> cs;
  const double xs[kSortContainers] = {-0.6, -0.2, 0.2, 0.6};
  for (int k = 0; k < kSortContainers; ++k) {
    sim::ContainerState c;
    c.id = kSortCategories * kMaxPerCategory + k;
    c.position = {xs[k], 0.75, kContainerFloor};
    c.footprint_radius = 0.07;
    cs.push_back(c);
  }
  return cs;
}

sim::ContainerState cleanup_bin() {
  sim::ContainerState c;
  c.id = kMaxBowls + kMaxForks;
  c.position = {0.55, 0.75, kContainerFloor};
  c.footprint_radius = 0.09;
  return c;
}

void enumerate_forests(std::vector<int>& remaining, std::vector<std::vector<int>>& current,
                       std::vector<std::vector<std::vector<int>>>& out) {
  if (remaining.empty()) {
    out.push_back(current);
    return;
  }
  // The tower containing the smallest remaining block is emitted next; that
  // canonicalizes tower order without constraining who sits at the bottom.
  int anchor = remaining.front();
  std::vector<int> rest(remaining.begin() + 1, remaining.end());
  int n = static_cast<int>(rest.size());

  // choose the anchor's tower mates via bitmask, then order the full tower
  for (int mask = 0; mask < (1 << n); ++mask) {
    std::vector<int> members{anchor};
    std::vector<int> others;
    for (int i = 0; i < n; ++i) {
      if (mask & (1 << i)) members.push_back(rest[i]);
      else others.push_back(rest[i]);
    }
    std::sort(members.begin(), members.end());
    do {
      current.push_back(members);
      enumerate_forests(others, current, out);
      current.pop_back();
    } while (std::next_permutation(members.begin(), members.end()));
  }
}

const std::vector<std::vector<std::vector<int>>>& stacking_forests(int num_blocks) {
  static std::mutex mu;
  static std::map<int, std::vector<std::vector<std::vector<int>>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(num_blocks);
  if (it != cache.end()) return it->second;
  if (num_blocks < 2 || num_blocks > 8)
    throw std::invalid_argument("stacking enumeration supports 2..8 blocks");
  std::vector<int> blocks(num_blocks);
  for (int i = 0; i < num_blocks; ++i) blocks[i] = i;
  std::vector<std::vector<std::vector<int>>> out;
  std::vector<std::vector<int>> current;
  enumerate_forests(blocks, current, out);
  // drop the all-singletons forest: it has no pick-and-place work at all
  out.erase(std::remove_if(out.begin(), out.end(),
                           [](const auto& f) {
                             for (const auto& t : f)
                               if (t.size() > 1) return false;
                             return true;
                           }),
            out.end());
  std::sort(out.begin(), out.end());
  return cache.emplace(num_blocks, std::move(out)).first->second;
}

}  // namespace

const char* family_name(Family f) {
  switch (f) {
    case Family::BlockStacking: return "block_stacking";
    case Family::ObjectSorting: return "object_sorting";
    case Family::TableCleanup: return "table_cleanup";
  }
  return "?";
}

const char* axis_name(Axis a) {
  switch (a) {
    case Axis::Length: return "length";
    case Axis::Topology: return "topology";
    case Axis::Semantics: return "semantics";
  }
  return "?";
}

Family family_from_name(const std::string& s) {
  if (s == "block_stacking" || s == "stacking") return Family::BlockStacking;
  if (s == "object_sorting" || s == "sorting") return Family::ObjectSorting;
  if (s == "table_cleanup" || s == "cleanup") return Family::TableCleanup;
  throw std::invalid_argument("unknown family: " + s);
}

Axis axis_from_name(const std::string& s) {
  if (s == "length") return Axis::Length;
  if (s == "topology") return Axis::Topology;
  if (s == "semantics") return Axis::Semantics;
  throw std::invalid_argument("unknown axis: " + s);
}

std::vector<std::pair<int, int>> StackingGoal::pairs() const {
  std::vector<std::pair<int, int>> ps;
  for (const auto& tower : towers)
    for (size_t i = 1; i < tower.size(); ++i) ps.emplace_back(tower[i], tower[i - 1]);
  return ps;
}

std::string equivalence_key(const TaskInstance& task) {
  std::ostringstream ss;
  switch (task.family) {
    case Family::ObjectSorting: {
      const auto& g = task.sorting();
      ss << "sort:";
      for (int c = 0; c < kSortCategories; ++c) ss << g.container_of[c];
      break;
    }
    case Family::BlockStacking: {
      auto ps = task.stacking().pairs();
      std::sort(ps.begin(), ps.end());
      ss << "stack" << task.stacking().num_blocks << ":";
      for (auto& [a, b] : ps) ss << a << ">" << b << ",";
      break;
    }
    case Family::TableCleanup: {
      const auto& g = task.cleanup();
      ss << "clean:" << g.num_bowls << "," << g.num_forks << ":";
      for (int b : g.bowl_order) ss << b << ",";
      break;
    }
  }
  return ss.str();
}

std::string instance_key(const TaskInstance& task) {
  std::ostringstream ss;
  ss << equivalence_key(task) << "|";
  if (task.family == Family::ObjectSorting) {
    for (int c : task.sorting().counts) ss << c << ",";
  } else if (task.family == Family::BlockStacking) {
    for (const auto& t : task.stacking().towers) {
      for (int b : t) ss << b << ".";
      ss << "/";
    }
  }
  return ss.str();
}

int object_slot_count(Family family, int stacking_blocks) {
  switch (family) {
    case Family::ObjectSorting: return kSortCategories * kMaxPerCategory;
    case Family::BlockStacking: return stacking_blocks;
    case Family::TableCleanup: return kMaxBowls + kMaxForks;
  }
  return 0;
}

int container_count(Family family) {
  switch (family) {
    case Family::ObjectSorting: return kSortContainers;
    case Family::BlockStacking: return 0;
    case Family::TableCleanup: return 1;
  }
  return 0;
}

int category_of_slot(Family family, int slot) {
  switch (family) {
    case Family::ObjectSorting: return slot / kMaxPerCategory;
    case Family::BlockStacking: return 0;
    case Family::TableCleanup: return slot < kMaxBowls ? 0 : 1;
  }
  return 0;
}

sim::ResetSpec world_spec(const TaskInstance& task) {
  sim::ResetSpec spec;
  switch (task.family) {
    case Family::ObjectSorting: {
      const auto& g = task.sorting();
      spec.object_slots = kSortCategories * kMaxPerCategory;
      spec.containers = sorting_containers();
      for (int c = 0; c < kSortCategories; ++c) {
        if (g.counts[c] <= 0)
          throw std::invalid_argument("sorting instance has unspecified counts; call instantiate() first");
        if (g.counts[c] > kMaxPerCategory) throw std::invalid_argument("sorting count exceeds slots");
        for (int j = 0; j < g.counts[c]; ++j)
          spec.objects.push_back({c * kMaxPerCategory + j, c, kCubeHeight});
      }
      break;
    }
    case Family::BlockStacking: {
      const auto& g = task.stacking();
      spec.object_slots = g.num_blocks;
      for (int i = 0; i < g.num_blocks; ++i) spec.objects.push_back({i, 0, kCubeHeight});
      break;
    }
    case Family::TableCleanup: {
      const auto& g = task.cleanup();
      spec.object_slots = kMaxBowls + kMaxForks;
      spec.containers = {cleanup_bin()};
      for (int b = 0; b < g.num_bowls; ++b) spec.objects.push_back({b, 0, kBowlHeight});
      for (int f = 0; f < g.num_forks; ++f) spec.objects.push_back({kMaxBowls + f, 1, kForkHeight});
      break;
    }
  }
  return spec;
}

bool success(const sim::WorldState& state, const TaskInstance& task) {
  switch (task.family) {
    case Family::ObjectSorting: {
      const auto& g = task.sorting();
      int container_base = kSortCategories * kMaxPerCategory;
      for (const auto& o : state.objects) {
        auto root = sim::chain_root(state, o.id);
        if (!root) return false;
        int want = container_base + g.container_of[o.category];
        if (*root != want) return false;
      }
      return true;
    }
    case Family::BlockStacking: {
      for (auto& [above, below] : task.stacking().pairs()) {
        if (!state.find_object(above) || !state.find_object(below)) return false;
        if (!sim::supported_through(state, above, below)) return false;
      }
      return true;
    }
    case Family::TableCleanup: {
      const auto& g = task.cleanup();
      int bin = kMaxBowls + kMaxForks;
      // every bowl roots at the bin, exactly one directly on the bin
      int direct = 0;
      for (int b = 0; b < g.num_bowls; ++b) {
        const auto* o = state.find_object(b);
        if (!o) return false;
        auto root = sim::chain_root(state, b);
        if (!root || *root != bin) return false;
        if (o->supported_by == std::optional<int>(bin)) ++direct;
        else if (!o->supported_by || *o->supported_by < 0 || *o->supported_by >= kMaxBowls)
          return false;  // must sit on another bowl
      }
      if (direct != 1) return false;
      // topmost bowl: the one with no bowl above it
      int topmost = -1;
      for (int b = 0; b < g.num_bowls; ++b) {
        bool covered = false;
        for (int b2 = 0; b2 < g.num_bowls; ++b2)
          if (b2 != b && sim::supported_through(state, b2, b)) covered = true;
        if (!covered) topmost = b;
      }
      if (topmost < 0) return false;
      for (int f = 0; f < g.num_forks; ++f) {
        if (!state.find_object(kMaxBowls + f)) return false;
        if (!sim::supported_through(state, kMaxBowls + f, topmost)) return false;
      }
      return true;
    }
  }
  return false;
}

TaskInstance sample_task(Family family, Rng& rng, int count_lo, int count_hi, int stacking_blocks) {
  TaskInstance t;
  t.family = family;
  switch (family) {
    case Family::ObjectSorting: {
      SortingGoal g;
      for (int c = 0; c < kSortCategories; ++c) g.container_of[c] = rng.uniform_int(0, kSortContainers - 1);
      for (int c = 0; c < kSortCategories; ++c) g.counts[c] = rng.uniform_int(count_lo, count_hi);
      t.goal = g;
      break;
    }
    case Family::BlockStacking: {
      const auto& all = stacking_forests(stacking_blocks);
      StackingGoal g;
      g.num_blocks = stacking_blocks;
      g.towers = all[rng.uniform_index(all.size())];
      t.goal = g;
      break;
    }
    case Family::TableCleanup: {
      CleanupGoal g;
      g.num_bowls = rng.uniform_int(1, kMaxBowls);
      g.num_forks = rng.uniform_int(0, kMaxForks);
      g.bowl_order.resize(g.num_bowls);
      for (int i = 0; i < g.num_bowls; ++i) g.bowl_order[i] = i;
      t.goal = g;
      break;
    }
  }
  return t;
}

TaskInstance instantiate(const TaskInstance& task, Rng& rng, int count_lo, int count_hi) {
  if (task.family != Family::ObjectSorting) return task;
  TaskInstance t = task;
  SortingGoal g = t.sorting();
  for (int c = 0; c < kSortCategories; ++c) {
    if (g.counts[c] <= 0) g.counts[c] = rng.uniform_int(count_lo, count_hi);
  }
  t.goal = g;
  return t;
}

std::vector<TaskInstance> enumerate_sorting_tasks() {
  std::vector<TaskInstance> out;
  for (int m = 0; m < 256; ++m) {
    TaskInstance t;
    t.family = Family::ObjectSorting;
    SortingGoal g;
    int v = m;
    for (int c = 0; c < kSortCategories; ++c) {
      g.container_of[c] = v % 4;
      v /= 4;
    }
    t.goal = g;
    out.push_back(t);
  }
  return out;
}

std::vector<TaskInstance> sorting_training_cover() {
  std::vector<TaskInstance> out;
  for (int k = 0; k < 4; ++k) {
    TaskInstance t;
    t.family = Family::ObjectSorting;
    SortingGoal g;
    for (int c = 0; c < kSortCategories; ++c) g.container_of[c] = (c + k) % 4;
    t.goal = g;
    out.push_back(t);
  }
  return out;
}

std::vector<StackingGoal> enumerate_stacking_goals(int num_blocks) {
  std::vector<StackingGoal> out;
  for (const auto& f : stacking_forests(num_blocks)) {
    StackingGoal g;
    g.num_blocks = num_blocks;
    g.towers = f;
    out.push_back(g);
  }
  return out;
}

DatasetSplit make_splits(Family family, Axis axis, Rng& rng, int n_train, int stacking_blocks) {
  DatasetSplit split;
  split.family = family;
  split.axis = axis;

  if (family == Family::ObjectSorting && axis == Axis::Semantics) {
    auto cover = sorting_training_cover();
    std::vector<std::string> cover_keys;
    for (const auto& t : cover) cover_keys.push_back(equivalence_key(t));
    split.seen = cover;
    for (const auto& t : enumerate_sorting_tasks()) {
      if (std::find(cover_keys.begin(), cover_keys.end(), equivalence_key(t)) == cover_keys.end())
        split.unseen.push_back(t);
    }
    split.seen_count_lo = split.unseen_count_lo = 1;
    split.seen_count_hi = split.unseen_count_hi = 4;
    return split;
  }
  if (family == Family::ObjectSorting && axis == Axis::Length) {
    split.seen = sorting_training_cover();
    split.seen_count_lo = 1;
    split.seen_count_hi = 4;
    split.unseen = enumerate_sorting_tasks();
    split.unseen_count_lo = 5;
    split.unseen_count_hi = kMaxPerCategory;
    return split;
  }
  if (family == Family::BlockStacking && (axis == Axis::Semantics || axis == Axis::Topology)) {
    auto goals = enumerate_stacking_goals(stacking_blocks);
    std::vector<size_t> order(goals.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    if (axis == Axis::Semantics) {
      size_t n_unseen = std::min<size_t>(1000, goals.size() > static_cast<size_t>(n_train)
                                                   ? goals.size() - n_train
                                                   : 0);
      if (static_cast<size_t>(n_train) + n_unseen > goals.size())
        throw std::invalid_argument("not enough distinct stacking goals for this split");
      for (int i = 0; i < n_train; ++i) {
        TaskInstance t;
        t.family = family;
        t.goal = goals[order[i]];
        split.seen.push_back(t);
      }
      for (size_t i = n_train; i < static_cast<size_t>(n_train) + n_unseen; ++i) {
        TaskInstance t;
        t.family = family;
        t.goal = goals[order[i]];
        split.unseen.push_back(t);
      }
    } else {
      if (static_cast<size_t>(n_train) > goals.size())
        throw std::invalid_argument("not enough distinct stacking goals for this split");
      for (int i = 0; i < n_train; ++i) {
        TaskInstance t;
        t.family = family;
        t.goal = goals[order[i]];
        split.seen.push_back(t);
        // unseen variant: same end configuration, different tower build order
        const StackingGoal& g = goals[order[i]];
        if (g.towers.size() >= 2) {
          StackingGoal perm = g;
          do {
            rng.shuffle(perm.towers);
          } while (perm.towers == g.towers);
          TaskInstance u;
          u.family = family;
          u.goal = perm;
          split.unseen.push_back(u);
        }
      }
    }
    return split;
  }
  if (family == Family::TableCleanup && (axis == Axis::Length || axis == Axis::Topology)) {
    for (int i = 0; i < n_train; ++i) {
      TaskInstance t = sample_task(family, rng);
      CleanupGoal g = t.cleanup();
      if (axis == Axis::Length) g.num_forks = rng.uniform_int(0, 8);
      t.goal = g;
      split.seen.push_back(t);
    }
    for (int i = 0; i < n_train; ++i) {
      TaskInstance t = sample_task(family, rng);
      CleanupGoal g = t.cleanup();
      if (axis == Axis::Length) {
        g.num_forks = rng.uniform_int(9, kMaxForks);
      } else {
        g.num_bowls = rng.uniform_int(2, kMaxBowls);
        g.bowl_order.resize(g.num_bowls);
        for (int b = 0; b < g.num_bowls; ++b) g.bowl_order[b] = b;
        std::vector<int> def = g.bowl_order;
        do {
          rng.shuffle(g.bowl_order);
        } while (g.bowl_order == def);
      }
      t.goal = g;
      split.unseen.push_back(t);
    }
    return split;
  }
  throw std::invalid_argument(std::string("configuration error: axis ") + axis_name(axis) +
                              " not defined for family " + family_name(family));
}

sim::WorldState reset(const TaskInstance& task, uint64_t seed) {
  return sim::make_world(world_spec(task), seed);
}

namespace {

nlohmann::ordered_json task_json(const TaskInstance& task) {
  nlohmann::ordered_json j;
  j["family"] = family_name(task.family);
  switch (task.family) {
    case Family::ObjectSorting: {
      const auto& g = task.sorting();
      j["container_of"] = g.container_of;
      j["counts"] = g.counts;
      break;
    }
    case Family::BlockStacking: {
      const auto& g = task.stacking();
      j["num_blocks"] = g.num_blocks;
      j["towers"] = g.towers;
      break;
    }
    case Family::TableCleanup: {
      const auto& g = task.cleanup();
      j["num_bowls"] = g.num_bowls;
      j["num_forks"] = g.num_forks;
      j["bowl_order"] = g.bowl_order;
      break;
    }
  }
  return j;
}

TaskInstance task_from(const nlohmann::json& j) {
  TaskInstance t;
  t.family = family_from_name(j.at("family").get<std::string>());
  switch (t.family) {
    case Family::ObjectSorting: {
      SortingGoal g;
      auto co = j.at("container_of");
      auto ct = j.at("counts");
      for (int c = 0; c < kSortCategories; ++c) {
        g.container_of[c] = co[c].get<int>();
        g.counts[c] = ct[c].get<int>();
      }
      t.goal = g;
      break;
    }
    case Family::BlockStacking: {
      StackingGoal g;
      g.num_blocks = j.at("num_blocks").get<int>();
      g.towers = j.at("towers").get<std::vector<std::vector<int>>>();
      t.goal = g;
      break;
    }
    case Family::TableCleanup: {
      CleanupGoal g;
      g.num_bowls = j.at("num_bowls").get<int>();
      g.num_forks = j.at("num_forks").get<int>();
      g.bowl_order = j.at("bowl_order").get<std::vector<int>>();
      t.goal = g;
      break;
    }
  }
  return t;
}

}  // namespace

std::string task_to_json(const TaskInstance& task) { return task_json(task).dump(); }

TaskInstance task_from_json(const std::string& text) { return task_from(nlohmann::json::parse(text)); }

std::string split_to_json(const DatasetSplit& split) {
  nlohmann::ordered_json j;
  j["family"] = family_name(split.family);
  j["axis"] = axis_name(split.axis);
  j["seed"] = split.seed;
  j["seen_count_range"] = {split.seen_count_lo, split.seen_count_hi};
  j["unseen_count_range"] = {split.unseen_count_lo, split.unseen_count_hi};
  j["seen"] = nlohmann::ordered_json::array();
  j["unseen"] = nlohmann::ordered_json::array();
  for (const auto& t : split.seen) j["seen"].push_back(task_json(t));
  for (const auto& t : split.unseen) j["unseen"].push_back(task_json(t));
  return j.dump(2);
}

DatasetSplit split_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  DatasetSplit split;
  split.family = family_from_name(j.at("family").get<std::string>());
  split.axis = axis_from_name(j.at("axis").get<std::string>());
  split.seed = j.at("seed").get<uint64_t>();
  split.seen_count_lo = j.at("seen_count_range")[0].get<int>();
  split.seen_count_hi = j.at("seen_count_range")[1].get<int>();
  split.unseen_count_lo = j.at("unseen_count_range")[0].get<int>();
  split.unseen_count_hi = j.at("unseen_count_range")[1].get<int>();
  for (const auto& tj : j.at("seen")) split.seen.push_back(task_from(tj));
  for (const auto& tj : j.at("unseen")) split.unseen.push_back(task_from(tj));
  return split;
}

}  // namespace ntp::tasks
