#include "ntp/worldsim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace ntp::sim {

namespace {

// Ring slots inside a container, all strictly outside the central capture
// zone so a drop at the container center never lands on existing contents.
Vec3 ring_offset(int k) {
  int ring = k / 8;
  int pos = k % 8;
  double r = 0.032 + 0.014 * ring;
  double theta = pos * 0.7853981633974483;  // pi/4
  return {r * std::cos(theta), r * std::sin(theta), 0.0};
}

bool placement_ok(const WorldState& w, double x, double y) {
  if (x < -0.95 || x > 0.95 || y < -0.95 || y > 0.95) return false;
  for (const auto& o : w.objects) {
    if (o.held()) continue;
    double dx = o.position.x - x, dy = o.position.y - y;
    if (dx * dx + dy * dy < kMinSeparation * kMinSeparation) return false;
  }
  for (const auto& c : w.containers) {
    double dx = c.position.x - x, dy = c.position.y - y;
    double min_d = c.footprint_radius + kMinSeparation;
    if (dx * dx + dy * dy < min_d * min_d) return false;
  }
  return true;
}

}  // namespace

const ObjectState* WorldState::find_object(int id) const {
  for (const auto& o : objects)
    if (o.id == id) return &o;
  return nullptr;
}

ObjectState* WorldState::find_object(int id) {
  for (auto& o : objects)
    if (o.id == id) return &o;
  return nullptr;
}

const ContainerState* WorldState::find_container(int id) const {
  for (const auto& c : containers)
    if (c.id == id) return &c;
  return nullptr;
}

const char* api_name(Api api) {
  switch (api) {
    case Api::MoveTo: return "move_to";
    case Api::Grip: return "grip";
    case Api::Release: return "release";
  }
  return "?";
}

std::string api_log_to_jsonl(const std::vector<ApiEvent>& log) {
  std::string out;
  for (const auto& e : log) {
    nlohmann::ordered_json j;
    j["step"] = e.step;
    j["api"] = api_name(e.api);
    j["args"] = e.target ? nlohmann::json::array({*e.target}) : nlohmann::json::array();
    j["grasp_miss"] = e.grasp_miss;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<ApiEvent> api_log_from_jsonl(const std::string& text) {
  std::vector<ApiEvent> log;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    ApiEvent e;
    e.step = j.at("step").get<int64_t>();
    std::string name = j.at("api").get<std::string>();
    if (name == "move_to") e.api = Api::MoveTo;
    else if (name == "grip") e.api = Api::Grip;
    else if (name == "release") e.api = Api::Release;
    else throw std::runtime_error("unknown api in log: " + name);
    if (!j.at("args").empty()) e.target = j.at("args")[0].get<int>();
    e.grasp_miss = j.at("grasp_miss").get<bool>();
    log.push_back(e);
  }
  return log;
}

WorldState make_world(const ResetSpec& spec, uint64_t seed) {
  WorldState w;
  w.object_slots = spec.object_slots;
  w.containers = spec.containers;
  w.gripper.position = spec.home;
  w.gripper.closed = false;
  Rng rng(derive_seed(seed, 17));
  w.rng_state = Rng(derive_seed(seed, 23));

  for (const auto& slot : spec.objects) {
    if (slot.id < 0 || slot.id >= spec.object_slots)
      throw std::invalid_argument("object slot out of range");
    ObjectState o;
    o.id = slot.id;
    o.category = slot.category;
    o.height = slot.height;
    bool placed = false;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      double x = rng.uniform(spec.x_min, spec.x_max);
      double y = rng.uniform(spec.y_min, spec.y_max);
      if (!placement_ok(w, x, y)) continue;
      o.position = {x, y, o.height};
      o.supported_by = kTableId;
      placed = true;
      break;
    }
    if (!placed) throw std::runtime_error("unsatisfiable layout: placement failed after 1000 attempts");
    w.objects.push_back(o);
  }
  std::sort(w.objects.begin(), w.objects.end(),
            [](const ObjectState& a, const ObjectState& b) { return a.id < b.id; });
  return w;
}

Surface surface_at(const WorldState& state, double x, double y, double max_z, int excl) {
  Surface best;
  best.top = 0.0;
  best.supporter = kTableId;
  for (const auto& c : state.containers) {
    double dx = c.position.x - x, dy = c.position.y - y;
    if (dx * dx + dy * dy > c.footprint_radius * c.footprint_radius) continue;
    if (c.position.z <= max_z && c.position.z > best.top) {
      best.top = c.position.z;
      best.supporter = c.id;
    }
  }
  for (const auto& o : state.objects) {
    if (o.held() || o.id == excl) continue;
    double dx = o.position.x - x, dy = o.position.y - y;
    if (dx * dx + dy * dy > kSupportRadius * kSupportRadius) continue;
    if (o.position.z <= max_z && o.position.z > best.top) {
      best.top = o.position.z;
      best.supporter = o.id;
    }
  }
  return best;
}

ApiEvent step_api(WorldState& state, Api api, std::optional<int> target) {
  ApiEvent event;
  event.step = state.step_count;
  event.api = api;
  event.target = target;

  switch (api) {
    case Api::MoveTo: {
      if (!target) throw std::invalid_argument("api argument error: move_to requires a target");
      int t = *target;
      double ax, ay;
      if (const ObjectState* o = state.find_object(t)) {
        ax = o->position.x;
        ay = o->position.y;
      } else if (const ContainerState* c = state.find_container(t)) {
        ax = c->position.x;
        ay = c->position.y;
      } else {
        throw std::invalid_argument("api argument error: move_to target " + std::to_string(t) +
                                    " is not a present object or container");
      }
      int excl = state.gripper.held ? *state.gripper.held : -1000;
      Surface s = surface_at(state, ax, ay, 1e9, excl);
      state.gripper.position = {ax, ay, s.top + kHoverOffset};
      if (state.gripper.held) {
        ObjectState* held = state.find_object(*state.gripper.held);
        held->position = state.gripper.position;
      }
      break;
    }
    case Api::Grip: {
      state.gripper.closed = true;
      if (!state.gripper.held) {
        const ObjectState* pick = nullptr;
        for (const auto& o : state.objects) {
          if (o.held()) continue;
          if (xy_dist(o.position, state.gripper.position) > kGraspTolerance) continue;
          if (o.position.z > state.gripper.position.z + 1e-12) continue;
          // something resting on top of it means it is not the stack top
          if (!pick || o.position.z > pick->position.z ||
              (o.position.z == pick->position.z && o.id < pick->id))
            pick = &o;
        }
        if (pick) {
          ObjectState* o = state.find_object(pick->id);
          o->supported_by = std::nullopt;
          o->position = state.gripper.position;  // tracks the gripper exactly
          state.gripper.held = o->id;
        } else {
          event.grasp_miss = true;
        }
      }
      break;
    }
    case Api::Release: {
      state.gripper.closed = false;
      if (state.gripper.held) {
        int held_id = *state.gripper.held;
        ObjectState* held = state.find_object(held_id);
        Surface s = surface_at(state, state.gripper.position.x, state.gripper.position.y,
                               state.gripper.position.z, held_id);
        if (s.supporter >= state.object_slots && state.find_container(s.supporter)) {
          // drop captured by a container: next free ring slot at floor level
          const ContainerState* c = state.find_container(s.supporter);
          int k = 0;
          Vec3 pos;
          for (;; ++k) {
            Vec3 off = ring_offset(k);
            pos = {c->position.x + off.x, c->position.y + off.y, c->position.z + held->height};
            bool taken = false;
            for (const auto& o : state.objects) {
              if (o.held() || o.id == held_id) continue;
              if (o.supported_by == c->id && xy_dist(o.position, pos) < 0.005) {
                taken = true;
                break;
              }
            }
            if (!taken) break;
          }
          held->position = pos;
          held->supported_by = c->id;
        } else if (s.supporter != kTableId && state.find_object(s.supporter)) {
          const ObjectState* sup = state.find_object(s.supporter);
          held->position = {sup->position.x, sup->position.y, sup->position.z + held->height};
          held->supported_by = sup->id;
        } else {
          held->position = {state.gripper.position.x, state.gripper.position.y, held->height};
          held->supported_by = kTableId;
        }
        state.gripper.held = std::nullopt;
      }
      break;
    }
  }
  ++state.step_count;
  return event;
}

bool apply_adversary(WorldState& state, Rng& rng, double prob) {
  if (prob < 0.0 || prob > 1.0) throw std::invalid_argument("adversary probability out of range");
  double u = rng.uniform();
  if (u >= prob) return false;

  // Table-rooted stacks of height >= 2, identified by their base object.
  std::vector<int> bases;
  for (const auto& o : state.objects) {
    if (o.held() || o.supported_by != std::optional<int>(kTableId)) continue;
    for (const auto& other : state.objects) {
      if (!other.held() && other.supported_by == std::optional<int>(o.id)) {
        bases.push_back(o.id);
        break;
      }
    }
  }
  if (bases.empty()) return false;
  int base = bases[rng.uniform_index(bases.size())];

  // Everything above the base scatters to the table.
  std::vector<int> above;
  for (const auto& o : state.objects) {
    if (!o.held() && o.id != base && supported_through(state, o.id, base)) above.push_back(o.id);
  }
  std::sort(above.begin(), above.end());
  for (int id : above) {
    ObjectState* o = state.find_object(id);
    bool placed = false;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      double x = rng.uniform(-0.8, 0.8);
      double y = rng.uniform(-0.85, 0.15);
      if (!placement_ok(state, x, y)) continue;
      o->position = {x, y, o->height};
      o->supported_by = kTableId;
      placed = true;
      break;
    }
    if (!placed) throw std::runtime_error("unsatisfiable layout: adversary scatter failed");
  }
  return true;
}

Observation observe(const WorldState& state) {
  int slots = state.object_slots + static_cast<int>(state.containers.size());
  Observation obs(3 * slots + 1, kSentinel);
  const Vec3& g = state.gripper.position;
  for (const auto& o : state.objects) {
    obs[3 * o.id] = o.position.x - g.x;
    obs[3 * o.id + 1] = o.position.y - g.y;
    obs[3 * o.id + 2] = o.position.z - g.z;
  }
  for (const auto& c : state.containers) {
    obs[3 * c.id] = c.position.x - g.x;
    obs[3 * c.id + 1] = c.position.y - g.y;
    obs[3 * c.id + 2] = c.position.z - g.z;
  }
  obs.back() = state.gripper.closed ? 0.0 : 1.0;
  return obs;
}

bool supported_through(const WorldState& state, int object_id, int ancestor) {
  int cur = object_id;
  for (int hops = 0; hops < 1024; ++hops) {
    const ObjectState* o = state.find_object(cur);
    if (!o || !o->supported_by) return false;
    int sup = *o->supported_by;
    if (sup == ancestor) return true;
    if (sup == kTableId || sup >= state.object_slots) return false;
    cur = sup;
  }
  return false;
}

std::optional<int> chain_root(const WorldState& state, int object_id) {
  int cur = object_id;
  for (int hops = 0; hops < 1024; ++hops) {
    const ObjectState* o = state.find_object(cur);
    if (!o) return kTableId;
    if (!o->supported_by) return std::nullopt;  // held
    int sup = *o->supported_by;
    if (sup == kTableId) return kTableId;
    if (sup >= state.object_slots) return sup;  // container
    cur = sup;
  }
  return kTableId;
}

}  // namespace ntp::sim
