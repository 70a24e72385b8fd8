#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ntp/util.hpp"

namespace ntp::sim {

// Table frame: x,y in [-1,1] m, z >= 0 at the table surface.
constexpr double kWorkspaceBound = 1.0;
constexpr double kHoverOffset = 0.05;        // gripper parks this far above the target surface
constexpr double kGraspTolerance = 0.02;     // lateral reach of the gripper jaws
constexpr double kSupportRadius = 0.025;     // lateral capture radius of a resting surface
constexpr double kMinSeparation = 0.12;      // rejection-sampling separation at reset
constexpr double kSentinel = 1000.0;         // observation filler for absent object slots
constexpr int kTableId = -1;

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }
};

inline double xy_dist(const Vec3& a, const Vec3& b) {
  double dx = a.x - b.x, dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

// position is the center of the top face; a cube of height h resting on the
// table has position.z == h.
struct ObjectState {
  int id = 0;
  int category = 0;
  double height = 0.05;
  Vec3 position;
  // kTableId, another object id, or a container id; nullopt while held.
  std::optional<int> supported_by = kTableId;

  bool held() const { return !supported_by.has_value(); }
  bool operator==(const ObjectState& o) const {
    return id == o.id && category == o.category && height == o.height && position == o.position &&
           supported_by == o.supported_by;
  }
};

// position is the center of the floor surface objects rest on.
struct ContainerState {
  int id = 0;
  Vec3 position;
  double footprint_radius = 0.07;
  bool operator==(const ContainerState& o) const {
    return id == o.id && position == o.position && footprint_radius == o.footprint_radius;
  }
};

struct GripperState {
  Vec3 position;
  bool closed = false;
  std::optional<int> held;
  bool operator==(const GripperState& o) const {
    return position == o.position && closed == o.closed && held == o.held;
  }
};

struct WorldState {
  std::vector<ObjectState> objects;  // sorted by id; ids are canonical slots
  std::vector<ContainerState> containers;
  GripperState gripper;
  int object_slots = 0;  // canonical movable-object slot count (ids 0..object_slots-1)
  int64_t step_count = 0;
  Rng rng_state;

  const ObjectState* find_object(int id) const;
  ObjectState* find_object(int id);
  const ContainerState* find_container(int id) const;

  bool operator==(const WorldState& o) const {
    return objects == o.objects && containers == o.containers && gripper == o.gripper &&
           object_slots == o.object_slots && step_count == o.step_count && rng_state == o.rng_state;
  }
};

enum class Api { MoveTo, Grip, Release };

const char* api_name(Api api);

struct ApiEvent {
  int64_t step = 0;
  Api api = Api::MoveTo;
  std::optional<int> target;
  bool grasp_miss = false;
};

// One record per line: {"step":..,"api":"..","args":[..],"grasp_miss":..}
std::string api_log_to_jsonl(const std::vector<ApiEvent>& log);
std::vector<ApiEvent> api_log_from_jsonl(const std::string& text);

// Declarative reset request; taskgen builds one from a TaskInstance.
struct ResetSpec {
  struct Slot {
    int id;
    int category;
    double height;
  };
  std::vector<Slot> objects;  // present objects only, ids within [0, object_slots)
  std::vector<ContainerState> containers;
  int object_slots = 0;
  // spawn region for random placement
  double x_min = -0.8, x_max = 0.8;
  double y_min = -0.85, y_max = 0.15;
  Vec3 home = {0.0, -0.3, 0.30};
};

// Collision-free uniform random placement; deterministic in (spec, seed).
// Throws after 1000 rejection-sampling attempts for any object.
WorldState make_world(const ResetSpec& spec, uint64_t seed);

// Applies one API call in place and reports what happened. move_to requires
// a valid target over objects-union-containers; grip with nothing in reach is
// a recorded miss, not an error.
ApiEvent step_api(WorldState& state, Api api, std::optional<int> target = std::nullopt);

// With probability prob, picks one table-rooted stack of height >= 2
// uniformly at random and scatters its non-base objects to collision-free
// table poses. Returns true when a stack was toppled.
bool apply_adversary(WorldState& state, Rng& rng, double prob);

// Canonical-slot relative observation: per slot (dx,dy,dz) w.r.t. the
// gripper, sentinel-filled for absent object slots; container slots always
// present; final entry is the aperture (0 closed, 1 open).
using Observation = std::vector<double>;
Observation observe(const WorldState& state);

inline int observation_dim(int object_slots, int containers) {
  return 3 * (object_slots + containers) + 1;
}

// Top surface (z) and supporter id at a lateral position, considering only
// surfaces at or below max_z; excl is an object id to ignore (the held one).
struct Surface {
  double top = 0.0;
  int supporter = kTableId;
};
Surface surface_at(const WorldState& state, double x, double y, double max_z, int excl = -1000);

// Objects whose support chain passes through `ancestor` (object or container id).
bool supported_through(const WorldState& state, int object_id, int ancestor);

// Support chain root: container id, kTableId, or nullopt when held somewhere
// along the chain (held object).
std::optional<int> chain_root(const WorldState& state, int object_id);

}  // namespace ntp::sim
