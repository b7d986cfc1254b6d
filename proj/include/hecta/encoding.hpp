#pragma once

#include <array>
#include <ostream>

#include <Eigen/Core>

#include "hecta/world.hpp"

namespace hecta {

// Channel layout of the global state planes.
enum GlobalPlane : int {
    kObstaclePlane = 0,
    kAerialTaskPlane = 1,
    kGroundTaskPlane = 2,
    kDetailedTaskPlane = 3,
    kAgentPlane = 4,
    kDurationPlane = 5,
    kOwnershipPlane = 6,
};
inline constexpr int kGlobalChannels = 7;

enum LocalPlane : int { kPositionPlane = 0, kRangePlane = 1, kPowerPlane = 2 };
inline constexpr int kLocalChannels = 3;

// Planes are stored channel-major, then row-major: index = (c * H + r) * W + col.
struct GlobalStateTensor {
    int height = 0;
    int width = 0;
    Eigen::VectorXd planes;

    double at(int channel, int row, int col) const { return planes((channel * height + row) * width + col); }
};

struct LocalObsTensor {
    int height = 0;
    int width = 0;
    Eigen::VectorXd planes;
    Eigen::VectorXd id_onehot;
    std::array<double, 2> urge{0.0, 0.0};  // (power, consumption), zero for non-UAVs

    double at(int channel, int row, int col) const { return planes((channel * height + row) * width + col); }
    bool operator==(const LocalObsTensor& o) const {
        return height == o.height && width == o.width && planes == o.planes && id_onehot == o.id_onehot &&
               urge == o.urge;
    }
};

GlobalStateTensor encode_global(const World& world);
LocalObsTensor encode_local(const World& world, int entity_id);

// Same encodings from a bare state snapshot (as kept in replay). `mask` is the
// entity's movable-range mask over all cells.
GlobalStateTensor encode_global(const ScenarioSpec& spec, const std::vector<EntityState>& entities,
                                const std::vector<TaskState>& tasks);
LocalObsTensor encode_local(const ScenarioSpec& spec, int entity_id, const EntityState& state,
                            const std::vector<char>& mask);

// The observation function is deterministic: all mass sits on the encoding of the
// post-transition world, independent of the action taken.
LocalObsTensor observe(const World& next_world, int entity_id, Cell action);

// Debug dump: one CSV grid block per plane.
void dump_planes_csv(std::ostream& out, const Eigen::VectorXd& planes, int channels, int height, int width);

}  // namespace hecta
