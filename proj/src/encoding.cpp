#include "hecta/encoding.hpp"

#include <stdexcept>
#include <string>

namespace hecta {

namespace {

int plane_for(TaskType type) {
    switch (type) {
        case TaskType::Aerial: return kAerialTaskPlane;
        case TaskType::Ground: return kGroundTaskPlane;
        case TaskType::Detailed: return kDetailedTaskPlane;
    }
    return kDetailedTaskPlane;
}

}  // namespace

GlobalStateTensor encode_global(const World& world) {
    return encode_global(world.scenario(), world.entities(), world.tasks());
}

GlobalStateTensor encode_global(const ScenarioSpec& spec, const std::vector<EntityState>& entities,
                                const std::vector<TaskState>& tasks) {
    GlobalStateTensor g;
    g.height = spec.grid_height;
    g.width = spec.grid_width;
    const int cells = spec.cell_count();
    g.planes = Eigen::VectorXd::Zero(kGlobalChannels * cells);
    auto idx = [&](int channel, Cell c) { return channel * cells + spec.index_of(c); };

    for (Cell c : spec.obstacles) g.planes(idx(kObstaclePlane, c)) = 1.0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const TaskState& state = tasks[i];
        if (state.remaining == 0) continue;
        const TaskSpec& task = spec.tasks[i];
        g.planes(idx(plane_for(task.type), task.location)) = 1.0;
        g.planes(idx(kDurationPlane, task.location)) = static_cast<double>(state.remaining) / task.duration;
        if (state.owner) g.planes(idx(kOwnershipPlane, task.location)) = 1.0;
    }
    for (const auto& e : entities) g.planes(idx(kAgentPlane, e.position)) += 1.0;
    return g;
}

LocalObsTensor encode_local(const World& world, int entity_id) {
    return encode_local(world.scenario(), entity_id, world.entity(entity_id), world.movable_mask(entity_id));
}

LocalObsTensor encode_local(const ScenarioSpec& spec, int entity_id, const EntityState& state,
                            const std::vector<char>& mask) {
    if (entity_id < 0 || entity_id >= static_cast<int>(spec.entities.size()))
        throw std::out_of_range("unknown entity id " + std::to_string(entity_id));
    const EntitySpec& es = spec.entities[entity_id];
    LocalObsTensor o;
    o.height = spec.grid_height;
    o.width = spec.grid_width;
    const int cells = spec.cell_count();
    o.planes = Eigen::VectorXd::Zero(kLocalChannels * cells);
    o.planes(kPositionPlane * cells + spec.index_of(state.position)) = 1.0;
    for (int i = 0; i < cells; ++i)
        if (mask[i]) o.planes(kRangePlane * cells + i) = 1.0;
    o.id_onehot = Eigen::VectorXd::Zero(static_cast<int>(spec.entities.size()));
    o.id_onehot(entity_id) = 1.0;
    if (es.entity_class == EntityClass::Uav) {
        o.planes(kPowerPlane * cells + spec.index_of(state.position)) = state.power;
        o.urge = {state.power, es.power_consumption};
    }
    return o;
}

LocalObsTensor observe(const World& next_world, int entity_id, Cell /*action*/) {
    return encode_local(next_world, entity_id);
}

void dump_planes_csv(std::ostream& out, const Eigen::VectorXd& planes, int channels, int height, int width) {
    for (int c = 0; c < channels; ++c) {
        out << "# plane " << c << "\n";
        for (int r = 0; r < height; ++r) {
            for (int col = 0; col < width; ++col) {
                if (col) out << ",";
                out << planes((c * height + r) * width + col);
            }
            out << "\n";
        }
    }
}

}  // namespace hecta
