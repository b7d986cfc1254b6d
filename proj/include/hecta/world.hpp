#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <vector>

#include "hecta/scenario.hpp"

namespace hecta {

struct EntityState {
    Cell position;
    double power = 0.0;  // UAVs only, in [0, 1]
    bool stranded = false;

    bool operator==(const EntityState&) const = default;
};

struct TaskState {
    int remaining = 0;
    std::optional<int> owner;

    bool operator==(const TaskState&) const = default;
};

// One target cell per entity, indexed by entity id.
using JointAction = std::vector<Cell>;

struct StepOutcome {
    double reward = 0.0;
    int completed_this_step = 0;
    bool invalid_action = false;
    bool done = false;
};

// Power comparisons tolerate accumulated rounding from repeated subtraction.
inline constexpr double kPowerEpsilon = 1e-9;
inline constexpr double kInvalidActionPenalty = -10.0;

class World {
public:
    explicit World(ScenarioSpec spec, bool hard_cooperative = true);

    const ScenarioSpec& scenario() const { return spec_; }
    int entity_count() const { return static_cast<int>(entities_.size()); }
    int task_count() const { return static_cast<int>(tasks_.size()); }
    int cell_count() const { return spec_.cell_count(); }

    // Current sensing period, 1..time_limit.
    int t() const { return t_; }
    bool done() const { return done_; }
    bool hard_cooperative() const { return hard_cooperative_; }

    const std::vector<EntityState>& entities() const { return entities_; }
    const std::vector<TaskState>& tasks() const { return tasks_; }
    const EntityState& entity(int id) const;
    int completed_count() const { return completed_; }
    int remaining_count() const { return task_count() - completed_; }

    bool is_obstacle(Cell c) const { return obstacle_[spec_.index_of(c)] != 0; }
    // Index of the task at `c`, or -1.
    int task_at(Cell c) const { return task_index_[spec_.index_of(c)]; }

    bool is_stranded(int id) const;
    std::vector<Cell> movable_range(int id) const;
    // Row-major 0/1 mask over all cells, equal to movable_range.
    std::vector<char> movable_mask(int id) const;
    bool can_reach(int id, Cell target) const;

    // UGV id -> forced target for UGVs that must swap a stranded UAV's battery.
    std::map<int, Cell> hard_coop_overrides() const;

    StepOutcome step(const JointAction& action);

    double tcr() const;
    double positive_reward_probability() const;

    // The task each entity sensed during the last step, or -1.
    const std::vector<int>& acting_tasks() const { return acting_task_; }
    // Entities that spent the last step on a forced battery swap.
    const std::vector<char>& rescuing() const { return rescuing_; }

    bool operator==(const World& other) const;

private:
    void check_id(int id) const;

    ScenarioSpec spec_;
    bool hard_cooperative_;
    std::vector<char> obstacle_;
    std::vector<int> task_index_;

    int t_ = 1;
    bool done_ = false;
    std::vector<EntityState> entities_;
    std::vector<TaskState> tasks_;
    int completed_ = 0;
    std::vector<int> acting_task_;
    std::vector<char> rescuing_;
};

std::pair<World, StepOutcome> step(World world, const JointAction& action);

// CSV rows of one rollout: step, entity_id, class, row, col, power, acting_task_id,
// reward, completed_cumulative.
class TrajectoryWriter {
public:
    explicit TrajectoryWriter(std::ostream& out);
    // Writes the initial positions as step 0.
    void write_initial(const World& world);
    void write_step(const World& world, const StepOutcome& outcome);

private:
    void rows(const World& world, int step, double reward);
    std::ostream& out_;
};

}  // namespace hecta
