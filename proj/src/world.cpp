#include "hecta/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace hecta {

namespace {

bool within(Cell a, Cell b, double radius) {
    const double dr = a.row - b.row;
    const double dc = a.col - b.col;
    return dr * dr + dc * dc <= radius * radius + 1e-9;
}

}  // namespace

World::World(ScenarioSpec spec, bool hard_cooperative)
    : spec_(std::move(spec)), hard_cooperative_(hard_cooperative) {
    validate(spec_);
    obstacle_.assign(spec_.cell_count(), 0);
    for (Cell c : spec_.obstacles) obstacle_[spec_.index_of(c)] = 1;
    task_index_.assign(spec_.cell_count(), -1);
    for (std::size_t i = 0; i < spec_.tasks.size(); ++i) {
        task_index_[spec_.index_of(spec_.tasks[i].location)] = static_cast<int>(i);
        tasks_.push_back({spec_.tasks[i].duration, std::nullopt});
    }
    for (const auto& e : spec_.entities) {
        EntityState s;
        s.position = e.start;
        s.power = e.entity_class == EntityClass::Uav ? 1.0 : 0.0;
        entities_.push_back(s);
    }
    for (int id = 0; id < entity_count(); ++id) entities_[id].stranded = is_stranded(id);
    acting_task_.assign(entities_.size(), -1);
    rescuing_.assign(entities_.size(), 0);
}

void World::check_id(int id) const {
    if (id < 0 || id >= entity_count()) throw std::out_of_range("unknown entity id " + std::to_string(id));
}

const EntityState& World::entity(int id) const {
    check_id(id);
    return entities_[id];
}

bool World::is_stranded(int id) const {
    check_id(id);
    const EntitySpec& e = spec_.entities[id];
    return e.entity_class == EntityClass::Uav && entities_[id].power < e.power_consumption - kPowerEpsilon;
}

std::vector<Cell> World::movable_range(int id) const {
    check_id(id);
    const Cell here = entities_[id].position;
    if (is_stranded(id)) return {here};
    const double radius = spec_.entities[id].move_radius;
    const int reach = static_cast<int>(std::floor(radius + 1e-9));
    std::vector<Cell> cells;
    for (int r = std::max(0, here.row - reach); r <= std::min(spec_.grid_height - 1, here.row + reach); ++r) {
        for (int c = std::max(0, here.col - reach); c <= std::min(spec_.grid_width - 1, here.col + reach); ++c) {
            const Cell cell{r, c};
            if (!is_obstacle(cell) && within(here, cell, radius)) cells.push_back(cell);
        }
    }
    return cells;
}

std::vector<char> World::movable_mask(int id) const {
    std::vector<char> mask(spec_.cell_count(), 0);
    for (Cell c : movable_range(id)) mask[spec_.index_of(c)] = 1;
    return mask;
}

bool World::can_reach(int id, Cell target) const {
    check_id(id);
    if (!spec_.in_bounds(target) || is_obstacle(target)) return false;
    const Cell here = entities_[id].position;
    if (is_stranded(id)) return target == here;
    return within(here, target, spec_.entities[id].move_radius);
}

std::map<int, Cell> World::hard_coop_overrides() const {
    std::map<int, Cell> forced;
    for (int uav = 0; uav < entity_count(); ++uav) {
        if (!is_stranded(uav)) continue;
        const Cell where = entities_[uav].position;
        const bool covered = std::any_of(forced.begin(), forced.end(),
                                         [&](const auto& kv) { return kv.second == where; });
        if (covered) continue;
        int best = -1;
        double best_distance = 0.0;
        for (int ugv = 0; ugv < entity_count(); ++ugv) {
            const EntitySpec& g = spec_.entities[ugv];
            if (g.entity_class != EntityClass::Ugv || forced.count(ugv)) continue;
            const Cell at = entities_[ugv].position;
            if (!within(at, where, g.detect_radius)) continue;
            const double d = distance(at, where);
            if (best < 0 || d < best_distance) {
                best = ugv;
                best_distance = d;
            }
        }
        if (best >= 0) forced[best] = where;
    }
    return forced;
}

StepOutcome World::step(const JointAction& action) {
    if (done_) throw std::logic_error("step called on a finished episode");
    if (static_cast<int>(action.size()) != entity_count())
        throw std::invalid_argument("joint action must hold one target per entity");
    for (Cell c : action)
        if (!spec_.in_bounds(c)) throw std::invalid_argument("joint action target out of bounds");

    StepOutcome outcome;
    std::vector<Cell> targets = action;
    std::fill(rescuing_.begin(), rescuing_.end(), 0);
    std::fill(acting_task_.begin(), acting_task_.end(), -1);

    if (hard_cooperative_) {
        for (const auto& [ugv, cell] : hard_coop_overrides()) {
            targets[ugv] = cell;
            rescuing_[ugv] = 1;
        }
    }

    // Forced swaps are mandated by the protocol and bypass the movement range.
    for (int id = 0; id < entity_count(); ++id) {
        if (rescuing_[id]) continue;
        if (!can_reach(id, targets[id])) {
            outcome.invalid_action = true;
            targets[id] = entities_[id].position;
        }
    }

    std::vector<char> moved(entities_.size(), 0);
    for (int id = 0; id < entity_count(); ++id) {
        moved[id] = targets[id] != entities_[id].position;
        entities_[id].position = targets[id];
    }

    for (int id = 0; id < entity_count(); ++id) {
        const EntitySpec& e = spec_.entities[id];
        if (e.entity_class != EntityClass::Uav) continue;
        EntityState& s = entities_[id];
        const bool with_ugv = std::any_of(spec_.entities.begin(), spec_.entities.end(), [&](const EntitySpec& g) {
            const auto gid = &g - spec_.entities.data();
            return g.entity_class == EntityClass::Ugv && entities_[gid].position == s.position;
        });
        if (with_ugv) {
            s.power = 1.0;
        } else if (moved[id]) {
            s.power = std::max(0.0, s.power - e.power_consumption);
        }
    }
    for (int id = 0; id < entity_count(); ++id) entities_[id].stranded = is_stranded(id);

    for (int i = 0; i < task_count(); ++i) {
        TaskState& task = tasks_[i];
        if (task.remaining == 0) continue;
        const TaskSpec& spec = spec_.tasks[i];
        const EntityClass need = serving_class(spec.type);

        if (task.owner && entities_[*task.owner].position != spec.location) {
            task.remaining = spec.duration;
            task.owner.reset();
        }
        if (!task.owner) {
            for (int id = 0; id < entity_count(); ++id) {
                if (spec_.entities[id].entity_class == need && entities_[id].position == spec.location &&
                    !rescuing_[id]) {
                    task.owner = id;
                    break;
                }
            }
        }
        if (!task.owner || rescuing_[*task.owner]) continue;

        acting_task_[*task.owner] = i;
        if (--task.remaining == 0) {
            task.owner.reset();
            ++completed_;
            ++outcome.completed_this_step;
        }
    }

    outcome.reward = outcome.invalid_action ? kInvalidActionPenalty : outcome.completed_this_step;
    done_ = t_ >= spec_.time_limit || completed_ == task_count();
    outcome.done = done_;
    if (!done_) ++t_;
    return outcome;
}

double World::tcr() const { return static_cast<double>(completed_) / task_count(); }

double World::positive_reward_probability() const {
    double p = 1.0;
    for (int id = 0; id < entity_count(); ++id)
        p *= static_cast<double>(movable_range(id).size()) / cell_count();
    return p;
}

bool World::operator==(const World& other) const {
    return spec_ == other.spec_ && hard_cooperative_ == other.hard_cooperative_ && t_ == other.t_ &&
           done_ == other.done_ && entities_ == other.entities_ && tasks_ == other.tasks_ &&
           completed_ == other.completed_;
}

std::pair<World, StepOutcome> step(World world, const JointAction& action) {
    StepOutcome outcome = world.step(action);
    return {std::move(world), outcome};
}

TrajectoryWriter::TrajectoryWriter(std::ostream& out) : out_(out) {
    out_ << "step,entity_id,class,row,col,power,acting_task_id,reward,completed_cumulative\n";
}

void TrajectoryWriter::write_initial(const World& world) { rows(world, 0, 0.0); }

void TrajectoryWriter::write_step(const World& world, const StepOutcome& outcome) {
    // t() has already advanced unless the episode ended.
    const int step = world.done() ? world.t() : world.t() - 1;
    rows(world, step, outcome.reward);
}

void TrajectoryWriter::rows(const World& world, int step, double reward) {
    char buf[256];
    for (int id = 0; id < world.entity_count(); ++id) {
        const EntityState& s = world.entity(id);
        const int acting = step == 0 ? -1 : world.acting_tasks()[id];
        std::snprintf(buf, sizeof buf, "%d,%d,%s,%d,%d,%.6g,%d,%g,%d\n", step, id,
                      std::string(to_string(world.scenario().entities[id].entity_class)).c_str(), s.position.row,
                      s.position.col, s.power, acting, reward, world.completed_count());
        out_ << buf;
    }
}

}  // namespace hecta
