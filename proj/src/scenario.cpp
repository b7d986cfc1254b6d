#include "hecta/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hecta {

using json = nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

std::string cell_path(const std::string& base, std::size_t i) {
    return base + "[" + std::to_string(i) + "]";
}

}  // namespace

double distance(Cell a, Cell b) {
    const double dr = a.row - b.row;
    const double dc = a.col - b.col;
    return std::sqrt(dr * dr + dc * dc);
}

EntityClass serving_class(TaskType type) {
    switch (type) {
        case TaskType::Aerial: return EntityClass::Uav;
        case TaskType::Ground: return EntityClass::Ugv;
        case TaskType::Detailed: return EntityClass::Worker;
    }
    return EntityClass::Worker;
}

std::string_view to_string(EntityClass c) {
    switch (c) {
        case EntityClass::Worker: return "worker";
        case EntityClass::Uav: return "uav";
        case EntityClass::Ugv: return "ugv";
    }
    return "?";
}

std::string_view to_string(TaskType t) {
    switch (t) {
        case TaskType::Aerial: return "aerial";
        case TaskType::Ground: return "ground";
        case TaskType::Detailed: return "detailed";
    }
    return "?";
}

EntityClass parse_entity_class(std::string_view s) {
    if (s == "worker") return EntityClass::Worker;
    if (s == "uav") return EntityClass::Uav;
    if (s == "ugv") return EntityClass::Ugv;
    throw std::invalid_argument("unknown entity class '" + std::string(s) + "'");
}

TaskType parse_task_type(std::string_view s) {
    if (s == "aerial") return TaskType::Aerial;
    if (s == "ground") return TaskType::Ground;
    if (s == "detailed") return TaskType::Detailed;
    throw std::invalid_argument("unknown task type '" + std::string(s) + "'");
}

void validate(const ScenarioSpec& spec) {
    if (spec.grid_width <= 0) throw ParseError("grid.width", "must be positive");
    if (spec.grid_height <= 0) throw ParseError("grid.height", "must be positive");
    if (spec.time_limit < 1) throw ParseError("time_limit", "must be >= 1");

    std::vector<char> obstacle(spec.cell_count(), 0);
    for (std::size_t i = 0; i < spec.obstacles.size(); ++i) {
        const Cell c = spec.obstacles[i];
        if (!spec.in_bounds(c)) throw ParseError(cell_path("obstacles", i), "out of bounds");
        if (obstacle[spec.index_of(c)]) throw ParseError(cell_path("obstacles", i), "duplicate cell");
        obstacle[spec.index_of(c)] = 1;
    }

    if (spec.tasks.empty()) throw ParseError("tasks", "at least one task is required");
    std::vector<char> task(spec.cell_count(), 0);
    for (std::size_t i = 0; i < spec.tasks.size(); ++i) {
        const TaskSpec& t = spec.tasks[i];
        const std::string path = cell_path("tasks", i);
        if (!spec.in_bounds(t.location)) throw ParseError(path + ".location", "out of bounds");
        if (obstacle[spec.index_of(t.location)])
            throw ParseError(path + ".location", "task placed on an obstacle cell (obstacle/task exclusivity)");
        if (task[spec.index_of(t.location)]) throw ParseError(path + ".location", "two tasks share a cell");
        task[spec.index_of(t.location)] = 1;
        if (t.duration < 1) throw ParseError(path + ".duration", "must be >= 1");
    }

    if (spec.entities.empty()) throw ParseError("entities", "at least one entity is required");
    for (std::size_t i = 0; i < spec.entities.size(); ++i) {
        const EntitySpec& e = spec.entities[i];
        const std::string path = cell_path("entities", i);
        if (!spec.in_bounds(e.start)) throw ParseError(path + ".start", "out of bounds");
        if (obstacle[spec.index_of(e.start)]) throw ParseError(path + ".start", "entity starts on an obstacle");
        if (!(e.move_radius > 0.0)) throw ParseError(path + ".move_radius", "must be > 0");
        if (e.entity_class == EntityClass::Uav) {
            if (!(e.power_consumption > 0.0 && e.power_consumption <= 1.0))
                throw ParseError(path + ".power_consumption", "UAV consumption must be in (0, 1]");
        } else if (e.power_consumption != 0.0) {
            throw ParseError(path + ".power_consumption", "only UAVs consume power");
        }
        if (e.entity_class == EntityClass::Ugv) {
            if (!(e.detect_radius >= 0.0)) throw ParseError(path + ".detect_radius", "must be >= 0");
        } else if (e.detect_radius != 0.0) {
            throw ParseError(path + ".detect_radius", "only UGVs detect UAV power");
        }
    }
}

bool has_unreachable_tasks(const ScenarioSpec& spec) {
    for (const auto& t : spec.tasks) {
        const EntityClass need = serving_class(t.type);
        const bool served = std::any_of(spec.entities.begin(), spec.entities.end(),
                                        [&](const EntitySpec& e) { return e.entity_class == need; });
        if (!served) return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json cell_json(Cell c) { return json::array({c.row, c.col}); }

Cell cell_from(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
        throw ParseError(path, "expected [row, col] integer pair");
    return {j[0].get<int>(), j[1].get<int>()};
}

const json& field(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) throw ParseError(path.empty() ? key : path + "." + key, "missing");
    return obj.at(key);
}

double number_from(const json& j, const std::string& path) {
    if (!j.is_number()) throw ParseError(path, "expected a number");
    return j.get<double>();
}

int int_from(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ParseError(path, "expected an integer");
    return j.get<int>();
}

}  // namespace

std::string save_scenario(const ScenarioSpec& spec) {
    validate(spec);
    json doc;
    doc["version"] = kFormatVersion;
    doc["grid"] = {{"width", spec.grid_width}, {"height", spec.grid_height}};
    doc["time_limit"] = spec.time_limit;
    json obstacles = json::array();
    for (Cell c : spec.obstacles) obstacles.push_back(cell_json(c));
    doc["obstacles"] = std::move(obstacles);
    json tasks = json::array();
    for (const auto& t : spec.tasks) {
        tasks.push_back({{"location", cell_json(t.location)},
                         {"type", std::string(to_string(t.type))},
                         {"duration", t.duration}});
    }
    doc["tasks"] = std::move(tasks);
    json entities = json::array();
    for (const auto& e : spec.entities) {
        entities.push_back({{"class", std::string(to_string(e.entity_class))},
                            {"start", cell_json(e.start)},
                            {"move_radius", e.move_radius},
                            {"power_consumption", e.power_consumption},
                            {"detect_radius", e.detect_radius}});
    }
    doc["entities"] = std::move(entities);
    doc["seed"] = spec.seed;
    return doc.dump(1) + "\n";
}

ScenarioSpec load_scenario(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ParseError("$", std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("$", "expected an object");
    const int version = int_from(field(doc, "version", ""), "version");
    if (version != kFormatVersion) throw ParseError("version", "unsupported version " + std::to_string(version));

    ScenarioSpec spec;
    const json& grid = field(doc, "grid", "");
    spec.grid_width = int_from(field(grid, "width", "grid"), "grid.width");
    spec.grid_height = int_from(field(grid, "height", "grid"), "grid.height");
    spec.time_limit = int_from(field(doc, "time_limit", ""), "time_limit");

    const json& obstacles = field(doc, "obstacles", "");
    if (!obstacles.is_array()) throw ParseError("obstacles", "expected an array");
    for (std::size_t i = 0; i < obstacles.size(); ++i)
        spec.obstacles.push_back(cell_from(obstacles[i], cell_path("obstacles", i)));
    std::sort(spec.obstacles.begin(), spec.obstacles.end());

    const json& tasks = field(doc, "tasks", "");
    if (!tasks.is_array()) throw ParseError("tasks", "expected an array");
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const std::string path = cell_path("tasks", i);
        TaskSpec t;
        t.location = cell_from(field(tasks[i], "location", path), path + ".location");
        const json& type = field(tasks[i], "type", path);
        if (!type.is_string()) throw ParseError(path + ".type", "expected a string");
        try {
            t.type = parse_task_type(type.get<std::string>());
        } catch (const std::invalid_argument& e) {
            throw ParseError(path + ".type", e.what());
        }
        t.duration = int_from(field(tasks[i], "duration", path), path + ".duration");
        spec.tasks.push_back(t);
    }

    const json& entities = field(doc, "entities", "");
    if (!entities.is_array()) throw ParseError("entities", "expected an array");
    for (std::size_t i = 0; i < entities.size(); ++i) {
        const std::string path = cell_path("entities", i);
        const json& ej = entities[i];
        EntitySpec e;
        const json& cls = field(ej, "class", path);
        if (!cls.is_string()) throw ParseError(path + ".class", "expected a string");
        try {
            e.entity_class = parse_entity_class(cls.get<std::string>());
        } catch (const std::invalid_argument& ex) {
            throw ParseError(path + ".class", ex.what());
        }
        e.start = cell_from(field(ej, "start", path), path + ".start");
        e.move_radius = number_from(field(ej, "move_radius", path), path + ".move_radius");
        if (ej.contains("power_consumption"))
            e.power_consumption = number_from(ej.at("power_consumption"), path + ".power_consumption");
        if (ej.contains("detect_radius"))
            e.detect_radius = number_from(ej.at("detect_radius"), path + ".detect_radius");
        spec.entities.push_back(e);
    }

    const json& seed = field(doc, "seed", "");
    if (!seed.is_number_unsigned() && !seed.is_number_integer()) throw ParseError("seed", "expected an integer");
    spec.seed = seed.get<std::uint64_t>();

    validate(spec);
    return spec;
}

ScenarioSpec load_scenario_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open scenario file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_scenario(ss.str());
}

void save_scenario_file(const ScenarioSpec& spec, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write scenario file " + path);
    out << save_scenario(spec);
}

std::string scenario_hash(const ScenarioSpec& spec) {
    const std::string text = save_scenario(spec);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Generation

namespace {

using Rng = std::mt19937_64;

double sample(const Range& r, Rng& rng) {
    if (r.hi < r.lo) throw std::invalid_argument("range with hi < lo");
    if (r.hi == r.lo) return r.lo;
    return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

// Tracks which cells are still free for placement.
class Placer {
public:
    Placer(int width, int height) : width_(width), height_(height), taken_(width * height, 0) {}

    int free_count() const { return static_cast<int>(std::count(taken_.begin(), taken_.end(), 0)); }
    bool is_free(Cell c) const { return in_bounds(c) && !taken_[index(c)]; }
    void take(Cell c) { taken_[index(c)] = 1; }

    Cell uniform_free(Rng& rng) const {
        std::vector<int> free;
        for (int i = 0; i < static_cast<int>(taken_.size()); ++i)
            if (!taken_[i]) free.push_back(i);
        if (free.empty()) throw PlacementInfeasible("no free cell left");
        const int pick = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
        return {pick / width_, pick % width_};
    }

    // Draws `count` distinct free cells following `dist`, taking each.
    std::vector<Cell> place(int count, const DistributionKind& dist, Rng& rng) {
        if (count > free_count()) throw PlacementInfeasible("not enough free cells for placement");
        std::vector<Cell> out;
        out.reserve(count);
        if (dist.kind == DistributionKind::ClusteredCheckin) {
            if (dist.cluster_count <= 0) throw std::invalid_argument("cluster_count must be positive");
            const double spread = dist.spread > 0 ? dist.spread : std::max(width_, height_) / 8.0;
            std::vector<std::pair<double, double>> centers;
            for (int k = 0; k < dist.cluster_count; ++k) {
                centers.emplace_back(std::uniform_real_distribution<double>(0, height_ - 1)(rng),
                                     std::uniform_real_distribution<double>(0, width_ - 1)(rng));
            }
            std::normal_distribution<double> noise(0.0, spread);
            std::uniform_int_distribution<int> which(0, dist.cluster_count - 1);
            for (int i = 0; i < count; ++i) {
                bool placed = false;
                for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
                    const auto& [cr, cc] = centers[which(rng)];
                    const double dr = noise(rng);
                    const double dc = noise(rng);
                    const Cell c{static_cast<int>(std::lround(cr + dr)), static_cast<int>(std::lround(cc + dc))};
                    if (is_free(c)) {
                        take(c);
                        out.push_back(c);
                        placed = true;
                    }
                }
                if (!placed) {
                    const Cell c = uniform_free(rng);
                    take(c);
                    out.push_back(c);
                }
            }
            return out;
        }
        for (int i = 0; i < count; ++i) {
            const Cell c = uniform_free(rng);
            take(c);
            out.push_back(c);
        }
        return out;
    }

private:
    bool in_bounds(Cell c) const { return c.row >= 0 && c.row < height_ && c.col >= 0 && c.col < width_; }
    int index(Cell c) const { return c.row * width_ + c.col; }

    int width_;
    int height_;
    std::vector<char> taken_;
};

}  // namespace

ScenarioSpec generate_scenario(const GenerationParams& p, std::uint64_t seed) {
    if (p.grid_width <= 0 || p.grid_height <= 0) throw std::invalid_argument("grid dimensions must be positive");
    if (p.time_limit < 1) throw std::invalid_argument("time_limit must be >= 1");
    if (p.obstacle_density.lo < 0.0 || p.obstacle_density.hi > 1.0 || p.obstacle_density.hi < p.obstacle_density.lo)
        throw std::invalid_argument("obstacle density must lie in [0, 1]");
    if (p.uav_tasks < 0 || p.worker_tasks < 0 || p.ugv_tasks < 0 || p.task_count() <= 0)
        throw std::invalid_argument("task counts must be non-negative with a positive total");
    int duration_total = 0;
    for (const auto& bin : p.durations) {
        if (bin.duration < 1 || bin.count < 0) throw std::invalid_argument("invalid duration bin");
        duration_total += bin.count;
    }
    if (duration_total != p.task_count()) throw std::invalid_argument("duration counts must sum to the task count");

    int uavs = p.uav_count, workers = p.worker_count, ugvs = p.ugv_count;
    if (p.ratio_mode) {
        if (p.total_entities <= 0) throw std::invalid_argument("total_entities must be positive");
        uavs = static_cast<int>(std::lround(p.total_entities * 2.0 / 8.0));
        ugvs = static_cast<int>(std::lround(p.total_entities * 1.0 / 8.0));
        workers = p.total_entities - uavs - ugvs;
    }
    if (uavs < 0 || workers < 0 || ugvs < 0 || uavs + workers + ugvs == 0)
        throw std::invalid_argument("entity counts must be non-negative with a positive total");

    Rng rng(seed);
    ScenarioSpec spec;
    spec.grid_width = p.grid_width;
    spec.grid_height = p.grid_height;
    spec.time_limit = p.time_limit;
    spec.seed = seed;

    const int cells = p.grid_width * p.grid_height;
    const double density = sample(p.obstacle_density, rng);
    const int obstacle_count = static_cast<int>(std::lround(density * cells));
    if (obstacle_count + p.task_count() > cells)
        throw PlacementInfeasible("obstacle density too high to place all tasks");

    // Obstacles first, then tasks on the remaining cells.
    Placer placer(p.grid_width, p.grid_height);
    spec.obstacles = placer.place(obstacle_count, DistributionKind::uniform(), rng);
    std::sort(spec.obstacles.begin(), spec.obstacles.end());

    const std::vector<Cell> task_cells = placer.place(p.task_count(), p.task_distribution, rng);
    std::vector<TaskType> types;
    types.insert(types.end(), p.uav_tasks, TaskType::Aerial);
    types.insert(types.end(), p.worker_tasks, TaskType::Detailed);
    types.insert(types.end(), p.ugv_tasks, TaskType::Ground);
    std::shuffle(types.begin(), types.end(), rng);
    std::vector<int> durations;
    for (const auto& bin : p.durations) durations.insert(durations.end(), bin.count, bin.duration);
    std::shuffle(durations.begin(), durations.end(), rng);
    for (int i = 0; i < p.task_count(); ++i) spec.tasks.push_back({task_cells[i], types[i], durations[i]});

    // Entities may stand on task cells but never on obstacles.
    Placer entity_placer(p.grid_width, p.grid_height);
    for (Cell c : spec.obstacles) entity_placer.take(c);
    const int entity_total = uavs + workers + ugvs;
    std::vector<Cell> starts;
    if (p.entity_distribution.kind == DistributionKind::SinglePoint) {
        starts.assign(entity_total, entity_placer.uniform_free(rng));
    } else {
        if (entity_total > entity_placer.free_count())
            throw PlacementInfeasible("grid too small for the entity count");
        starts = entity_placer.place(entity_total, p.entity_distribution, rng);
    }

    int next = 0;
    auto add = [&](EntityClass cls, int count) {
        for (int i = 0; i < count; ++i) {
            EntitySpec e;
            e.entity_class = cls;
            e.start = starts[next++];
            switch (cls) {
                case EntityClass::Uav:
                    e.move_radius = sample(p.uav_radius, rng);
                    e.power_consumption = sample(p.uav_consumption, rng);
                    break;
                case EntityClass::Worker:
                    e.move_radius = sample(p.worker_radius, rng);
                    break;
                case EntityClass::Ugv:
                    e.move_radius = sample(p.ugv_radius, rng);
                    e.detect_radius = sample(p.ugv_detect, rng);
                    break;
            }
            spec.entities.push_back(e);
        }
    };
    add(EntityClass::Uav, uavs);
    add(EntityClass::Worker, workers);
    add(EntityClass::Ugv, ugvs);

    validate(spec);
    return spec;
}

// ---------------------------------------------------------------------------
// Perturbation

std::string_view to_string(VariationKind kind) {
    switch (kind) {
        case VariationKind::TaskExecutionTime: return "task_execution_time";
        case VariationKind::TaskType: return "task_type";
        case VariationKind::ObstaclePosition: return "obstacle_position";
        case VariationKind::EntityPosition: return "entity_position";
    }
    return "?";
}

VariationKind parse_variation_kind(std::string_view s) {
    for (VariationKind k : all_variation_kinds())
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown variation kind '" + std::string(s) + "'");
}

const std::vector<VariationKind>& all_variation_kinds() {
    static const std::vector<VariationKind> kinds{VariationKind::TaskExecutionTime, VariationKind::TaskType,
                                                  VariationKind::ObstaclePosition, VariationKind::EntityPosition};
    return kinds;
}

ScenarioSpec perturb_scenario(const ScenarioSpec& base, VariationKind kind, std::uint64_t seed) {
    validate(base);
    ScenarioSpec out = base;
    Rng rng(seed);
    switch (kind) {
        case VariationKind::TaskExecutionTime: {
            std::vector<int> durations;
            for (const auto& t : base.tasks) durations.push_back(t.duration);
            std::shuffle(durations.begin(), durations.end(), rng);
            for (std::size_t i = 0; i < out.tasks.size(); ++i) out.tasks[i].duration = durations[i];
            break;
        }
        case VariationKind::TaskType: {
            std::vector<TaskType> types;
            for (const auto& t : base.tasks) types.push_back(t.type);
            std::shuffle(types.begin(), types.end(), rng);
            for (std::size_t i = 0; i < out.tasks.size(); ++i) out.tasks[i].type = types[i];
            break;
        }
        case VariationKind::ObstaclePosition: {
            Placer placer(base.grid_width, base.grid_height);
            for (const auto& t : base.tasks) placer.take(t.location);
            for (const auto& e : base.entities) placer.take(e.start);
            const int count = static_cast<int>(base.obstacles.size());
            if (count > placer.free_count()) throw PlacementInfeasible("no room to move obstacles");
            out.obstacles = placer.place(count, DistributionKind::uniform(), rng);
            std::sort(out.obstacles.begin(), out.obstacles.end());
            break;
        }
        case VariationKind::EntityPosition: {
            Placer placer(base.grid_width, base.grid_height);
            for (Cell c : base.obstacles) placer.take(c);
            const int count = static_cast<int>(base.entities.size());
            if (count > placer.free_count()) throw PlacementInfeasible("grid too small for the entity count");
            const std::vector<Cell> starts = placer.place(count, DistributionKind::uniform(), rng);
            for (int i = 0; i < count; ++i) out.entities[i].start = starts[i];
            break;
        }
    }
    validate(out);
    return out;
}

}  // namespace hecta
