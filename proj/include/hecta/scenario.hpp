#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hecta {

struct Cell {
    int row = 0;
    int col = 0;

    auto operator<=>(const Cell&) const = default;
};

double distance(Cell a, Cell b);

enum class EntityClass { Worker, Uav, Ugv };

// Aerial tasks are served by UAVs, Ground by UGVs and Detailed by human workers.
enum class TaskType { Aerial, Ground, Detailed };

EntityClass serving_class(TaskType type);
std::string_view to_string(EntityClass c);
std::string_view to_string(TaskType t);
EntityClass parse_entity_class(std::string_view s);
TaskType parse_task_type(std::string_view s);

struct TaskSpec {
    Cell location;
    TaskType type = TaskType::Detailed;
    int duration = 1;

    bool operator==(const TaskSpec&) const = default;
};

struct EntitySpec {
    EntityClass entity_class = EntityClass::Worker;
    Cell start;
    double move_radius = 1.0;
    double power_consumption = 0.0;  // UAV only
    double detect_radius = 0.0;      // UGV only

    bool operator==(const EntitySpec&) const = default;
};

struct ScenarioSpec {
    int grid_width = 0;
    int grid_height = 0;
    int time_limit = 1;
    std::vector<Cell> obstacles;  // kept sorted row-major
    std::vector<TaskSpec> tasks;
    std::vector<EntitySpec> entities;
    std::uint64_t seed = 0;

    int cell_count() const { return grid_width * grid_height; }
    int index_of(Cell c) const { return c.row * grid_width + c.col; }
    Cell cell_at(int index) const { return {index / grid_width, index % grid_width}; }
    bool in_bounds(Cell c) const {
        return c.row >= 0 && c.row < grid_height && c.col >= 0 && c.col < grid_width;
    }

    bool operator==(const ScenarioSpec&) const = default;
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::string path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

class PlacementInfeasible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Throws ParseError naming the offending field when an invariant is broken.
void validate(const ScenarioSpec& spec);

// True when some task type has no entity able to serve it.
bool has_unreachable_tasks(const ScenarioSpec& spec);

std::string save_scenario(const ScenarioSpec& spec);
ScenarioSpec load_scenario(std::string_view document);
ScenarioSpec load_scenario_file(const std::string& path);
void save_scenario_file(const ScenarioSpec& spec, const std::string& path);

// Hash of the canonical serialized form, for manifests.
std::string scenario_hash(const ScenarioSpec& spec);

// ---------------------------------------------------------------------------
// Generation

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct DistributionKind {
    enum Kind { SinglePoint, UniformRandom, ClusteredCheckin };
    Kind kind = UniformRandom;
    int cluster_count = 5;
    double spread = 0.0;  // 0 selects max(width, height) / 8

    static DistributionKind single_point() { return {SinglePoint}; }
    static DistributionKind uniform() { return {UniformRandom}; }
    static DistributionKind clustered(int clusters = 5, double spread = 0.0) {
        return {ClusteredCheckin, clusters, spread};
    }
};

struct DurationBin {
    int duration = 1;
    int count = 0;
};

struct GenerationParams {
    int grid_width = 16;
    int grid_height = 16;
    int time_limit = 9;

    // Density is drawn uniformly from the range; the cell count is rounded.
    Range obstacle_density{0.075, 0.225};

    int uav_tasks = 30;
    int worker_tasks = 75;
    int ugv_tasks = 15;
    std::vector<DurationBin> durations{{1, 96}, {2, 24}};
    DistributionKind task_distribution = DistributionKind::uniform();

    // With ratio_mode the counts are derived from total_entities at 2:5:1.
    bool ratio_mode = false;
    int total_entities = 24;
    int uav_count = 6;
    int worker_count = 15;
    int ugv_count = 3;
    DistributionKind entity_distribution = DistributionKind::uniform();

    Range uav_radius{8, 8};
    Range worker_radius{3, 3};
    Range ugv_radius{5, 5};
    Range uav_consumption{0.3, 0.3};
    Range ugv_detect{10, 10};

    int task_count() const { return uav_tasks + worker_tasks + ugv_tasks; }
};

// Deterministic in (params, seed). Throws std::invalid_argument for inconsistent
// params and PlacementInfeasible when the grid cannot hold what was requested.
ScenarioSpec generate_scenario(const GenerationParams& params, std::uint64_t seed);

enum class VariationKind { TaskExecutionTime, TaskType, ObstaclePosition, EntityPosition };

std::string_view to_string(VariationKind kind);
VariationKind parse_variation_kind(std::string_view s);
const std::vector<VariationKind>& all_variation_kinds();

// Resamples only the named aspect of `base`; everything else is copied.
ScenarioSpec perturb_scenario(const ScenarioSpec& base, VariationKind kind, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Presets: "sce1".."sce4", "sce5-1".."sce10-3" (bare "sceN" means "sceN-1"), "zhongfu", "desk".

std::optional<GenerationParams> preset_params(std::string_view name);
std::vector<std::string> preset_names();

// Bundled case-study map: 20x20, 54 tasks, 2 workers / 2 UGVs / 2 UAVs.
ScenarioSpec zhongfu_scenario();
inline constexpr std::uint64_t kZhongfuSeed = 20240611;

// Fixed 8x8 map used by the desk-scale learning checks.
ScenarioSpec desk_scenario();
inline constexpr std::uint64_t kDeskSeed = 1;

}  // namespace hecta
