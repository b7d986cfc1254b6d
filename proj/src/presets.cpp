#include "hecta/scenario.hpp"

#include <cmath>

namespace hecta {

namespace {

Range fixed(double v) { return {v, v}; }

Range obstacle_count_density(int count, int width, int height) {
    return fixed(static_cast<double>(count) / (width * height));
}

// Scenario 1 of the simulation table: one shared start, identical capabilities.
GenerationParams scenario_one() {
    GenerationParams p;
    p.grid_width = p.grid_height = 16;
    p.time_limit = 9;
    p.obstacle_density = obstacle_count_density(20, 16, 16);
    p.uav_tasks = 30;
    p.worker_tasks = 75;
    p.ugv_tasks = 15;
    p.durations = {{1, 96}, {2, 24}};
    p.task_distribution = DistributionKind::uniform();
    p.uav_count = 6;
    p.worker_count = 15;
    p.ugv_count = 3;
    p.entity_distribution = DistributionKind::single_point();
    p.uav_radius = fixed(8);
    p.worker_radius = fixed(3);
    p.ugv_radius = fixed(5);
    p.uav_consumption = fixed(0.3);
    p.ugv_detect = fixed(10);
    return p;
}

// Scenarios 2..10 share heterogeneous capability ranges.
GenerationParams scenario_two() {
    GenerationParams p = scenario_one();
    p.entity_distribution = DistributionKind::uniform();
    p.uav_radius = {7, 9};
    p.worker_radius = {2, 4};
    p.ugv_radius = {4, 6};
    p.uav_consumption = {0.2, 0.4};
    return p;
}

// 80/20 split between one- and two-period tasks, rounded.
std::vector<DurationBin> short_long_split(int total) {
    const int longer = static_cast<int>(std::lround(total * 0.2));
    return {{1, total - longer}, {2, longer}};
}

std::optional<GenerationParams> base_variant(int scenario, int variant) {
    if (variant < 1 || variant > 3) return std::nullopt;
    const int v = variant - 1;
    switch (scenario) {
        case 1:
            if (variant != 1) return std::nullopt;
            return scenario_one();
        case 2:
            if (variant != 1) return std::nullopt;
            return scenario_two();
        case 3: {
            if (variant != 1) return std::nullopt;
            GenerationParams p = scenario_two();
            p.entity_distribution = DistributionKind::clustered();
            return p;
        }
        case 4: {
            if (variant != 1) return std::nullopt;
            GenerationParams p = scenario_two();
            p.entity_distribution = DistributionKind::clustered();
            p.task_distribution = DistributionKind::clustered();
            return p;
        }
        case 5: {
            GenerationParams p = scenario_two();
            const int counts[3][3] = {{4, 10, 2}, {6, 15, 3}, {8, 20, 4}};
            p.uav_count = counts[v][0];
            p.worker_count = counts[v][1];
            p.ugv_count = counts[v][2];
            return p;
        }
        case 6: {
            GenerationParams p = scenario_two();
            const int sizes[3] = {12, 16, 20};
            p.grid_width = p.grid_height = sizes[v];
            p.obstacle_density = obstacle_count_density(20, sizes[v], sizes[v]);
            return p;
        }
        case 7: {
            GenerationParams p = scenario_two();
            const int types[3][3] = {{24, 60, 12}, {30, 75, 15}, {36, 90, 18}};
            p.uav_tasks = types[v][0];
            p.worker_tasks = types[v][1];
            p.ugv_tasks = types[v][2];
            p.durations = short_long_split(p.task_count());
            return p;
        }
        case 8: {
            GenerationParams p = scenario_two();
            const std::vector<DurationBin> mixes[3] = {
                {{1, 72}, {2, 48}}, {{1, 96}, {2, 24}}, {{1, 72}, {2, 36}, {3, 12}}};
            p.durations = mixes[v];
            return p;
        }
        case 9: {
            if (variant > 2) return std::nullopt;
            GenerationParams p = scenario_two();
            const int types[2][3] = {{40, 40, 40}, {30, 75, 15}};
            p.uav_tasks = types[v][0];
            p.worker_tasks = types[v][1];
            p.ugv_tasks = types[v][2];
            return p;
        }
        case 10: {
            GenerationParams p = scenario_two();
            const int obstacles[3] = {20, 40, 60};
            p.obstacle_density = obstacle_count_density(obstacles[v], 16, 16);
            return p;
        }
        default:
            return std::nullopt;
    }
}

GenerationParams zhongfu_params() {
    GenerationParams p;
    p.grid_width = p.grid_height = 20;
    p.time_limit = 12;
    p.obstacle_density = fixed(0.15);
    p.uav_tasks = 19;
    p.worker_tasks = 24;
    p.ugv_tasks = 11;
    p.durations = {{1, 45}, {2, 9}};
    p.task_distribution = DistributionKind::clustered();
    p.uav_count = 2;
    p.worker_count = 2;
    p.ugv_count = 2;
    p.entity_distribution = DistributionKind::single_point();
    p.uav_radius = fixed(10);
    p.worker_radius = fixed(3);
    p.ugv_radius = fixed(7);
    p.uav_consumption = fixed(0.2);
    p.ugv_detect = fixed(10);
    return p;
}

// Small acceptance map: 8x8, 2 workers, 1 UAV, 1 UGV, twelve tasks with the
// 80/20 one/two-period mix, all entities starting together.
GenerationParams desk_params() {
    GenerationParams p = scenario_one();
    p.grid_width = p.grid_height = 8;
    p.time_limit = 9;
    p.obstacle_density = fixed(0.1);
    p.uav_tasks = 3;
    p.worker_tasks = 7;
    p.ugv_tasks = 2;
    p.durations = short_long_split(p.task_count());
    p.uav_count = 1;
    p.worker_count = 2;
    p.ugv_count = 1;
    return p;
}

}  // namespace

std::optional<GenerationParams> preset_params(std::string_view name) {
    if (name == "zhongfu") return zhongfu_params();
    if (name == "desk") return desk_params();
    if (!name.starts_with("sce")) return std::nullopt;
    std::string_view rest = name.substr(3);
    int scenario = 0;
    int variant = 1;
    const auto dash = rest.find('-');
    try {
        scenario = std::stoi(std::string(rest.substr(0, dash)));
        if (dash != std::string_view::npos) variant = std::stoi(std::string(rest.substr(dash + 1)));
    } catch (const std::exception&) {
        return std::nullopt;
    }
    return base_variant(scenario, variant);
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names{"sce1", "sce2", "sce3", "sce4"};
    for (int s = 5; s <= 10; ++s) {
        for (int v = 1; v <= 3; ++v) {
            if (base_variant(s, v)) names.push_back("sce" + std::to_string(s) + "-" + std::to_string(v));
        }
    }
    names.push_back("zhongfu");
    names.push_back("desk");
    return names;
}

ScenarioSpec zhongfu_scenario() { return generate_scenario(zhongfu_params(), kZhongfuSeed); }

ScenarioSpec desk_scenario() { return generate_scenario(desk_params(), kDeskSeed); }

}  // namespace hecta
