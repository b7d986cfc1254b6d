#pragma once

#include <random>

#include "hecta/scenario.hpp"

namespace hecta::test {

inline ScenarioSpec blank(int height, int width, int time_limit = 9) {
    ScenarioSpec s;
    s.grid_height = height;
    s.grid_width = width;
    s.time_limit = time_limit;
    return s;
}

inline int add_worker(ScenarioSpec& s, Cell at, double radius = 3.0) {
    s.entities.push_back({EntityClass::Worker, at, radius, 0.0, 0.0});
    return static_cast<int>(s.entities.size()) - 1;
}

inline int add_uav(ScenarioSpec& s, Cell at, double radius = 8.0, double consumption = 0.3) {
    s.entities.push_back({EntityClass::Uav, at, radius, consumption, 0.0});
    return static_cast<int>(s.entities.size()) - 1;
}

inline int add_ugv(ScenarioSpec& s, Cell at, double radius = 5.0, double detect = 10.0) {
    s.entities.push_back({EntityClass::Ugv, at, radius, 0.0, detect});
    return static_cast<int>(s.entities.size()) - 1;
}

inline int add_task(ScenarioSpec& s, Cell at, TaskType type = TaskType::Detailed, int duration = 1) {
    s.tasks.push_back({at, type, duration});
    return static_cast<int>(s.tasks.size()) - 1;
}

// Small random mixed-class scenario, all classes present.
inline ScenarioSpec small_random(std::uint64_t seed, int size = 6, int time_limit = 6) {
    GenerationParams p;
    p.grid_width = p.grid_height = size;
    p.time_limit = time_limit;
    p.obstacle_density = {0.05, 0.15};
    p.uav_tasks = 2;
    p.worker_tasks = 3;
    p.ugv_tasks = 2;
    p.durations = {{1, 5}, {2, 2}};
    p.uav_count = 1;
    p.worker_count = 2;
    p.ugv_count = 1;
    p.entity_distribution = DistributionKind::uniform();
    p.uav_radius = {2, 4};
    p.worker_radius = {1, 3};
    p.ugv_radius = {1.5, 3};
    p.uav_consumption = {0.2, 0.5};
    p.ugv_detect = {2, 8};
    return generate_scenario(p, seed);
}

}  // namespace hecta::test
