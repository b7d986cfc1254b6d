#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "hecta/encoding.hpp"
#include "hecta/policy.hpp"
#include "support.hpp"

using namespace hecta;

TEST(Encoding, GlobalShapeAndEmptyCell) {
    const ScenarioSpec s = generate_scenario(*preset_params("sce2"), 1);
    const World w(s);
    const auto g = encode_global(w);
    EXPECT_EQ(g.planes.size(), 7 * 16 * 16);
    EXPECT_EQ(g.height, 16);
    // Find a cell with nothing on it.
    for (int r = 0; r < 16; ++r) {
        for (int c = 0; c < 16; ++c) {
            const Cell cell{r, c};
            bool occupied = w.is_obstacle(cell) || w.task_at(cell) >= 0;
            for (const auto& e : w.entities()) occupied |= e.position == cell;
            if (occupied) continue;
            for (int ch = 0; ch < 7; ++ch) ASSERT_EQ(g.at(ch, r, c), 0.0);
        }
    }
}

TEST(Encoding, DurationPlaneIsRemainingOverDuration) {
    ScenarioSpec s = test::blank(5, 5);
    test::add_worker(s, {0, 0}, 2.0);
    test::add_task(s, {0, 1}, TaskType::Detailed, 3);
    World w(s);
    w.step({Cell{0, 1}});
    const auto g = encode_global(w);
    EXPECT_EQ(g.at(kDurationPlane, 0, 1), 2.0 / 3.0);
    EXPECT_EQ(g.at(kOwnershipPlane, 0, 1), 1.0);
    EXPECT_EQ(g.at(kDetailedTaskPlane, 0, 1), 1.0);
    EXPECT_EQ(g.at(kAgentPlane, 0, 1), 1.0);
}

TEST(Encoding, PlaneSumsAndExclusivity) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const ScenarioSpec s = test::small_random(seed);
        World w(s);
        RandomPolicy policy;
        Rng rng(seed);
        while (true) {
            const auto g = encode_global(w);
            const int cells = s.cell_count();
            double obstacles = 0, tasks = 0, agents = 0;
            for (int i = 0; i < cells; ++i) {
                obstacles += g.planes(kObstaclePlane * cells + i);
                const double t = g.planes(kAerialTaskPlane * cells + i) + g.planes(kGroundTaskPlane * cells + i) +
                                 g.planes(kDetailedTaskPlane * cells + i);
                ASSERT_LE(g.planes(kObstaclePlane * cells + i) + t, 1.0);
                tasks += t;
                agents += g.planes(kAgentPlane * cells + i);
                ASSERT_GE(g.planes(kDurationPlane * cells + i), 0.0);
                ASSERT_LE(g.planes(kDurationPlane * cells + i), 1.0);
            }
            ASSERT_EQ(obstacles, s.obstacles.size());
            ASSERT_EQ(tasks, w.remaining_count());
            ASSERT_EQ(agents, w.entity_count());
            if (w.done()) break;
            w.step(policy.act(w, rng));
        }
    }
}

TEST(Encoding, LocalPlanes) {
    ScenarioSpec s = test::blank(16, 16);
    for (int i = 0; i < 3; ++i) test::add_worker(s, {i, 0});
    const int uav = test::add_uav(s, {8, 8}, 2.0, 0.25);
    for (int i = 0; i < 20; ++i) test::add_worker(s, {12 + i / 10, i % 10});
    test::add_task(s, {10, 10});
    ASSERT_EQ(s.entities.size(), 24u);
    const World w(s);

    const auto worker = encode_local(w, 0);
    EXPECT_EQ(worker.planes.size(), 3 * 16 * 16);
    EXPECT_EQ(worker.id_onehot.size(), 24);
    EXPECT_EQ(worker.urge[0], 0.0);
    EXPECT_EQ(worker.urge[1], 0.0);
    EXPECT_EQ(worker.planes.segment(kPowerPlane * 256, 256).sum(), 0.0);

    const auto o = encode_local(w, uav);
    EXPECT_EQ(o.id_onehot.sum(), 1.0);
    EXPECT_EQ(o.id_onehot(3), 1.0);
    EXPECT_EQ(o.planes.segment(kPositionPlane * 256, 256).sum(), 1.0);
    EXPECT_EQ(o.at(kPositionPlane, 8, 8), 1.0);
    EXPECT_EQ(o.at(kPowerPlane, 8, 8), 1.0);
    EXPECT_EQ(o.urge[0], 1.0);
    EXPECT_EQ(o.urge[1], 0.25);
    const auto mask = w.movable_mask(uav);
    for (int i = 0; i < 256; ++i) EXPECT_EQ(o.planes(kRangePlane * 256 + i), mask[i]);
}

TEST(Encoding, ObserveIsLocalEncodingOfNextWorld) {
    const ScenarioSpec s = test::small_random(3);
    World w(s);
    RandomPolicy policy;
    Rng rng(1);
    const JointAction a = policy.act(w, rng);
    w.step(a);
    for (int k = 0; k < w.entity_count(); ++k) {
        EXPECT_EQ(observe(w, k, a[k]), encode_local(w, k));
        EXPECT_EQ(observe(w, k, a[k]), observe(w, k, a[k]));
    }
    EXPECT_NE(encode_local(w, 0).id_onehot, encode_local(w, 1).id_onehot);
    EXPECT_THROW(encode_local(w, 99), std::out_of_range);
}

TEST(Encoding, SnapshotMatchesWorld) {
    const ScenarioSpec s = test::small_random(5);
    World w(s);
    RandomPolicy policy;
    Rng rng(2);
    w.step(policy.act(w, rng));
    EXPECT_EQ(encode_global(s, w.entities(), w.tasks()).planes, encode_global(w).planes);
    EXPECT_EQ(encode_local(s, 1, w.entity(1), w.movable_mask(1)), encode_local(w, 1));
}

TEST(Encoding, DistinctStatesHaveDistinctPlanes) {
    // Over random rollouts, two reachable states with identical global planes
    // must agree on everything the planes describe.
    std::map<std::vector<double>, std::pair<std::vector<Cell>, std::vector<int>>> seen;
    const ScenarioSpec s = test::small_random(8);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        World w(s);
        RandomPolicy policy;
        Rng rng(seed);
        while (!w.done()) {
            w.step(policy.act(w, rng));
            const auto g = encode_global(w);
            std::vector<double> key(g.planes.data(), g.planes.data() + g.planes.size());
            std::vector<Cell> positions;
            for (const auto& e : w.entities()) positions.push_back(e.position);
            std::sort(positions.begin(), positions.end());
            std::vector<int> remaining;
            for (const auto& t : w.tasks()) remaining.push_back(t.remaining);
            auto [it, fresh] = seen.emplace(key, std::make_pair(positions, remaining));
            if (!fresh) {
                ASSERT_EQ(it->second.first, positions);
                ASSERT_EQ(it->second.second, remaining);
            }
        }
    }
}

TEST(Encoding, DumpPlanes) {
    Eigen::VectorXd planes(2 * 2 * 3);
    planes << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
    std::ostringstream out;
    dump_planes_csv(out, planes, 2, 2, 3);
    EXPECT_NE(out.str().find("1,2,3\n4,5,6"), std::string::npos);
    EXPECT_NE(out.str().find("7,8,9\n10,11,12"), std::string::npos);
}
