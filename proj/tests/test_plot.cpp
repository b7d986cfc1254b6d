#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hecta/learning.hpp"
#include "hecta/svg_plot.hpp"
#include "support.hpp"

using namespace hecta;
using namespace hecta::plot;

namespace {

int count(const std::string& text, const std::string& needle) {
    int n = 0;
    for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
    return n;
}

CsvTable parse(const std::string& text) {
    std::istringstream in(text);
    return read_csv(in);
}

void expect_svg(const std::string& s) {
    EXPECT_EQ(s.rfind("<svg", 0) == 0 || s.rfind("<?xml", 0) == 0, true);
    EXPECT_NE(s.find("</svg>"), std::string::npos);
    EXPECT_EQ(s.find("nan"), std::string::npos);
}

}  // namespace

TEST(Csv, ReadsHeaderAndRows) {
    const CsvTable t = parse("a,b\n1,2\n3,4.5\n");
    EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.column("b"), 1);
    EXPECT_EQ(t.numbers("b"), (std::vector<double>{2, 4.5}));
    EXPECT_THROW(t.column("c"), PlotInputError);
}

TEST(Csv, EmptyAndRaggedInputIsRefused) {
    EXPECT_THROW(parse(""), PlotInputError);
    EXPECT_THROW(parse("a,b\n"), PlotInputError);
    EXPECT_THROW(parse("a,b\n1,2\n3\n"), PlotInputError);
}

TEST(Csv, NanCellsParse) {
    const CsvTable t = parse("episode,loss\n1,nan\n2,0.5\n");
    const auto loss = t.numbers("loss");
    EXPECT_TRUE(std::isnan(loss[0]));
    EXPECT_EQ(loss[1], 0.5);
}

TEST(Plot, MovingAverageSkipsNonFinite) {
    const Series s{"s", {1, 2, 3, 4}, {1, 2, std::nan(""), 4}};
    const Series m = moving_average(s, 2);
    EXPECT_EQ(m.x, (std::vector<double>{1, 2, 4}));
    EXPECT_EQ(m.y, (std::vector<double>{1, 1.5, 3}));
}

TEST(Plot, LineChartDrawsOnePolylinePerSeries) {
    const std::vector<Series> series{{"a", {0, 1, 2}, {0, 1, 0}}, {"b", {0, 1, 2}, {1, 1, 1}},
                                     {"c", {0, 1, 2}, {2, 0, 2}}};
    const std::string svg = line_chart("t", "x", "y", series);
    expect_svg(svg);
    EXPECT_EQ(count(svg, "<polyline class=\"series\""), 3);
    EXPECT_THROW(line_chart("t", "x", "y", {}), PlotInputError);
}

TEST(Plot, TrainingCurveFromMetrics) {
    std::string csv = std::string(kMetricsHeader) + "\n";
    for (int e = 1; e <= 20; ++e) {
        MetricsRow r;
        r.episode = e;
        r.trained = e > 4;
        r.loss = 1.0 / e;
        r.tcr = e / 20.0;
        csv += format_metrics_row(r) + "\n";
    }
    const std::string svg = training_curve(parse(csv), 5);
    expect_svg(svg);
    EXPECT_EQ(count(svg, "<polyline class=\"series\""), 3);
}

TEST(Plot, BarChartWhiskers) {
    const std::string svg = bar_chart("TCR", "TCR", {{"greedy", 0.8, 0.05}, {"random", 0.3, 0.1}, {"x", 0.5, 0}});
    expect_svg(svg);
    EXPECT_EQ(count(svg, "<rect class=\"bar\""), 3);
    EXPECT_EQ(count(svg, "<path class=\"ci\""), 2);
    EXPECT_THROW(bar_chart("t", "y", {}), PlotInputError);
}

TEST(Plot, LabelsAreEscaped) {
    const std::string svg = bar_chart("a<b", "y", {{"x&y", 0.5, 0.0}});
    EXPECT_NE(svg.find("a&lt;b"), std::string::npos);
    EXPECT_NE(svg.find("x&amp;y"), std::string::npos);
}

TEST(Plot, TrajectoryOverlayHasOnePathPerEntity) {
    const ScenarioSpec s = test::small_random(2);
    std::ostringstream csv;
    TrajectoryWriter writer(csv);
    World w(s);
    writer.write_initial(w);
    RandomPolicy policy;
    Rng rng(1);
    while (!w.done()) writer.write_step(w, w.step(policy.act(w, rng)));
    const std::string svg = trajectory_overlay(s, parse(csv.str()));
    expect_svg(svg);
    EXPECT_EQ(count(svg, "<polyline class=\"path\""), w.entity_count());
    EXPECT_EQ(count(svg, "<rect class=\"obstacle\""), static_cast<int>(s.obstacles.size()));
    EXPECT_EQ(count(svg, "<circle class=\"task\""), static_cast<int>(s.tasks.size()));
}

TEST(Plot, TrajectoryOutsideGridIsRefused) {
    const ScenarioSpec s = test::small_random(2);
    const CsvTable t = parse(
        "step,entity_id,class,row,col,power,acting_task_id,reward,completed_cumulative\n0,0,worker,99,0,0,-1,0,0\n");
    EXPECT_THROW(trajectory_overlay(s, t), PlotInputError);
}
