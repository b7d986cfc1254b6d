#pragma once

#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hecta/scenario.hpp"

namespace hecta::plot {

class PlotInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Header row plus data rows; throws PlotInputError when empty or ragged.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // throws when missing
    std::vector<double> numbers(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

// Trailing moving average over finite entries; non-finite inputs are skipped.
Series moving_average(const Series& s, int window);

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series);

// Two stacked panels from a metrics log: TCR and loss against episode.
std::string training_curve(const CsvTable& metrics, int window = 200);

struct Bar {
    std::string label;
    double value = 0.0;
    double ci = 0.0;
};

// Bars with 95% interval whiskers.
std::string bar_chart(const std::string& title, const std::string& y_label, const std::vector<Bar>& bars);

// Grid with obstacles, tasks and one polyline per entity from a trajectory CSV.
std::string trajectory_overlay(const ScenarioSpec& spec, const CsvTable& trajectory);

}  // namespace hecta::plot
