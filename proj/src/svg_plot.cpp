#include "hecta/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <map>
#include <sstream>

namespace hecta::plot {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string header(double w, double h) {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 "
        << w << " " << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    return out.str();
}

struct Frame {
    double left, top, width, height;
    double x0, x1, y0, y1;

    double px(double x) const { return left + (x1 == x0 ? 0.5 : (x - x0) / (x1 - x0)) * width; }
    double py(double y) const { return top + height - (y1 == y0 ? 0.5 : (y - y0) / (y1 - y0)) * height; }
};

void axes(std::ostringstream& out, const Frame& f, const std::string& title, const std::string& xl,
          const std::string& yl) {
    out << "<rect x=\"" << fmt(f.left) << "\" y=\"" << fmt(f.top) << "\" width=\"" << fmt(f.width) << "\" height=\""
        << fmt(f.height) << "\" fill=\"none\" stroke=\"black\"/>\n";
    out << "<text x=\"" << fmt(f.left + f.width / 2) << "\" y=\"" << fmt(f.top - 8)
        << "\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n";
    out << "<text x=\"" << fmt(f.left + f.width / 2) << "\" y=\"" << fmt(f.top + f.height + 32)
        << "\" text-anchor=\"middle\">" << escape(xl) << "</text>\n";
    out << "<text x=\"" << fmt(f.left - 45) << "\" y=\"" << fmt(f.top + f.height / 2) << "\" text-anchor=\"middle\""
        << " transform=\"rotate(-90 " << fmt(f.left - 45) << " " << fmt(f.top + f.height / 2) << ")\">" << escape(yl)
        << "</text>\n";
    for (int i = 0; i <= 4; ++i) {
        const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
        const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
        out << "<text x=\"" << fmt(f.left - 4) << "\" y=\"" << fmt(f.py(yv) + 4) << "\" text-anchor=\"end\">"
            << tick(yv) << "</text>\n";
        out << "<text x=\"" << fmt(f.px(xv)) << "\" y=\"" << fmt(f.top + f.height + 15)
            << "\" text-anchor=\"middle\">" << tick(xv) << "</text>\n";
    }
}

void polylines(std::ostringstream& out, const Frame& f, const std::vector<Series>& series) {
    for (std::size_t i = 0; i < series.size(); ++i) {
        const Series& s = series[i];
        out << "<polyline class=\"series\" fill=\"none\" stroke=\"" << kPalette[i % 8] << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t j = 0; j < s.x.size(); ++j)
            if (std::isfinite(s.y[j])) out << fmt(f.px(s.x[j])) << "," << fmt(f.py(s.y[j])) << " ";
        out << "\"/>\n";
        out << "<text x=\"" << fmt(f.left + f.width - 4) << "\" y=\"" << fmt(f.top + 16 + 14 * i)
            << "\" text-anchor=\"end\" fill=\"" << kPalette[i % 8] << "\">" << escape(s.label) << "</text>\n";
    }
}

Frame frame_for(const std::vector<Series>& series, double left, double top, double width, double height) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series) {
        for (std::size_t j = 0; j < s.x.size(); ++j) {
            if (!std::isfinite(s.y[j])) continue;
            x0 = std::min(x0, s.x[j]);
            x1 = std::max(x1, s.x[j]);
            y0 = std::min(y0, s.y[j]);
            y1 = std::max(y1, s.y[j]);
        }
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (y0 == y1) y0 -= 0.5, y1 += 0.5;
    return {left, top, width, height, x0, x1, y0, y1};
}

}  // namespace

int CsvTable::column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw PlotInputError("CSV lacks column '" + name + "'");
    return static_cast<int>(it - header.begin());
}

std::vector<double> CsvTable::numbers(const std::string& name) const {
    const int c = column(name);
    std::vector<double> out;
    for (const auto& row : rows) {
        const std::string& cell = row[c];
        if (cell == "nan") {
            out.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        try {
            std::size_t used = 0;
            out.push_back(std::stod(cell, &used));
            if (used != cell.size()) throw PlotInputError("bad number '" + cell + "' in column " + name);
        } catch (const std::logic_error&) {
            throw PlotInputError("bad number '" + cell + "' in column " + name);
        }
    }
    return out;
}

CsvTable read_csv(std::istream& in) {
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        return cells;
    };
    CsvTable t;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (t.header.empty()) {
            t.header = split(line);
            continue;
        }
        auto cells = split(line);
        if (cells.size() != t.header.size())
            throw PlotInputError("row " + std::to_string(t.rows.size() + 1) + " has " + std::to_string(cells.size()) +
                                 " cells, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty() || t.rows.empty()) throw PlotInputError("CSV input is empty");
    return t;
}

Series moving_average(const Series& s, int window) {
    Series out{s.label, {}, {}};
    std::deque<double> recent;
    double sum = 0.0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.y[i])) continue;
        recent.push_back(s.y[i]);
        sum += s.y[i];
        if (static_cast<int>(recent.size()) > window) {
            sum -= recent.front();
            recent.pop_front();
        }
        out.x.push_back(s.x[i]);
        out.y.push_back(sum / recent.size());
    }
    return out;
}

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series) {
    if (series.empty()) throw PlotInputError("nothing to plot");
    std::ostringstream out;
    out << header(640, 400);
    const Frame f = frame_for(series, 70, 40, 540, 300);
    axes(out, f, title, x_label, y_label);
    polylines(out, f, series);
    out << "</svg>\n";
    return out.str();
}

std::string training_curve(const CsvTable& metrics, int window) {
    const auto episode = metrics.numbers("episode");
    const Series tcr{"TCR", episode, metrics.numbers("tcr")};
    const Series loss{"loss", episode, metrics.numbers("loss")};
    const std::vector<Series> top{tcr, moving_average(Series{"TCR (moving avg)", tcr.x, tcr.y}, window)};
    const std::vector<Series> bottom{moving_average(Series{"loss (moving avg)", loss.x, loss.y}, window)};

    std::ostringstream out;
    out << header(640, 760);
    const Frame ft = frame_for(top, 70, 40, 540, 300);
    axes(out, ft, "Training TCR", "episode", "TCR");
    polylines(out, ft, top);
    const Frame fb = frame_for(bottom, 70, 420, 540, 300);
    axes(out, fb, "Training loss", "episode", "loss");
    polylines(out, fb, bottom);
    out << "</svg>\n";
    return out.str();
}

std::string bar_chart(const std::string& title, const std::string& y_label, const std::vector<Bar>& bars) {
    if (bars.empty()) throw PlotInputError("nothing to plot");
    double hi = 0.0;
    for (const auto& b : bars) hi = std::max(hi, b.value + b.ci);
    if (hi <= 0.0) hi = 1.0;
    const double slot = std::max(60.0, 480.0 / bars.size());
    const double width = slot * bars.size();
    Frame f{70, 40, width, 300, 0, 1, 0, hi * 1.1};
    std::ostringstream out;
    out << header(width + 110, 400);
    out << "<rect x=\"" << fmt(f.left) << "\" y=\"" << fmt(f.top) << "\" width=\"" << fmt(f.width) << "\" height=\""
        << fmt(f.height) << "\" fill=\"none\" stroke=\"black\"/>\n";
    out << "<text x=\"" << fmt(f.left + width / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
        << escape(title) << "</text>\n";
    out << "<text x=\"25\" y=\"" << fmt(f.top + 150) << "\" text-anchor=\"middle\" transform=\"rotate(-90 25 "
        << fmt(f.top + 150) << ")\">" << escape(y_label) << "</text>\n";
    for (int i = 0; i <= 4; ++i) {
        const double yv = f.y1 * i / 4.0;
        out << "<text x=\"" << fmt(f.left - 4) << "\" y=\"" << fmt(f.py(yv) + 4) << "\" text-anchor=\"end\">"
            << tick(yv) << "</text>\n";
    }
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const Bar& b = bars[i];
        const double cx = f.left + slot * (i + 0.5);
        const double top = f.py(std::max(b.value, 0.0));
        out << "<rect class=\"bar\" x=\"" << fmt(cx - slot * 0.3) << "\" y=\"" << fmt(top) << "\" width=\""
            << fmt(slot * 0.6) << "\" height=\"" << fmt(f.py(0) - top) << "\" fill=\"" << kPalette[i % 8] << "\"/>\n";
        if (b.ci > 0.0) {
            const double lo = f.py(std::max(b.value - b.ci, 0.0)), up = f.py(b.value + b.ci);
            out << "<path class=\"ci\" d=\"M" << fmt(cx) << " " << fmt(lo) << " V" << fmt(up) << " M" << fmt(cx - 6)
                << " " << fmt(up) << " H" << fmt(cx + 6) << " M" << fmt(cx - 6) << " " << fmt(lo) << " H"
                << fmt(cx + 6) << "\" stroke=\"black\" fill=\"none\"/>\n";
        }
        out << "<text x=\"" << fmt(cx) << "\" y=\"" << fmt(f.top + f.height + 16) << "\" text-anchor=\"middle\">"
            << escape(b.label) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string trajectory_overlay(const ScenarioSpec& spec, const CsvTable& trajectory) {
    const double cell = std::max(12.0, 480.0 / std::max(spec.grid_width, spec.grid_height));
    const double margin = 30;
    const double w = spec.grid_width * cell, h = spec.grid_height * cell;
    auto cx = [&](int col) { return margin + (col + 0.5) * cell; };
    auto cy = [&](int row) { return margin + (row + 0.5) * cell; };

    const int c_step = trajectory.column("step"), c_id = trajectory.column("entity_id"),
              c_class = trajectory.column("class"), c_row = trajectory.column("row"), c_col = trajectory.column("col");
    std::map<int, std::vector<std::pair<int, Cell>>> paths;
    std::map<int, std::string> classes;
    for (const auto& r : trajectory.rows) {
        try {
            const int id = std::stoi(r[c_id]);
            const Cell c{std::stoi(r[c_row]), std::stoi(r[c_col])};
            if (!spec.in_bounds(c)) throw PlotInputError("trajectory leaves the grid");
            paths[id].push_back({std::stoi(r[c_step]), c});
            classes[id] = r[c_class];
        } catch (const std::logic_error&) {
            throw PlotInputError("malformed trajectory row");
        }
    }

    std::ostringstream out;
    out << header(w + 2 * margin + 120, h + 2 * margin);
    out << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << fmt(w) << "\" height=\"" << fmt(h)
        << "\" fill=\"none\" stroke=\"#999\"/>\n";
    for (int r = 1; r < spec.grid_height; ++r)
        out << "<line x1=\"" << margin << "\" y1=\"" << fmt(margin + r * cell) << "\" x2=\"" << fmt(margin + w)
            << "\" y2=\"" << fmt(margin + r * cell) << "\" stroke=\"#eee\"/>\n";
    for (int c = 1; c < spec.grid_width; ++c)
        out << "<line x1=\"" << fmt(margin + c * cell) << "\" y1=\"" << margin << "\" x2=\"" << fmt(margin + c * cell)
            << "\" y2=\"" << fmt(margin + h) << "\" stroke=\"#eee\"/>\n";
    for (Cell o : spec.obstacles)
        out << "<rect class=\"obstacle\" x=\"" << fmt(margin + o.col * cell) << "\" y=\"" << fmt(margin + o.row * cell)
            << "\" width=\"" << fmt(cell) << "\" height=\"" << fmt(cell) << "\" fill=\"#444\"/>\n";
    for (const TaskSpec& t : spec.tasks) {
        const char* color = t.type == TaskType::Aerial ? "#1f77b4" : t.type == TaskType::Ground ? "#2ca02c" : "#d62728";
        out << "<circle class=\"task\" cx=\"" << fmt(cx(t.location.col)) << "\" cy=\"" << fmt(cy(t.location.row))
            << "\" r=\"" << fmt(cell * (t.duration > 1 ? 0.3 : 0.2)) << "\" fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
    }
    int i = 0;
    for (auto& [id, pts] : paths) {
        std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        const char* color = kPalette[i % 8];
        out << "<polyline class=\"path\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& [step, c] : pts) out << fmt(cx(c.col)) << "," << fmt(cy(c.row)) << " ";
        out << "\"/>\n";
        out << "<text x=\"" << fmt(margin + w + 10) << "\" y=\"" << fmt(margin + 14 + 16 * i) << "\" fill=\"" << color
            << "\">" << id << " " << escape(classes[id]) << "</text>\n";
        ++i;
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace hecta::plot
