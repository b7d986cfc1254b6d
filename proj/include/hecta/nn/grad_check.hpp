#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hecta/nn/tensor.hpp"

namespace hecta::nn {

// A differentiable scalar function of some arrays. `backward` must fill the
// gradient buffers of every slot for the current values.
struct GradSlot {
    std::string name;
    double* values = nullptr;
    const double* grads = nullptr;
    Index size = 0;
};

struct GradCheckable {
    std::function<double()> loss;
    std::function<void()> backward;
    std::vector<GradSlot> slots;
};

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    double abs_floor = 1e-6;  // denominators below this are treated as this
    Index max_coords = 0;     // per slot, 0 = all
    // Skip coordinates whose step-h and step-h/2 estimates disagree, or whose
    // one-sided slopes differ by an amount that does not shrink with the step:
    // the perturbation crosses a kink or tie, or sits on one.
    bool kink_guard = true;
    std::uint64_t seed = 0;
};

struct GradCheckEntry {
    std::string name;
    Index checked = 0;
    Index skipped = 0;
    double max_rel_error = 0.0;
    Index worst_index = -1;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

struct GradCheckReport {
    double tolerance = 0.0;
    std::vector<GradCheckEntry> entries;

    bool pass() const {
        return std::all_of(entries.begin(), entries.end(),
                           [&](const GradCheckEntry& e) { return e.max_rel_error <= tolerance; });
    }
    double max_error() const {
        double m = 0.0;
        for (const auto& e : entries) m = std::max(m, e.max_rel_error);
        return m;
    }
    Index checked() const {
        Index n = 0;
        for (const auto& e : entries) n += e.checked;
        return n;
    }
    Index skipped() const {
        Index n = 0;
        for (const auto& e : entries) n += e.skipped;
        return n;
    }
    std::vector<std::string> failing() const {
        std::vector<std::string> names;
        for (const auto& e : entries)
            if (e.max_rel_error > tolerance) names.push_back(e.name);
        return names;
    }
    std::string summary() const {
        std::ostringstream out;
        for (const auto& e : entries)
            out << e.name << ": max_rel=" << e.max_rel_error << " checked=" << e.checked << " skipped=" << e.skipped
                << (e.max_rel_error > tolerance ? " FAIL" : "") << "\n";
        return out.str();
    }
};

inline double relative_error(double analytic, double numeric, double floor) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline GradCheckReport grad_check(const GradCheckable& f, const GradCheckOptions& opt = {}) {
    f.backward();
    GradCheckReport report;
    report.tolerance = opt.tolerance;
    std::mt19937_64 rng(opt.seed);

    struct Probe {
        double central, asymmetry;  // asymmetry: forward minus backward slope
    };
    auto probe = [&](double* v, double h, double at) {
        const double saved = *v;
        *v = saved + h;
        const double up = f.loss();
        *v = saved - h;
        const double down = f.loss();
        *v = saved;
        return Probe{(up - down) / (2.0 * h), (up - 2.0 * at + down) / h};
    };

    const double at = opt.kink_guard ? f.loss() : 0.0;
    for (const auto& slot : f.slots) {
        GradCheckEntry entry;
        entry.name = slot.name;
        std::vector<Index> coords(slot.size);
        std::iota(coords.begin(), coords.end(), Index{0});
        if (opt.max_coords > 0 && slot.size > opt.max_coords) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(opt.max_coords);
        }
        // Analytic values are copied first: loss() may not touch them, but a
        // caller's backward could share buffers with forward scratch.
        std::vector<double> analytic(coords.size());
        for (std::size_t k = 0; k < coords.size(); ++k) analytic[k] = slot.grads[coords[k]];

        for (std::size_t k = 0; k < coords.size(); ++k) {
            double* v = slot.values + coords[k];
            const Probe full = probe(v, opt.step, at);
            const double numeric = full.central;
            if (opt.kink_guard) {
                const Probe half = probe(v, opt.step / 2, at);
                const double scale = std::max({std::abs(numeric), std::abs(half.central), opt.abs_floor});
                // Smooth: the asymmetry halves with the step. Kink: it stays.
                const bool sits_on_kink =
                    std::abs(full.asymmetry) > opt.tolerance * scale && std::abs(half.asymmetry) > 0.75 * std::abs(full.asymmetry);
                if (relative_error(numeric, half.central, opt.abs_floor) > opt.tolerance || sits_on_kink) {
                    ++entry.skipped;
                    continue;
                }
            }
            ++entry.checked;
            const double err = relative_error(analytic[k], numeric, opt.abs_floor);
            if (err > entry.max_rel_error || entry.worst_index < 0) {
                if (err >= entry.max_rel_error) {
                    entry.max_rel_error = err;
                    entry.worst_index = coords[k];
                    entry.worst_analytic = analytic[k];
                    entry.worst_numeric = numeric;
                }
            }
        }
        report.entries.push_back(entry);
    }
    return report;
}

}  // namespace hecta::nn
