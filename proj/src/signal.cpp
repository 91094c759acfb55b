#include "sysid/signal.hpp"

#include <cmath>
#include <stdexcept>

namespace sysid {

MultisineSignal::MultisineSignal(double dc_amplitude, std::vector<SineComponent> components)
    : dc_amplitude_(dc_amplitude), components_(std::move(components)) {
    if (dc_amplitude_ == 0.0) {
        throw std::invalid_argument("multisine: DC amplitude must be nonzero");
    }
    double previous = 0.0;
    for (const auto& c : components_) {
        if (c.amplitude == 0.0) {
            throw std::invalid_argument("multisine: component amplitudes must be nonzero");
        }
        if (!(c.angular_frequency > previous)) {
            throw std::invalid_argument(
                "multisine: frequencies must be strictly positive and strictly increasing");
        }
        previous = c.angular_frequency;
    }
}

double MultisineSignal::max_frequency() const {
    return components_.empty() ? 0.0 : components_.back().angular_frequency;
}

double evaluate_multisine(const MultisineSignal& u, double t) {
    double value = u.dc_amplitude();
    for (const auto& c : u.components()) {
        value += c.amplitude * std::cos(c.angular_frequency * t + c.phase);
    }
    return value;
}

RegressorVector regressor(const MultisineSignal& u, const SamplingGrid& grid, int k) {
    if (k < 1 || k > grid.count) {
        throw std::out_of_range("regressor: sample index outside 1..N");
    }
    const double t = static_cast<double>(k) * grid.period;
    RegressorVector zeta(u.line_count());
    zeta(0) = u.dc_amplitude();
    const auto& comps = u.components();
    for (int l = 0; l < u.tone_count(); ++l) {
        const double arg = comps[l].angular_frequency * t + comps[l].phase;
        const std::complex<double> e = std::polar(0.5 * comps[l].amplitude, arg);
        zeta(2 * l + 1) = e;
        zeta(2 * l + 2) = std::conj(e);
    }
    return zeta;
}

Eigen::MatrixXcd regressor_conjugate_rows(const MultisineSignal& u, const SamplingGrid& grid) {
    if (grid.count < 1 || !(grid.period > 0.0)) {
        throw std::invalid_argument("regressor rows: grid must have positive period and count");
    }
    Eigen::MatrixXcd rows(grid.count, u.line_count());
    const auto& comps = u.components();
    for (int k = 1; k <= grid.count; ++k) {
        const double t = static_cast<double>(k) * grid.period;
        rows(k - 1, 0) = u.dc_amplitude();
        for (int l = 0; l < u.tone_count(); ++l) {
            const double arg = comps[l].angular_frequency * t + comps[l].phase;
            // Conjugated entries: e^{-i arg} first, matching zeta^H.
            const std::complex<double> e = std::polar(0.5 * comps[l].amplitude, -arg);
            rows(k - 1, 2 * l + 1) = e;
            rows(k - 1, 2 * l + 2) = std::conj(e);
        }
    }
    return rows;
}

double default_frequency_tolerance(double period_s) {
    return 1e-9 * (2.0 * kPi / period_s);
}

FoldedLine fold_frequency(double omega, double h) {
    return fold_frequency(omega, h, default_frequency_tolerance(h));
}

FoldedLine fold_frequency(double omega, double h, double tol) {
    if (omega < 0.0 || !(h > 0.0)) {
        throw std::invalid_argument("fold_frequency: requires omega >= 0 and h > 0");
    }
    const double period = 2.0 * kPi / h;
    const double nyquist = kPi / h;
    double r = std::fmod(omega, period);
    const double folded = (r > nyquist) ? period - r : r;
    FoldedLine line;
    line.original_frequency = omega;
    line.folded_frequency = folded;
    if (folded <= tol || nyquist - folded <= tol) {
        line.classification = LineClass::at_nyquist_multiple;
    }
    return line;
}

namespace {

// Distance from v to the nearest integer multiple of step, and that multiple.
std::pair<double, long> nearest_multiple_distance(double v, double step) {
    const long n = std::lround(v / step);
    return {std::abs(v - static_cast<double>(n) * step), n};
}

}  // namespace

NonOverlapReport check_non_overlap(const MultisineSignal& u, double h) {
    return check_non_overlap(u, h, default_frequency_tolerance(h));
}

NonOverlapReport check_non_overlap(const MultisineSignal& u, double h, double tol) {
    if (!(tol > 0.0) || !(h > 0.0)) {
        throw std::invalid_argument("check_non_overlap: requires tol > 0 and h > 0");
    }
    NonOverlapReport report;
    const double period = 2.0 * kPi / h;
    const double nyquist = kPi / h;
    const auto& comps = u.components();
    const int m = u.tone_count();
    for (int a = 0; a < m; ++a) {
        for (int b = a + 1; b < m; ++b) {
            const double wa = comps[a].angular_frequency;
            const double wb = comps[b].angular_frequency;
            if (auto [d, n] = nearest_multiple_distance(wb - wa, period); d <= tol) {
                report.violations.push_back({a, b, n, false});
            }
            if (auto [d, n] = nearest_multiple_distance(wb + wa, period); d <= tol) {
                report.violations.push_back({a, b, n, true});
            }
        }
        if (auto [d, n] = nearest_multiple_distance(comps[a].angular_frequency, nyquist);
            d <= tol) {
            report.violations.push_back({a, -1, n, false});
        }
    }
    report.satisfied = report.violations.empty();
    return report;
}

std::vector<double> leaking_lines(const MultisineSignal& u, const SamplingGrid& grid, double tol) {
    if (!(tol > 0.0)) {
        throw std::invalid_argument("leaking_lines: requires tol > 0");
    }
    std::vector<double> offending;
    const double record = static_cast<double>(grid.count) * grid.period;
    for (const auto& c : u.components()) {
        const double bin = c.angular_frequency * record / (2.0 * kPi);
        if (std::abs(bin - std::round(bin)) > tol) {
            offending.push_back(c.angular_frequency);
        }
    }
    return offending;
}

bool check_no_leakage(const MultisineSignal& u, const SamplingGrid& grid) {
    // Bin-unit equivalent of the default frequency tolerance.
    return check_no_leakage(u, grid, 1e-9 * static_cast<double>(grid.count));
}

bool check_no_leakage(const MultisineSignal& u, const SamplingGrid& grid, double tol) {
    return leaking_lines(u, grid, tol).empty();
}

std::complex<double> dtft(std::span<const double> samples, double omega, double h) {
    if (samples.empty()) {
        throw std::invalid_argument("dtft: requires at least one sample");
    }
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t k = 1; k <= samples.size(); ++k) {
        acc += samples[k - 1] * std::polar(1.0, -h * static_cast<double>(k) * omega);
    }
    return acc;
}

}  // namespace sysid
