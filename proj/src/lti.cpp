#include "sysid/lti.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace sysid {

std::complex<double> evaluate_polynomial(std::span<const double> ascending_coefficients,
                                         std::complex<double> s) {
    std::complex<double> acc(0.0, 0.0);
    for (auto it = ascending_coefficients.rbegin(); it != ascending_coefficients.rend(); ++it) {
        acc = acc * s + *it;
    }
    return acc;
}

RationalTransferFunction::RationalTransferFunction(std::vector<double> numerator,
                                                   std::vector<double> denominator)
    : numerator_(std::move(numerator)), denominator_(std::move(denominator)) {
    if (numerator_.empty() || denominator_.empty()) {
        throw std::invalid_argument("transfer function: empty coefficient list");
    }
    // Trailing numerator zeros carry no degree information.
    while (numerator_.size() > 1 && numerator_.back() == 0.0) {
        numerator_.pop_back();
    }
    const double lead = denominator_.back();
    if (lead == 0.0) {
        throw std::invalid_argument("transfer function: leading denominator coefficient is zero");
    }
    if (lead != 1.0) {
        for (auto& c : numerator_) c /= lead;
        for (auto& c : denominator_) c /= lead;
        denominator_.back() = 1.0;
    }
    if (numerator_.size() > denominator_.size()) {
        throw std::invalid_argument("transfer function: improper (numerator degree too high)");
    }
}

std::complex<double> RationalTransferFunction::evaluate(std::complex<double> s) const {
    return evaluate_polynomial(numerator_, s) / evaluate_polynomial(denominator_, s);
}

std::complex<double> RationalTransferFunction::denominator_at(std::complex<double> s) const {
    return evaluate_polynomial(denominator_, s);
}

std::vector<std::complex<double>> RationalTransferFunction::poles() const {
    const int n = denominator_degree();
    if (n == 0) {
        return {};
    }
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        companion(i, i - 1) = 1.0;
    }
    for (int i = 0; i < n; ++i) {
        companion(i, n - 1) = -denominator_[i];  // monic
    }
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    std::vector<std::complex<double>> roots(n);
    for (int i = 0; i < n; ++i) {
        roots[i] = solver.eigenvalues()(i);
    }
    return roots;
}

bool RationalTransferFunction::is_stable(double margin) const {
    for (const auto& p : poles()) {
        if (!(p.real() < -margin)) {
            return false;
        }
    }
    return true;
}

std::complex<double> freq_response(const RationalTransferFunction& g, double omega) {
    return g.evaluate(std::complex<double>(0.0, omega));
}

FrequencyResponseVector true_frf_vector(const RationalTransferFunction& g,
                                        const MultisineSignal& u) {
    FrequencyResponseVector gf(u.line_count());
    gf(0) = freq_response(g, 0.0);
    for (int l = 0; l < u.tone_count(); ++l) {
        const std::complex<double> value =
            freq_response(g, u.components()[l].angular_frequency);
        gf(2 * l + 1) = std::conj(value);  // -omega entry
        gf(2 * l + 2) = value;             // +omega entry
    }
    return gf;
}

std::vector<double> simulate_stationary(const RationalTransferFunction& g,
                                        const MultisineSignal& u, const SamplingGrid& grid) {
    if (!g.is_stable()) {
        throw std::invalid_argument("simulate_stationary: system is not asymptotically stable");
    }
    const Eigen::MatrixXcd rows = regressor_conjugate_rows(u, grid);
    const Eigen::VectorXcd x = rows * true_frf_vector(g, u);
    std::vector<double> samples(grid.count);
    for (int k = 0; k < grid.count; ++k) {
        samples[k] = x(k).real();
    }
    return samples;
}

std::vector<double> add_noise(std::span<const double> x, const NoiseSpec& noise) {
    std::vector<double> y(x.begin(), x.end());
    if (noise.standard_deviation == 0.0) {
        return y;
    }
    if (noise.standard_deviation < 0.0) {
        throw std::invalid_argument("add_noise: negative standard deviation");
    }
    std::mt19937_64 gen(noise.seed);
    std::normal_distribution<double> dist(0.0, noise.standard_deviation);
    for (auto& v : y) {
        v += dist(gen);
    }
    return y;
}

double sigma_for_snr(std::span<const double> x, double snr_db) {
    double power = 0.0;
    for (double v : x) {
        power += v * v;
    }
    if (x.empty() || power == 0.0) {
        throw std::invalid_argument("sigma_for_snr: record has no signal power");
    }
    power /= static_cast<double>(x.size());
    return std::sqrt(power / std::pow(10.0, snr_db / 10.0));
}

}  // namespace sysid
