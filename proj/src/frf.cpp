#include "sysid/frf.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace sysid {

namespace {

void require_record(const MultisineSignal& u, const SamplingGrid& grid,
                    std::span<const double> y) {
    if (static_cast<int>(y.size()) != grid.count) {
        throw std::invalid_argument("frf: sample count does not match the grid");
    }
    if (grid.count <= 2 * u.tone_count()) {
        throw std::invalid_argument("frf: record too short, N must exceed 2M");
    }
}

double hermitian_condition_number(const Eigen::MatrixXcd& z) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(z, Eigen::EigenvaluesOnly);
    const auto& ev = solver.eigenvalues();
    const double smallest = ev(0);
    const double largest = ev(ev.size() - 1);
    if (!(smallest > 0.0)) {
        return std::numeric_limits<double>::infinity();
    }
    return largest / smallest;
}

}  // namespace

NormalMatrix normal_matrix(const MultisineSignal& u, const SamplingGrid& grid) {
    const Eigen::MatrixXcd rows = regressor_conjugate_rows(u, grid);
    Eigen::MatrixXcd z = rows.adjoint() * rows;
    z = 0.5 * (z + z.adjoint()).eval();
    return z;
}

double ill_conditioned_threshold() {
    return 1.0 / (100.0 * std::numeric_limits<double>::epsilon());
}

FrfEstimate ls_frf(const MultisineSignal& u, const SamplingGrid& grid,
                   std::span<const double> y, double sigma) {
    require_record(u, grid, y);
    const Eigen::MatrixXcd rows = regressor_conjugate_rows(u, grid);
    Eigen::MatrixXcd z = rows.adjoint() * rows;
    z = 0.5 * (z + z.adjoint()).eval();

    const double cond = hermitian_condition_number(z);
    if (!std::isfinite(cond) || cond > ill_conditioned_threshold()) {
        std::ostringstream msg;
        msg << "least-squares FRF: normal matrix is ill-conditioned (cond=" << cond
            << "); excitation lines overlap after folding or the record is too short";
        throw IllConditionedError(msg.str(), cond);
    }

    const Eigen::Map<const Eigen::VectorXd> ymap(y.data(), static_cast<Eigen::Index>(y.size()));
    const Eigen::VectorXcd rhs = rows.adjoint() * ymap.cast<std::complex<double>>();

    Eigen::LDLT<Eigen::MatrixXcd> factor(z);
    FrfEstimate estimate;
    estimate.values = factor.solve(rhs);
    estimate.covariance =
        (sigma * sigma) * factor.solve(Eigen::MatrixXcd::Identity(z.rows(), z.cols()));
    estimate.covariance = 0.5 * (estimate.covariance + estimate.covariance.adjoint()).eval();
    estimate.sigma_used = sigma;
    estimate.condition_number = cond;
    return estimate;
}

Eigen::VectorXd asymptotic_covariance(const MultisineSignal& u, double sigma) {
    Eigen::VectorXd diag(u.line_count());
    const double s2 = sigma * sigma;
    diag(0) = s2 / (u.dc_amplitude() * u.dc_amplitude());
    for (int l = 0; l < u.tone_count(); ++l) {
        const double a = u.components()[l].amplitude;
        diag(2 * l + 1) = 4.0 * s2 / (a * a);
        diag(2 * l + 2) = 4.0 * s2 / (a * a);
    }
    return diag;
}

FrequencyResponseVector etfe_frf(const MultisineSignal& u, const SamplingGrid& grid,
                                 std::span<const double> y) {
    require_record(u, grid, y);
    if (auto overlap = check_non_overlap(u, grid.period); !overlap.satisfied) {
        throw OverlapError("ETFE: excitation lines overlap after folding", std::move(overlap));
    }
    if (auto leaking = leaking_lines(u, grid, 1e-9 * grid.count); !leaking.empty()) {
        std::ostringstream msg;
        msg << "ETFE: spectral leakage present at";
        for (double w : leaking) msg << " " << w;
        msg << " rad/s";
        throw LeakagePresentError(msg.str(), std::move(leaking));
    }

    const double n = static_cast<double>(grid.count);
    FrequencyResponseVector values(u.line_count());
    values(0) = dtft(y, 0.0, grid.period) / (n * u.dc_amplitude());
    for (int l = 0; l < u.tone_count(); ++l) {
        const auto& c = u.components()[l];
        const std::complex<double> input_line = std::polar(0.5 * n * c.amplitude, c.phase);
        values(2 * l + 1) = dtft(y, -c.angular_frequency, grid.period) / std::conj(input_line);
        values(2 * l + 2) = dtft(y, c.angular_frequency, grid.period) / input_line;
    }
    return values;
}

double estimate_noise_sigma(const MultisineSignal& u, const SamplingGrid& grid,
                            std::span<const double> y) {
    require_record(u, grid, y);
    const int dof = grid.count - u.line_count();
    if (dof < 1) {
        throw std::invalid_argument("estimate_noise_sigma: no residual degrees of freedom");
    }
    const FrfEstimate fit = ls_frf(u, grid, y, 0.0);
    const Eigen::MatrixXcd rows = regressor_conjugate_rows(u, grid);
    const Eigen::VectorXd predicted = (rows * fit.values).real();
    double rss = 0.0;
    for (int k = 0; k < grid.count; ++k) {
        const double r = y[k] - predicted(k);
        rss += r * r;
    }
    return std::sqrt(rss / dof);
}

}  // namespace sysid
