#include "sysid/pem.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sysid {

namespace {

constexpr double kPoleMagnitudeFloor = 1e-14;
constexpr double kTiny = 1e-300;

std::vector<std::complex<double>> excited_points(const MultisineSignal& u) {
    std::vector<std::complex<double>> points(u.line_count());
    points[0] = {0.0, 0.0};
    for (int l = 0; l < u.tone_count(); ++l) {
        const double w = u.components()[l].angular_frequency;
        points[2 * l + 1] = {0.0, -w};
        points[2 * l + 2] = {0.0, w};
    }
    return points;
}

FrequencyResponseVector frf_at_lines(const RationalTransferFunction& g,
                                     const MultisineSignal& u) {
    FrequencyResponseVector gf(u.line_count());
    int idx = 0;
    for (const auto& s : excited_points(u)) {
        const std::complex<double> a = g.denominator_at(s);
        if (std::abs(a) < kPoleMagnitudeFloor) {
            throw std::domain_error("parametric model has a pole at an excited frequency");
        }
        gf(idx++) = evaluate_polynomial(g.numerator(), s) / a;
    }
    return gf;
}

/// Per-line derivatives of the model frequency response, (2M+1) x n_theta.
Eigen::MatrixXcd frf_derivatives(const ParameterVector& p, const MultisineSignal& u) {
    const RationalTransferFunction g = p.to_transfer_function();
    const int n = p.structure.denominator_degree;
    const int m = p.structure.numerator_degree;
    Eigen::MatrixXcd d(u.line_count(), p.structure.parameter_count());
    int idx = 0;
    for (const auto& s : excited_points(u)) {
        const std::complex<double> a = g.denominator_at(s);
        if (std::abs(a) < kPoleMagnitudeFloor) {
            throw std::domain_error("parametric model has a pole at an excited frequency");
        }
        const std::complex<double> b = evaluate_polynomial(g.numerator(), s);
        std::complex<double> s_pow(1.0, 0.0);
        for (int i = 0; i < std::max(n, m + 1); ++i) {
            if (i < n) {
                d(idx, i) = -s_pow * b / (a * a);
            }
            if (i <= m) {
                d(idx, n + i) = s_pow / a;
            }
            s_pow *= s;
        }
        ++idx;
    }
    return d;
}

double sum_squares(const Eigen::VectorXd& v) { return v.squaredNorm(); }

}  // namespace

RationalTransferFunction ParameterVector::to_transfer_function() const {
    const int n = structure.denominator_degree;
    const int m = structure.numerator_degree;
    if (theta.size() != structure.parameter_count()) {
        throw std::invalid_argument("parameter vector length does not match the structure");
    }
    std::vector<double> den(n + 1);
    for (int i = 0; i < n; ++i) den[i] = theta(i);
    den[n] = 1.0;
    std::vector<double> num(m + 1);
    for (int i = 0; i <= m; ++i) num[i] = theta(n + i);
    return RationalTransferFunction(std::move(num), std::move(den));
}

ParameterVector ParameterVector::from_transfer_function(const RationalTransferFunction& g) {
    ParameterVector p;
    p.structure = {g.numerator_degree(), g.denominator_degree()};
    p.theta.resize(p.structure.parameter_count());
    const int n = g.denominator_degree();
    for (int i = 0; i < n; ++i) p.theta(i) = g.denominator()[i];
    for (int i = 0; i <= g.numerator_degree(); ++i) p.theta(n + i) = g.numerator()[i];
    return p;
}

FrequencyResponseVector parametric_frf(const ParameterVector& p, const MultisineSignal& u) {
    return frf_at_lines(p.to_transfer_function(), u);
}

std::vector<double> predictor(const ParameterVector& p, const MultisineSignal& u,
                              const SamplingGrid& grid) {
    const Eigen::MatrixXcd rows = regressor_conjugate_rows(u, grid);
    const Eigen::VectorXd predicted = (rows * parametric_frf(p, u)).real();
    return {predicted.data(), predicted.data() + predicted.size()};
}

double cost_time(const ParameterVector& p, const MultisineSignal& u, const SamplingGrid& grid,
                 std::span<const double> y) {
    if (static_cast<int>(y.size()) != grid.count) {
        throw std::invalid_argument("cost_time: sample count does not match the grid");
    }
    const std::vector<double> predicted = predictor(p, u, grid);
    double cost = 0.0;
    for (int k = 0; k < grid.count; ++k) {
        const double e = y[k] - predicted[k];
        cost += e * e;
    }
    return cost;
}

double cost_freq(const ParameterVector& p, const FrfEstimate& estimate,
                 const MultisineSignal& u) {
    if (estimate.values.size() != u.line_count() ||
        estimate.covariance.rows() != u.line_count()) {
        throw std::invalid_argument("cost_freq: estimate does not match the excitation");
    }
    const Eigen::VectorXcd delta = parametric_frf(p, u) - estimate.values;
    const Eigen::LDLT<Eigen::MatrixXcd> factor(estimate.covariance);
    const Eigen::VectorXcd weighted = factor.solve(delta);
    // LDLT silently zeroes components along null directions; a residual check
    // catches that and genuine non-finite breakdowns alike.
    const double misfit = (estimate.covariance * weighted - delta).norm();
    const double cost = delta.dot(weighted).real();
    if (!std::isfinite(cost) || misfit > 1e-8 * delta.norm()) {
        throw std::invalid_argument("cost_freq: estimate covariance is singular");
    }
    return cost;
}

Eigen::MatrixXd jacobian(const ParameterVector& p, const MultisineSignal& u,
                         const SamplingGrid& grid) {
    const Eigen::MatrixXcd rows = regressor_conjugate_rows(u, grid);
    return (rows * frf_derivatives(p, u)).real();
}

FitResult gauss_newton(const ParameterVector& theta_init, const MultisineSignal& u,
                       const SamplingGrid& grid, std::span<const double> y,
                       const GaussNewtonOptions& opts) {
    if (static_cast<int>(y.size()) != grid.count) {
        throw std::invalid_argument("gauss_newton: sample count does not match the grid");
    }
    const Eigen::Map<const Eigen::VectorXd> ymap(y.data(), static_cast<Eigen::Index>(y.size()));
    const Eigen::MatrixXcd rows = regressor_conjugate_rows(u, grid);
    const int n_theta = theta_init.structure.parameter_count();

    ParameterVector current = theta_init;
    const auto residual_of = [&](const ParameterVector& p) -> Eigen::VectorXd {
        return ymap - (rows * parametric_frf(p, u)).real();
    };
    // A pole on an excited line makes the candidate unusable, same as a
    // non-finite cost.
    const auto cost_of = [&](const ParameterVector& p) -> double {
        try {
            return sum_squares(residual_of(p));
        } catch (const std::domain_error&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    FitResult result;
    result.theta_hat = current;
    double cost = sum_squares(residual_of(current));  // init must be evaluable
    result.cost_trajectory.push_back(cost);

    double lambda = opts.damping;
    const double lambda_growth = 10.0;

    for (int iter = 1; iter <= opts.max_iterations; ++iter) {
        const Eigen::VectorXd eps = residual_of(current);
        const Eigen::MatrixXd jac = (rows * frf_derivatives(current, u)).real();
        const Eigen::MatrixXd normal = jac.transpose() * jac;
        const Eigen::VectorXd gradient = jac.transpose() * eps;

        ParameterVector candidate = current;
        Eigen::VectorXd step(n_theta);
        double candidate_cost = std::numeric_limits<double>::infinity();
        bool accepted = false;

        if (lambda == 0.0) {
            // Plain Gauss-Newton step, taken as-is when the normal matrix is
            // well-posed and the step keeps the cost finite.
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> spectrum(normal,
                                                                    Eigen::EigenvaluesOnly);
            const double smallest = spectrum.eigenvalues()(0);
            const double largest = spectrum.eigenvalues()(n_theta - 1);
            const bool well_posed =
                smallest > 0.0 && largest / smallest < ill_conditioned_threshold();
            if (well_posed) {
                step = normal.ldlt().solve(gradient);
                candidate.theta = current.theta + step;
                candidate_cost = cost_of(candidate);
                accepted = step.allFinite() && std::isfinite(candidate_cost);
            }
            if (!accepted) {
                result.damping_activated = true;
                lambda = std::max(1e-10 * normal.trace() / n_theta, kTiny);
            }
        }

        if (lambda > 0.0 && !accepted) {
            // Levenberg iteration: grow the damping until the step is finite
            // and the cost does not increase. As lambda grows the step
            // shrinks toward zero, so this resolves one way or the other.
            const double lambda_cap = 1e16 * (std::abs(normal.trace()) / n_theta + 1.0);
            while (lambda <= lambda_cap) {
                const Eigen::MatrixXd damped =
                    normal + lambda * Eigen::MatrixXd::Identity(n_theta, n_theta);
                step = damped.ldlt().solve(gradient);
                candidate.theta = current.theta + step;
                candidate_cost = cost_of(candidate);
                if (step.allFinite() && std::isfinite(candidate_cost) &&
                    candidate_cost <= cost) {
                    accepted = true;
                    lambda = std::max(lambda / 3.0, kTiny);
                    break;
                }
                lambda *= lambda_growth;
            }
            if (!accepted) {
                // Even a vanishing step cannot keep the cost from rising:
                // stationary for all practical purposes.
                result.iterations_used = iter;
                result.converged = true;
                break;
            }
        }

        current = candidate;
        const double previous_cost = cost;
        cost = candidate_cost;
        result.cost_trajectory.push_back(cost);
        result.iterations_used = iter;

        const double rel_step = step.norm() / std::max(current.theta.norm(), kTiny);
        if (rel_step <= opts.step_tolerance) {
            result.converged = true;
            break;
        }
        const double decrease = previous_cost - cost;
        if (decrease >= 0.0 && decrease <= opts.residual_tolerance * std::max(previous_cost, kTiny)) {
            result.converged = true;
            break;
        }
    }

    result.theta_hat = current;
    result.final_cost = cost;
    if (!std::isfinite(cost) || !current.theta.allFinite()) {
        result.diverged = true;
        result.converged = false;
    }
    return result;
}

IdentifiabilityReport identifiability_rank(const MultisineSignal& u, double h) {
    return identifiability_rank(u, h, default_frequency_tolerance(h));
}

IdentifiabilityReport identifiability_rank(const MultisineSignal& u, double h, double tol) {
    IdentifiabilityReport report;
    report.rank = 1;  // the DC line, always excited
    bool nyquist_line_counted = false;
    std::vector<double> folded_seen;
    const double nyquist = kPi / h;

    for (int l = 0; l < u.tone_count(); ++l) {
        FoldedLine line = fold_frequency(u.components()[l].angular_frequency, h, tol);
        if (line.classification == LineClass::at_nyquist_multiple) {
            // Even multiples fold onto DC; odd multiples collapse into a
            // single line at the Nyquist frequency.
            if (line.folded_frequency > nyquist / 2.0 && !nyquist_line_counted) {
                report.rank += 1;
                nyquist_line_counted = true;
            }
        } else {
            int duplicate_of = -1;
            for (int t = 0; t < l; ++t) {
                if (std::abs(line.folded_frequency - folded_seen[t]) <= tol) {
                    duplicate_of = t;
                    break;
                }
            }
            if (duplicate_of >= 0) {
                line.classification = LineClass::overlaps_with;
                line.overlap_index = duplicate_of;
            } else {
                report.rank += 2;
            }
        }
        folded_seen.push_back(line.folded_frequency);
        report.lines.push_back(line);
    }
    return report;
}

}  // namespace sysid
