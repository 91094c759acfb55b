#pragma once

#include <span>
#include <vector>

#include "sysid/frf.hpp"
#include "sysid/lti.hpp"
#include "sysid/signal.hpp"

namespace sysid {

/// Degrees of the rational model G(p, theta). Parameters are ordered
/// [a_0 .. a_{n-1}, b_0 .. b_m] and map to a monic degree-n denominator.
struct ModelStructure {
    int numerator_degree = 0;    ///< m
    int denominator_degree = 0;  ///< n
    int parameter_count() const { return denominator_degree + numerator_degree + 1; }
};

struct ParameterVector {
    Eigen::VectorXd theta;
    ModelStructure structure;

    RationalTransferFunction to_transfer_function() const;
    static ParameterVector from_transfer_function(const RationalTransferFunction& g);
};

struct GaussNewtonOptions {
    int max_iterations = 100;
    double step_tolerance = 1e-10;      ///< relative step norm
    double residual_tolerance = 1e-12;  ///< relative cost decrease
    double damping = 0.0;  ///< Levenberg term; 0 leaves only the automatic fallback
};

struct FitResult {
    ParameterVector theta_hat;
    std::vector<double> cost_trajectory;  ///< cost at the initial point and after each step
    bool converged = false;
    int iterations_used = 0;
    double final_cost = 0.0;
    bool damping_activated = false;  ///< automatic Levenberg fallback was engaged
    bool diverged = false;           ///< cost or parameters became non-finite
};

/// Frequency responses of the parametric model at the excited lines, in the
/// same ordering as true_frf_vector. Throws std::domain_error when a model
/// pole lands on an excited frequency (|A(i w)| < 1e-14).
FrequencyResponseVector parametric_frf(const ParameterVector& p, const MultisineSignal& u);

/// Predicted stationary output of the parametric model, sample by sample.
std::vector<double> predictor(const ParameterVector& p, const MultisineSignal& u,
                              const SamplingGrid& grid);

/// Sum of squared prediction errors over the record.
double cost_time(const ParameterVector& p, const MultisineSignal& u, const SamplingGrid& grid,
                 std::span<const double> y);

/// Covariance-weighted quadratic distance between the model and estimated
/// frequency responses. The weight is the inverse of the estimate covariance.
double cost_freq(const ParameterVector& p, const FrfEstimate& estimate,
                 const MultisineSignal& u);

/// Analytic Jacobian of the predictor, one column per parameter:
/// dG/db_i = s^i / A(s), dG/da_i = -s^i B(s) / A(s)^2 at each excited line.
Eigen::MatrixXd jacobian(const ParameterVector& p, const MultisineSignal& u,
                         const SamplingGrid& grid);

/// Gauss-Newton minimization of the prediction error cost. Singular or
/// ill-conditioned normal equations trigger an automatic Levenberg fallback
/// (recorded in the result) under which the cost trajectory is non-increasing.
FitResult gauss_newton(const ParameterVector& theta_init, const MultisineSignal& u,
                       const SamplingGrid& grid, std::span<const double> y,
                       const GaussNewtonOptions& opts = {});

struct IdentifiabilityReport {
    /// Distinct excited lines in the fundamental band after folding: the DC
    /// line once, each distinct non-Nyquist folded frequency twice. Bounds the
    /// number of consistently estimable parameters.
    int rank = 0;
    std::vector<FoldedLine> lines;  ///< one entry per component
};

IdentifiabilityReport identifiability_rank(const MultisineSignal& u, double h);
IdentifiabilityReport identifiability_rank(const MultisineSignal& u, double h, double tol);

}  // namespace sysid
