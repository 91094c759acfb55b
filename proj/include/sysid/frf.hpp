#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sysid/lti.hpp"
#include "sysid/signal.hpp"

namespace sysid {

/// The least-squares normal matrix crossed the well-posedness threshold,
/// which happens exactly when excitation lines coincide after folding or the
/// record is too short.
class IllConditionedError : public std::runtime_error {
public:
    IllConditionedError(const std::string& what, double condition_number)
        : std::runtime_error(what), condition_number_(condition_number) {}
    double condition_number() const { return condition_number_; }

private:
    double condition_number_;
};

/// One or more excitation lines are not bin-aligned over the record.
class LeakagePresentError : public std::runtime_error {
public:
    LeakagePresentError(const std::string& what, std::vector<double> offending)
        : std::runtime_error(what), offending_frequencies_(std::move(offending)) {}
    const std::vector<double>& offending_frequencies() const { return offending_frequencies_; }

private:
    std::vector<double> offending_frequencies_;
};

/// Excitation lines coincide after folding into the fundamental band.
class OverlapError : public std::runtime_error {
public:
    OverlapError(const std::string& what, NonOverlapReport report)
        : std::runtime_error(what), report_(std::move(report)) {}
    const NonOverlapReport& report() const { return report_; }

private:
    NonOverlapReport report_;
};

using NormalMatrix = Eigen::MatrixXcd;

/// Z = sum_{k=1..N} zeta(kh) zeta^H(kh). Hermitian by construction; positive
/// definite iff no lines overlap after folding and N >= 2M+1.
NormalMatrix normal_matrix(const MultisineSignal& u, const SamplingGrid& grid);

/// Condition number beyond which the normal equations are declared ill-posed.
double ill_conditioned_threshold();

struct FrfEstimate {
    FrequencyResponseVector values;  ///< [G(0), G(-i w1), G(+i w1), ...]
    Eigen::MatrixXcd covariance;     ///< sigma^2 * Z^{-1}
    double sigma_used = 0.0;
    double condition_number = 0.0;
};

/// Least-squares frequency response estimate from stationary-regime output
/// samples. The Hermitian normal equations are solved by factorization, never
/// by forming an explicit inverse of Z for the solution. Throws
/// IllConditionedError past the well-posedness threshold.
FrfEstimate ls_frf(const MultisineSignal& u, const SamplingGrid& grid,
                   std::span<const double> y, double sigma);

/// Large-N limit of N * Cov: sigma^2 * [1/a0^2, 4/a1^2, 4/a1^2, ..., 4/aM^2, 4/aM^2].
Eigen::VectorXd asymptotic_covariance(const MultisineSignal& u, double sigma);

/// Empirical transfer function estimate: the output DTFT divided by the
/// analytic input DTFT at each excited line (DC: N*a0; tones: N*(a/2)e^{+-i phi}).
/// Requires bin-aligned, non-overlapping lines, under which it coincides with
/// the least-squares estimate.
FrequencyResponseVector etfe_frf(const MultisineSignal& u, const SamplingGrid& grid,
                                 std::span<const double> y);

/// Residual-based noise level: sqrt(RSS / (N - (2M+1))). A convenience for
/// records whose noise variance is unknown.
double estimate_noise_sigma(const MultisineSignal& u, const SamplingGrid& grid,
                            std::span<const double> y);

}  // namespace sysid
