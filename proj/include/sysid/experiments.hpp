#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sysid/frf.hpp"
#include "sysid/lti.hpp"
#include "sysid/pem.hpp"
#include "sysid/signal.hpp"

namespace sysid {

/// Benchmark fourth-order system used throughout the simulation studies:
/// (-6400 p + 1600) / (p^4 + 5 p^3 + 408 p^2 + 416 p + 1600).
RationalTransferFunction rao_garnier();

/// Fixed 13-tone excitation for the nonparametric study at h = 0.5 s: unit
/// amplitudes, frequencies spread over [0.1, 30] rad/s with five of them
/// beyond the Nyquist frequency, fixed phases, and no folding collisions.
MultisineSignal wideband_benchmark_input();

/// Fixed 4-tone excitation {pi/3, pi, 7pi/2, 5pi} whose top line folds onto
/// pi at h = 0.5 s, leaving 7 distinct excited lines.
MultisineSignal overlapping_benchmark_input();

/// splitmix-style 64-bit mix, used to derive independent per-run seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Deterministic seed for (master, stream, index); streams separate purposes
/// (noise, initialization) and grid positions.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

enum class ExperimentMode { frf, pem };

/// Declarative description of one Monte Carlo study.
struct ExperimentConfig {
    std::optional<RationalTransferFunction> system;
    MultisineSignal input;
    SamplingGrid grid{};
    std::optional<double> snr_db;
    std::optional<double> sigma_override;  ///< bypasses the SNR-derived noise level
    int runs = 1;
    std::uint64_t master_seed = 1;
    std::optional<ExperimentMode> mode;
    GaussNewtonOptions pem_options{};
    double init_perturbation = 0.10;  ///< uniform relative perturbation of theta_0
    std::vector<int> n_grid;          ///< record lengths for consistency sweeps
    std::optional<ModelStructure> model;       ///< defaults to the system's degrees
    std::optional<Eigen::VectorXd> init_theta; ///< explicit initialization
};

/// Resolves the noise level for a simulated record: the explicit override if
/// present, otherwise derived from the configured SNR.
double resolve_sigma(const ExperimentConfig& config, std::span<const double> x);

struct FrfMonteCarloSummary {
    Eigen::VectorXcd mean_estimate;
    Eigen::VectorXcd true_values;
    Eigen::MatrixXcd empirical_covariance;
    Eigen::MatrixXcd theoretical_covariance;  ///< sigma^2 Z^{-1} at the simulated length
    Eigen::VectorXd confidence_half_width;    ///< 4 sqrt(diag(theoretical)/runs)
    double sigma_used = 0.0;
    double condition_number = 0.0;
    std::vector<std::uint64_t> seeds_used;
};

/// Repeated-noise study of the least-squares FRF estimator. Runs are seeded
/// independently from the master seed and aggregated in run order, so the
/// summary is identical for any thread count.
FrfMonteCarloSummary run_monte_carlo_frf(const ExperimentConfig& config, int threads = 0);

struct PemMonteCarloSummary {
    std::vector<int> n_values;
    Eigen::VectorXd theta_true;
    Eigen::MatrixXd parameter_means;   ///< one row per record length
    Eigen::MatrixXd parameter_stderr;  ///< standard error of the mean
    Eigen::MatrixXd parameter_mse;
    Eigen::VectorXd mse_slopes;        ///< log-log slope of MSE vs N, per parameter
    Eigen::VectorXd sigma_used;        ///< per record length
    std::vector<int> divergent_runs;   ///< per record length, excluded from the stats
    bool divergence_warning = false;   ///< more than 10% of runs diverged somewhere
    std::vector<std::uint64_t> seeds_used;
};

/// Consistency study of the prediction error estimator across record lengths.
PemMonteCarloSummary run_monte_carlo_pem(const ExperimentConfig& config, int threads = 0);

}  // namespace sysid
