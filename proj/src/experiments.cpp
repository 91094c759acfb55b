#include "sysid/experiments.hpp"

#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace sysid {

RationalTransferFunction rao_garnier() {
    return RationalTransferFunction({1600.0, -6400.0}, {1600.0, 416.0, 408.0, 5.0, 1.0});
}

MultisineSignal wideband_benchmark_input() {
    // Frequencies chosen so every folded line at h = 0.5 s stays well
    // separated (minimum modular gap 0.13 rad/s); the top five exceed the
    // Nyquist frequency 2*pi.
    static const double frequencies[13] = {0.1, 0.5, 1.1, 1.9, 2.8,  3.7,  4.9,
                                           6.1, 7.3, 9.4, 13.8, 21.3, 29.1};
    static const double phases[13] = {0.785998,  2.495768,  1.732184, -1.726574, -1.255592,
                                      2.347106,  -3.10851,  2.018338, 1.866542,  -0.201471,
                                      -1.237584, -1.392193, -1.5402};
    std::vector<SineComponent> components;
    components.reserve(13);
    for (int i = 0; i < 13; ++i) {
        components.push_back({1.0, frequencies[i], phases[i]});
    }
    return MultisineSignal(1.0, std::move(components));
}

MultisineSignal overlapping_benchmark_input() {
    static const double phases[4] = {-2.333762, -0.004537, 0.637733, -2.961334};
    std::vector<SineComponent> components = {{1.0, kPi / 3.0, phases[0]},
                                             {1.0, kPi, phases[1]},
                                             {1.0, 3.5 * kPi, phases[2]},
                                             {1.0, 5.0 * kPi, phases[3]}};
    return MultisineSignal(1.0, std::move(components));
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
    std::uint64_t s = splitmix64(master);
    s = splitmix64(s ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
    return splitmix64(s ^ splitmix64(index + 0x9E3779B97F4A7C15ULL));
}

double resolve_sigma(const ExperimentConfig& config, std::span<const double> x) {
    if (config.sigma_override) {
        if (*config.sigma_override < 0.0) {
            throw std::invalid_argument("experiment: negative noise level");
        }
        return *config.sigma_override;
    }
    if (!config.snr_db) {
        throw std::invalid_argument("experiment: needs either an SNR or an explicit noise level");
    }
    return sigma_for_snr(x, *config.snr_db);
}

namespace {

// Purpose tags for seed derivation.
constexpr std::uint64_t kFrfNoiseStream = 0;
constexpr std::uint64_t kPemRunStreamBase = 1;
constexpr std::uint64_t kNoiseSubstream = 0x4E;
constexpr std::uint64_t kInitSubstream = 0x49;

int resolve_threads(int requested, int total_work) {
    int threads = requested > 0 ? requested
                                : static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    return std::min(threads, std::max(total_work, 1));
}

// Runs body(i) for i in [0, total); results must be written to per-index
// slots so the outcome is independent of scheduling.
void parallel_for(int total, int threads, const std::function<void(int)>& body) {
    if (threads <= 1 || total <= 1) {
        for (int i = 0; i < total; ++i) body(i);
        return;
    }
    std::atomic<int> next(0);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        for (int i = next.fetch_add(1); i < total; i = next.fetch_add(1)) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

const RationalTransferFunction& require_system(const ExperimentConfig& config) {
    if (!config.system) {
        throw std::invalid_argument("experiment: config does not specify a system");
    }
    return *config.system;
}

}  // namespace

FrfMonteCarloSummary run_monte_carlo_frf(const ExperimentConfig& config, int threads) {
    if (config.mode && *config.mode != ExperimentMode::frf) {
        throw std::invalid_argument("run_monte_carlo_frf: config mode is not 'frf'");
    }
    if (config.runs < 1) {
        throw std::invalid_argument("run_monte_carlo_frf: needs at least one run");
    }
    const auto& system = require_system(config);
    const MultisineSignal& u = config.input;
    const SamplingGrid& grid = config.grid;
    if (grid.count <= 2 * u.tone_count()) {
        throw std::invalid_argument("run_monte_carlo_frf: record too short, N must exceed 2M");
    }

    if (auto overlap = check_non_overlap(u, grid.period); !overlap.satisfied) {
        throw OverlapError("run_monte_carlo_frf: excitation lines overlap after folding",
                           std::move(overlap));
    }

    const std::vector<double> x = simulate_stationary(system, u, grid);
    const double sigma = resolve_sigma(config, x);

    // Shared, run-independent pieces of the estimator.
    const Eigen::MatrixXcd rows = regressor_conjugate_rows(u, grid);
    Eigen::MatrixXcd z = rows.adjoint() * rows;
    z = 0.5 * (z + z.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> spectrum(z, Eigen::EigenvaluesOnly);
    const double smallest = spectrum.eigenvalues()(0);
    const double cond = smallest > 0.0
                            ? spectrum.eigenvalues()(z.rows() - 1) / smallest
                            : std::numeric_limits<double>::infinity();
    if (!std::isfinite(cond) || cond > ill_conditioned_threshold()) {
        throw IllConditionedError("run_monte_carlo_frf: normal matrix is ill-conditioned", cond);
    }
    const Eigen::LDLT<Eigen::MatrixXcd> factor(z);

    const int d = u.line_count();
    const int runs = config.runs;
    std::vector<Eigen::VectorXcd> estimates(runs);
    std::vector<std::uint64_t> seeds(runs);
    for (int r = 0; r < runs; ++r) {
        seeds[r] = derive_seed(config.master_seed, kFrfNoiseStream, static_cast<std::uint64_t>(r));
    }

    parallel_for(runs, resolve_threads(threads, runs), [&](int r) {
        const std::vector<double> y = add_noise(x, {sigma, seeds[r]});
        const Eigen::Map<const Eigen::VectorXd> ymap(y.data(),
                                                     static_cast<Eigen::Index>(y.size()));
        estimates[r] = factor.solve(rows.adjoint() * ymap.cast<std::complex<double>>());
    });

    FrfMonteCarloSummary summary;
    summary.true_values = true_frf_vector(system, u);
    summary.sigma_used = sigma;
    summary.condition_number = cond;
    summary.seeds_used = std::move(seeds);

    Eigen::VectorXcd mean = Eigen::VectorXcd::Zero(d);
    for (const auto& e : estimates) mean += e;
    mean /= static_cast<double>(runs);
    summary.mean_estimate = mean;

    Eigen::MatrixXcd cov = Eigen::MatrixXcd::Zero(d, d);
    if (runs > 1) {
        for (const auto& e : estimates) {
            const Eigen::VectorXcd delta = e - mean;
            cov += delta * delta.adjoint();
        }
        cov /= static_cast<double>(runs - 1);
    }
    summary.empirical_covariance = cov;
    summary.theoretical_covariance =
        (sigma * sigma) * factor.solve(Eigen::MatrixXcd::Identity(d, d));
    summary.theoretical_covariance =
        0.5 * (summary.theoretical_covariance + summary.theoretical_covariance.adjoint()).eval();
    summary.confidence_half_width =
        (4.0 / std::sqrt(static_cast<double>(runs))) *
        summary.theoretical_covariance.diagonal().real().cwiseMax(0.0).cwiseSqrt();
    return summary;
}

PemMonteCarloSummary run_monte_carlo_pem(const ExperimentConfig& config, int threads) {
    if (config.mode && *config.mode != ExperimentMode::pem) {
        throw std::invalid_argument("run_monte_carlo_pem: config mode is not 'pem'");
    }
    if (config.runs < 1) {
        throw std::invalid_argument("run_monte_carlo_pem: needs at least one run");
    }
    if (config.n_grid.empty()) {
        throw std::invalid_argument("run_monte_carlo_pem: n_grid must not be empty");
    }
    if (!(config.init_perturbation >= 0.0 && config.init_perturbation < 1.0)) {
        throw std::invalid_argument("run_monte_carlo_pem: init_perturbation must be in [0, 1)");
    }
    const auto& system = require_system(config);
    const ParameterVector theta_true = ParameterVector::from_transfer_function(system);
    if (config.model && (config.model->numerator_degree != theta_true.structure.numerator_degree ||
                         config.model->denominator_degree !=
                             theta_true.structure.denominator_degree)) {
        throw std::invalid_argument(
            "run_monte_carlo_pem: the consistency study requires the model structure to match "
            "the simulated system");
    }
    const int n_theta = theta_true.structure.parameter_count();
    const auto identifiability = identifiability_rank(config.input, config.grid.period);
    if (n_theta > identifiability.rank) {
        std::ostringstream msg;
        msg << "run_monte_carlo_pem: " << n_theta
            << " parameters exceed the identifiability rank " << identifiability.rank;
        throw std::invalid_argument(msg.str());
    }

    const int n_count = static_cast<int>(config.n_grid.size());
    const int runs = config.runs;
    PemMonteCarloSummary summary;
    summary.n_values = config.n_grid;
    summary.theta_true = theta_true.theta;
    summary.parameter_means.resize(n_count, n_theta);
    summary.parameter_stderr.resize(n_count, n_theta);
    summary.parameter_mse.resize(n_count, n_theta);
    summary.sigma_used.resize(n_count);
    summary.divergent_runs.assign(n_count, 0);
    summary.seeds_used.reserve(static_cast<std::size_t>(n_count) * runs);

    for (int ni = 0; ni < n_count; ++ni) {
        const int n = config.n_grid[ni];
        const SamplingGrid grid{config.grid.period, n};
        const std::vector<double> x = simulate_stationary(system, config.input, grid);
        const double sigma = resolve_sigma(config, x);
        summary.sigma_used(ni) = sigma;

        std::vector<Eigen::VectorXd> fits(runs);
        std::vector<char> usable(runs, 0);
        std::vector<std::uint64_t> seeds(runs);
        for (int r = 0; r < runs; ++r) {
            seeds[r] = derive_seed(config.master_seed, kPemRunStreamBase + ni,
                                   static_cast<std::uint64_t>(r));
        }

        parallel_for(runs, resolve_threads(threads, runs), [&](int r) {
            ParameterVector init = theta_true;
            if (config.init_perturbation > 0.0) {
                std::mt19937_64 gen(derive_seed(seeds[r], kInitSubstream, 0));
                std::uniform_real_distribution<double> dist(-config.init_perturbation,
                                                            config.init_perturbation);
                for (int j = 0; j < n_theta; ++j) {
                    init.theta(j) = theta_true.theta(j) * (1.0 + dist(gen));
                }
            }
            const std::vector<double> y =
                add_noise(x, {sigma, derive_seed(seeds[r], kNoiseSubstream, 0)});
            try {
                const FitResult fit =
                    gauss_newton(init, config.input, grid, y, config.pem_options);
                if (!fit.diverged && fit.theta_hat.theta.allFinite()) {
                    fits[r] = fit.theta_hat.theta;
                    usable[r] = 1;
                }
            } catch (const std::domain_error&) {
                // Initialization landed on a pole; count as divergent.
            }
        });

        int included = 0;
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(n_theta);
        for (int r = 0; r < runs; ++r) {
            if (usable[r]) {
                mean += fits[r];
                ++included;
            }
        }
        summary.divergent_runs[ni] = runs - included;
        if (included == 0) {
            summary.parameter_means.row(ni).setConstant(std::nan(""));
            summary.parameter_stderr.row(ni).setConstant(std::nan(""));
            summary.parameter_mse.row(ni).setConstant(std::nan(""));
        } else {
            mean /= static_cast<double>(included);
            Eigen::VectorXd mse = Eigen::VectorXd::Zero(n_theta);
            Eigen::VectorXd variance = Eigen::VectorXd::Zero(n_theta);
            for (int r = 0; r < runs; ++r) {
                if (!usable[r]) continue;
                const Eigen::VectorXd err = fits[r] - theta_true.theta;
                mse += err.cwiseProduct(err);
                const Eigen::VectorXd dev = fits[r] - mean;
                variance += dev.cwiseProduct(dev);
            }
            mse /= static_cast<double>(included);
            summary.parameter_means.row(ni) = mean.transpose();
            summary.parameter_mse.row(ni) = mse.transpose();
            if (included > 1) {
                variance /= static_cast<double>(included - 1);
                summary.parameter_stderr.row(ni) =
                    (variance / static_cast<double>(included)).cwiseSqrt().transpose();
            } else {
                summary.parameter_stderr.row(ni).setZero();
            }
        }
        summary.seeds_used.insert(summary.seeds_used.end(), seeds.begin(), seeds.end());
        if (summary.divergent_runs[ni] * 10 > runs) {
            summary.divergence_warning = true;
        }
    }

    // Least-squares slope of log(MSE) against log(N), per parameter.
    summary.mse_slopes.resize(n_theta);
    if (n_count >= 2) {
        Eigen::VectorXd logn(n_count);
        for (int ni = 0; ni < n_count; ++ni) logn(ni) = std::log(config.n_grid[ni]);
        const double logn_mean = logn.mean();
        const double denom = (logn.array() - logn_mean).square().sum();
        for (int j = 0; j < n_theta; ++j) {
            double numer = 0.0;
            Eigen::VectorXd logm(n_count);
            for (int ni = 0; ni < n_count; ++ni) {
                logm(ni) = std::log(summary.parameter_mse(ni, j));
            }
            const double logm_mean = logm.mean();
            for (int ni = 0; ni < n_count; ++ni) {
                numer += (logn(ni) - logn_mean) * (logm(ni) - logm_mean);
            }
            summary.mse_slopes(j) = numer / denom;
        }
    } else {
        summary.mse_slopes.setConstant(std::nan(""));
    }
    return summary;
}

}  // namespace sysid
