// Command-line front end: assumption checks, FRF and PEM estimation, and the
// Monte Carlo harness, all driven by a JSON experiment config.

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sysid/config.hpp"
#include "sysid/experiments.hpp"
#include "sysid/frf.hpp"
#include "sysid/pem.hpp"

namespace {

using namespace sysid;

constexpr int kExitOk = 0;
constexpr int kExitDomainFailure = 1;
constexpr int kExitUsage = 2;

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed_override;
};

int env_thread_cap() {
    const char* env = std::getenv("SYSID_THREADS");
    if (!env || !*env) return 0;
    return std::atoi(env);  // 0 = auto
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char out[32];
    std::strftime(out, sizeof(out), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return out;
}

class ManifestWriter {
public:
    ManifestWriter(const ExperimentConfig& config, std::string command)
        : started_at_(utc_timestamp()), command_(std::move(command)) {
        digest_ = config_digest(config_to_json(config));
    }

    void add_output(const std::filesystem::path& path) { outputs_.push_back(path.string()); }

    void write(const std::filesystem::path& dir) const {
        nlohmann::json manifest = {{"config_digest", digest_},
                                   {"tool_version", kToolVersion},
                                   {"command", command_},
                                   {"started_at", started_at_},
                                   {"finished_at", utc_timestamp()},
                                   {"outputs", outputs_}};
        std::ofstream file(dir / "manifest.json");
        file << manifest.dump(2) << "\n";
    }

private:
    std::string started_at_;
    std::string command_;
    std::string digest_;
    std::vector<std::string> outputs_;
};

ExperimentConfig load_and_override(const CommonArgs& args) {
    ExperimentConfig config = load_config_file(args.config_path);
    if (args.seed_override) config.master_seed = *args.seed_override;
    return config;
}

std::vector<double> read_samples(const std::string& path) {
    std::ifstream file(path);
    if (!file) {
        throw std::runtime_error("cannot open data file '" + path + "'");
    }
    std::vector<double> samples;
    std::string line;
    while (std::getline(file, line)) {
        if (line.empty() || line == "y" || line == "y\r") continue;
        samples.push_back(std::stod(line));
    }
    return samples;
}

const char* line_class_name(LineClass c) {
    switch (c) {
        case LineClass::distinct: return "distinct";
        case LineClass::overlaps_with: return "overlaps";
        case LineClass::at_nyquist_multiple: return "nyquist-multiple";
    }
    return "?";
}

std::optional<ModelStructure> model_structure_of(const ExperimentConfig& config) {
    if (config.model) return config.model;
    if (config.system) {
        return ModelStructure{config.system->numerator_degree(),
                              config.system->denominator_degree()};
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

int cmd_check(const CommonArgs& args) {
    const ExperimentConfig config = load_and_override(args);
    const MultisineSignal& u = config.input;
    const double h = config.grid.period;
    bool all_passed = true;

    const auto overlap = check_non_overlap(u, h);
    std::cout << "non-overlapping lines: " << (overlap.satisfied ? "ok" : "VIOLATED") << "\n";
    for (const auto& v : overlap.violations) {
        const auto& comps = u.components();
        if (v.component_b >= 0) {
            std::cout << "  " << comps[v.component_a].angular_frequency << " rad/s "
                      << (v.is_sum ? "+" : "and") << " " << comps[v.component_b].angular_frequency
                      << " rad/s coincide modulo 2*pi/h (n=" << v.multiple << ")\n";
        } else {
            std::cout << "  " << comps[v.component_a].angular_frequency << " rad/s sits at "
                      << v.multiple << " times the Nyquist frequency\n";
        }
    }
    all_passed = all_passed && overlap.satisfied;

    const auto leaking = leaking_lines(u, config.grid, 1e-9 * config.grid.count);
    std::cout << "leakage-free record:   " << (leaking.empty() ? "ok" : "VIOLATED") << "\n";
    for (double w : leaking) {
        std::cout << "  " << w << " rad/s is not bin-aligned over N*h\n";
    }
    all_passed = all_passed && leaking.empty();

    const auto identifiability = identifiability_rank(u, h);
    std::cout << "folded lines (band [0, " << kPi / h << "] rad/s):\n";
    std::cout << "  original        folded          class\n";
    for (const auto& line : identifiability.lines) {
        std::printf("  %-15.10g %-15.10g %s", line.original_frequency, line.folded_frequency,
                    line_class_name(line.classification));
        if (line.classification == LineClass::overlaps_with) {
            std::printf(" (with %.10g rad/s)",
                        u.components()[line.overlap_index].angular_frequency);
        }
        std::printf("\n");
    }
    std::cout << "identifiability rank:  " << identifiability.rank << "\n";
    if (const auto structure = model_structure_of(config)) {
        const int n_theta = structure->parameter_count();
        const bool fits = n_theta <= identifiability.rank;
        std::cout << "model parameters:      " << n_theta << " ("
                  << (fits ? "within rank" : "EXCEEDS rank") << ")\n";
        all_passed = all_passed && fits;
        if (!overlap.satisfied && fits) {
            std::cout << "note: lines overlap after folding, so the nonparametric estimator is "
                         "ill-posed, but parametric estimation stays consistent for up to "
                      << identifiability.rank << " parameters\n";
        }
    }
    return all_passed ? kExitOk : kExitDomainFailure;
}

// ---------------------------------------------------------------------------
// frf
// ---------------------------------------------------------------------------

struct Record {
    std::vector<double> y;
    double sigma = 0.0;
};

Record obtain_record(const ExperimentConfig& config, const std::string& data_path,
                     bool simulate) {
    if (simulate == !data_path.empty()) {
        throw ConfigError("provide exactly one of a data file or --simulate");
    }
    Record record;
    if (simulate) {
        if (!config.system) {
            throw ConfigError("config: --simulate requires a 'system' section");
        }
        const std::vector<double> x = simulate_stationary(*config.system, config.input,
                                                          config.grid);
        record.sigma = resolve_sigma(config, x);
        record.y = add_noise(x, {record.sigma, config.master_seed});
    } else {
        record.y = read_samples(data_path);
        if (static_cast<int>(record.y.size()) != config.grid.count) {
            throw ConfigError("config: data file length does not match grid.count");
        }
        record.sigma = config.sigma_override
                           ? *config.sigma_override
                           : estimate_noise_sigma(config.input, config.grid, record.y);
    }
    return record;
}

int cmd_frf(const CommonArgs& args, const std::string& data_path, bool simulate, bool etfe) {
    const ExperimentConfig config = load_and_override(args);
    const Record record = obtain_record(config, data_path, simulate);

    FrfEstimate estimate;
    try {
        estimate = ls_frf(config.input, config.grid, record.y, record.sigma);
    } catch (const IllConditionedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        const auto overlap = check_non_overlap(config.input, config.grid.period);
        const auto& comps = config.input.components();
        for (const auto& v : overlap.violations) {
            if (v.component_b >= 0) {
                std::cerr << "  offending pair: " << comps[v.component_a].angular_frequency
                          << " and " << comps[v.component_b].angular_frequency << " rad/s\n";
            } else {
                std::cerr << "  offending line: " << comps[v.component_a].angular_frequency
                          << " rad/s at a Nyquist multiple\n";
            }
        }
        return kExitDomainFailure;
    }
    if (etfe) {
        estimate.values = etfe_frf(config.input, config.grid, record.y);
    }

    const bool with_truth = config.system.has_value();
    FrequencyResponseVector truth;
    if (with_truth) truth = true_frf_vector(*config.system, config.input);

    const std::filesystem::path out_dir(args.out_dir);
    std::filesystem::create_directories(out_dir);
    ManifestWriter manifest(config, etfe ? "frf --etfe" : "frf");

    const std::filesystem::path csv_path = out_dir / "frf.csv";
    std::ofstream csv(csv_path);
    csv << "omega_rad_s";
    if (with_truth) csv << ",re_true,im_true";
    csv << ",re_est,im_est,var_re,var_im,cond\n";
    const auto& comps = config.input.components();
    for (int i = 0; i < config.input.line_count(); ++i) {
        double omega = 0.0;
        if (i > 0) {
            const int l = (i - 1) / 2;
            omega = ((i % 2) == 1 ? -1.0 : 1.0) * comps[l].angular_frequency;
        }
        // Complex variance split evenly across parts; the DC estimate is real.
        const double var = estimate.covariance(i, i).real();
        const double var_re = (i == 0) ? var : 0.5 * var;
        const double var_im = (i == 0) ? 0.0 : 0.5 * var;
        csv << format_number(omega);
        if (with_truth) {
            csv << "," << format_number(truth(i).real()) << "," << format_number(truth(i).imag());
        }
        csv << "," << format_number(estimate.values(i).real()) << ","
            << format_number(estimate.values(i).imag()) << "," << format_number(var_re) << ","
            << format_number(var_im) << "," << format_number(estimate.condition_number) << "\n";
    }
    csv.close();
    manifest.add_output(csv_path);
    manifest.write(out_dir);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// pem
// ---------------------------------------------------------------------------

int cmd_pem(const CommonArgs& args, const std::string& data_path, bool simulate, bool force) {
    const ExperimentConfig config = load_and_override(args);
    const auto structure = model_structure_of(config);
    if (!structure) {
        throw ConfigError("config: pem needs a 'model' or 'system' section");
    }
    const int n_theta = structure->parameter_count();
    const auto identifiability = identifiability_rank(config.input, config.grid.period);
    if (n_theta > identifiability.rank && !force) {
        std::cerr << "pem: " << n_theta << " parameters exceed the identifiability rank "
                  << identifiability.rank << " of this excitation (use --force to proceed)\n";
        return kExitDomainFailure;
    }

    ParameterVector init;
    init.structure = *structure;
    if (config.init_theta) {
        if (config.init_theta->size() != n_theta) {
            throw ConfigError("config: init_theta length does not match the model structure");
        }
        init.theta = *config.init_theta;
    } else if (config.system &&
               config.system->numerator_degree() == structure->numerator_degree &&
               config.system->denominator_degree() == structure->denominator_degree) {
        init = ParameterVector::from_transfer_function(*config.system);
        if (config.init_perturbation > 0.0) {
            std::mt19937_64 gen(derive_seed(config.master_seed, 0x49, 0));
            std::uniform_real_distribution<double> dist(-config.init_perturbation,
                                                        config.init_perturbation);
            for (int j = 0; j < n_theta; ++j) init.theta(j) *= 1.0 + dist(gen);
        }
    } else {
        throw ConfigError("config: no usable initialization (provide init_theta)");
    }

    const Record record = obtain_record(config, data_path, simulate);
    const FitResult fit =
        gauss_newton(init, config.input, config.grid, record.y, config.pem_options);
    const bool stable = !fit.diverged && fit.theta_hat.to_transfer_function().is_stable();

    const std::filesystem::path out_dir(args.out_dir);
    std::filesystem::create_directories(out_dir);
    ManifestWriter manifest(config, "pem");

    const std::filesystem::path csv_path = out_dir / "pem.csv";
    {
        std::ofstream csv(csv_path);
        for (int j = 0; j < n_theta; ++j) csv << "theta_" << j << ",";
        csv << "final_cost,iterations,converged,stability_flag\n";
        for (int j = 0; j < n_theta; ++j) csv << format_number(fit.theta_hat.theta(j)) << ",";
        csv << format_number(fit.final_cost) << "," << fit.iterations_used << ","
            << (fit.converged ? 1 : 0) << "," << (stable ? 1 : 0) << "\n";
    }
    manifest.add_output(csv_path);

    const std::filesystem::path traj_path = out_dir / "trajectory.csv";
    {
        std::ofstream csv(traj_path);
        csv << "iteration,cost\n";
        for (std::size_t i = 0; i < fit.cost_trajectory.size(); ++i) {
            csv << i << "," << format_number(fit.cost_trajectory[i]) << "\n";
        }
    }
    manifest.add_output(traj_path);
    manifest.write(out_dir);

    if (fit.diverged) {
        std::cerr << "pem: iteration diverged; trajectory written for diagnosis\n";
        return kExitDomainFailure;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// mc
// ---------------------------------------------------------------------------

int cmd_mc(const CommonArgs& args) {
    ExperimentConfig config = load_and_override(args);
    if (!config.mode) {
        throw ConfigError("config: mc requires a 'mode' field");
    }
    const std::filesystem::path out_dir(args.out_dir);
    std::filesystem::create_directories(out_dir);
    ManifestWriter manifest(config, "mc");
    const std::filesystem::path csv_path = out_dir / "mc_summary.csv";
    std::ofstream csv(csv_path);

    if (*config.mode == ExperimentMode::frf) {
        const FrfMonteCarloSummary summary = run_monte_carlo_frf(config, env_thread_cap());
        csv << "omega_rad_s,re_true,im_true,re_mean,im_mean,abs_bias,theoretical_var,"
               "empirical_var,conf_half_width\n";
        const auto& comps = config.input.components();
        for (int i = 0; i < config.input.line_count(); ++i) {
            double omega = 0.0;
            if (i > 0) {
                const int l = (i - 1) / 2;
                omega = ((i % 2) == 1 ? -1.0 : 1.0) * comps[l].angular_frequency;
            }
            const double bias = std::abs(summary.mean_estimate(i) - summary.true_values(i));
            csv << format_number(omega) << "," << format_number(summary.true_values(i).real())
                << "," << format_number(summary.true_values(i).imag()) << ","
                << format_number(summary.mean_estimate(i).real()) << ","
                << format_number(summary.mean_estimate(i).imag()) << "," << format_number(bias)
                << "," << format_number(summary.theoretical_covariance(i, i).real()) << ","
                << format_number(summary.empirical_covariance(i, i).real()) << ","
                << format_number(summary.confidence_half_width(i)) << "\n";
        }
    } else {
        if (config.n_grid.empty()) config.n_grid = {config.grid.count};
        const PemMonteCarloSummary summary = run_monte_carlo_pem(config, env_thread_cap());
        csv << "kind,n_samples,parameter_index,theta_true,mean,stderr,mse,slope\n";
        const int n_theta = static_cast<int>(summary.theta_true.size());
        for (std::size_t ni = 0; ni < summary.n_values.size(); ++ni) {
            for (int j = 0; j < n_theta; ++j) {
                csv << "estimate," << summary.n_values[ni] << "," << j << ","
                    << format_number(summary.theta_true(j)) << ","
                    << format_number(summary.parameter_means(ni, j)) << ","
                    << format_number(summary.parameter_stderr(ni, j)) << ","
                    << format_number(summary.parameter_mse(ni, j)) << ",\n";
            }
        }
        for (int j = 0; j < n_theta; ++j) {
            csv << "slope,," << j << "," << format_number(summary.theta_true(j)) << ",,,,"
                << format_number(summary.mse_slopes(j)) << "\n";
        }
        if (summary.divergence_warning) {
            std::cerr << "mc: warning: more than 10% of runs diverged at some record length\n";
        }
        int total_divergent = 0;
        for (int d : summary.divergent_runs) total_divergent += d;
        if (total_divergent > 0) {
            std::cerr << "mc: " << total_divergent
                      << " divergent runs were excluded from the statistics\n";
        }
    }
    csv.close();
    manifest.add_output(csv_path);
    manifest.write(out_dir);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continuous-time system identification from slow-sampled records"};
    app.require_subcommand(1);

    CommonArgs check_args, frf_args, pem_args, mc_args;
    std::string frf_data, pem_data;
    bool frf_simulate = false, frf_etfe = false;
    bool pem_simulate = false, pem_force = false;

    auto add_common = [](CLI::App* cmd, CommonArgs& args) {
        cmd->add_option("config", args.config_path, "Experiment config (JSON)")->required();
        cmd->add_option("--out", args.out_dir, "Output directory");
        cmd->add_option("--seed", args.seed_override, "Override the config master seed");
    };

    CLI::App* check = app.add_subcommand("check", "Verify excitation assumptions");
    add_common(check, check_args);

    CLI::App* frf = app.add_subcommand("frf", "Nonparametric frequency response estimate");
    add_common(frf, frf_args);
    frf->add_option("data", frf_data, "Output record, one sample per line");
    frf->add_flag("--simulate", frf_simulate, "Simulate the record from the config");
    frf->add_flag("--etfe", frf_etfe, "Use the DTFT quotient form of the estimator");

    CLI::App* pem = app.add_subcommand("pem", "Parametric prediction-error estimate");
    add_common(pem, pem_args);
    pem->add_option("data", pem_data, "Output record, one sample per line");
    pem->add_flag("--simulate", pem_simulate, "Simulate the record from the config");
    pem->add_flag("--force", pem_force, "Proceed past the identifiability rank check");

    CLI::App* mc = app.add_subcommand("mc", "Monte Carlo study (frf or pem mode)");
    add_common(mc, mc_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (check->parsed()) return cmd_check(check_args);
        if (frf->parsed()) return cmd_frf(frf_args, frf_data, frf_simulate, frf_etfe);
        if (pem->parsed()) return cmd_pem(pem_args, pem_data, pem_simulate, pem_force);
        if (mc->parsed()) return cmd_mc(mc_args);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IllConditionedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomainFailure;
    } catch (const LeakagePresentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomainFailure;
    } catch (const OverlapError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomainFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomainFailure;
    }
    return kExitUsage;
}
