#include <doctest.h>

#include <random>

#include "sysid/experiments.hpp"
#include "sysid/frf.hpp"
#include "test_helpers.hpp"

using namespace sysid;

namespace {

// Bin-aligned three-tone input over N = 240, h = 0.5: bins 10, 57 and 150,
// the last of which lies beyond the Nyquist frequency.
MultisineSignal aligned_three_tone(const SamplingGrid& grid) {
    const double base = 2.0 * kPi / (grid.count * grid.period);
    return MultisineSignal(1.0, {{1.0, 10.0 * base, 0.4},
                                 {0.8, 57.0 * base, -1.1},
                                 {1.3, 150.0 * base, 2.2}});
}

}  // namespace

TEST_CASE("normal matrix") {
    SUBCASE("DC-only input gives a 1x1 sum") {
        const MultisineSignal u(1.0, {});
        const auto z = normal_matrix(u, {0.5, 7});
        REQUIRE(z.rows() == 1);
        CHECK(z(0, 0).real() == doctest::Approx(7.0).epsilon(1e-14));
    }
    SUBCASE("bin-aligned input gives exactly N * diag(a0^2, a^2/4, ...)") {
        const SamplingGrid grid{0.5, 240};
        const auto u = aligned_three_tone(grid);
        const auto z = normal_matrix(u, grid);
        Eigen::VectorXd expected(u.line_count());
        expected(0) = u.dc_amplitude() * u.dc_amplitude();
        for (int l = 0; l < u.tone_count(); ++l) {
            const double a = u.components()[l].amplitude;
            expected(2 * l + 1) = a * a / 4.0;
            expected(2 * l + 2) = a * a / 4.0;
        }
        expected *= grid.count;
        for (int i = 0; i < z.rows(); ++i) {
            CHECK(z(i, i).real() == doctest::Approx(expected(i)).epsilon(1e-12));
            for (int j = 0; j < z.cols(); ++j) {
                if (i != j) CHECK(std::abs(z(i, j)) < 1e-9 * grid.count);
            }
        }
    }
    SUBCASE("random input matches the naive double-loop sum") {
        const SamplingGrid grid{0.5, 50};
        const MultisineSignal u(1.0, {{0.9, 1.1, 0.2}, {1.2, 2.9, -0.5}, {0.7, 8.3, 1.4}});
        const auto z = normal_matrix(u, grid);
        Eigen::MatrixXcd reference = Eigen::MatrixXcd::Zero(z.rows(), z.cols());
        for (int k = 1; k <= grid.count; ++k) {
            const auto zeta = regressor(u, grid, k);
            for (int i = 0; i < z.rows(); ++i) {
                for (int j = 0; j < z.cols(); ++j) {
                    reference(i, j) += zeta(i) * std::conj(zeta(j));
                }
            }
        }
        CHECK((z - reference).norm() < 1e-12 * reference.norm());
    }
    SUBCASE("Hermitian structure") {
        const SamplingGrid grid{0.5, 64};
        const auto u = wideband_benchmark_input();
        const auto z = normal_matrix(u, grid);
        CHECK((z - z.adjoint()).norm() < 1e-12 * z.norm());
    }
}

TEST_CASE("least-squares FRF estimate") {
    SUBCASE("noiseless unity system is interpolated exactly") {
        const SamplingGrid grid{0.5, 100};
        const MultisineSignal u(1.0, {{1.0, 1.3, 0.3}, {1.0, 4.1, -0.7}});
        const RationalTransferFunction unity({1.0}, {1.0});
        const auto x = simulate_stationary(unity, u, grid);
        const auto estimate = ls_frf(u, grid, x, 0.0);
        for (int i = 0; i < estimate.values.size(); ++i) {
            CHECK(std::abs(estimate.values(i) - 1.0) < 1e-10);
        }
        CHECK(estimate.condition_number >= 1.0);
        CHECK(estimate.condition_number < ill_conditioned_threshold());
    }
    SUBCASE("estimates stay conjugate-symmetric on real noisy data") {
        const SamplingGrid grid{0.5, 400};
        const auto u = wideband_benchmark_input();
        const auto x = simulate_stationary(rao_garnier(), u, grid);
        const auto y = add_noise(x, {2.0, 99});
        const auto estimate = ls_frf(u, grid, y, 2.0);
        CHECK(std::abs(estimate.values(0).imag()) < 1e-10);
        for (int l = 0; l < u.tone_count(); ++l) {
            CHECK(std::abs(estimate.values(2 * l + 1) -
                           std::conj(estimate.values(2 * l + 2))) < 1e-10);
        }
    }
    SUBCASE("covariance is sigma^2 times the normal matrix inverse") {
        const SamplingGrid grid{0.5, 120};
        const MultisineSignal u(1.0, {{1.0, 0.9, 0.1}, {1.0, 2.3, 0.8}});
        const auto x = simulate_stationary(rao_garnier(), u, grid);
        const double sigma = 1.7;
        const auto estimate = ls_frf(u, grid, x, sigma);
        const auto z = normal_matrix(u, grid);
        const Eigen::MatrixXcd product = estimate.covariance * z / (sigma * sigma);
        CHECK((product - Eigen::MatrixXcd::Identity(z.rows(), z.cols())).norm() < 1e-10);
    }
    SUBCASE("a line shifted by the full folding period is rejected") {
        const double h = 0.5;
        const double w1 = 1.3;
        const double w2 = w1 + 2.0 * kPi / h;
        const MultisineSignal u(1.0, {{1.0, w1, 0.7}, {1.0, w2, -0.4}});
        const SamplingGrid grid{h, 400};
        const std::vector<double> y(grid.count, 1.0);
        CHECK_THROWS_AS(ls_frf(u, grid, y, 1.0), IllConditionedError);
    }
    SUBCASE("a line at a Nyquist multiple is rejected rather than estimated") {
        const double h = 0.5;
        const MultisineSignal u(1.0, {{1.0, kPi / h, 0.2}});
        const SamplingGrid grid{h, 100};
        const std::vector<double> y(grid.count, 1.0);
        CHECK_THROWS_AS(ls_frf(u, grid, y, 1.0), IllConditionedError);
    }
    SUBCASE("record shorter than the line count is rejected") {
        const MultisineSignal u(1.0, {{1.0, 1.0, 0.0}, {1.0, 2.0, 0.0}});
        const SamplingGrid grid{0.5, 4};
        const std::vector<double> y(4, 0.0);
        CHECK_THROWS_AS(ls_frf(u, grid, y, 1.0), std::invalid_argument);
    }
}

TEST_CASE("asymptotic covariance diagonal") {
    SUBCASE("unit amplitudes") {
        const MultisineSignal u(1.0, {{1.0, 1.0, 0.0}, {1.0, 2.0, 0.0}});
        const auto diag = asymptotic_covariance(u, 1.0);
        REQUIRE(diag.size() == 5);
        CHECK(diag(0) == 1.0);
        for (int i = 1; i < 5; ++i) CHECK(diag(i) == 4.0);
    }
    SUBCASE("scales with sigma^2 and 1/a^2") {
        const MultisineSignal u(1.0, {{2.0, 1.0, 0.0}});
        const auto diag = asymptotic_covariance(u, 2.0);
        CHECK(diag(0) == doctest::Approx(4.0));
        CHECK(diag(1) == doctest::Approx(4.0));
        CHECK(diag(2) == doctest::Approx(4.0));
    }
}

TEST_CASE("ETFE quotient form") {
    const SamplingGrid grid{0.5, 240};
    SUBCASE("noiseless bin-aligned tone through the unity system") {
        const double base = 2.0 * kPi / (grid.count * grid.period);
        const MultisineSignal u(1.0, {{1.0, 20.0 * base, 0.3}});
        const RationalTransferFunction unity({1.0}, {1.0});
        const auto x = simulate_stationary(unity, u, grid);
        const auto values = etfe_frf(u, grid, x);
        for (int i = 0; i < values.size(); ++i) {
            CHECK(std::abs(values(i) - 1.0) < 1e-10);
        }
    }
    SUBCASE("noiseless benchmark output matches the true responses") {
        const auto u = aligned_three_tone(grid);
        const auto g = rao_garnier();
        const auto x = simulate_stationary(g, u, grid);
        const auto values = etfe_frf(u, grid, x);
        const auto truth = true_frf_vector(g, u);
        for (int i = 0; i < values.size(); ++i) {
            CHECK(oracle::relative_error(values(i), truth(i)) < 1e-9);
        }
    }
    SUBCASE("coincides with the least-squares estimate on noisy data") {
        const auto u = aligned_three_tone(grid);
        const auto x = simulate_stationary(rao_garnier(), u, grid);
        const auto y = add_noise(x, {1.5, 11});
        const auto quotient = etfe_frf(u, grid, y);
        const auto ls = ls_frf(u, grid, y, 1.5);
        for (int i = 0; i < quotient.size(); ++i) {
            CHECK(oracle::relative_error(quotient(i), ls.values(i)) < 1e-10);
        }
    }
    SUBCASE("refuses leaking records") {
        const MultisineSignal u(1.0, {{1.0, 0.1, 0.0}});
        const std::vector<double> y(grid.count, 1.0);
        CHECK_THROWS_AS(etfe_frf(u, grid, y), LeakagePresentError);
        try {
            etfe_frf(u, grid, y);
        } catch (const LeakagePresentError& e) {
            REQUIRE(e.offending_frequencies().size() == 1);
            CHECK(e.offending_frequencies()[0] == doctest::Approx(0.1));
        }
    }
    SUBCASE("refuses overlapping lines") {
        const double h = grid.period;
        // Bin-aligned pair separated by exactly the folding period.
        const double base = 2.0 * kPi / (grid.count * h);
        const double w1 = 10.0 * base;
        const double w2 = w1 + 2.0 * kPi / h;
        const MultisineSignal u(1.0, {{1.0, w1, 0.0}, {1.0, w2, 0.0}});
        const std::vector<double> y(grid.count, 1.0);
        CHECK_THROWS_AS(etfe_frf(u, grid, y), OverlapError);
    }
}

TEST_CASE("frequency-domain normal equations match the time-domain solution") {
    // Parseval route: assemble the estimator from the DFT bins of the
    // regressor and output spectra and compare with the sample-domain result.
    const SamplingGrid grid{0.5, 240};
    const auto u = aligned_three_tone(grid);
    const auto x = simulate_stationary(rao_garnier(), u, grid);
    const auto y = add_noise(x, {1.0, 21});
    const int d = u.line_count();

    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(d, d);
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(d);
    // Spectra of each regressor entry, evaluated at every DFT bin.
    for (int n = 1; n <= grid.count; ++n) {
        const double w = 2.0 * kPi * n / (grid.count * grid.period);
        Eigen::VectorXcd psi(d);
        psi(0) = [&] {
            std::complex<double> acc(0.0, 0.0);
            for (int k = 1; k <= grid.count; ++k) {
                acc += u.dc_amplitude() * std::polar(1.0, -grid.period * k * w);
            }
            return acc;
        }();
        for (int l = 0; l < u.tone_count(); ++l) {
            const auto& c = u.components()[l];
            std::complex<double> plus(0.0, 0.0), minus(0.0, 0.0);
            for (int k = 1; k <= grid.count; ++k) {
                const double t = grid.period * k;
                const auto line = std::polar(0.5 * c.amplitude, c.angular_frequency * t + c.phase);
                const auto twiddle = std::polar(1.0, -grid.period * k * w);
                plus += line * twiddle;
                minus += std::conj(line) * twiddle;
            }
            psi(2 * l + 1) = plus;
            psi(2 * l + 2) = minus;
        }
        std::complex<double> y_neg(0.0, 0.0);
        for (int k = 1; k <= grid.count; ++k) {
            y_neg += y[k - 1] * std::polar(1.0, grid.period * k * w);
        }
        a += psi * psi.adjoint();
        b += psi * y_neg;
    }
    const Eigen::VectorXcd frequency_domain = a.ldlt().solve(b);
    const auto time_domain = ls_frf(u, grid, y, 1.0);
    for (int i = 0; i < d; ++i) {
        CHECK(oracle::relative_error(frequency_domain(i), time_domain.values(i)) < 1e-9);
    }
}

TEST_CASE("DC-only records run the estimators on 1x1 systems") {
    const SamplingGrid grid{0.5, 50};
    const MultisineSignal u(2.0, {});
    const auto x = simulate_stationary(rao_garnier(), u, grid);
    const auto estimate = ls_frf(u, grid, x, 0.5);
    REQUIRE(estimate.values.size() == 1);
    CHECK(std::abs(estimate.values(0) - 1.0) < 1e-12);  // unit static gain
    CHECK(estimate.condition_number == doctest::Approx(1.0));
    const auto quotient = etfe_frf(u, grid, x);
    REQUIRE(quotient.size() == 1);
    CHECK(std::abs(quotient(0) - 1.0) < 1e-12);
}

TEST_CASE("residual-based noise level estimate") {
    const SamplingGrid grid{0.5, 2000};
    const auto u = wideband_benchmark_input();
    const auto x = simulate_stationary(rao_garnier(), u, grid);
    const double sigma = 3.0;
    const auto y = add_noise(x, {sigma, 5150});
    const double estimated = estimate_noise_sigma(u, grid, y);
    CHECK(std::abs(estimated - sigma) / sigma < 0.1);
}
