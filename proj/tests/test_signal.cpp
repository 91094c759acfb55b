#include <doctest.h>

#include <random>

#include "sysid/signal.hpp"
#include "test_helpers.hpp"

using namespace sysid;

namespace {

MultisineSignal random_multisine(int tones, unsigned seed, double w_min = 0.1,
                                 double w_max = 30.0) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> freq(w_min, w_max);
    std::uniform_real_distribution<double> phase(-kPi, kPi);
    std::uniform_real_distribution<double> amp(0.2, 2.0);
    std::vector<double> ws(tones);
    for (auto& w : ws) w = freq(gen);
    std::sort(ws.begin(), ws.end());
    std::vector<SineComponent> comps;
    for (double w : ws) comps.push_back({amp(gen), w, phase(gen)});
    return MultisineSignal(1.0, std::move(comps));
}

}  // namespace

TEST_CASE("multisine invariants are enforced at construction") {
    CHECK_THROWS_AS(MultisineSignal(0.0, {}), std::invalid_argument);
    CHECK_THROWS_AS(MultisineSignal(1.0, {{0.0, 1.0, 0.0}}), std::invalid_argument);
    CHECK_THROWS_AS(MultisineSignal(1.0, {{1.0, -1.0, 0.0}}), std::invalid_argument);
    CHECK_THROWS_AS(MultisineSignal(1.0, {{1.0, 2.0, 0.0}, {1.0, 2.0, 0.0}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(MultisineSignal(1.0, {{1.0, 3.0, 0.0}, {1.0, 2.0, 0.0}}),
                    std::invalid_argument);
    CHECK_NOTHROW(MultisineSignal(2.0, {}));  // DC-only is fine
}

TEST_CASE("multisine evaluation") {
    SUBCASE("DC-only signal is constant") {
        const MultisineSignal u(1.0, {});
        CHECK(evaluate_multisine(u, 17.3) == 1.0);
    }
    SUBCASE("single tone against the analytic cosine") {
        const MultisineSignal u(1.0, {{1.0, kPi, 0.0}});
        CHECK(evaluate_multisine(u, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("13 tones against the term-by-term reference") {
        const MultisineSignal u = random_multisine(13, 1234);
        const double h = 0.5;
        for (int k = 1; k <= 50; ++k) {
            const double t = k * h;
            CHECK(evaluate_multisine(u, t) ==
                  doctest::Approx(oracle::multisine_value(u, t)).epsilon(1e-12));
        }
    }
}

TEST_CASE("regressor structure and values") {
    SUBCASE("DC-only regressor is the DC amplitude") {
        const MultisineSignal u(2.0, {});
        const auto zeta = regressor(u, {0.5, 10}, 3);
        REQUIRE(zeta.size() == 1);
        CHECK(zeta(0) == std::complex<double>(2.0, 0.0));
    }
    SUBCASE("single tone analytic values") {
        const MultisineSignal u(1.0, {{1.0, kPi, 0.0}});
        const auto zeta = regressor(u, {0.5, 10}, 1);
        REQUIRE(zeta.size() == 3);
        CHECK(std::abs(zeta(0) - std::complex<double>(1.0, 0.0)) < 1e-15);
        CHECK(std::abs(zeta(1) - std::complex<double>(0.0, 0.5)) < 1e-15);
        CHECK(std::abs(zeta(2) - std::complex<double>(0.0, -0.5)) < 1e-15);
    }
    SUBCASE("index bounds") {
        const MultisineSignal u(1.0, {});
        CHECK_THROWS_AS(regressor(u, {0.5, 10}, 0), std::out_of_range);
        CHECK_THROWS_AS(regressor(u, {0.5, 10}, 11), std::out_of_range);
    }
    SUBCASE("conjugate-pair structure holds at every sample") {
        const MultisineSignal u = random_multisine(5, 99);
        const SamplingGrid grid{0.5, 40};
        for (int k = 1; k <= grid.count; ++k) {
            const auto zeta = regressor(u, grid, k);
            CHECK(zeta(0).imag() == 0.0);
            CHECK(zeta(0).real() == doctest::Approx(u.dc_amplitude()));
            for (int l = 0; l < u.tone_count(); ++l) {
                const auto plus = zeta(2 * l + 1);
                const auto minus = zeta(2 * l + 2);
                CHECK(std::abs(plus - std::conj(minus)) < 1e-15);
                CHECK(std::abs(plus) ==
                      doctest::Approx(0.5 * std::abs(u.components()[l].amplitude)));
            }
        }
    }
    SUBCASE("unity response reproduces the input samples") {
        const MultisineSignal u = random_multisine(4, 7);
        const SamplingGrid grid{0.5, 30};
        const Eigen::VectorXcd ones = Eigen::VectorXcd::Ones(u.line_count());
        for (int k = 1; k <= grid.count; ++k) {
            const std::complex<double> out = regressor(u, grid, k).adjoint() * ones;
            CHECK(out.real() ==
                  doctest::Approx(evaluate_multisine(u, k * grid.period)).epsilon(1e-12));
            CHECK(std::abs(out.imag()) < 1e-12);
        }
    }
    SUBCASE("conjugated rows agree with the per-sample regressor") {
        const MultisineSignal u = random_multisine(3, 55);
        const SamplingGrid grid{0.4, 20};
        const Eigen::MatrixXcd rows = regressor_conjugate_rows(u, grid);
        for (int k = 1; k <= grid.count; ++k) {
            const Eigen::VectorXcd expected = regressor(u, grid, k).conjugate();
            CHECK((rows.row(k - 1).transpose() - expected).norm() < 1e-15);
        }
    }
}

TEST_CASE("regressor applied to a conjugate-symmetric vector is real") {
    const MultisineSignal u = random_multisine(6, 2024);
    const SamplingGrid grid{0.5, 25};
    std::mt19937 gen(5);
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    Eigen::VectorXcd gf(u.line_count());
    gf(0) = dist(gen);
    for (int l = 0; l < u.tone_count(); ++l) {
        const std::complex<double> v(dist(gen), dist(gen));
        gf(2 * l + 1) = std::conj(v);
        gf(2 * l + 2) = v;
    }
    for (int k = 1; k <= grid.count; ++k) {
        const std::complex<double> out = regressor(u, grid, k).adjoint() * gf;
        CHECK(std::abs(out.imag()) < 1e-12);
    }
}

TEST_CASE("frequency folding") {
    const double h = 0.5;
    SUBCASE("a line at 5*pi folds onto pi") {
        const auto line = fold_frequency(5.0 * kPi, h);
        CHECK(line.folded_frequency == doctest::Approx(kPi).epsilon(1e-12));
        CHECK(line.classification == LineClass::distinct);
    }
    SUBCASE("7*pi/2 folds to pi/2, matching the lattice-scan reference") {
        const auto line = fold_frequency(3.5 * kPi, h);
        CHECK(line.folded_frequency == doctest::Approx(0.5 * kPi).epsilon(1e-12));
        const auto [dist, n] = oracle::nearest_lattice_distance(3.5 * kPi, 2.0 * kPi / h, 3);
        CHECK(line.folded_frequency == doctest::Approx(dist).epsilon(1e-12));
        CHECK(n == 1);
    }
    SUBCASE("the Nyquist frequency itself is flagged") {
        const auto line = fold_frequency(kPi / h, h);
        CHECK(line.classification == LineClass::at_nyquist_multiple);
    }
    SUBCASE("folding is idempotent") {
        std::mt19937 gen(77);
        std::uniform_real_distribution<double> dist(0.0, 100.0);
        for (int i = 0; i < 200; ++i) {
            const double w = dist(gen);
            const auto once = fold_frequency(w, h);
            const auto twice = fold_frequency(once.folded_frequency, h);
            CHECK(twice.folded_frequency ==
                  doctest::Approx(once.folded_frequency).epsilon(1e-12));
        }
    }
    SUBCASE("folded representatives match the lattice scan for random lines") {
        std::mt19937 gen(31);
        std::uniform_real_distribution<double> dist(0.0, 80.0);
        for (int i = 0; i < 100; ++i) {
            const double w = dist(gen);
            const auto line = fold_frequency(w, h);
            const auto [d, n] = oracle::nearest_lattice_distance(w, 2.0 * kPi / h, 8);
            CHECK(line.folded_frequency == doctest::Approx(d).epsilon(1e-10));
        }
    }
    SUBCASE("preconditions") {
        CHECK_THROWS_AS(fold_frequency(-1.0, h), std::invalid_argument);
        CHECK_THROWS_AS(fold_frequency(1.0, 0.0), std::invalid_argument);
    }
}

TEST_CASE("non-overlap check") {
    const double h = 0.5;
    SUBCASE("the 4-tone aliased set has exactly one collision: pi with 5*pi") {
        const MultisineSignal u(1.0, {{1.0, kPi / 3.0, 0.1},
                                      {1.0, kPi, 0.2},
                                      {1.0, 3.5 * kPi, 0.3},
                                      {1.0, 5.0 * kPi, 0.4}});
        const auto report = check_non_overlap(u, h);
        CHECK_FALSE(report.satisfied);
        REQUIRE(report.violations.size() == 1);
        CHECK(report.violations[0].component_a == 1);
        CHECK(report.violations[0].component_b == 3);
        CHECK(report.violations[0].multiple == 1);
        CHECK_FALSE(report.violations[0].is_sum);
    }
    SUBCASE("collision detection does not depend on the surrounding lines") {
        const MultisineSignal u(1.0, {{1.0, kPi, 0.2}, {1.0, 5.0 * kPi, 0.4}});
        const auto report = check_non_overlap(u, h);
        CHECK_FALSE(report.satisfied);
        REQUIRE(report.violations.size() == 1);
        CHECK(report.violations[0].component_a == 0);
        CHECK(report.violations[0].component_b == 1);
    }
    SUBCASE("sum collisions are found too") {
        // 3 + 9.566... = 4*pi
        const double w2 = 4.0 * kPi - 3.0;
        const MultisineSignal u(1.0, {{1.0, 3.0, 0.0}, {1.0, w2, 0.0}});
        const auto report = check_non_overlap(u, h);
        CHECK_FALSE(report.satisfied);
        REQUIRE(report.violations.size() == 1);
        CHECK(report.violations[0].is_sum);
        CHECK(report.violations[0].multiple == 1);
    }
    SUBCASE("any all-sub-Nyquist set passes") {
        const MultisineSignal u = random_multisine(8, 4, 0.05, 0.9 * kPi / h);
        CHECK(check_non_overlap(u, h).satisfied);
    }
}

TEST_CASE("leakage check via bin alignment") {
    SUBCASE("exact bin alignment passes") {
        const SamplingGrid grid{0.5, 200};
        const double w = 2.0 * kPi * 3.0 / (grid.count * grid.period);
        const MultisineSignal u(1.0, {{1.0, w, 0.0}});
        CHECK(check_no_leakage(u, grid));
    }
    SUBCASE("omega = 0.1 over N = 2000 at h = 0.5 leaks") {
        const SamplingGrid grid{0.5, 2000};
        const MultisineSignal u(1.0, {{1.0, 0.1, 0.0}});
        // bin index 0.1 * 1000 / (2 pi) ~ 15.9, far from an integer
        CHECK_FALSE(check_no_leakage(u, grid));
        const auto offending = leaking_lines(u, grid, 1e-9 * grid.count);
        REQUIRE(offending.size() == 1);
        CHECK(offending[0] == doctest::Approx(0.1));
    }
    SUBCASE("two bin-aligned tones pass") {
        const SamplingGrid grid{0.5, 240};
        const double base = 2.0 * kPi / (grid.count * grid.period);
        const MultisineSignal u(1.0, {{1.0, 5.0 * base, 0.0}, {1.0, 12.0 * base, 0.0}});
        CHECK(check_no_leakage(u, grid));
    }
}

TEST_CASE("DTFT") {
    const double h = 0.5;
    SUBCASE("constant sequence at omega = 0 sums to N") {
        const std::vector<double> ones(37, 1.0);
        const auto v = dtft(ones, 0.0, h);
        CHECK(v.real() == doctest::Approx(37.0).epsilon(1e-14));
        CHECK(std::abs(v.imag()) < 1e-12);
    }
    SUBCASE("2*pi/h periodicity") {
        std::mt19937 gen(12);
        std::normal_distribution<double> dist;
        std::vector<double> samples(100);
        for (auto& s : samples) s = dist(gen);
        for (double w : {0.3, 1.7, 4.4}) {
            const auto a = dtft(samples, w, h);
            const auto b = dtft(samples, w + 2.0 * kPi / h, h);
            CHECK(oracle::relative_error(b, a) < 1e-10);
        }
    }
    SUBCASE("bin-aligned cosine concentrates to N/2") {
        const int n = 240;
        const double w0 = 2.0 * kPi * 7.0 / (n * h);
        std::vector<double> samples(n);
        for (int k = 1; k <= n; ++k) samples[k - 1] = std::cos(w0 * k * h);
        const auto v = dtft(samples, w0, h);
        CHECK(oracle::relative_error(v, {n / 2.0, 0.0}) < 1e-9);
    }
    SUBCASE("matches the direct trigonometric sum on every DFT bin") {
        const int n = 64;
        std::mt19937 gen(3);
        std::normal_distribution<double> dist;
        std::vector<double> samples(n);
        for (auto& s : samples) s = dist(gen);
        for (int bin = 0; bin < n; ++bin) {
            const double w = 2.0 * kPi * bin / (n * h);
            const auto fast = dtft(samples, w, h);
            const auto reference = oracle::spectrum_value(samples, w, h);
            CHECK(std::abs(fast - reference) <
                  1e-10 * std::max(1.0, std::abs(reference)));
        }
    }
    SUBCASE("empty input is rejected") {
        CHECK_THROWS_AS(dtft(std::vector<double>{}, 0.0, h), std::invalid_argument);
    }
}
