#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "sysid/signal.hpp"

namespace sysid {

/// Evaluates an ascending-power real polynomial at a complex point (Horner).
std::complex<double> evaluate_polynomial(std::span<const double> ascending_coefficients,
                                         std::complex<double> s);

/// Proper rational transfer function in the differential operator p, stored as
/// ascending-power coefficient lists with a monic denominator.
///
/// Construction normalizes the denominator to monic form and rejects improper
/// fractions; stability is queried separately so that parametric search may
/// pass through unstable iterates.
class RationalTransferFunction {
public:
    RationalTransferFunction() : numerator_{1.0}, denominator_{1.0} {}
    RationalTransferFunction(std::vector<double> numerator, std::vector<double> denominator);

    const std::vector<double>& numerator() const { return numerator_; }
    const std::vector<double>& denominator() const { return denominator_; }
    int numerator_degree() const { return static_cast<int>(numerator_.size()) - 1; }
    int denominator_degree() const { return static_cast<int>(denominator_.size()) - 1; }

    std::complex<double> evaluate(std::complex<double> s) const;
    std::complex<double> denominator_at(std::complex<double> s) const;

    /// Denominator roots via the companion matrix; empty for a static gain.
    std::vector<std::complex<double>> poles() const;

    /// All poles strictly inside the open left half-plane, with a margin on
    /// the real part.
    bool is_stable(double margin = 1e-12) const;

private:
    std::vector<double> numerator_;
    std::vector<double> denominator_;
};

/// G evaluated on the imaginary axis at s = i*omega.
std::complex<double> freq_response(const RationalTransferFunction& g, double omega);

/// [G(0), G(-i w1), G(+i w1), ..., G(-i wM), G(+i wM)] at the excited lines.
FrequencyResponseVector true_frf_vector(const RationalTransferFunction& g,
                                        const MultisineSignal& u);

/// Exact stationary-regime output samples x(kh), k = 1..N. No transient is
/// simulated; the samples are the sinusoidal steady state of each line.
std::vector<double> simulate_stationary(const RationalTransferFunction& g,
                                        const MultisineSignal& u, const SamplingGrid& grid);

/// Zero-mean i.i.d. Gaussian measurement noise, reproducible from the seed.
struct NoiseSpec {
    double standard_deviation = 0.0;
    std::uint64_t seed = 0;
};

std::vector<double> add_noise(std::span<const double> x, const NoiseSpec& noise);

/// Noise standard deviation realising the requested output SNR, defined as the
/// ratio of the mean-square noiseless output (DC included) to the noise
/// variance, in dB.
double sigma_for_snr(std::span<const double> x, double snr_db);

}  // namespace sysid
