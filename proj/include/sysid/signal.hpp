#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sysid {

inline constexpr double kPi = 3.14159265358979323846;

/// One cosine line of a multisine excitation.
struct SineComponent {
    double amplitude;          ///< a, nonzero
    double angular_frequency;  ///< omega [rad/s], strictly positive
    double phase;              ///< phi [rad]
};

/// DC level plus M cosine components with strictly increasing frequencies.
///
/// All amplitudes, including the DC level, must be nonzero; M = 0 (a pure DC
/// signal) is allowed.
class MultisineSignal {
public:
    MultisineSignal() : dc_amplitude_(1.0) {}
    MultisineSignal(double dc_amplitude, std::vector<SineComponent> components);

    double dc_amplitude() const { return dc_amplitude_; }
    const std::vector<SineComponent>& components() const { return components_; }

    /// Number of cosine components (M).
    int tone_count() const { return static_cast<int>(components_.size()); }
    /// Number of excited spectral lines: DC plus a +/- pair per tone (2M+1).
    int line_count() const { return 2 * tone_count() + 1; }
    /// Highest excited frequency; 0 for a DC-only signal.
    double max_frequency() const;

private:
    double dc_amplitude_;
    std::vector<SineComponent> components_;
};

/// Uniform sampling instants t = h, 2h, ..., Nh.
struct SamplingGrid {
    double period = 1.0;  ///< h [s], > 0
    int count = 0;        ///< N
};

using RegressorVector = Eigen::VectorXcd;
using FrequencyResponseVector = Eigen::VectorXcd;

/// u(t) = a0 + sum_l a_l cos(omega_l t + phi_l).
double evaluate_multisine(const MultisineSignal& u, double t);

/// Complex regressor at sample k (1-based):
/// [a0, (a1/2)e^{+i(w1 kh + phi1)}, (a1/2)e^{-i(w1 kh + phi1)}, ...].
/// Its conjugate transpose maps the frequency response vector
/// [G(0), G(-i w1), G(+i w1), ...] to the noiseless output sample.
RegressorVector regressor(const MultisineSignal& u, const SamplingGrid& grid, int k);

/// N x (2M+1) matrix whose k-th row is the conjugated regressor at sample k,
/// so (rows * frf_vector).real() is the noiseless stationary output sequence.
Eigen::MatrixXcd regressor_conjugate_rows(const MultisineSignal& u, const SamplingGrid& grid);

/// Default tolerance for modular frequency comparisons: 1e-9 of the folding
/// period 2*pi/h.
double default_frequency_tolerance(double period_s);

enum class LineClass { distinct, overlaps_with, at_nyquist_multiple };

/// An excitation line folded into the fundamental band [0, pi/h].
struct FoldedLine {
    double original_frequency = 0.0;
    double folded_frequency = 0.0;
    LineClass classification = LineClass::distinct;
    int overlap_index = -1;  ///< earlier component this line collides with
};

/// Maps omega to its aliasing representative: the distance to the nearest
/// multiple of 2*pi/h, which always lies in [0, pi/h]. Lines within tol of a
/// multiple of pi/h are classified at_nyquist_multiple.
FoldedLine fold_frequency(double omega, double h);
FoldedLine fold_frequency(double omega, double h, double tol);

/// One modular coincidence between excitation lines, or between a line and a
/// multiple of the Nyquist frequency.
struct OverlapViolation {
    int component_a = -1;  ///< 0-based component index
    int component_b = -1;  ///< 0-based partner, or -1 for the Nyquist rule
    long multiple = 0;     ///< lattice index n of the coincidence
    bool is_sum = false;   ///< pair rule: omega_a + omega_b vs omega_b - omega_a
};

struct NonOverlapReport {
    bool satisfied = true;
    std::vector<OverlapViolation> violations;
};

/// Checks that no two excitation lines coincide after folding:
/// |omega_l +- omega_t - 2n*pi/h| > tol for every pair and integer n, and
/// |omega_l - n*pi/h| > tol for every line. Violations are reported, not thrown.
NonOverlapReport check_non_overlap(const MultisineSignal& u, double h);
NonOverlapReport check_non_overlap(const MultisineSignal& u, double h, double tol);

/// Component frequencies that do not land on an integer DFT bin of the record,
/// i.e. whose bin index omega*N*h/(2*pi) is further than tol from an integer.
/// tol is in bin units.
std::vector<double> leaking_lines(const MultisineSignal& u, const SamplingGrid& grid, double tol);

/// True when every component frequency is bin-aligned over the record, which
/// is exactly the condition that the record length is a whole number of
/// periods of every tone.
bool check_no_leakage(const MultisineSignal& u, const SamplingGrid& grid);
bool check_no_leakage(const MultisineSignal& u, const SamplingGrid& grid, double tol);

/// sum_{k=1..N} samples[k-1] * exp(-i*h*k*omega). 2*pi/h-periodic in omega.
std::complex<double> dtft(std::span<const double> samples, double omega, double h);

}  // namespace sysid
