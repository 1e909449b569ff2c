#pragma once
#include <utility>
#include <vector>

#include "llmpred/series.hpp"

namespace llmpred {

// Low-pass filter description. The defaults mirror the library-wide
// convention: 100 Hz nominal sample rate, 4th order, zero-phase application.
struct FilterSpec {
    double cutoff_hz = 5.0;
    double sample_rate_hz = 100.0;
    int order = 4;
    bool zero_phase = true;
};

// One grid candidate evaluated during cutoff search. `skipped` marks
// candidates whose high component was degenerate (zero or orthogonal), in
// which case `m` is NaN.
struct CutoffTraceEntry {
    double f = 0.0;
    double m_mse = 0.0;
    double m_cos = 0.0;
    double m = 0.0;
    bool skipped = false;
};

// Result of cutoff selection: the winning complementary split plus the full
// search trace.
struct FrequencySplit {
    Series low;
    Series high;
    double f_cut = 0.0;
    double alpha = 0.0;
    std::vector<CutoffTraceEntry> trace;
};

// Digital Butterworth low-pass design via bilinear transform. Returns
// (b, a) transfer-function coefficients, a[0] == 1, DC gain exactly 1.
// Throws InvalidCutoff unless 0 < cutoff < sample_rate / 2.
std::pair<std::vector<double>, std::vector<double>>
butterworth_coeffs(int order, double cutoff_hz, double sample_rate_hz);

// Steady-state initial filter state for a step input of height 1; scaled by
// the first sample it suppresses start-up transients exactly.
std::vector<double> steady_state_zi(const std::vector<double>& b, const std::vector<double>& a);

// Direct-form II transposed IIR filter with explicit initial state.
std::vector<double> iir_filter(const std::vector<double>& b, const std::vector<double>& a,
                               const std::vector<double>& x, const std::vector<double>& zi);

// Forward-backward (zero-phase) filtering with odd reflection padding of
// `padlen` samples per side and steady-state initial conditions.
std::vector<double> zero_phase_filter(const std::vector<double>& b, const std::vector<double>& a,
                                      const std::vector<double>& x, std::size_t padlen);

// Applies the spec'd Butterworth low-pass to a series. Zero-phase mode runs
// the filter forward then backward (no phase lag, magnitude response
// squared); causal mode runs it once. Throws InvalidCutoff / SeriesTooShort.
Series butterworth_lowpass(const Series& s, const FilterSpec& spec);

// Complementary split at a fixed cutoff: low = filtered, high = s - low, so
// low + high reconstructs s exactly.
std::pair<Series, Series> decompose_at(const Series& s, const FilterSpec& spec);

// Weighted candidate metric m = alpha * m_mse + (1 - alpha) / m_cos.
// Throws DegenerateCosine when m_cos <= 1e-9.
double weighted_metric(double m_mse, double m_cos, double alpha);

// The default cutoff search grid: 2.5 to 15 Hz in 2.5 Hz steps.
std::vector<double> default_cutoff_grid();

// Evaluates every grid frequency (m_mse vs the low component, cosine
// similarity vs the high component, combined metric) and returns the split
// at the arg-min, ties broken toward the lowest frequency. Degenerate
// candidates are skipped; AllCandidatesDegenerate if none survive.
FrequencySplit select_cutoff(const Series& s, const std::vector<double>& grid, double alpha,
                             const FilterSpec& spec_defaults);

} // namespace llmpred
