#include "llmpred/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>

#include "llmpred/errors.hpp"

namespace llmpred {

namespace {

// Polynomial with the given roots, by repeated convolution with (z - r).
std::vector<std::complex<double>> poly_from_roots(const std::vector<std::complex<double>>& roots) {
    std::vector<std::complex<double>> c{1.0};
    for (const auto& r : roots) {
        std::vector<std::complex<double>> next(c.size() + 1, 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) {
            next[i] += c[i];
            next[i + 1] -= c[i] * r;
        }
        c = std::move(next);
    }
    return c;
}

void validate_spec(const FilterSpec& spec) {
    if (spec.order < 1) {
        throw Error(ErrorCode::config_error, "filter order must be positive");
    }
    if (!(spec.cutoff_hz > 0.0) || !(spec.cutoff_hz < spec.sample_rate_hz / 2.0)) {
        throw Error(ErrorCode::invalid_cutoff,
                    "cutoff " + std::to_string(spec.cutoff_hz) + " Hz must lie in (0, " +
                        std::to_string(spec.sample_rate_hz / 2.0) + ") for sample rate " +
                        std::to_string(spec.sample_rate_hz) + " Hz");
    }
}

// Gaussian elimination with partial pivoting; the systems here are tiny
// (order x order), so no external solver is warranted.
std::vector<double> solve_linear(std::vector<std::vector<double>> A, std::vector<double> rhs) {
    const std::size_t n = rhs.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::fabs(A[r][col]) > std::fabs(A[pivot][col])) pivot = r;
        }
        std::swap(A[col], A[pivot]);
        std::swap(rhs[col], rhs[pivot]);
        if (A[col][col] == 0.0) {
            throw Error(ErrorCode::internal, "singular system in filter state solve");
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = A[r][col] / A[col][col];
            for (std::size_t c2 = col; c2 < n; ++c2) A[r][c2] -= f * A[col][c2];
            rhs[r] -= f * rhs[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double acc = rhs[i];
        for (std::size_t j = i + 1; j < n; ++j) acc -= A[i][j] * x[j];
        x[i] = acc / A[i][i];
    }
    return x;
}

double mean_squared_error(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

} // namespace

std::pair<std::vector<double>, std::vector<double>>
butterworth_coeffs(int order, double cutoff_hz, double sample_rate_hz) {
    FilterSpec check{cutoff_hz, sample_rate_hz, order, true};
    validate_spec(check);

    // Analog prototype poles on the unit circle's left half, scaled by the
    // pre-warped cutoff, then mapped to the z-plane by the bilinear
    // transform z = (1 + s) / (1 - s). All zeros land at z = -1.
    const double wn = cutoff_hz / (sample_rate_hz / 2.0);
    const double warped = std::tan(std::numbers::pi * wn / 2.0);
    std::vector<std::complex<double>> zpoles;
    zpoles.reserve(order);
    for (int k = 1; k <= order; ++k) {
        const double theta = std::numbers::pi * (2.0 * k + order - 1.0) / (2.0 * order);
        const std::complex<double> p = warped * std::exp(std::complex<double>(0.0, theta));
        zpoles.push_back((1.0 + p) / (1.0 - p));
    }
    const std::vector<std::complex<double>> zzeros(static_cast<std::size_t>(order),
                                                   std::complex<double>(-1.0, 0.0));

    const auto bc = poly_from_roots(zzeros);
    const auto ac = poly_from_roots(zpoles);
    std::vector<double> b(bc.size()), a(ac.size());
    for (std::size_t i = 0; i < bc.size(); ++i) b[i] = bc[i].real();
    for (std::size_t i = 0; i < ac.size(); ++i) a[i] = ac[i].real();

    // Normalize so H(z=1) is exactly 1 (unit DC gain).
    double bsum = 0.0, asum = 0.0;
    for (double v : b) bsum += v;
    for (double v : a) asum += v;
    const double gain = asum / bsum;
    for (double& v : b) v *= gain;
    return {std::move(b), std::move(a)};
}

std::vector<double> steady_state_zi(const std::vector<double>& b, const std::vector<double>& a) {
    // Solve (I - C^T) zi = b[1:] - a[1:] * b[0], where C is the companion
    // matrix of a. zi is the internal state a direct-form-II-transposed
    // filter holds after infinitely long exposure to a unit step.
    const std::size_t n = a.size();
    std::vector<std::vector<double>> M(n - 1, std::vector<double>(n - 1, 0.0));
    for (std::size_t j = 0; j < n - 1; ++j) {
        // C[0][j] = -a[j+1]; C[i][i-1] = 1  =>  (I - C^T)[i][j] = delta - C[j][i]
        M[j][0] = (j == 0 ? 1.0 : 0.0) + a[j + 1] / a[0];
        if (j + 1 < n - 1) M[j][j + 1] -= 1.0;
        if (j > 0) M[j][j] += 1.0;
    }
    std::vector<double> rhs(n - 1);
    for (std::size_t j = 0; j < n - 1; ++j) rhs[j] = b[j + 1] - a[j + 1] * b[0];
    return solve_linear(std::move(M), std::move(rhs));
}

std::vector<double> iir_filter(const std::vector<double>& b, const std::vector<double>& a,
                               const std::vector<double>& x, const std::vector<double>& zi) {
    const std::size_t nf = b.size();
    std::vector<double> z(zi);
    z.push_back(0.0);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xv = x[i];
        const double yv = b[0] * xv + z[0];
        for (std::size_t j = 1; j < nf; ++j) {
            z[j - 1] = b[j] * xv + z[j] - a[j] * yv;
        }
        y[i] = yv;
    }
    return y;
}

std::vector<double> zero_phase_filter(const std::vector<double>& b, const std::vector<double>& a,
                                      const std::vector<double>& x, std::size_t padlen) {
    if (x.size() <= padlen) {
        throw Error(ErrorCode::series_too_short,
                    "zero-phase filtering needs more than padlen=" + std::to_string(padlen) +
                        " samples, have " + std::to_string(x.size()));
    }
    // Odd (point-reflected) extension bounds the start-up transient; the
    // steady-state initial conditions remove what is left of it.
    std::vector<double> ext;
    ext.reserve(x.size() + 2 * padlen);
    for (std::size_t i = padlen; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 2; i <= padlen + 1; ++i) ext.push_back(2.0 * x.back() - x[x.size() - i]);

    const std::vector<double> zi = steady_state_zi(b, a);
    std::vector<double> state(zi.size());

    for (std::size_t i = 0; i < zi.size(); ++i) state[i] = zi[i] * ext.front();
    std::vector<double> y = iir_filter(b, a, ext, state);

    std::reverse(y.begin(), y.end());
    for (std::size_t i = 0; i < zi.size(); ++i) state[i] = zi[i] * y.front();
    y = iir_filter(b, a, y, state);
    std::reverse(y.begin(), y.end());

    return {y.begin() + static_cast<std::ptrdiff_t>(padlen),
            y.begin() + static_cast<std::ptrdiff_t>(padlen + x.size())};
}

Series butterworth_lowpass(const Series& s, const FilterSpec& spec) {
    validate_spec(spec);
    const std::size_t min_len = 3 * static_cast<std::size_t>(spec.order);
    if (s.length() < min_len) {
        throw Error(ErrorCode::series_too_short,
                    "series length " + std::to_string(s.length()) + " below 3*order=" +
                        std::to_string(min_len));
    }
    const auto [b, a] = butterworth_coeffs(spec.order, spec.cutoff_hz, spec.sample_rate_hz);

    Series out;
    out.channel_id = s.channel_id;
    if (spec.zero_phase) {
        // padlen = 3*order per the library convention; capped at length-1 so
        // the boundary case length == 3*order stays in range.
        const std::size_t padlen = std::min(min_len, s.length() - 1);
        out.values = zero_phase_filter(b, a, s.values, padlen);
    } else {
        const std::vector<double> zi = steady_state_zi(b, a);
        std::vector<double> state(zi.size());
        for (std::size_t i = 0; i < zi.size(); ++i) state[i] = zi[i] * s.values.front();
        out.values = iir_filter(b, a, s.values, state);
    }
    return out;
}

std::pair<Series, Series> decompose_at(const Series& s, const FilterSpec& spec) {
    Series low = butterworth_lowpass(s, spec);
    Series high;
    high.channel_id = s.channel_id;
    high.values.resize(s.length());
    for (std::size_t i = 0; i < s.length(); ++i) {
        high.values[i] = s.values[i] - low.values[i];
    }
    return {std::move(low), std::move(high)};
}

double weighted_metric(double m_mse, double m_cos, double alpha) {
    if (m_cos <= 1e-9) {
        throw Error(ErrorCode::degenerate_cosine,
                    "cosine similarity " + std::to_string(m_cos) +
                        " is zero-or-orthogonal; candidate unusable");
    }
    return alpha * m_mse + (1.0 - alpha) / m_cos;
}

std::vector<double> default_cutoff_grid() { return {2.5, 5.0, 7.5, 10.0, 12.5, 15.0}; }

FrequencySplit select_cutoff(const Series& s, const std::vector<double>& grid, double alpha,
                             const FilterSpec& spec_defaults) {
    if (grid.empty()) {
        throw Error(ErrorCode::config_error, "cutoff grid is empty");
    }
    if (alpha < 0.0 || alpha > 1.0) {
        throw Error(ErrorCode::config_error, "alpha must lie in [0, 1]");
    }

    double s_norm = 0.0;
    for (double v : s.values) s_norm += v * v;
    s_norm = std::sqrt(s_norm);

    FrequencySplit best;
    best.alpha = alpha;
    double best_m = std::numeric_limits<double>::infinity();
    bool found = false;

    for (double f : grid) {
        FilterSpec spec = spec_defaults;
        spec.cutoff_hz = f;
        auto [low, high] = decompose_at(s, spec);

        CutoffTraceEntry entry;
        entry.f = f;
        entry.m_mse = mean_squared_error(s.values, low.values);

        double dot = 0.0, h_norm = 0.0;
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            dot += s.values[i] * high.values[i];
            h_norm += high.values[i] * high.values[i];
        }
        h_norm = std::sqrt(h_norm);

        // A high component that is numerically zero relative to the input is
        // filter round-off, not signal; its cosine is meaningless. Treat it
        // like the orthogonal case and skip the candidate.
        if (h_norm <= 1e-10 * s_norm || s_norm == 0.0) {
            entry.m_cos = 0.0;
            entry.m = std::numeric_limits<double>::quiet_NaN();
            entry.skipped = true;
            best.trace.push_back(entry);
            continue;
        }
        entry.m_cos = dot / (s_norm * h_norm);
        if (entry.m_cos <= 1e-9) {
            entry.m = std::numeric_limits<double>::quiet_NaN();
            entry.skipped = true;
            best.trace.push_back(entry);
            continue;
        }
        entry.m = weighted_metric(entry.m_mse, entry.m_cos, alpha);
        best.trace.push_back(entry);

        // Strict < keeps ties on the lowest frequency (grid is ascending by
        // convention; for unordered grids the first minimum wins).
        if (entry.m < best_m) {
            best_m = entry.m;
            best.f_cut = f;
            best.low = std::move(low);
            best.high = std::move(high);
            found = true;
        }
    }

    if (!found) {
        throw Error(ErrorCode::all_candidates_degenerate,
                    "every grid frequency produced a degenerate high component");
    }
    return best;
}

} // namespace llmpred
