#include "llmpred/postprocess.hpp"

#include <cmath>
#include <string>

#include "llmpred/errors.hpp"

namespace llmpred {

namespace {
constexpr double kSigmaEps = 1e-9;
}

double sample_mean(const std::vector<double>& values) {
    if (values.empty()) {
        throw Error(ErrorCode::empty_sample, "mean of empty sample");
    }
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc / static_cast<double>(values.size());
}

double population_std(const std::vector<double>& values) {
    const double mu = sample_mean(values);
    double acc = 0.0;
    for (double v : values) {
        const double d = v - mu;
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(values.size()));
}

MomentPair compute_moments(const std::vector<double>& predicted,
                           const std::vector<double>& history) {
    MomentPair m;
    m.mu_p = sample_mean(predicted);
    m.sigma_p = population_std(predicted);
    m.mu_h = sample_mean(history);
    m.sigma_h = population_std(history);
    return m;
}

std::vector<double> gaussian_match(const std::vector<double>& predicted_high,
                                   const std::vector<double>& hist_high) {
    const MomentPair m = compute_moments(predicted_high, hist_high);
    if (m.sigma_p <= kSigmaEps) {
        throw Error(ErrorCode::degenerate_prediction,
                    "prediction is (near-)constant, sigma_p=" + std::to_string(m.sigma_p) +
                        "; moment matching undefined");
    }
    // When the moments already agree the transform is the identity; return
    // the input untouched instead of round-tripping through the arithmetic.
    if (m.mu_p == m.mu_h && m.sigma_p == m.sigma_h) return predicted_high;
    std::vector<double> out;
    out.reserve(predicted_high.size());
    for (double x : predicted_high) {
        out.push_back(((x - m.mu_p) / m.sigma_p) * m.sigma_h + m.mu_h);
    }
    return out;
}

Series gaussian_match(const Series& predicted_high, const Series& hist_high) {
    Series out;
    out.channel_id = predicted_high.channel_id;
    out.values = gaussian_match(predicted_high.values, hist_high.values);
    return out;
}

std::vector<double> recombine(const std::vector<double>& low, const std::vector<double>& high) {
    if (low.size() != high.size()) {
        throw Error(ErrorCode::dimension_mismatch,
                    "recombine lengths differ: " + std::to_string(low.size()) + " vs " +
                        std::to_string(high.size()));
    }
    std::vector<double> out(low.size());
    for (std::size_t i = 0; i < low.size(); ++i) out[i] = low[i] + high[i];
    return out;
}

Series recombine(const Series& low, const Series& high) {
    Series out;
    out.channel_id = low.channel_id;
    out.values = recombine(low.values, high.values);
    return out;
}

} // namespace llmpred
