#pragma once
#include <vector>

#include "llmpred/series.hpp"

namespace llmpred {

// First and second moments of a history/prediction pair. Standard deviation
// is the population form (divide by n), which makes the identity case of the
// matching transform exact.
struct MomentPair {
    double mu_h = 0.0;
    double sigma_h = 0.0;
    double mu_p = 0.0;
    double sigma_p = 0.0;
};

double sample_mean(const std::vector<double>& values);
double population_std(const std::vector<double>& values);

MomentPair compute_moments(const std::vector<double>& predicted, const std::vector<double>& history);

// Re-standardizes the prediction to the history's moments:
// x_new = ((x - mu_p) / sigma_p) * sigma_h + mu_h.
// Throws DegeneratePrediction when sigma_p <= 1e-9 (the caller decides the
// fallback; the pipeline passes the prediction through unchanged).
std::vector<double> gaussian_match(const std::vector<double>& predicted_high,
                                   const std::vector<double>& hist_high);
Series gaussian_match(const Series& predicted_high, const Series& hist_high);

// Element-wise sum of the two component predictions. Throws
// DimensionMismatch.
std::vector<double> recombine(const std::vector<double>& low, const std::vector<double>& high);
Series recombine(const Series& low, const Series& high);

} // namespace llmpred
