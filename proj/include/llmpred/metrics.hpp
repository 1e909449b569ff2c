#pragma once
#include <vector>

namespace llmpred {

// Mean squared error over equal-length samples. Throws DimensionMismatch /
// EmptySample.
double mse(const std::vector<double>& a, const std::vector<double>& b);

// Mean absolute error, same contract as mse.
double mae(const std::vector<double>& a, const std::vector<double>& b);

// Two-sample Kolmogorov-Smirnov statistic: the supremum distance between the
// right-continuous empirical CDFs, evaluated at every pooled sample point.
// Samples may have different lengths. Throws EmptySample.
double ks_statistic(std::vector<double> a, std::vector<double> b);

} // namespace llmpred
