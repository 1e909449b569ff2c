#include "llmpred/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "llmpred/errors.hpp"

namespace llmpred {

namespace {

void check_pair(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) {
        throw Error(ErrorCode::empty_sample, "metric over empty sample");
    }
    if (a.size() != b.size()) {
        throw Error(ErrorCode::dimension_mismatch,
                    "metric inputs have lengths " + std::to_string(a.size()) + " and " +
                        std::to_string(b.size()));
    }
}

} // namespace

double mse(const std::vector<double>& a, const std::vector<double>& b) {
    check_pair(a, b);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

double mae(const std::vector<double>& a, const std::vector<double>& b) {
    check_pair(a, b);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += std::fabs(a[i] - b[i]);
    }
    return acc / static_cast<double>(a.size());
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) {
        throw Error(ErrorCode::empty_sample, "ks_statistic over empty sample");
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());

    // Walk both sorted samples once; after consuming all values <= x the
    // ECDFs at x are i/n and j/m.
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double sup = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        sup = std::max(sup, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    // Tail: once one sample is exhausted its ECDF stays at its maximum gap
    // until the other reaches 1; the largest gap in that stretch is at the
    // first tail point, already covered by the final loop iteration or here.
    if (i < a.size()) {
        sup = std::max(sup, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    if (j < b.size()) {
        sup = std::max(sup, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return sup;
}

} // namespace llmpred
