#include "collapse/metrics.hpp"

#include <cmath>

namespace collapse {

namespace {

double checked(const LogDensity& f, const Dataset& eval, std::size_t i, const char* who) {
    const double v = f(eval.points.row(i));
    if (!std::isfinite(v))
        throw NumericError(std::string(who) + ": non-finite log density at eval row " + std::to_string(i));
    return v;
}

} // namespace

double mle_bias_estimate(const LogDensity& logp_hat, const LogDensity& logp_ref, const Dataset& eval) {
    if (eval.size() == 0) throw InsufficientDataError("mle_bias_estimate: empty eval set");
    double sum = 0.0;
    for (std::size_t i = 0; i < eval.size(); ++i)
        sum += checked(logp_hat, eval, i, "mle_bias_estimate") - checked(logp_ref, eval, i, "mle_bias_estimate");
    return sum / static_cast<double>(eval.size());
}

double mle_variance_estimate(const LogDensity& logp_hat, const Dataset& eval) {
    const std::size_t n = eval.size();
    if (n < 2) throw InsufficientDataError("mle_variance_estimate: need at least 2 eval rows");
    // Shifted by the first value so a constant handle gives exactly zero.
    std::vector<double> v(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = checked(logp_hat, eval, i, "mle_variance_estimate");
        v[i] -= i == 0 ? 0.0 : v[0];
    }
    v[0] = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(n - 1);
}

} // namespace collapse
