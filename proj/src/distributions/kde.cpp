#include "collapse/distributions.hpp"
#include "collapse/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace collapse {

KdeModel kde_fit(const Dataset& data, std::uint64_t subsample_seed) {
    if (data.size() < 2) throw InsufficientDataError("kde_fit: need at least 2 points");

    // Bandwidth from the full sample; subsampling only bounds the support size.
    const Matrix& pts = data.points;
    const std::size_t n = pts.rows();
    const std::size_t d = pts.cols();
    const double factor = std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(d) + 4.0));

    KdeModel model;
    model.bandwidth.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += pts(i, j);
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double c = pts(i, j) - mean;
            ss += c * c;
        }
        const double sigma = std::sqrt(ss / static_cast<double>(n - 1));
        if (!(sigma > 0.0))
            throw NumericError("kde_fit: dimension " + std::to_string(j) + " has zero spread, bandwidth undefined");
        model.bandwidth[j] = sigma * factor;
    }
    Matrix support = data.points;
    if (data.size() > kKdeSubsampleThreshold) {
        std::vector<std::size_t> idx(data.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        Rng rng(subsample_seed);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(kKdeSubsampleSize);
        std::sort(idx.begin(), idx.end());
        support = data.subset(idx).points;
    }

    model.support_points = std::move(support);
    return model;
}

namespace {

double kde_logpdf_impl(const KdeModel& model, std::span<const double> x, std::vector<double>& scratch) {
    const Matrix& s = model.support_points;
    const std::size_t n = s.rows();
    const std::size_t d = s.cols();

    double log_norm = -std::log(static_cast<double>(n));
    for (double h : model.bandwidth) log_norm -= std::log(h * std::sqrt(2.0 * std::numbers::pi));

    scratch.resize(n);
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = s.row(i).data();
        double q = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double z = (x[j] - row[j]) / model.bandwidth[j];
            q += z * z;
        }
        scratch[i] = -0.5 * q;
        m = std::max(m, scratch[i]);
    }
    double acc = 0.0;
    for (double t : scratch) acc += std::exp(t - m);
    return log_norm + m + std::log(acc);
}

} // namespace

double kde_logpdf(const KdeModel& model, std::span<const double> x) {
    if (x.size() != model.support_points.cols()) throw DimensionError("kde_logpdf: point dimension mismatch");
    std::vector<double> scratch;
    return kde_logpdf_impl(model, x, scratch);
}

std::vector<double> kde_logpdf_batch(const KdeModel& model, const Matrix& x) {
    if (x.cols() != model.support_points.cols()) throw DimensionError("kde_logpdf_batch: dimension mismatch");
    std::vector<double> out(x.rows());
    std::vector<double> scratch;
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = kde_logpdf_impl(model, x.row(i), scratch);
    return out;
}

LogDensity kde_density(KdeModel model) {
    return [model = std::move(model)](std::span<const double> x) { return kde_logpdf(model, x); };
}

} // namespace collapse
