#include "collapse/distributions.hpp"

namespace collapse {

namespace {

// Indicator-weighted mean and (N_c - 1)-normalized covariance over `rows`.
GaussianSummary summarize(const Matrix& points, const std::vector<std::size_t>& rows) {
    const std::size_t d = points.cols();
    GaussianSummary g;
    g.mean.assign(d, 0.0);
    g.cov = Matrix(d, d);
    g.sample_count = rows.size();
    if (rows.empty()) return g;

    for (std::size_t r : rows)
        for (std::size_t j = 0; j < d; ++j) g.mean[j] += points(r, j);
    for (double& m : g.mean) m /= static_cast<double>(rows.size());
    if (rows.size() < 2) return g;

    std::vector<double> c(d);
    for (std::size_t r : rows) {
        for (std::size_t j = 0; j < d; ++j) c[j] = points(r, j) - g.mean[j];
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = a; b < d; ++b) g.cov(a, b) += c[a] * c[b];
    }
    const double denom = static_cast<double>(rows.size() - 1);
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a; b < d; ++b) {
            g.cov(a, b) /= denom;
            g.cov(b, a) = g.cov(a, b);
        }
    }
    return g;
}

} // namespace

GaussianSummary fit_gaussian(const Matrix& points) {
    if (points.rows() < 2)
        throw InsufficientDataError("fit_gaussian: need at least 2 points, got " + std::to_string(points.rows()));
    std::vector<std::size_t> rows(points.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return summarize(points, rows);
}

GaussianSummary fit_gaussian(const Dataset& data) { return fit_gaussian(data.points); }

std::vector<ClassGaussian> fit_gaussian_per_class(const Dataset& data) {
    if (!data.is_labeled()) throw ContractError("fit_gaussian_per_class: dataset is unlabeled");
    const std::size_t k = *data.class_count;
    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t i = 0; i < data.size(); ++i) members[static_cast<std::size_t>((*data.labels)[i])].push_back(i);

    std::vector<ClassGaussian> out;
    out.reserve(k);
    for (std::size_t c = 0; c < k; ++c) out.push_back({summarize(data.points, members[c]), members[c].size() >= 2});
    return out;
}

} // namespace collapse
