#include "collapse/distributions.hpp"
#include "collapse/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace collapse {

void GmmSpec::validate() const {
    if (components.empty()) throw ContractError("GmmSpec: no components");
    const std::size_t d = dim();
    if (d == 0) throw ContractError("GmmSpec: zero-dimensional means");
    double total = 0.0;
    for (const auto& c : components) {
        if (c.mean.size() != d || c.stddev.size() != d)
            throw ContractError("GmmSpec: components disagree on dimension");
        for (double s : c.stddev)
            if (!(s > 0.0)) throw ContractError("GmmSpec: standard deviations must be positive");
        if (!(c.weight >= 0.0)) throw ContractError("GmmSpec: negative weight");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ContractError("GmmSpec: weights sum to " + std::to_string(total));
}

GmmSpec default_gmm() {
    const double means[5][2] = {{0, 0}, {3, 3}, {-3, 3}, {-3, -3}, {3, -3}};
    const double stds[5][2] = {{1.2, 1.0}, {1.1, 0.9}, {1.0, 1.2}, {1.0, 1.1}, {0.9, 1.0}};
    GmmSpec spec;
    for (int c = 0; c < 5; ++c)
        spec.components.push_back({{means[c][0], means[c][1]}, {stds[c][0], stds[c][1]}, 0.2});
    return spec;
}

Dataset gmm_sample(const GmmSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n == 0) throw ContractError("gmm_sample: n must be >= 1");
    const std::size_t d = spec.dim();
    const std::size_t k = spec.component_count();

    std::vector<Matrix> factors;
    factors.reserve(k);
    for (const auto& c : spec.components) {
        std::vector<double> var(d);
        for (std::size_t j = 0; j < d; ++j) var[j] = c.stddev[j] * c.stddev[j];
        factors.push_back(cholesky(Matrix::diagonal(var)));
    }
    std::vector<double> cumulative(k);
    double acc = 0.0;
    for (std::size_t c = 0; c < k; ++c) cumulative[c] = (acc += spec.components[c].weight);

    Rng rng(seed);
    std::uniform_real_distribution<double> pick(0.0, acc);
    std::normal_distribution<double> normal(0.0, 1.0);

    Matrix points(n, d);
    std::vector<int> labels(n);
    std::vector<double> z(d);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = pick(rng);
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        const std::size_t c = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), k - 1);
        for (double& v : z) v = normal(rng);
        auto row = points.row(i);
        const Matrix& l = factors[c];
        for (std::size_t r = 0; r < d; ++r) {
            double s = spec.components[c].mean[r];
            for (std::size_t q = 0; q <= r; ++q) s += l(r, q) * z[q];
            row[r] = s;
        }
        labels[i] = static_cast<int>(c);
    }
    return Dataset::labeled(std::move(points), std::move(labels), k);
}

double gmm_logpdf(const GmmSpec& spec, std::span<const double> x) {
    const std::size_t d = spec.dim();
    if (x.size() != d) throw DimensionError("gmm_logpdf: point dimension mismatch");
    const double log_norm = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi);

    std::vector<double> terms;
    terms.reserve(spec.component_count());
    for (const auto& c : spec.components) {
        if (c.weight <= 0.0) continue;
        double t = std::log(c.weight) + log_norm;
        for (std::size_t j = 0; j < d; ++j) {
            const double z = (x[j] - c.mean[j]) / c.stddev[j];
            t -= 0.5 * z * z + std::log(c.stddev[j]);
        }
        terms.push_back(t);
    }
    const double m = *std::max_element(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += std::exp(t - m);
    return m + std::log(s);
}

LogDensity gmm_density(GmmSpec spec) {
    spec.validate();
    return [spec = std::move(spec)](std::span<const double> x) { return gmm_logpdf(spec, x); };
}

} // namespace collapse
