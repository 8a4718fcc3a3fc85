#include "collapse/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace collapse {

namespace {

constexpr double kNegativeTolerance = 1e-9;

Matrix sqrtm_checked(const Matrix& m) {
    try {
        return sqrtm_psd(m);
    } catch (const NumericError& e) {
        throw ContractError(std::string("frechet_distance_sq: covariance is not PSD: ") + e.what());
    }
}

// Sum of singular values by one-sided (Hestenes) Jacobi. For m = B^{1/2} A^{1/2}
// this equals tr((A^{1/2} B A^{1/2})^{1/2}) without square-rooting a rounded
// product, so near-singular covariances keep their accuracy.
double nuclear_norm(Matrix m) {
    const std::size_t r = m.rows(), n = m.cols();
    auto dot = [&](std::size_t p, std::size_t q) {
        double s = 0.0;
        for (std::size_t i = 0; i < r; ++i) s += m(i, p) * m(i, q);
        return s;
    };
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double alpha = dot(p, p), beta = dot(q, q), gamma = dot(p, q);
                if (std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta) || gamma == 0.0) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t), s = c * t;
                for (std::size_t i = 0; i < r; ++i) {
                    const double x = m(i, p), y = m(i, q);
                    m(i, p) = c * x - s * y;
                    m(i, q) = s * x + c * y;
                }
            }
        }
        if (!rotated) break;
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += std::sqrt(dot(j, j));
    return total;
}

} // namespace

double frechet_distance_sq(const GaussianSummary& a, const GaussianSummary& b) {
    const std::size_t d = a.dim();
    if (b.dim() != d || a.cov.rows() != d || b.cov.rows() != d)
        throw DimensionError("frechet_distance_sq: dimension mismatch");

    double mean_term = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double diff = a.mean[j] - b.mean[j];
        mean_term += diff * diff;
    }

    const double cross = nuclear_norm(matmul(sqrtm_checked(b.cov), sqrtm_checked(a.cov)));
    const double tr_a = trace(a.cov);
    const double tr_b = trace(b.cov);
    const double value = mean_term + tr_a + tr_b - 2.0 * cross;

    if (value < 0.0) {
        if (value < -kNegativeTolerance * std::max(1.0, tr_a + tr_b))
            throw NumericError("frechet_distance_sq: negative result " + std::to_string(value));
        return 0.0;
    }
    return value;
}

double fid(const Dataset& features_a, const Dataset& features_b) {
    const std::size_t d = features_a.dim();
    if (features_b.dim() != d) throw DimensionError("fid: feature dimension mismatch");
    if (features_a.size() < d + 1 || features_b.size() < d + 1)
        throw InsufficientDataError("fid: each dataset needs at least d+1 = " + std::to_string(d + 1) + " rows");
    return frechet_distance_sq(fit_gaussian(features_a), fit_gaussian(features_b));
}

CfidResult cfid_detailed(const Dataset& a, const Dataset& b) {
    if (!a.is_labeled() || !b.is_labeled()) throw ContractError("cfid: both datasets must be labeled");
    if (*a.class_count != *b.class_count) throw ContractError("cfid: class counts differ");
    if (a.dim() != b.dim()) throw DimensionError("cfid: feature dimension mismatch");

    const std::size_t need = a.dim() + 1;
    const auto fa = fit_gaussian_per_class(a);
    const auto fb = fit_gaussian_per_class(b);

    CfidResult r;
    double sum = 0.0;
    for (std::size_t c = 0; c < fa.size(); ++c) {
        if (fa[c].summary.sample_count < need || fb[c].summary.sample_count < need) {
            ++r.classes_skipped;
            continue;
        }
        sum += frechet_distance_sq(fa[c].summary, fb[c].summary);
        ++r.classes_used;
    }
    if (r.classes_used == 0) throw InsufficientDataError("cfid: no class has enough samples in both datasets");
    r.value = sum / static_cast<double>(r.classes_used);
    return r;
}

double cfid(const Dataset& a, const Dataset& b) { return cfid_detailed(a, b).value; }

} // namespace collapse
