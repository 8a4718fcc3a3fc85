#pragma once

// Ground-truth Gaussian mixture, kernel density estimates, Gaussian summary
// fitting and the labeled point-cloud container used everywhere else.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "collapse/numcore.hpp"

namespace collapse {

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

struct Dataset {
    Matrix points;                            // n x d
    std::optional<std::vector<int>> labels;   // length n when present
    std::optional<std::size_t> class_count;   // k when labeled

    static Dataset unlabeled(Matrix points);
    static Dataset labeled(Matrix points, std::vector<int> labels, std::size_t class_count);

    std::size_t size() const noexcept { return points.rows(); }
    std::size_t dim() const noexcept { return points.cols(); }
    bool is_labeled() const noexcept { return labels.has_value(); }

    // Throws ContractError on any invariant violation.
    void validate() const;

    Dataset subset(std::span<const std::size_t> indices) const;
    // Rows whose label is in `classes`.
    Dataset filter_classes(std::span<const int> classes) const;
    std::vector<std::size_t> class_counts() const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Row-wise union. Both must agree on dimension and labeling; class_count is
// the max of the two.
Dataset concat(const Dataset& a, const Dataset& b);

// CSV with header `x0,...,x{d-1},label`; label is -1 for unlabeled rows.
// Values use 17 significant digits so reading back is bit-exact.
void write_dataset_csv(std::ostream& out, const Dataset& data);
void write_dataset_csv(const std::string& path, const Dataset& data);
// class_count defaults to (max label + 1) for labeled files.
Dataset read_dataset_csv(std::istream& in, std::optional<std::size_t> class_count = std::nullopt);
Dataset read_dataset_csv(const std::string& path, std::optional<std::size_t> class_count = std::nullopt);

// Shortest exact decimal form with 17 significant digits.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// Gaussian mixture
// ---------------------------------------------------------------------------

struct GmmComponent {
    std::vector<double> mean;
    std::vector<double> stddev; // diagonal
    double weight = 0.0;
};

struct GmmSpec {
    std::vector<GmmComponent> components;

    std::size_t dim() const { return components.empty() ? 0 : components.front().mean.size(); }
    std::size_t component_count() const noexcept { return components.size(); }
    void validate() const;
};

// Five equal-weight 2D components centered at the origin and (±3, ±3).
GmmSpec default_gmm();

// Labels are the generating component index.
Dataset gmm_sample(const GmmSpec& spec, std::size_t n, std::uint64_t seed);

double gmm_logpdf(const GmmSpec& spec, std::span<const double> x);

// ---------------------------------------------------------------------------
// Kernel density estimate
// ---------------------------------------------------------------------------

struct KdeModel {
    Matrix support_points;
    std::vector<double> bandwidth; // per dimension
};

inline constexpr std::size_t kKdeSubsampleThreshold = 10000;
inline constexpr std::size_t kKdeSubsampleSize = 5000;

// Product Gaussian kernel with Scott's rule h_j = sigma_j * n^(-1/(d+4)),
// sigma_j using the n-1 denominator. Inputs above kKdeSubsampleThreshold rows
// are subsampled (seeded) to kKdeSubsampleSize support points.
KdeModel kde_fit(const Dataset& data, std::uint64_t subsample_seed = 0);
double kde_logpdf(const KdeModel& model, std::span<const double> x);
std::vector<double> kde_logpdf_batch(const KdeModel& model, const Matrix& x);

// Log density evaluated at a single point.
using LogDensity = std::function<double(std::span<const double>)>;

LogDensity gmm_density(GmmSpec spec);
LogDensity kde_density(KdeModel model);

// ---------------------------------------------------------------------------
// Gaussian summaries
// ---------------------------------------------------------------------------

struct GaussianSummary {
    std::vector<double> mean;
    Matrix cov;
    std::size_t sample_count = 0;

    std::size_t dim() const noexcept { return mean.size(); }
};

// Sample mean and unbiased (N-1) covariance. Needs n >= 2.
GaussianSummary fit_gaussian(const Dataset& data);
GaussianSummary fit_gaussian(const Matrix& points);

struct ClassGaussian {
    GaussianSummary summary; // mean/cov are zero where undefined
    bool sufficient = false; // at least two members
};

// One entry per class 0..k-1, indicator-weighted estimators.
std::vector<ClassGaussian> fit_gaussian_per_class(const Dataset& data);

} // namespace collapse
