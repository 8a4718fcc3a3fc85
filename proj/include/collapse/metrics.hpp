#pragma once

// Divergence and degradation measurements between real and synthetic data.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "collapse/distributions.hpp"
#include "collapse/models.hpp"

namespace collapse {

enum class MetricName { FD, FID, CFID, OTDD, MLE_BIAS, MLE_VARIANCE, CLS_ACCURACY };

std::string to_string(MetricName name);
// Case-insensitive; throws ConfigError for unknown names.
MetricName parse_metric_name(const std::string& text);
std::vector<MetricName> all_metric_names();

struct MetricValue {
    MetricName name = MetricName::FD;
    double value = 0.0;
    std::size_t task_index = 0;
    std::map<std::string, std::string> metadata;

    friend bool operator==(const MetricValue&, const MetricValue&) = default;
};

// ---------------------------------------------------------------------------
// Fréchet family
// ---------------------------------------------------------------------------

// ‖μ₁−μ₂‖² + tr(Σ₁ + Σ₂ − 2(Σ₁Σ₂)^½), with tr((Σ₁Σ₂)^½) evaluated as
// tr((Σ₁^½ Σ₂ Σ₁^½)^½) on the symmetrized product. Rounding negatives are
// clamped to 0.
double frechet_distance_sq(const GaussianSummary& a, const GaussianSummary& b);

// Fréchet distance between Gaussian fits of two feature sets; each needs at
// least d+1 rows.
double fid(const Dataset& features_a, const Dataset& features_b);

struct CfidResult {
    double value = 0.0;
    std::size_t classes_used = 0;
    std::size_t classes_skipped = 0; // fewer than d+1 rows on either side
};

// Per-class Fréchet distance averaged over usable classes.
CfidResult cfid_detailed(const Dataset& a, const Dataset& b);
double cfid(const Dataset& a, const Dataset& b);

// ---------------------------------------------------------------------------
// Optimal transport
// ---------------------------------------------------------------------------

struct TransportPlan {
    Matrix plan;
    double cost = 0.0;          // Σ plan ⊙ cost
    double marginal_error = 0.0; // L1 error of row plus column sums
    std::size_t iterations = 0;
};

inline constexpr double kSinkhornTolerance = 1e-7;

// Log-domain entropic OT. Stops when the marginal L1 error drops below
// kSinkhornTolerance; throws NumericError after max_iters otherwise.
TransportPlan sinkhorn(const Matrix& cost, std::span<const double> src_weights, std::span<const double> dst_weights,
                       double epsilon, std::size_t max_iters);

struct OtddOptions {
    std::optional<double> epsilon;     // absolute; default 0.01 * median ground cost
    double relative_epsilon = 0.01;
    std::size_t subsample = 500;       // points drawn from each side
    std::uint64_t seed = 0;
    std::size_t max_iters = 20000;

    friend bool operator==(const OtddOptions&, const OtddOptions&) = default;
};

struct OtddResult {
    double value = 0.0;
    double epsilon = 0.0;
    double marginal_error = 0.0;
    std::size_t iterations = 0;
};

// Ground cost ‖x−x'‖² + W₂²(N_a(y), N_b(y')) between per-class Gaussian
// fits; entropic OT over uniform subsamples.
OtddResult otdd_detailed(const Dataset& a, const Dataset& b, const OtddOptions& options);
double otdd(const Dataset& a, const Dataset& b, const OtddOptions& options);

// Plain entropic OT between the point clouds, no label term.
double point_cloud_ot(const Dataset& a, const Dataset& b, const OtddOptions& options);

// ---------------------------------------------------------------------------
// MLE estimators
// ---------------------------------------------------------------------------

// (1/n) Σ [log p̂(x_i) − log p(x_i)] over eval rows.
double mle_bias_estimate(const LogDensity& logp_hat, const LogDensity& logp_ref, const Dataset& eval);
// Unbiased sample variance of log p̂(x_i) over eval rows.
double mle_variance_estimate(const LogDensity& logp_hat, const Dataset& eval);

// ---------------------------------------------------------------------------
// Classification degradation
// ---------------------------------------------------------------------------

// For each task t, trains a fresh classifier on synthetic_per_task[t] and
// reports the best per-epoch validation accuracy on real_val (task_index t+1).
std::vector<MetricValue> classification_degradation(std::span<const Dataset> synthetic_per_task,
                                                     const Dataset& real_val, const ClassifierConfig& cfg);

// ---------------------------------------------------------------------------
// Trace CSV: `task,metric,value,metadata_json`
// ---------------------------------------------------------------------------

// Sorts by (task, metric name, metadata) and writes header plus rows.
void write_metric_rows(std::ostream& out, std::vector<MetricValue> rows);
std::vector<MetricValue> read_metric_rows(std::istream& in);

} // namespace collapse
