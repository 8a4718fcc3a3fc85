#include "collapse/metrics.hpp"
#include "collapse/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace collapse {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kScalingFactor = 0.5;
constexpr std::size_t kStageIters = 200;
constexpr double kStageTolerance = 1e-4;
constexpr std::size_t kPlainIters = 300;

void check_weights(std::span<const double> w, const char* which) {
    double s = 0.0;
    for (double v : w) {
        if (!(v >= 0.0)) throw ContractError(std::string("sinkhorn: negative ") + which + " weight");
        s += v;
    }
    if (std::abs(s - 1.0) > 1e-12) throw ContractError(std::string("sinkhorn: ") + which + " weights do not sum to 1");
}

double safe_log(double v) { return v > 0.0 ? std::log(v) : kNegInf; }

// Row marginal L1 error of the plan implied by (f, g); columns are exact
// right after a g-update.
double row_error(const Matrix& cost, const std::vector<double>& f, const std::vector<double>& g,
                 std::span<const double> a, double eps) {
    double err = 0.0;
    for (std::size_t i = 0; i < cost.rows(); ++i) {
        double s = 0.0;
        if (f[i] != kNegInf)
            for (std::size_t j = 0; j < cost.cols(); ++j)
                if (g[j] != kNegInf) s += std::exp((f[i] + g[j] - cost(i, j)) / eps);
        err += std::abs(s - a[i]);
    }
    return err;
}

// Solves L x = r for symmetric positive definite L; a small ridge is added
// when the support graph is numerically disconnected.
std::vector<double> spd_solve(Matrix l, const std::vector<double>& r) {
    const std::size_t k = l.rows();
    double diag = 0.0;
    for (std::size_t i = 0; i < k; ++i) diag = std::max(diag, l(i, i));
    Matrix chol;
    for (double ridge = 0.0;; ridge = ridge == 0.0 ? 1e-14 * diag : ridge * 100.0) {
        Matrix shifted = l;
        for (std::size_t i = 0; i < k; ++i) shifted(i, i) += ridge;
        try {
            chol = cholesky(shifted);
            break;
        } catch (const NumericError&) {
            if (ridge > diag) throw;
        }
    }
    std::vector<double> x(r);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < i; ++j) x[i] -= chol(i, j) * x[j];
        x[i] /= chol(i, i);
    }
    for (std::size_t i = k; i-- > 0;) {
        for (std::size_t j = i + 1; j < k; ++j) x[i] -= chol(j, i) * x[j];
        x[i] /= chol(i, i);
    }
    return x;
}

} // namespace

TransportPlan sinkhorn(const Matrix& cost, std::span<const double> src_weights, std::span<const double> dst_weights,
                       double epsilon, std::size_t max_iters) {
    const std::size_t n = cost.rows();
    const std::size_t m = cost.cols();
    if (n == 0 || m == 0) throw DimensionError("sinkhorn: empty cost matrix");
    if (src_weights.size() != n || dst_weights.size() != m) throw DimensionError("sinkhorn: weight length mismatch");
    if (!(epsilon > 0.0)) throw ContractError("sinkhorn: epsilon must be > 0");
    for (double c : cost.values())
        if (!(c >= 0.0) || !std::isfinite(c)) throw ContractError("sinkhorn: cost must be finite and nonnegative");
    check_weights(src_weights, "source");
    check_weights(dst_weights, "target");

    std::vector<double> log_a(n), log_b(m);
    for (std::size_t i = 0; i < n; ++i) log_a[i] = safe_log(src_weights[i]);
    for (std::size_t j = 0; j < m; ++j) log_b[j] = safe_log(dst_weights[j]);

    std::vector<double> f(n, 0.0), g(m, 0.0), terms(std::max(n, m));
    for (std::size_t i = 0; i < n; ++i)
        if (log_a[i] == kNegInf) f[i] = kNegInf;
    for (std::size_t j = 0; j < m; ++j)
        if (log_b[j] == kNegInf) g[j] = kNegInf;

    auto lse = [&terms](std::size_t count) {
        double mx = kNegInf;
        for (std::size_t k = 0; k < count; ++k) mx = std::max(mx, terms[k]);
        if (mx == kNegInf) return kNegInf;
        double s = 0.0;
        for (std::size_t k = 0; k < count; ++k) s += std::exp(terms[k] - mx);
        return mx + std::log(s);
    };

    auto update_f = [&](double eps, const std::vector<double>& pot, std::vector<double>& out) {
        for (std::size_t i = 0; i < n; ++i) {
            if (log_a[i] == kNegInf) continue;
            for (std::size_t j = 0; j < m; ++j) terms[j] = (pot[j] - cost(i, j)) / eps;
            out[i] = eps * (log_a[i] - lse(m));
        }
    };
    auto sweep = [&](double eps) {
        update_f(eps, g, f);
        for (std::size_t j = 0; j < m; ++j) {
            if (log_b[j] == kNegInf) continue;
            for (std::size_t i = 0; i < n; ++i) terms[i] = (f[i] - cost(i, j)) / eps;
            g[j] = eps * (log_b[j] - lse(n));
        }
    };

    // Epsilon scaling: warm-start the potentials through a geometric schedule
    // from the cost scale down to the target epsilon.
    double cmax = 0.0;
    for (double c : cost.values()) cmax = std::max(cmax, c);
    std::size_t it = 0;
    for (double eps = cmax; eps > epsilon && it < max_iters; eps *= kScalingFactor) {
        double stage_err = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < kStageIters && it < max_iters && stage_err > kStageTolerance; ++k, ++it) {
            sweep(eps);
            if (k % 5 == 4) stage_err = row_error(cost, f, g, src_weights, eps);
        }
    }

    double err = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < kPlainIters && it < max_iters; ++k) {
        sweep(epsilon);
        ++it;
        if (it % 5 == 0 || it == max_iters) {
            err = row_error(cost, f, g, src_weights, epsilon);
            if (err < kSinkhornTolerance) break;
        }
    }

    // Newton ascent on the semi-dual F(g) = sum a_i f_i(g) + sum b_j g_j, with
    // f recomputed from g so rows stay exact and the gradient is the column
    // residual. Falls back to plain sweeps if the line search stalls.
    std::vector<std::size_t> active;
    for (std::size_t j = 0; j < m; ++j)
        if (log_b[j] != kNegInf) active.push_back(j);
    const std::size_t k = active.size();
    auto semi_dual = [&](const std::vector<double>& pot, std::vector<double>& fo) {
        update_f(epsilon, pot, fo);
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (log_a[i] != kNegInf) v += src_weights[i] * fo[i];
        for (std::size_t j : active) v += dst_weights[j] * pot[j];
        return v;
    };
    bool newton = err >= kSinkhornTolerance && k > 1;
    Matrix plan(n, m);
    std::vector<double> col(m), f_try(n, kNegInf), g_try(m);
    double value = newton ? semi_dual(g, f) : 0.0;
    while (newton && it < max_iters) {
        ++it;
        std::fill(col.begin(), col.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                const double p = (f[i] == kNegInf || g[j] == kNegInf) ? 0.0 : std::exp((f[i] + g[j] - cost(i, j)) / epsilon);
                plan(i, j) = p;
                col[j] += p;
            }
        err = 0.0;
        for (std::size_t j = 0; j < m; ++j) err += std::abs(col[j] - dst_weights[j]);
        if (err < kSinkhornTolerance) break;

        // Laplacian-like system diag(c) - P^T diag(1/a) P on all active columns but the last.
        Matrix lap(k - 1, k - 1);
        std::vector<double> rhs(k - 1);
        for (std::size_t i = 0; i < n; ++i) {
            if (log_a[i] == kNegInf) continue;
            const double inv = 1.0 / src_weights[i];
            for (std::size_t u = 0; u + 1 < k; ++u) {
                const double pu = plan(i, active[u]);
                if (pu == 0.0) continue;
                for (std::size_t v = 0; v <= u; ++v) lap(u, v) -= pu * plan(i, active[v]) * inv;
            }
        }
        for (std::size_t u = 0; u + 1 < k; ++u) {
            lap(u, u) += col[active[u]];
            for (std::size_t v = 0; v < u; ++v) lap(v, u) = lap(u, v);
            rhs[u] = dst_weights[active[u]] - col[active[u]];
        }
        std::vector<double> step;
        try {
            step = spd_solve(lap, rhs);
        } catch (const NumericError&) {
            break;
        }
        double slope = 0.0;
        for (std::size_t u = 0; u + 1 < k; ++u) slope += epsilon * step[u] * rhs[u];
        bool accepted = false;
        for (double t = 1.0; t > 1e-10; t *= 0.5) {
            g_try = g;
            for (std::size_t u = 0; u + 1 < k; ++u) g_try[active[u]] += t * epsilon * step[u];
            const double trial = semi_dual(g_try, f_try);
            if (trial >= value + 1e-4 * t * slope) {
                g.swap(g_try);
                f.swap(f_try);
                value = trial;
                accepted = true;
                break;
            }
        }
        if (!accepted) newton = false;
    }
    while (err >= kSinkhornTolerance && it < max_iters) {
        sweep(epsilon);
        ++it;
        if (it % 5 == 0 || it == max_iters) err = row_error(cost, f, g, src_weights, epsilon);
    }
    if (!(err < kSinkhornTolerance))
        throw NumericError("sinkhorn: no convergence after " + std::to_string(it) +
                           " iterations (marginal error " + format_double(err) + ")");

    TransportPlan out;
    out.plan = Matrix(n, m);
    out.iterations = it;
    std::fill(col.begin(), col.end(), 0.0);
    double row_err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double p = (f[i] == kNegInf || g[j] == kNegInf) ? 0.0 : std::exp((f[i] + g[j] - cost(i, j)) / epsilon);
            out.plan(i, j) = p;
            out.cost += p * cost(i, j);
            s += p;
            col[j] += p;
        }
        row_err += std::abs(s - src_weights[i]);
    }
    double col_err = 0.0;
    for (std::size_t j = 0; j < m; ++j) col_err += std::abs(col[j] - dst_weights[j]);
    out.marginal_error = row_err + col_err;
    return out;
}

// ---------------------------------------------------------------------------
// OTDD
// ---------------------------------------------------------------------------

namespace {

std::vector<std::size_t> pick_rows(std::size_t n, std::size_t count, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (count >= n) return idx;
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
}

double squared_distance(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double d = x[j] - y[j];
        s += d * d;
    }
    return s;
}

double median(std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

OtddResult solve(const Matrix& cost, const OtddOptions& options) {
    const std::vector<double> a(cost.rows(), 1.0 / static_cast<double>(cost.rows()));
    const std::vector<double> b(cost.cols(), 1.0 / static_cast<double>(cost.cols()));
    double eps = 0.0;
    if (options.epsilon) {
        eps = *options.epsilon;
    } else {
        eps = options.relative_epsilon * median({cost.values().begin(), cost.values().end()});
        if (!(eps > 0.0)) eps = options.relative_epsilon;
    }
    const TransportPlan plan = sinkhorn(cost, a, b, eps, options.max_iters);
    return {plan.cost, eps, plan.marginal_error, plan.iterations};
}

void check_subsample(const Dataset& a, const Dataset& b, const OtddOptions& options) {
    if (a.dim() != b.dim()) throw DimensionError("otdd: dimension mismatch");
    if (options.subsample < 1) throw ContractError("otdd: subsample must be >= 1");
    if (options.subsample > std::min(a.size(), b.size()))
        throw ContractError("otdd: subsample exceeds dataset size");
}

} // namespace

OtddResult otdd_detailed(const Dataset& a, const Dataset& b, const OtddOptions& options) {
    if (!a.is_labeled() || !b.is_labeled()) throw ContractError("otdd: both datasets must be labeled");
    check_subsample(a, b, options);

    const Dataset sa = a.subset(pick_rows(a.size(), options.subsample, derive_seed(options.seed, {1})));
    const Dataset sb = b.subset(pick_rows(b.size(), options.subsample, derive_seed(options.seed, {2})));

    // Label-to-label cost from the full per-class fits.
    const auto fa = fit_gaussian_per_class(a);
    const auto fb = fit_gaussian_per_class(b);
    auto require_fit = [](const std::vector<ClassGaussian>& fits, int y, const char* side) -> const GaussianSummary& {
        const auto& cg = fits[static_cast<std::size_t>(y)];
        if (!cg.sufficient)
            throw InsufficientDataError(std::string("otdd: class ") + std::to_string(y) + " of dataset " + side +
                                        " has fewer than 2 samples");
        return cg.summary;
    };
    std::map<std::pair<int, int>, double> label_cost;
    for (int ya : *sa.labels) {
        for (int yb : *sb.labels) {
            auto key = std::make_pair(ya, yb);
            if (label_cost.count(key)) continue;
            label_cost[key] = frechet_distance_sq(require_fit(fa, ya, "a"), require_fit(fb, yb, "b"));
        }
    }

    Matrix cost(sa.size(), sb.size());
    for (std::size_t i = 0; i < sa.size(); ++i)
        for (std::size_t j = 0; j < sb.size(); ++j)
            cost(i, j) = squared_distance(sa.points.row(i), sb.points.row(j)) +
                         label_cost.at({(*sa.labels)[i], (*sb.labels)[j]});
    return solve(cost, options);
}

double otdd(const Dataset& a, const Dataset& b, const OtddOptions& options) {
    return otdd_detailed(a, b, options).value;
}

double point_cloud_ot(const Dataset& a, const Dataset& b, const OtddOptions& options) {
    check_subsample(a, b, options);
    const Dataset sa = a.subset(pick_rows(a.size(), options.subsample, derive_seed(options.seed, {1})));
    const Dataset sb = b.subset(pick_rows(b.size(), options.subsample, derive_seed(options.seed, {2})));
    Matrix cost(sa.size(), sb.size());
    for (std::size_t i = 0; i < sa.size(); ++i)
        for (std::size_t j = 0; j < sb.size(); ++j) cost(i, j) = squared_distance(sa.points.row(i), sb.points.row(j));
    return solve(cost, options).value;
}

} // namespace collapse
