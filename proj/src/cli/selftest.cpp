#include "collapse/cli.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace collapse {

namespace {

struct Report {
    std::ostream& out;
    bool ok = true;

    void check(const std::string& name, bool pass, const std::string& detail) {
        out << (pass ? "PASS " : "FAIL ") << name << "  " << detail << '\n';
        ok = ok && pass;
    }
};

std::string show(double v) { return format_double(v); }

GaussianSummary summary(std::vector<double> mean, Matrix cov) { return {std::move(mean), std::move(cov), 0}; }

double gradient_gap(const MlpParams& p, const Matrix& x, const Matrix& w) {
    auto loss = [&](const MlpParams& q) {
        const Matrix y = mlp_predict(q, x);
        double s = 0.0;
        for (std::size_t i = 0; i < y.values().size(); ++i) s += w.values()[i] * y.values()[i];
        return s;
    };
    const auto fwd = mlp_forward(p, x);
    const GradientSet g = mlp_backward(p, fwd.cache, w);
    const GradientSet fd = finite_diff_grad(loss, p, 1e-5);
    double worst = 0.0;
    auto cmp = [&worst](double a, double b) {
        worst = std::max(worst, std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}));
    };
    for (std::size_t l = 0; l < p.layer_count(); ++l) {
        for (std::size_t i = 0; i < g.weights[l].values().size(); ++i) cmp(g.weights[l].values()[i], fd.weights[l].values()[i]);
        for (std::size_t i = 0; i < g.biases[l].size(); ++i) cmp(g.biases[l][i], fd.biases[l][i]);
    }
    return worst;
}

// Uniform-weight n x n transport: the LP optimum sits on a permutation.
double assignment_optimum(const Matrix& cost) {
    std::vector<std::size_t> perm(cost.rows());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < perm.size(); ++i) s += cost(i, perm[i]);
        best = std::min(best, s / static_cast<double>(perm.size()));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

} // namespace

bool run_selftest(std::ostream& out) {
    Report r{out};

    {
        const auto a = summary({0.5, -1.0}, Matrix::from_rows({{2.0, 0.3}, {0.3, 1.0}}));
        const double self = frechet_distance_sq(a, a);
        r.check("frechet.identity", std::abs(self) <= 1e-9, "d=" + show(self));
        const double shift = frechet_distance_sq(summary({0.0}, Matrix(1, 1, 1.0)), summary({1.0}, Matrix(1, 1, 1.0)));
        r.check("frechet.mean_shift_1d", std::abs(shift - 1.0) <= 1e-9, "d=" + show(shift));
        const double scale =
            frechet_distance_sq(summary({0.0, 0.0}, Matrix::identity(2)), summary({0.0, 0.0}, 4.0 * Matrix::identity(2)));
        r.check("frechet.diagonal_scale", std::abs(scale - 2.0) <= 1e-9, "d=" + show(scale));
    }

    {
        double worst = 0.0;
        Rng rng(7);
        std::normal_distribution<double> normal(0.0, 1.0);
        const std::vector<std::pair<std::vector<std::size_t>, Activation>> shapes = {
            {{2, 32, 64, 2}, Activation::relu()}, {{2, 64, 32, 1}, Activation::leaky_relu(0.2)}};
        for (std::size_t k = 0; k < 4; ++k) {
            const auto& [dims, act] = shapes[k % 2];
            std::vector<Activation> acts(dims.size() - 1, act);
            acts.back() = Activation::identity();
            const MlpParams p = MlpParams::init_uniform(dims, acts, 100 + k);
            Matrix x(4, dims.front()), w(4, dims.back());
            for (double& v : x.values()) v = normal(rng);
            for (double& v : w.values()) v = normal(rng);
            worst = std::max(worst, gradient_gap(p, x, w));
        }
        r.check("gradient.finite_difference", worst < 1e-4, "max_rel_err=" + show(worst));
    }

    {
        Rng rng(11);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double worst = 0.0;
        for (std::size_t k = 0; k < 20; ++k) {
            const std::size_t n = 2 + k % 3;
            Matrix c(n, n);
            for (double& v : c.values()) v = u(rng);
            const std::vector<double> w(n, 1.0 / static_cast<double>(n));
            const TransportPlan plan = sinkhorn(c, w, w, 1e-3, 1000000);
            const double exact = assignment_optimum(c);
            worst = std::max(worst, std::abs(plan.cost - exact) / std::max(exact, 1e-12));
        }
        r.check("sinkhorn.assignment_lp", worst < 0.01, "max_rel_gap=" + show(worst));
    }

    {
        Rng rng(5);
        std::normal_distribution<double> normal(1.0, 1.0);
        Matrix x(20000, 1);
        for (double& v : x.values()) v = normal(rng);
        const Dataset eval = Dataset::unlabeled(x);
        auto gauss = [](double mu) {
            return [mu](std::span<const double> p) { return -0.5 * std::log(2.0 * M_PI) - 0.5 * (p[0] - mu) * (p[0] - mu); };
        };
        const double bias = mle_bias_estimate(gauss(0.0), gauss(1.0), eval);
        r.check("mle.bias_gaussian_shift", std::abs(bias + 0.5) < 0.03, "bias=" + show(bias));
        const double var = mle_variance_estimate(gauss(1.0), eval);
        r.check("mle.variance_gaussian", std::abs(var - 0.5) < 0.03, "var=" + show(var));
    }

    out << (r.ok ? "selftest: all checks passed\n" : "selftest: FAILED\n");
    return r.ok;
}

} // namespace collapse
