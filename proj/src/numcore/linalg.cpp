#include "collapse/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace collapse {

namespace {

constexpr int kMaxJacobiSweeps = 100;
constexpr double kSymmetryTol = 1e-10;
constexpr double kPsdErrorTol = 1e-6;

double scale_of(const Matrix& a) {
    double m = 1.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

void require_symmetric(const Matrix& a, const char* op) {
    if (a.rows() != a.cols())
        throw DimensionError(std::string(op) + ": matrix is " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + ", expected square");
    const double asym = max_abs_asymmetry(a);
    if (asym > kSymmetryTol * scale_of(a))
        throw ContractError(std::string(op) + ": matrix is not symmetric (max |a_ij - a_ji| = " +
                            std::to_string(asym) + ")");
    if (!a.all_finite()) throw ContractError(std::string(op) + ": non-finite entry");
}

double off_diagonal_norm_sq(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j) s += 2.0 * a(i, j) * a(i, j);
    return s;
}

} // namespace

SymEig sym_eig(const Matrix& input) {
    require_symmetric(input, "sym_eig");
    const std::size_t n = input.rows();

    // Work on the exactly symmetrized copy so rounding asymmetry cannot leak in.
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (input(i, j) + input(j, i));
    Matrix v = Matrix::identity(n);

    const double total = std::max(frobenius_norm(a), std::numeric_limits<double>::min());
    const double target = (1e-14 * total) * (1e-14 * total);

    bool converged = n < 2;
    for (int sweep = 0; sweep < kMaxJacobiSweeps && !converged; ++sweep) {
        if (off_diagonal_norm_sq(a) <= target) {
            converged = true;
            break;
        }
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;

                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    if (!converged && off_diagonal_norm_sq(a) > target)
        throw NumericError("sym_eig: Jacobi iteration did not converge after " +
                           std::to_string(kMaxJacobiSweeps) + " sweeps");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    SymEig out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        out.values[j] = a(src, src);
        // Sign convention: first non-negligible component positive.
        double sign = 1.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (std::abs(v(k, src)) > 1e-12) {
                sign = v(k, src) < 0.0 ? -1.0 : 1.0;
                break;
            }
        }
        for (std::size_t k = 0; k < n; ++k) out.vectors(k, j) = sign * v(k, src);
    }
    return out;
}

Matrix sqrtm_psd(const Matrix& a) {
    const SymEig eig = sym_eig(a);
    const std::size_t n = a.rows();
    const double tol = kPsdErrorTol * std::max(1.0, eig.values.empty() ? 0.0 : std::abs(eig.values.front()));

    std::vector<double> root(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double lambda = eig.values[i];
        if (lambda < -tol)
            throw NumericError("sqrtm_psd: matrix is not PSD (eigenvalue " + std::to_string(lambda) + ")");
        root[i] = lambda > 0.0 ? std::sqrt(lambda) : 0.0;
    }

    Matrix r(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += eig.vectors(i, k) * root[k] * eig.vectors(j, k);
            r(i, j) = s;
            r(j, i) = s;
        }
    }
    return r;
}

Matrix cholesky(const Matrix& a) {
    require_symmetric(a, "cholesky");
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0))
            throw NumericError("cholesky: matrix is not positive definite (pivot " + std::to_string(j) + " = " +
                               std::to_string(d) + ")");
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

} // namespace collapse
