#include "doctest.h"

#include <cmath>
#include <random>

#include "collapse/numcore.hpp"
#include "collapse/random.hpp"

using namespace collapse;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(r, c);
    for (double& v : m.values()) v = n(rng);
    return m;
}

Matrix random_symmetric(std::size_t n, Rng& rng) {
    const Matrix b = random_matrix(n, n, rng);
    return 0.5 * (b + b.transpose());
}

Matrix random_psd(std::size_t n, Rng& rng) {
    const Matrix b = random_matrix(n, n, rng);
    return matmul_nt(b, b);
}

double rel_frob(const Matrix& a, const Matrix& b) { return frobenius_norm(a - b) / std::max(frobenius_norm(b), 1e-300); }

// Naive triple loop, kept separate from the library kernels.
Matrix naive_product(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

double relu(double v) { return v > 0 ? v : 0; }

} // namespace

TEST_SUITE("numcore") {

TEST_CASE("matmul hand cases and shape errors") {
    const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
    CHECK(matmul(Matrix::identity(2), a) == a);
    CHECK(matmul(a, Matrix::from_rows({{0}, {1}})) == Matrix::from_rows({{2}, {4}}));
    CHECK_THROWS_AS(matmul(a, Matrix(3, 1)), DimensionError);
    CHECK_THROWS_AS(a + Matrix(2, 3), DimensionError);
}

TEST_CASE("matmul agrees with a triple loop") {
    Rng rng(1);
    const Matrix a = random_matrix(5, 7, rng), b = random_matrix(7, 3, rng);
    const Matrix c = matmul(a, b), ref = naive_product(a, b);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c.values()[i] == doctest::Approx(ref.values()[i]).epsilon(1e-14));
    CHECK(rel_frob(matmul_tn(a.transpose(), b), ref) < 1e-14);
    CHECK(rel_frob(matmul_nt(a, b.transpose()), ref) < 1e-14);
}

TEST_CASE("matmul is associative") {
    Rng rng(2);
    for (int k = 0; k < 20; ++k) {
        const Matrix a = random_matrix(4, 6, rng), b = random_matrix(6, 5, rng), c = random_matrix(5, 3, rng);
        CHECK(rel_frob(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) < 1e-9);
    }
}

TEST_CASE("sym_eig textbook cases") {
    const SymEig d = sym_eig(Matrix::diagonal(std::vector<double>{3, 1}));
    CHECK(d.values[0] == doctest::Approx(3));
    CHECK(d.values[1] == doctest::Approx(1));
    CHECK(std::abs(std::abs(d.vectors(0, 0)) - 1.0) < 1e-12);

    const SymEig e = sym_eig(Matrix::from_rows({{2, 1}, {1, 2}}));
    CHECK(e.values[0] == doctest::Approx(3));
    CHECK(e.values[1] == doctest::Approx(1));
    const double r = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(std::abs(e.vectors(0, 0)) - r) < 1e-12);
    CHECK(e.vectors(0, 0) * e.vectors(1, 0) > 0); // (1,1) direction
    CHECK(e.vectors(0, 1) * e.vectors(1, 1) < 0); // (1,-1) direction

    CHECK_THROWS_AS(sym_eig(Matrix::from_rows({{1, 2}, {0, 1}})), ContractError);
}

TEST_CASE("sym_eig reconstructs random symmetric matrices up to 16x16") {
    Rng rng(3);
    for (std::size_t n = 1; n <= 16; ++n) {
        const Matrix a = random_symmetric(n, rng);
        const SymEig e = sym_eig(a);
        for (std::size_t i = 1; i < n; ++i) CHECK(e.values[i - 1] >= e.values[i]);
        const Matrix recon = matmul(matmul(e.vectors, Matrix::diagonal(e.values)), e.vectors.transpose());
        CHECK(rel_frob(recon, a) < 1e-8);
        CHECK(frobenius_norm(matmul_tn(e.vectors, e.vectors) - Matrix::identity(n)) < 1e-8);
    }
}

TEST_CASE("sqrtm_psd") {
    CHECK(frobenius_norm(sqrtm_psd(Matrix::identity(3)) - Matrix::identity(3)) < 1e-12);
    CHECK(frobenius_norm(sqrtm_psd(Matrix::diagonal(std::vector<double>{4, 9})) -
                         Matrix::diagonal(std::vector<double>{2, 3})) < 1e-12);
    Rng rng(4);
    for (std::size_t n = 1; n <= 10; ++n) {
        const Matrix a = random_psd(n, rng);
        const Matrix r = sqrtm_psd(a);
        CHECK(frobenius_norm(matmul(r, r) - a) < 1e-8 * std::max(1.0, frobenius_norm(a)));
        CHECK(max_abs_asymmetry(r) < 1e-12);
    }
    // Rank-deficient input sits on the PSD boundary.
    const Matrix v = Matrix::from_rows({{1}, {2}});
    const Matrix low = matmul_nt(v, v);
    CHECK(frobenius_norm(matmul(sqrtm_psd(low), sqrtm_psd(low)) - low) < 1e-8);
    CHECK_THROWS_AS(sqrtm_psd(Matrix::diagonal(std::vector<double>{1, -1e-3})), NumericError);
}

TEST_CASE("cholesky") {
    CHECK(cholesky(Matrix::identity(3)) == Matrix::identity(3));
    CHECK(cholesky(Matrix(1, 1, 4.0))(0, 0) == doctest::Approx(2.0));
    Rng rng(5);
    const Matrix a = random_psd(3, rng) + Matrix::identity(3);
    const Matrix l = cholesky(a);
    CHECK(l(0, 1) == 0.0);
    CHECK(l(0, 2) == 0.0);
    CHECK(l(1, 2) == 0.0);
    CHECK(frobenius_norm(matmul_nt(l, l) - a) < 1e-10);
    CHECK_THROWS_AS(cholesky(Matrix::from_rows({{1, 2}, {2, 1}})), NumericError);
}

TEST_CASE("mlp_forward trivial cases and shape checks") {
    const MlpParams z = MlpParams::zeros({2, 32, 64, 2}, {Activation::relu(), Activation::relu(), Activation::identity()});
    Rng rng(6);
    const Matrix x = random_matrix(5, 2, rng);
    CHECK(mlp_predict(z, x) == Matrix(5, 2));

    MlpParams id = MlpParams::zeros({3, 3}, {Activation::identity()});
    id.weights[0] = Matrix::identity(3);
    const Matrix x3 = random_matrix(4, 3, rng);
    CHECK(mlp_predict(id, x3) == x3);
    CHECK_THROWS_AS(mlp_forward(id, x), DimensionError);
    CHECK_THROWS_AS(MlpParams::zeros({2, 3}, {}), ContractError);
}

TEST_CASE("mlp_forward matches per-neuron recomputation") {
    const MlpParams p =
        MlpParams::init_uniform({2, 32, 64, 2}, {Activation::relu(), Activation::relu(), Activation::identity()}, 9);
    Rng rng(7);
    const Matrix x = random_matrix(8, 2, rng);
    const Matrix y = mlp_forward(p, x).output;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        std::vector<double> h(x.row(r).begin(), x.row(r).end());
        for (std::size_t l = 0; l < p.layer_count(); ++l) {
            std::vector<double> next(p.layer_dims[l + 1]);
            for (std::size_t j = 0; j < next.size(); ++j) {
                double s = p.biases[l][j];
                for (std::size_t i = 0; i < h.size(); ++i) s += h[i] * p.weights[l](i, j);
                next[j] = l + 1 < p.layer_count() ? relu(s) : s;
            }
            h = std::move(next);
        }
        for (std::size_t j = 0; j < 2; ++j) CHECK(y(r, j) == doctest::Approx(h[j]).epsilon(1e-13));
    }
}

TEST_CASE("mlp_backward trivial cases") {
    const MlpParams p =
        MlpParams::init_uniform({3, 5, 2}, {Activation::leaky_relu(), Activation::identity()}, 11);
    Rng rng(8);
    const Matrix x = random_matrix(4, 3, rng);
    const auto fwd = mlp_forward(p, x);
    const GradientSet g0 = mlp_backward(p, fwd.cache, Matrix(4, 2));
    CHECK(g0.max_abs() == 0.0);

    // Single identity layer, loss = sum(output): dW = x^T 1, db = column count of rows.
    const MlpParams lin = MlpParams::init_uniform({3, 2}, {Activation::identity()}, 12);
    const auto f = mlp_forward(lin, x);
    const GradientSet g = mlp_backward(lin, f.cache, Matrix(4, 2, 1.0));
    for (std::size_t i = 0; i < 3; ++i) {
        double col = 0.0;
        for (std::size_t r = 0; r < 4; ++r) col += x(r, i);
        for (std::size_t j = 0; j < 2; ++j) CHECK(g.weights[0](i, j) == doctest::Approx(col));
    }
    CHECK(g.biases[0][0] == doctest::Approx(4.0));

    // A cache from other parameters is rejected.
    CHECK_THROWS_AS(mlp_backward(p, f.cache, Matrix(4, 2)), ContractError);
    MlpParams changed = p;
    changed.weights[0](0, 0) += 1.0;
    CHECK_THROWS_AS(mlp_backward(changed, fwd.cache, Matrix(4, 2)), ContractError);
    CHECK_THROWS_AS(mlp_backward(p, fwd.cache, Matrix(4, 3)), DimensionError);
}

TEST_CASE("finite_diff_grad analytic cases") {
    const MlpParams p = MlpParams::init_uniform({2, 3}, {Activation::identity()}, 13);
    const GradientSet c = finite_diff_grad([](const MlpParams&) { return 1.5; }, p, 1e-5);
    CHECK(c.max_abs() == 0.0);
    auto half_sq = [](const MlpParams& q) {
        double s = 0.0;
        for (double v : q.weights[0].values()) s += v * v;
        return 0.5 * s;
    };
    const GradientSet g = finite_diff_grad(half_sq, p, 1e-5);
    for (std::size_t i = 0; i < p.weights[0].size(); ++i)
        CHECK(g.weights[0].values()[i] == doctest::Approx(p.weights[0].values()[i]).epsilon(1e-8));
    CHECK(g.biases[0][0] == 0.0);
}

TEST_CASE("mlp_backward agrees with finite differences over 100 nets") {
    Rng rng(14);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> width(1, 6);
    double worst = 0.0;
    for (std::size_t k = 0; k < 100; ++k) {
        std::vector<std::size_t> dims;
        std::vector<Activation> acts;
        if (k % 4 == 0) {
            dims = {2, 32, 64, 2};
            acts = {Activation::relu(), Activation::relu(), Activation::identity()};
        } else if (k % 4 == 1) {
            dims = {2, 64, 32, 1};
            acts = {Activation::leaky_relu(0.2), Activation::leaky_relu(0.2), Activation::identity()};
        } else {
            dims = {width(rng), width(rng), width(rng), width(rng)};
            const Activation a = k % 2 ? Activation::relu() : Activation::leaky_relu(0.2);
            acts = {a, a, Activation::identity()};
        }
        const MlpParams p = MlpParams::init_uniform(dims, acts, 1000 + k);
        Matrix x(3, dims.front()), w(3, dims.back());
        for (double& v : x.values()) v = normal(rng);
        for (double& v : w.values()) v = normal(rng);
        auto loss = [&](const MlpParams& q) {
            const Matrix y = mlp_predict(q, x);
            double s = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) s += w.values()[i] * y.values()[i];
            return s;
        };
        const GradientSet g = mlp_backward(p, mlp_forward(p, x).cache, w);
        const GradientSet fd = finite_diff_grad(loss, p, 1e-5);
        for (std::size_t l = 0; l < p.layer_count(); ++l) {
            for (std::size_t i = 0; i < g.weights[l].size(); ++i) {
                const double a = g.weights[l].values()[i], b = fd.weights[l].values()[i];
                worst = std::max(worst, std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}));
            }
            for (std::size_t i = 0; i < g.biases[l].size(); ++i) {
                const double a = g.biases[l][i], b = fd.biases[l][i];
                worst = std::max(worst, std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}));
            }
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("operations are bit-deterministic") {
    Rng r1(15), r2(15);
    const Matrix a1 = random_symmetric(7, r1), a2 = random_symmetric(7, r2);
    CHECK(a1 == a2);
    CHECK(sym_eig(a1).vectors == sym_eig(a2).vectors);
    const MlpParams p = MlpParams::init_uniform({2, 8, 1}, {Activation::relu(), Activation::identity()}, 3);
    CHECK(p == MlpParams::init_uniform({2, 8, 1}, {Activation::relu(), Activation::identity()}, 3));
    CHECK(p.fingerprint() == MlpParams(p).fingerprint());
}

TEST_CASE("derive_seed separates streams") {
    CHECK(derive_seed(1, {2}) != derive_seed(1, {3}));
    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
    CHECK(derive_seed(7, {1}) == derive_seed(7, {1}));
}

}
