#pragma once

// ---------------------------------------------------------------------------
// numcore: dense row-major double matrices, a symmetric eigensolver, and a
// small multilayer perceptron with hand-written reverse accumulation.
//
// Everything is 64-bit and deterministic: identical inputs give bit-identical
// outputs. Matrices here are small (a few hundred rows, <= 64 columns), so
// plain loops are used throughout.
// ---------------------------------------------------------------------------

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "collapse/errors.hpp"

namespace collapse {

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> diag);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    Matrix transpose() const;
    bool all_finite() const noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
// aᵀ·b and a·bᵀ without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

double frobenius_norm(const Matrix& a);
double trace(const Matrix& a);
double max_abs_asymmetry(const Matrix& a);

struct SymEig {
    std::vector<double> values; // descending
    Matrix vectors;             // column j pairs with values[j]
};

// Cyclic Jacobi. Requires symmetry within 1e-10 (relative to max |a_ij| when
// that exceeds 1).
SymEig sym_eig(const Matrix& a);

// Principal square root of a symmetric PSD matrix. Eigenvalues in
// [-1e-6, 0) are treated as rounding and clamped to zero.
Matrix sqrtm_psd(const Matrix& a);

// Lower-triangular L with L·Lᵀ == a.
Matrix cholesky(const Matrix& a);

// ---------------------------------------------------------------------------
// Multilayer perceptron
// ---------------------------------------------------------------------------

enum class ActivationKind { ReLU, LeakyReLU, Identity };

struct Activation {
    ActivationKind kind = ActivationKind::Identity;
    double slope = 0.0;

    static constexpr double kDefaultLeakySlope = 0.2;

    static Activation relu() { return {ActivationKind::ReLU, 0.0}; }
    static Activation leaky_relu(double slope = kDefaultLeakySlope) { return {ActivationKind::LeakyReLU, slope}; }
    static Activation identity() { return {ActivationKind::Identity, 0.0}; }

    double apply(double v) const noexcept {
        switch (kind) {
        case ActivationKind::ReLU: return v > 0.0 ? v : 0.0;
        case ActivationKind::LeakyReLU: return v > 0.0 ? v : slope * v;
        case ActivationKind::Identity: return v;
        }
        return v;
    }
    double derivative(double pre) const noexcept {
        switch (kind) {
        case ActivationKind::ReLU: return pre > 0.0 ? 1.0 : 0.0;
        case ActivationKind::LeakyReLU: return pre > 0.0 ? 1.0 : slope;
        case ActivationKind::Identity: return 1.0;
        }
        return 1.0;
    }

    friend bool operator==(const Activation&, const Activation&) = default;
};

struct MlpParams {
    std::vector<std::size_t> layer_dims;
    std::vector<Matrix> weights;              // weights[i]: dims[i] x dims[i+1]
    std::vector<std::vector<double>> biases;  // biases[i]: dims[i+1]
    std::vector<Activation> activations;      // one per layer

    // Zero-filled network; throws ContractError when dims/activations disagree.
    static MlpParams zeros(std::vector<std::size_t> dims, std::vector<Activation> activations);
    // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
    static MlpParams init_uniform(std::vector<std::size_t> dims, std::vector<Activation> activations,
                                  std::uint64_t seed);

    std::size_t layer_count() const noexcept { return weights.size(); }
    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t output_dim() const { return layer_dims.back(); }
    std::size_t parameter_count() const noexcept;

    void validate() const;
    // Hash over all parameter bits, used to detect stale forward caches.
    std::uint64_t fingerprint() const noexcept;

    double max_abs_parameter() const noexcept;
    void clip(double bound) noexcept;

    friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

struct GradientSet {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    static GradientSet zeros_like(const MlpParams& params);
    bool mirrors(const MlpParams& params) const noexcept;
    double max_abs() const noexcept;
    void add_scaled(const GradientSet& other, double s);
};

struct ForwardCache {
    std::vector<Matrix> inputs;          // input to layer i
    std::vector<Matrix> pre_activations; // x·W + b of layer i
    std::uint64_t params_fingerprint = 0;
};

struct ForwardResult {
    Matrix output;
    ForwardCache cache;
};

ForwardResult mlp_forward(const MlpParams& params, const Matrix& x);
// Forward pass without keeping a cache.
Matrix mlp_predict(const MlpParams& params, const Matrix& x);

struct Backprop {
    GradientSet grads;
    Matrix input_grad; // ∂loss/∂x, same shape as the forward input
};

// Reverse accumulation. When want_param_grads is false only input_grad is
// populated.
Backprop mlp_backprop(const MlpParams& params, const ForwardCache& cache, const Matrix& loss_grad,
                      bool want_param_grads = true);

GradientSet mlp_backward(const MlpParams& params, const ForwardCache& cache, const Matrix& loss_grad);

// Central differences, one parameter at a time. Test oracle only.
GradientSet finite_diff_grad(const std::function<double(const MlpParams&)>& loss_fn, const MlpParams& params,
                             double epsilon);

} // namespace collapse
