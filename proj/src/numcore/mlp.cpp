#include "collapse/numcore.hpp"
#include "collapse/random.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

namespace collapse {

namespace {

void check_layout(const std::vector<std::size_t>& dims, const std::vector<Activation>& activations) {
    if (dims.size() < 2) throw ContractError("MlpParams: need at least input and output dims");
    if (activations.size() != dims.size() - 1)
        throw ContractError("MlpParams: " + std::to_string(activations.size()) + " activations for " +
                            std::to_string(dims.size() - 1) + " layers");
    for (std::size_t d : dims)
        if (d == 0) throw ContractError("MlpParams: zero-width layer");
}

// x·W + b, one row per sample.
Matrix affine(const Matrix& x, const Matrix& w, const std::vector<double>& b) {
    Matrix out(x.rows(), w.cols());
    const std::size_t in = w.rows();
    const std::size_t width = w.cols();
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double* o = out.row(r).data();
        std::copy(b.begin(), b.end(), o);
        const double* xr = x.row(r).data();
        for (std::size_t k = 0; k < in; ++k) {
            const double xv = xr[k];
            const double* wr = w.row(k).data();
            for (std::size_t j = 0; j < width; ++j) o[j] += xv * wr[j];
        }
    }
    return out;
}

void apply_activation(const Activation& act, Matrix& m) {
    if (act.kind == ActivationKind::Identity) return;
    for (double& v : m.values()) v = act.apply(v);
}

void require_input(const MlpParams& params, const Matrix& x) {
    if (params.layer_dims.empty() || x.cols() != params.input_dim())
        throw DimensionError("mlp_forward: input has " + std::to_string(x.cols()) + " columns, network expects " +
                             std::to_string(params.layer_dims.empty() ? 0 : params.input_dim()));
}

} // namespace

MlpParams MlpParams::zeros(std::vector<std::size_t> dims, std::vector<Activation> activations) {
    check_layout(dims, activations);
    MlpParams p;
    p.layer_dims = std::move(dims);
    p.activations = std::move(activations);
    for (std::size_t i = 0; i + 1 < p.layer_dims.size(); ++i) {
        p.weights.emplace_back(p.layer_dims[i], p.layer_dims[i + 1]);
        p.biases.emplace_back(p.layer_dims[i + 1], 0.0);
    }
    return p;
}

MlpParams MlpParams::init_uniform(std::vector<std::size_t> dims, std::vector<Activation> activations,
                                  std::uint64_t seed) {
    MlpParams p = zeros(std::move(dims), std::move(activations));
    Rng rng(seed);
    for (std::size_t i = 0; i < p.layer_count(); ++i) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(p.layer_dims[i]));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (double& w : p.weights[i].values()) w = u(rng);
        for (double& b : p.biases[i]) b = u(rng);
    }
    return p;
}

std::size_t MlpParams::parameter_count() const noexcept {
    std::size_t n = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) n += weights[i].size() + biases[i].size();
    return n;
}

void MlpParams::validate() const {
    check_layout(layer_dims, activations);
    if (weights.size() != activations.size() || biases.size() != activations.size())
        throw ContractError("MlpParams: layer count mismatch");
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i].rows() != layer_dims[i] || weights[i].cols() != layer_dims[i + 1])
            throw ContractError("MlpParams: weights[" + std::to_string(i) + "] has wrong shape");
        if (biases[i].size() != layer_dims[i + 1])
            throw ContractError("MlpParams: biases[" + std::to_string(i) + "] has wrong length");
    }
}

std::uint64_t MlpParams::fingerprint() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](double v) {
        h ^= std::bit_cast<std::uint64_t>(v);
        h *= 0x100000001b3ULL;
    };
    for (std::size_t i = 0; i < weights.size(); ++i) {
        for (double v : weights[i].values()) mix(v);
        for (double v : biases[i]) mix(v);
    }
    for (std::size_t d : layer_dims) mix(static_cast<double>(d));
    return h;
}

double MlpParams::max_abs_parameter() const noexcept {
    double m = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        for (double v : weights[i].values()) m = std::max(m, std::abs(v));
        for (double v : biases[i]) m = std::max(m, std::abs(v));
    }
    return m;
}

void MlpParams::clip(double bound) noexcept {
    for (std::size_t i = 0; i < weights.size(); ++i) {
        for (double& v : weights[i].values()) v = std::clamp(v, -bound, bound);
        for (double& v : biases[i]) v = std::clamp(v, -bound, bound);
    }
}

GradientSet GradientSet::zeros_like(const MlpParams& params) {
    GradientSet g;
    for (std::size_t i = 0; i < params.weights.size(); ++i) {
        g.weights.emplace_back(params.weights[i].rows(), params.weights[i].cols());
        g.biases.emplace_back(params.biases[i].size(), 0.0);
    }
    return g;
}

bool GradientSet::mirrors(const MlpParams& params) const noexcept {
    if (weights.size() != params.weights.size() || biases.size() != params.biases.size()) return false;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i].rows() != params.weights[i].rows() || weights[i].cols() != params.weights[i].cols())
            return false;
        if (biases[i].size() != params.biases[i].size()) return false;
    }
    return true;
}

double GradientSet::max_abs() const noexcept {
    double m = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        for (double v : weights[i].values()) m = std::max(m, std::abs(v));
        for (double v : biases[i]) m = std::max(m, std::abs(v));
    }
    return m;
}

void GradientSet::add_scaled(const GradientSet& other, double s) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
        auto dst = weights[i].values();
        auto src = other.weights[i].values();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += s * src[k];
        for (std::size_t k = 0; k < biases[i].size(); ++k) biases[i][k] += s * other.biases[i][k];
    }
}

ForwardResult mlp_forward(const MlpParams& params, const Matrix& x) {
    require_input(params, x);
    ForwardResult result;
    result.cache.params_fingerprint = params.fingerprint();
    result.cache.inputs.reserve(params.layer_count());
    result.cache.pre_activations.reserve(params.layer_count());

    Matrix current = x;
    for (std::size_t i = 0; i < params.layer_count(); ++i) {
        Matrix pre = affine(current, params.weights[i], params.biases[i]);
        Matrix post = pre;
        apply_activation(params.activations[i], post);
        result.cache.inputs.push_back(std::move(current));
        result.cache.pre_activations.push_back(std::move(pre));
        current = std::move(post);
    }
    result.output = std::move(current);
    return result;
}

Matrix mlp_predict(const MlpParams& params, const Matrix& x) {
    require_input(params, x);
    Matrix current = x;
    for (std::size_t i = 0; i < params.layer_count(); ++i) {
        current = affine(current, params.weights[i], params.biases[i]);
        apply_activation(params.activations[i], current);
    }
    return current;
}

Backprop mlp_backprop(const MlpParams& params, const ForwardCache& cache, const Matrix& loss_grad,
                      bool want_param_grads) {
    const std::size_t layers = params.layer_count();
    if (cache.inputs.size() != layers || cache.pre_activations.size() != layers)
        throw ContractError("mlp_backward: cache does not match network depth");
    if (cache.params_fingerprint != params.fingerprint())
        throw ContractError("mlp_backward: cache was produced by different parameters (stale cache)");
    const Matrix& last = cache.pre_activations.back();
    if (loss_grad.rows() != last.rows() || loss_grad.cols() != last.cols())
        throw DimensionError("mlp_backward: loss_grad shape does not match network output");

    Backprop out;
    if (want_param_grads) out.grads = GradientSet::zeros_like(params);

    Matrix delta = loss_grad; // ∂loss/∂(post-activation of layer i)
    for (std::size_t li = layers; li-- > 0;) {
        const Activation& act = params.activations[li];
        const Matrix& pre = cache.pre_activations[li];
        if (act.kind != ActivationKind::Identity) {
            auto dv = delta.values();
            auto pv = pre.values();
            for (std::size_t k = 0; k < dv.size(); ++k) dv[k] *= act.derivative(pv[k]);
        }
        const Matrix& input = cache.inputs[li];
        if (want_param_grads) {
            out.grads.weights[li] = matmul_tn(input, delta);
            auto& gb = out.grads.biases[li];
            for (std::size_t r = 0; r < delta.rows(); ++r) {
                const double* dr = delta.row(r).data();
                for (std::size_t j = 0; j < gb.size(); ++j) gb[j] += dr[j];
            }
        }
        delta = matmul_nt(delta, params.weights[li]);
    }
    out.input_grad = std::move(delta);
    return out;
}

GradientSet mlp_backward(const MlpParams& params, const ForwardCache& cache, const Matrix& loss_grad) {
    return mlp_backprop(params, cache, loss_grad, true).grads;
}

GradientSet finite_diff_grad(const std::function<double(const MlpParams&)>& loss_fn, const MlpParams& params,
                             double epsilon) {
    if (!(epsilon > 0.0)) throw ContractError("finite_diff_grad: epsilon must be positive");
    GradientSet g = GradientSet::zeros_like(params);
    MlpParams probe = params;
    auto central = [&](double& slot) {
        const double saved = slot;
        slot = saved + epsilon;
        const double up = loss_fn(probe);
        slot = saved - epsilon;
        const double down = loss_fn(probe);
        slot = saved;
        return (up - down) / (2.0 * epsilon);
    };
    for (std::size_t i = 0; i < probe.layer_count(); ++i) {
        auto w = probe.weights[i].values();
        auto gw = g.weights[i].values();
        for (std::size_t k = 0; k < w.size(); ++k) gw[k] = central(w[k]);
        for (std::size_t k = 0; k < probe.biases[i].size(); ++k) g.biases[i][k] = central(probe.biases[i][k]);
    }
    return g;
}

} // namespace collapse
