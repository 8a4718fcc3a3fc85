#include "collapse/models.hpp"

#include <cmath>

namespace collapse {

RmsProp::RmsProp(const MlpParams& params, double lr, double decay, double epsilon)
    : lr_(lr), decay_(decay), epsilon_(epsilon), mean_sq_(GradientSet::zeros_like(params)) {}

void RmsProp::step(MlpParams& params, const GradientSet& grad) {
    if (!grad.mirrors(params) || !mean_sq_.mirrors(params))
        throw ContractError("RmsProp: gradient shape does not mirror parameters");
    auto update = [this](double& p, double& ms, double g) {
        ms = decay_ * ms + (1.0 - decay_) * g * g;
        p -= lr_ * g / (std::sqrt(ms) + epsilon_);
    };
    for (std::size_t i = 0; i < params.layer_count(); ++i) {
        auto w = params.weights[i].values();
        auto m = mean_sq_.weights[i].values();
        auto g = grad.weights[i].values();
        for (std::size_t k = 0; k < w.size(); ++k) update(w[k], m[k], g[k]);
        for (std::size_t k = 0; k < params.biases[i].size(); ++k)
            update(params.biases[i][k], mean_sq_.biases[i][k], grad.biases[i][k]);
    }
}

void RmsProp::step_table(Matrix& table, const Matrix& grad) {
    if (table_mean_sq_.empty()) table_mean_sq_ = Matrix(table.rows(), table.cols());
    if (grad.rows() != table.rows() || grad.cols() != table.cols() || table_mean_sq_.rows() != table.rows())
        throw ContractError("RmsProp: table gradient shape mismatch");
    auto t = table.values();
    auto m = table_mean_sq_.values();
    auto g = grad.values();
    for (std::size_t k = 0; k < t.size(); ++k) {
        m[k] = decay_ * m[k] + (1.0 - decay_) * g[k] * g[k];
        t[k] -= lr_ * g[k] / (std::sqrt(m[k]) + epsilon_);
    }
}

SgdMomentum::SgdMomentum(const MlpParams& params, double lr, double momentum)
    : lr_(lr), momentum_(momentum), velocity_(GradientSet::zeros_like(params)) {}

void SgdMomentum::step(MlpParams& params, const GradientSet& grad) {
    if (!grad.mirrors(params)) throw ContractError("SgdMomentum: gradient shape does not mirror parameters");
    for (std::size_t i = 0; i < params.layer_count(); ++i) {
        auto w = params.weights[i].values();
        auto v = velocity_.weights[i].values();
        auto g = grad.weights[i].values();
        for (std::size_t k = 0; k < w.size(); ++k) {
            v[k] = momentum_ * v[k] + g[k];
            w[k] -= lr_ * v[k];
        }
        auto& b = params.biases[i];
        auto& vb = velocity_.biases[i];
        for (std::size_t k = 0; k < b.size(); ++k) {
            vb[k] = momentum_ * vb[k] + grad.biases[i][k];
            b[k] -= lr_ * vb[k];
        }
    }
}

} // namespace collapse
