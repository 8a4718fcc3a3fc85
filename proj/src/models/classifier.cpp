#include "collapse/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace collapse {

void ClassifierConfig::validate() const {
    if (encoder_dims.size() < 2) throw ConfigError("classifier: encoder needs at least one layer");
    if (bottleneck_dim() < 2) throw ConfigError("classifier: bottleneck_dim must be >= 2");
    if (class_count < 1) throw ConfigError("classifier: class_count must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("classifier: learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("classifier: momentum must be in [0, 1)");
    if (batch_size < 1) throw ConfigError("classifier: batch_size must be >= 1");
}

ClassifierHandle init_classifier(const ClassifierConfig& cfg) {
    cfg.validate();
    std::vector<std::size_t> dims = cfg.encoder_dims;
    dims.push_back(cfg.class_count);
    const std::size_t encoder_layers = cfg.encoder_dims.size() - 1;
    // Hidden encoder layers are ReLU; the bottleneck and the head are linear.
    std::vector<Activation> acts(encoder_layers + 1, Activation::relu());
    acts[encoder_layers - 1] = Activation::identity();
    acts[encoder_layers] = Activation::identity();

    ClassifierHandle h;
    h.net = MlpParams::init_uniform(std::move(dims), std::move(acts), cfg.seed);
    h.encoder_layers = encoder_layers;
    h.class_count = cfg.class_count;
    return h;
}

double softmax_cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix* grad) {
    if (labels.size() != logits.rows()) throw DimensionError("softmax_cross_entropy: label count mismatch");
    const std::size_t k = logits.cols();
    const double inv_b = 1.0 / static_cast<double>(logits.rows());
    if (grad) *grad = Matrix(logits.rows(), k);
    double total = 0.0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        auto row = logits.row(r);
        const double m = *std::max_element(row.begin(), row.end());
        double s = 0.0;
        for (double v : row) s += std::exp(v - m);
        const double lse = m + std::log(s);
        const auto y = static_cast<std::size_t>(labels[r]);
        if (y >= k) throw ContractError("softmax_cross_entropy: label out of range");
        total += lse - row[y];
        if (grad) {
            auto g = grad->row(r);
            for (std::size_t j = 0; j < k; ++j) g[j] = std::exp(row[j] - lse) * inv_b;
            g[y] -= inv_b;
        }
    }
    return total * inv_b;
}

ClassifierTrainer::ClassifierTrainer(ClassifierHandle initial, const ClassifierConfig& cfg)
    : handle_(std::move(initial)), opt_(handle_.net, cfg.learning_rate, cfg.momentum) {}

double ClassifierTrainer::step(const Matrix& x, std::span<const int> labels) {
    auto fwd = mlp_forward(handle_.net, x);
    Matrix grad;
    const double loss = softmax_cross_entropy(fwd.output, labels, &grad);
    if (!std::isfinite(loss)) throw DivergenceError("classifier loss is not finite", handle_.trained_epochs);
    opt_.step(handle_.net, mlp_backward(handle_.net, fwd.cache, grad));
    return loss;
}

Matrix classifier_logits(const ClassifierHandle& c, const Matrix& x) { return mlp_predict(c.net, x); }

std::vector<int> classifier_predict(const ClassifierHandle& c, const Matrix& x) {
    const Matrix logits = classifier_logits(c, x);
    std::vector<int> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto row = logits.row(r);
        // max_element returns the first maximum: ties go to the lowest index.
        out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

double classifier_accuracy(const ClassifierHandle& c, const Dataset& data) {
    if (!data.is_labeled()) throw ContractError("classifier_accuracy: dataset is unlabeled");
    if (data.dim() != c.net.input_dim()) throw DimensionError("classifier_accuracy: dimension mismatch");
    const auto pred = classifier_predict(c, data.points);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == (*data.labels)[i];
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

ClassifierResult classifier_train(const Dataset& train, const Dataset& val, const ClassifierConfig& cfg,
                                  std::optional<ClassifierHandle> initial) {
    cfg.validate();
    train.validate();
    val.validate();
    if (!train.is_labeled() || !val.is_labeled()) throw ContractError("classifier_train: datasets must be labeled");
    if (train.dim() != cfg.encoder_dims.front() || val.dim() != train.dim())
        throw DimensionError("classifier_train: dimension mismatch");
    if (*train.class_count > cfg.class_count || *val.class_count > cfg.class_count)
        throw ContractError("classifier_train: class_count mismatch");

    ClassifierHandle start = initial ? std::move(*initial) : init_classifier(cfg);
    if (start.class_count != cfg.class_count || start.net.input_dim() != train.dim())
        throw ContractError("classifier_train: initial handle does not match config");
    const std::size_t prior_epochs = start.trained_epochs;
    ClassifierTrainer trainer(std::move(start), cfg);
    Rng rng(derive_seed(cfg.seed, {11}));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    ClassifierResult result;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const Dataset batch = train.subset(idx);
            loss_sum += trainer.step(batch.points, *batch.labels);
            ++batches;
        }
        result.train_loss.push_back(loss_sum / static_cast<double>(batches));
        result.val_accuracy.push_back(classifier_accuracy(trainer.handle(), val));
    }
    result.handle = std::move(trainer).release();
    result.handle.trained_epochs = prior_epochs + cfg.epochs;
    result.best_accuracy = result.val_accuracy.empty()
                               ? classifier_accuracy(result.handle, val)
                               : *std::max_element(result.val_accuracy.begin(), result.val_accuracy.end());
    return result;
}

Dataset encoder_embed(const ClassifierHandle& c, const Dataset& data) {
    if (data.dim() != c.net.input_dim()) throw DimensionError("encoder_embed: dimension mismatch");
    Matrix h = data.points;
    for (std::size_t i = 0; i < c.encoder_layers; ++i) {
        MlpParams layer;
        layer.layer_dims = {c.net.layer_dims[i], c.net.layer_dims[i + 1]};
        layer.weights = {c.net.weights[i]};
        layer.biases = {c.net.biases[i]};
        layer.activations = {c.net.activations[i]};
        h = mlp_predict(layer, h);
    }
    Dataset out = data;
    out.points = std::move(h);
    return out;
}

} // namespace collapse
