#include "collapse/models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace collapse {

namespace {

// Stream tags for derive_seed.
enum SeedTag : std::uint64_t {
    kInitGenerator = 1,
    kInitCritic = 2,
    kInitEmbedding = 3,
    kRealBatch = 4,
    kNoise = 5,
    kFakeLabels = 6,
};

std::vector<Activation> generator_activations(std::size_t layers) {
    std::vector<Activation> acts(layers, Activation::relu());
    acts.back() = Activation::identity();
    return acts;
}

std::vector<Activation> critic_activations(std::size_t layers) {
    std::vector<Activation> acts(layers, Activation::leaky_relu());
    acts.back() = Activation::identity();
    return acts;
}

void check_finite(double loss, const char* what, std::size_t step) {
    if (!std::isfinite(loss)) throw DivergenceError(std::string(what) + " loss is not finite", step);
}

} // namespace

void WganConfig::validate() const {
    if (z_dim == 0) throw ConfigError("wgan: z_dim must be >= 1");
    if (gen_dims.size() < 2 || critic_dims.size() < 2) throw ConfigError("wgan: networks need at least one layer");
    if (gen_dims.front() != z_dim) throw ConfigError("wgan: gen_dims[0] must equal z_dim");
    if (critic_dims.front() != gen_dims.back()) throw ConfigError("wgan: critic input must match generator output");
    if (critic_dims.back() != 1) throw ConfigError("wgan: critic must output a scalar");
    if (!(clip_value > 0.0)) throw ConfigError("wgan: clip_value must be > 0");
    if (critic_steps_per_gen_step < 1) throw ConfigError("wgan: critic_steps_per_gen_step must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("wgan: learning_rate must be > 0");
    if (!(rmsprop_decay >= 0.0 && rmsprop_decay < 1.0)) throw ConfigError("wgan: rmsprop_decay must be in [0, 1)");
    if (batch_size < 2) throw ConfigError("wgan: batch_size must be >= 2");
}

std::vector<std::size_t> ConditionalWganConfig::generator_dims() const {
    auto dims = wgan.gen_dims;
    dims.front() = wgan.z_dim + class_embed_dim;
    return dims;
}

std::vector<std::size_t> ConditionalWganConfig::critic_input_dims() const {
    auto dims = wgan.critic_dims;
    dims.front() += class_embed_dim;
    return dims;
}

void ConditionalWganConfig::validate() const {
    wgan.validate();
    if (class_count < 1) throw ConfigError("cwgan: class_count must be >= 1");
    if (class_embed_dim < 1) throw ConfigError("cwgan: class_embed_dim must be >= 1");
}

WganState init_wgan(const WganConfig& cfg) {
    cfg.validate();
    WganState s;
    s.generator.net = MlpParams::init_uniform(cfg.gen_dims, generator_activations(cfg.gen_dims.size() - 1),
                                              derive_seed(cfg.seed, {kInitGenerator}));
    s.generator.z_dim = cfg.z_dim;
    s.critic.net = MlpParams::init_uniform(cfg.critic_dims, critic_activations(cfg.critic_dims.size() - 1),
                                           derive_seed(cfg.seed, {kInitCritic}));
    return s;
}

WganState init_cwgan(const ConditionalWganConfig& cfg) {
    cfg.validate();
    const auto gdims = cfg.generator_dims();
    const auto cdims = cfg.critic_input_dims();
    WganState s;
    s.generator.net = MlpParams::init_uniform(gdims, generator_activations(gdims.size() - 1),
                                              derive_seed(cfg.wgan.seed, {kInitGenerator}));
    s.generator.z_dim = cfg.wgan.z_dim;
    s.critic.net = MlpParams::init_uniform(cdims, critic_activations(cdims.size() - 1),
                                           derive_seed(cfg.wgan.seed, {kInitCritic}));
    Matrix table(cfg.class_count, cfg.class_embed_dim);
    Rng rng(derive_seed(cfg.wgan.seed, {kInitEmbedding}));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : table.values()) v = normal(rng);
    s.generator.class_embedding = std::move(table);
    return s;
}

// ---------------------------------------------------------------------------
// WganTrainer
// ---------------------------------------------------------------------------

WganTrainer::WganTrainer(WganState initial, const WganConfig& cfg, std::uint64_t noise_seed)
    : state_(std::move(initial)),
      cfg_(cfg),
      gen_opt_(state_.generator.net, cfg.learning_rate, cfg.rmsprop_decay, cfg.rmsprop_epsilon),
      critic_opt_(state_.critic.net, cfg.learning_rate, cfg.rmsprop_decay, cfg.rmsprop_epsilon),
      noise_rng_(noise_seed) {
    cfg_.validate();
    state_.generator.net.validate();
    state_.critic.net.validate();
    if (state_.generator.conditional()) throw ContractError("WganTrainer: conditional state with unconditional config");
    if (state_.generator.net.input_dim() != cfg.z_dim || state_.critic.net.input_dim() != cfg.data_dim())
        throw ContractError("WganTrainer: initial state does not match config architecture");
}

WganTrainer::WganTrainer(WganState initial, const ConditionalWganConfig& cfg, std::uint64_t noise_seed)
    : state_(std::move(initial)),
      cfg_(cfg.wgan),
      embed_dim_(cfg.class_embed_dim),
      freeze_embedding_(cfg.freeze_embedding),
      gen_opt_(state_.generator.net, cfg.wgan.learning_rate, cfg.wgan.rmsprop_decay, cfg.wgan.rmsprop_epsilon),
      critic_opt_(state_.critic.net, cfg.wgan.learning_rate, cfg.wgan.rmsprop_decay, cfg.wgan.rmsprop_epsilon),
      noise_rng_(noise_seed) {
    cfg.validate();
    state_.generator.net.validate();
    state_.critic.net.validate();
    const auto& table = state_.generator.class_embedding;
    if (!table || table->rows() != cfg.class_count || table->cols() != cfg.class_embed_dim)
        throw ContractError("WganTrainer: class embedding table does not match config");
    if (state_.generator.net.input_dim() != cfg.wgan.z_dim + embed_dim_ ||
        state_.critic.net.input_dim() != cfg.wgan.data_dim() + embed_dim_)
        throw ContractError("WganTrainer: initial state does not match config architecture");
}

Matrix WganTrainer::draw_noise(std::size_t rows) {
    Matrix z(rows, cfg_.z_dim);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : z.values()) v = normal(noise_rng_);
    return z;
}

namespace {

Matrix append_embedding(const Matrix& left, const Matrix& table, std::span<const int> labels) {
    const std::size_t e = table.cols();
    Matrix out(left.rows(), left.cols() + e);
    for (std::size_t r = 0; r < left.rows(); ++r) {
        auto dst = out.row(r);
        auto src = left.row(r);
        std::copy(src.begin(), src.end(), dst.begin());
        const auto y = static_cast<std::size_t>(labels[r]);
        if (y >= table.rows()) throw ContractError("label " + std::to_string(labels[r]) + " out of range");
        auto emb = table.row(y);
        std::copy(emb.begin(), emb.end(), dst.begin() + static_cast<std::ptrdiff_t>(left.cols()));
    }
    return out;
}

} // namespace

Matrix WganTrainer::generator_input(const Matrix& z, std::span<const int> labels) const {
    if (!state_.generator.conditional()) {
        if (!labels.empty()) throw ContractError("WganTrainer: labels given to an unconditional generator");
        return z;
    }
    if (labels.size() != z.rows()) throw ContractError("WganTrainer: one label per sample required");
    return append_embedding(z, *state_.generator.class_embedding, labels);
}

Matrix WganTrainer::critic_input(const Matrix& x, std::span<const int> labels) const {
    return generator_input(x, labels);
}

double WganTrainer::critic_step(const Matrix& real_x, std::span<const int> real_labels,
                                std::span<const int> fake_labels) {
    const std::size_t b_real = real_x.rows();
    const std::size_t b_fake = state_.generator.conditional() ? fake_labels.size() : b_real;
    if (b_real == 0 || b_fake == 0) throw ContractError("critic_step: empty batch");

    const Matrix z = draw_noise(b_fake);
    const Matrix fake = mlp_predict(state_.generator.net, generator_input(z, fake_labels));

    const Matrix real_in = critic_input(real_x, real_labels);
    const Matrix fake_in = critic_input(fake, fake_labels);
    Matrix joint(b_real + b_fake, real_in.cols());
    std::copy(real_in.values().begin(), real_in.values().end(), joint.values().begin());
    std::copy(fake_in.values().begin(), fake_in.values().end(),
              joint.values().begin() + static_cast<std::ptrdiff_t>(real_in.size()));

    auto fwd = mlp_forward(state_.critic.net, joint);
    double mean_real = 0.0;
    double mean_fake = 0.0;
    for (std::size_t r = 0; r < b_real; ++r) mean_real += fwd.output(r, 0);
    for (std::size_t r = 0; r < b_fake; ++r) mean_fake += fwd.output(b_real + r, 0);
    mean_real /= static_cast<double>(b_real);
    mean_fake /= static_cast<double>(b_fake);
    const double loss = mean_fake - mean_real;
    check_finite(loss, "critic", state_.critic.trained_steps);

    Matrix grad(b_real + b_fake, 1);
    for (std::size_t r = 0; r < b_real; ++r) grad(r, 0) = -1.0 / static_cast<double>(b_real);
    for (std::size_t r = 0; r < b_fake; ++r) grad(b_real + r, 0) = 1.0 / static_cast<double>(b_fake);
    const GradientSet g = mlp_backward(state_.critic.net, fwd.cache, grad);

    critic_opt_.step(state_.critic.net, g);
    state_.critic.net.clip(cfg_.clip_value);
    ++state_.critic.trained_steps;
    return loss;
}

double WganTrainer::generator_step(std::span<const int> fake_labels) {
    const bool cond = state_.generator.conditional();
    const std::size_t b = cond ? fake_labels.size() : cfg_.batch_size;
    if (b == 0) throw ContractError("generator_step: empty batch");

    const Matrix z = draw_noise(b);
    auto gen_fwd = mlp_forward(state_.generator.net, generator_input(z, fake_labels));
    auto critic_fwd = mlp_forward(state_.critic.net, critic_input(gen_fwd.output, fake_labels));

    double mean_fake = 0.0;
    for (std::size_t r = 0; r < b; ++r) mean_fake += critic_fwd.output(r, 0);
    mean_fake /= static_cast<double>(b);
    const double loss = -mean_fake;
    check_finite(loss, "generator", state_.generator.trained_steps);

    const Matrix out_grad(b, 1, -1.0 / static_cast<double>(b));
    const Backprop through_critic = mlp_backprop(state_.critic.net, critic_fwd.cache, out_grad, false);

    // Only the point columns of the critic input flow back into the generator.
    const std::size_t d = state_.generator.output_dim();
    Matrix fake_grad(b, d);
    for (std::size_t r = 0; r < b; ++r)
        for (std::size_t j = 0; j < d; ++j) fake_grad(r, j) = through_critic.input_grad(r, j);

    const Backprop gen_bp = mlp_backprop(state_.generator.net, gen_fwd.cache, fake_grad, true);
    gen_opt_.step(state_.generator.net, gen_bp.grads);

    if (cond && !freeze_embedding_) {
        Matrix& table = *state_.generator.class_embedding;
        Matrix table_grad(table.rows(), table.cols());
        for (std::size_t r = 0; r < b; ++r) {
            auto dst = table_grad.row(static_cast<std::size_t>(fake_labels[r]));
            for (std::size_t j = 0; j < embed_dim_; ++j) dst[j] += gen_bp.input_grad(r, cfg_.z_dim + j);
        }
        gen_opt_.step_table(table, table_grad);
    }
    ++state_.generator.trained_steps;
    return loss;
}

// ---------------------------------------------------------------------------
// Training loops
// ---------------------------------------------------------------------------

namespace {

struct BatchSource {
    const Dataset& real;
    std::size_t batch_size;
    Rng batch_rng;
    Rng label_rng;

    Matrix x;
    std::vector<int> y;

    void draw() {
        std::uniform_int_distribution<std::size_t> pick(0, real.size() - 1);
        x = Matrix(batch_size, real.dim());
        y.clear();
        for (std::size_t r = 0; r < batch_size; ++r) {
            const std::size_t i = pick(batch_rng);
            auto src = real.points.row(i);
            std::copy(src.begin(), src.end(), x.row(r).begin());
            if (real.labels) y.push_back((*real.labels)[i]);
        }
    }

    // Fake-sample labels follow the empirical label distribution of `real`.
    std::vector<int> fake_labels() {
        std::vector<int> out;
        if (!real.labels) return out;
        std::uniform_int_distribution<std::size_t> pick(0, real.size() - 1);
        out.reserve(batch_size);
        for (std::size_t r = 0; r < batch_size; ++r) out.push_back((*real.labels)[pick(label_rng)]);
        return out;
    }
};

WganResult run_training(const Dataset& real, const WganConfig& cfg, WganTrainer trainer) {
    BatchSource source{real, cfg.batch_size, Rng(derive_seed(cfg.seed, {kRealBatch})),
                       Rng(derive_seed(cfg.seed, {kFakeLabels})), {}, {}};
    WganResult result;
    result.loss_trace.reserve(cfg.total_gen_steps);
    for (std::size_t step = 0; step < cfg.total_gen_steps; ++step) {
        LossRecord rec;
        rec.gen_step = step;
        for (std::size_t c = 0; c < cfg.critic_steps_per_gen_step; ++c) {
            source.draw();
            const auto fake_y = source.fake_labels();
            rec.critic_loss = trainer.critic_step(source.x, source.y, fake_y);
        }
        const auto fake_y = source.fake_labels();
        rec.gen_loss = trainer.generator_step(fake_y);
        result.loss_trace.push_back(rec);
    }
    result.state = std::move(trainer).release();
    return result;
}

} // namespace

WganResult wgan_train(const Dataset& real, const WganConfig& cfg, std::optional<WganState> initial) {
    cfg.validate();
    real.validate();
    if (real.dim() != cfg.data_dim())
        throw DimensionError("wgan_train: data dimension " + std::to_string(real.dim()) +
                             " does not match generator output " + std::to_string(cfg.data_dim()));
    WganState start = initial ? std::move(*initial) : init_wgan(cfg);
    if (start.generator.conditional()) throw ContractError("wgan_train: initial state is conditional");
    // Ignore labels: the unconditional critic never sees them.
    Dataset unlabeled = Dataset::unlabeled(real.points);
    WganTrainer trainer(std::move(start), cfg, derive_seed(cfg.seed, {kNoise}));
    return run_training(unlabeled, cfg, std::move(trainer));
}

WganResult cwgan_train(const Dataset& real, const ConditionalWganConfig& cfg, std::optional<WganState> initial) {
    cfg.validate();
    real.validate();
    if (!real.is_labeled()) throw ContractError("cwgan_train: real data must be labeled");
    if (*real.class_count != cfg.class_count)
        throw ContractError("cwgan_train: data has " + std::to_string(*real.class_count) + " classes, config " +
                            std::to_string(cfg.class_count));
    if (real.dim() != cfg.wgan.data_dim()) throw DimensionError("cwgan_train: data dimension mismatch");
    WganState start = initial ? std::move(*initial) : init_cwgan(cfg);
    WganTrainer trainer(std::move(start), cfg, derive_seed(cfg.wgan.seed, {kNoise}));
    return run_training(real, cfg.wgan, std::move(trainer));
}

std::vector<int> uniform_labels(std::span<const int> classes, std::size_t n, std::uint64_t seed) {
    if (classes.empty()) throw ContractError("uniform_labels: no classes");
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, classes.size() - 1);
    std::vector<int> out(n);
    for (int& y : out) y = classes[pick(rng)];
    return out;
}

Dataset generator_sample(const GeneratorHandle& g, std::size_t n, std::uint64_t seed,
                         std::optional<std::vector<int>> class_labels) {
    if (n == 0) throw ContractError("generator_sample: n must be >= 1");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix z(n, g.z_dim);
    for (double& v : z.values()) v = normal(rng);

    if (!g.conditional()) {
        if (class_labels) throw ContractError("generator_sample: labels given to an unconditional generator");
        return Dataset::unlabeled(mlp_predict(g.net, z));
    }

    const std::size_t k = g.class_count();
    std::vector<int> labels;
    if (class_labels) {
        labels = std::move(*class_labels);
        if (labels.size() != n) throw ContractError("generator_sample: need one label per sample");
        for (int y : labels)
            if (y < 0 || static_cast<std::size_t>(y) >= k)
                throw ContractError("generator_sample: label " + std::to_string(y) + " outside [0, " +
                                    std::to_string(k) + ")");
    } else {
        std::vector<int> all(k);
        for (std::size_t c = 0; c < k; ++c) all[c] = static_cast<int>(c);
        labels = uniform_labels(all, n, derive_seed(seed, {kFakeLabels}));
    }
    Matrix input = append_embedding(z, *g.class_embedding, labels);
    return Dataset::labeled(mlp_predict(g.net, input), std::move(labels), k);
}

} // namespace collapse
