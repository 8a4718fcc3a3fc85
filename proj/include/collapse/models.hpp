#pragma once

// ---------------------------------------------------------------------------
// models: weight-clipped Wasserstein GAN (unconditional and class-conditional)
// and the bottleneck softmax classifier, all on top of numcore's MLP.
//
// Conditioning concatenates a learnable class-embedding row to the latent
// input of the generator. The critic sees [x, E[y]] with the same table, but
// the table only receives gradient through the generator input path.
//
// Every source of randomness is an explicit seed; training is bit-for-bit
// reproducible.
// ---------------------------------------------------------------------------

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "collapse/distributions.hpp"
#include "collapse/numcore.hpp"
#include "collapse/random.hpp"

namespace collapse {

// ---------------------------------------------------------------------------
// Configs
// ---------------------------------------------------------------------------

struct WganConfig {
    std::size_t z_dim = 2;
    std::vector<std::size_t> gen_dims{2, 32, 64, 2};
    std::vector<std::size_t> critic_dims{2, 64, 32, 1};
    double clip_value = 0.01;
    std::size_t critic_steps_per_gen_step = 5;
    double learning_rate = 1e-4;
    double rmsprop_decay = 0.9;
    double rmsprop_epsilon = 1e-8;
    std::size_t batch_size = 64;
    std::size_t total_gen_steps = 20000;
    std::uint64_t seed = 0;

    std::size_t data_dim() const { return gen_dims.back(); }
    void validate() const;

    friend bool operator==(const WganConfig&, const WganConfig&) = default;
};

struct ConditionalWganConfig {
    WganConfig wgan;
    std::size_t class_count = 5;
    std::size_t class_embed_dim = 4;
    bool freeze_embedding = false;

    // Generator input width is z_dim + class_embed_dim.
    std::vector<std::size_t> generator_dims() const;
    std::vector<std::size_t> critic_input_dims() const;
    void validate() const;
};

struct ClassifierConfig {
    std::vector<std::size_t> encoder_dims{2, 32, 32, 2}; // ends in the bottleneck
    std::size_t class_count = 5;
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::size_t batch_size = 64;
    std::size_t epochs = 20;
    std::uint64_t seed = 0;

    std::size_t bottleneck_dim() const { return encoder_dims.back(); }
    void validate() const;

    friend bool operator==(const ClassifierConfig&, const ClassifierConfig&) = default;
};

// ---------------------------------------------------------------------------
// Handles
// ---------------------------------------------------------------------------

struct GeneratorHandle {
    MlpParams net;
    std::optional<Matrix> class_embedding; // k x e when conditional
    std::size_t z_dim = 0;
    std::size_t trained_steps = 0;

    bool conditional() const noexcept { return class_embedding.has_value(); }
    std::size_t class_count() const { return class_embedding ? class_embedding->rows() : 0; }
    std::size_t output_dim() const { return net.output_dim(); }

    friend bool operator==(const GeneratorHandle&, const GeneratorHandle&) = default;
};

struct CriticHandle {
    MlpParams net;
    std::size_t trained_steps = 0;

    friend bool operator==(const CriticHandle&, const CriticHandle&) = default;
};

struct WganState {
    GeneratorHandle generator;
    CriticHandle critic;

    friend bool operator==(const WganState&, const WganState&) = default;
};

struct ClassifierHandle {
    MlpParams net;                // encoder layers followed by the linear head
    std::size_t encoder_layers = 0;
    std::size_t class_count = 0;
    std::size_t trained_epochs = 0;

    std::size_t bottleneck_dim() const { return net.layer_dims[encoder_layers]; }
};

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

class RmsProp {
public:
    RmsProp(const MlpParams& params, double lr, double decay, double epsilon);
    void step(MlpParams& params, const GradientSet& grad);
    // Separate state for a free-standing table (class embeddings).
    void step_table(Matrix& table, const Matrix& grad);

private:
    double lr_;
    double decay_;
    double epsilon_;
    GradientSet mean_sq_;
    Matrix table_mean_sq_;
};

class SgdMomentum {
public:
    SgdMomentum(const MlpParams& params, double lr, double momentum);
    void step(MlpParams& params, const GradientSet& grad);

private:
    double lr_;
    double momentum_;
    GradientSet velocity_;
};

// ---------------------------------------------------------------------------
// WGAN
// ---------------------------------------------------------------------------

struct LossRecord {
    std::size_t gen_step = 0;
    double critic_loss = 0.0; // mean f(fake) - mean f(real), last critic step
    double gen_loss = 0.0;    // -mean f(G(z))
};

struct WganResult {
    WganState state;
    std::vector<LossRecord> loss_trace;
};

// Fresh networks initialized from cfg.seed.
WganState init_wgan(const WganConfig& cfg);
WganState init_cwgan(const ConditionalWganConfig& cfg);

// Step-level WGAN optimizer. Owns the optimizer state and the latent-noise
// RNG; callers supply real batches and the labels of fake samples.
class WganTrainer {
public:
    WganTrainer(WganState initial, const WganConfig& cfg, std::uint64_t noise_seed);
    WganTrainer(WganState initial, const ConditionalWganConfig& cfg, std::uint64_t noise_seed);

    // One critic update; parameters are clipped afterwards. Returns the
    // critic loss. fake_labels must be empty for an unconditional model.
    double critic_step(const Matrix& real_x, std::span<const int> real_labels, std::span<const int> fake_labels);
    // One generator update. Returns the generator loss.
    double generator_step(std::span<const int> fake_labels);

    const WganState& state() const noexcept { return state_; }
    WganState release() && { return std::move(state_); }

private:
    Matrix draw_noise(std::size_t rows);
    Matrix generator_input(const Matrix& z, std::span<const int> labels) const;
    Matrix critic_input(const Matrix& x, std::span<const int> labels) const;

    WganState state_;
    WganConfig cfg_;
    std::size_t embed_dim_ = 0;
    bool freeze_embedding_ = false;
    RmsProp gen_opt_;
    RmsProp critic_opt_;
    Rng noise_rng_;
};

// Runs total_gen_steps generator updates, each preceded by
// critic_steps_per_gen_step critic updates on fresh real batches. Starts from
// `initial` when given (weight reuse across tasks), else from init_*(cfg).
// Throws DivergenceError on a non-finite loss.
WganResult wgan_train(const Dataset& real, const WganConfig& cfg, std::optional<WganState> initial = std::nullopt);
WganResult cwgan_train(const Dataset& real, const ConditionalWganConfig& cfg,
                       std::optional<WganState> initial = std::nullopt);

// n samples from the generator. Conditional generators use class_labels when
// given, else labels uniform over k. Output is labeled iff conditional.
Dataset generator_sample(const GeneratorHandle& g, std::size_t n, std::uint64_t seed,
                         std::optional<std::vector<int>> class_labels = std::nullopt);

// Labels for conditional samples drawn uniformly from `classes`.
std::vector<int> uniform_labels(std::span<const int> classes, std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Classifier
// ---------------------------------------------------------------------------

// Mean softmax cross-entropy; fills grad (∂loss/∂logits) when non-null.
double softmax_cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix* grad);

ClassifierHandle init_classifier(const ClassifierConfig& cfg);

class ClassifierTrainer {
public:
    ClassifierTrainer(ClassifierHandle initial, const ClassifierConfig& cfg);
    // One SGD-momentum step on the batch; returns the batch loss.
    double step(const Matrix& x, std::span<const int> labels);
    const ClassifierHandle& handle() const noexcept { return handle_; }
    ClassifierHandle release() && { return std::move(handle_); }

private:
    ClassifierHandle handle_;
    SgdMomentum opt_;
};

struct ClassifierResult {
    ClassifierHandle handle;              // after the final epoch
    std::vector<double> val_accuracy;     // one entry per epoch
    std::vector<double> train_loss;       // mean loss per epoch

    // Max over the trace; the untrained accuracy when no epoch ran.
    double best_accuracy = 0.0;
};

// Continues from `initial` when given, else starts from init_classifier(cfg).
ClassifierResult classifier_train(const Dataset& train, const Dataset& val, const ClassifierConfig& cfg,
                                  std::optional<ClassifierHandle> initial = std::nullopt);

// Fraction of argmax-correct predictions; ties go to the lowest class index.
double classifier_accuracy(const ClassifierHandle& c, const Dataset& data);
Matrix classifier_logits(const ClassifierHandle& c, const Matrix& x);
std::vector<int> classifier_predict(const ClassifierHandle& c, const Matrix& x);

// Bottleneck features; labels carried over unchanged.
Dataset encoder_embed(const ClassifierHandle& c, const Dataset& data);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

// Binary: magic "CLABCKPT", u32 version, u64 header length, JSON header
// (config echo, layer dims, activations, table shapes, step counters), then
// every parameter as a little-endian IEEE-754 double in row-major order.
void save_wgan_checkpoint(const std::string& path, const WganState& state, const std::string& config_json);
WganState load_wgan_checkpoint(const std::string& path, std::string* config_json = nullptr);

std::string serialize_wgan_state(const WganState& state, const std::string& config_json);
WganState deserialize_wgan_state(const std::string& bytes, std::string* config_json = nullptr);

} // namespace collapse
