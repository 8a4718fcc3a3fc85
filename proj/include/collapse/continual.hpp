#pragma once

// Sequential-task process engine: task streams, the memory carried between
// tasks, the self-consuming bootstrap loop, and generative experience replay
// in its joint and separate training regimes.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "collapse/distributions.hpp"
#include "collapse/metrics.hpp"
#include "collapse/models.hpp"

namespace collapse {

struct Stream {
    std::vector<Dataset> tasks;

    std::size_t size() const noexcept { return tasks.size(); }
    void validate() const;
};

// Disjoint class partitions of the mixture: task t holds components
// [t*classes_per_task, (t+1)*classes_per_task) with global labels.
Stream stream_from_gmm(const GmmSpec& spec, std::size_t task_count, std::size_t classes_per_task,
                       std::size_t samples_per_task, std::uint64_t seed);

struct Memory {
    std::optional<GeneratorHandle> generator;
    std::optional<CriticHandle> critic;
    std::optional<ClassifierHandle> classifier;
    std::optional<Dataset> replay_buffer;

    bool empty() const noexcept { return !generator && !critic && !classifier && !replay_buffer; }
};

enum class DataSource { Real, Synthetic, Mixed };

struct TaskTrace {
    std::size_t task_index = 0; // 1-based
    std::vector<MetricValue> metrics;
    std::vector<std::string> dataset_refs; // persisted files, relative to the run directory
    double wall_time = 0.0;                // seconds; never persisted

    std::size_t generator_steps = 0;  // cumulative trained_steps after the task
    std::size_t classifier_steps = 0; // optimizer steps taken during the task
    std::uint64_t training_data_hash = 0;
    std::uint64_t synthetic_data_hash = 0;
    DataSource generator_data = DataSource::Real;
    DataSource classifier_data = DataSource::Synthetic;

    const MetricValue* find(MetricName name, const std::string& meta_key = {}, const std::string& meta_value = {}) const;
};

struct RunResult {
    std::vector<TaskTrace> traces;
    Memory memory;
};

// Thrown when task `task_index` fails; carries every completed task.
class TaskFailure : public std::runtime_error {
public:
    TaskFailure(std::size_t task_index, const std::string& cause, std::vector<TaskTrace> partial);
    std::size_t task_index() const noexcept { return task_index_; }
    const std::vector<TaskTrace>& partial() const noexcept { return partial_; }

private:
    std::size_t task_index_;
    std::vector<TaskTrace> partial_;
};

// Order-sensitive FNV-1a over the bit patterns of points and labels.
std::uint64_t dataset_hash(const Dataset& d);

enum class SeedPurpose : std::uint64_t {
    Train = 1,      // model init and training streams
    Synthetic = 2,  // persisted synthetic dataset
    Eval = 3,       // fresh evaluation draw
    Replay = 4,     // replayed rows
    Classifier = 5,
    Batch = 6,      // joint batch schedule
    Noise = 7,      // joint latent noise
    Metrics = 8,    // metric subsampling
};

// Seed for one purpose within task t (1-based).
std::uint64_t task_seed(std::uint64_t base, std::size_t task, SeedPurpose purpose);

// Persists traces as the metric CSV (header plus one row per metric value).
void write_metrics_csv(const std::vector<TaskTrace>& traces, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Bootstrap
// ---------------------------------------------------------------------------

struct BootstrapConfig {
    std::size_t real_sample_count = 100000;
    std::size_t synthetic_sample_count = 5000;
    std::size_t task_count = 10;
    bool reinitialize_weights = true; // cold start per task; false continues from the previous weights
    std::variant<WganConfig, ConditionalWganConfig> model = WganConfig{};
    std::vector<MetricName> metrics{MetricName::FD, MetricName::MLE_BIAS, MetricName::MLE_VARIANCE};

    std::size_t eval_reference_count = 10000; // held-out real draw shared by all tasks
    std::size_t eval_sample_count = 5000;     // fresh generator draw per task
    ClassifierConfig classifier;              // FID features, CLS_ACCURACY
    OtddOptions otdd;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> task_seeds; // empty: derived from seed

    std::optional<std::filesystem::path> output_dir;

    bool conditional() const noexcept { return std::holds_alternative<ConditionalWganConfig>(model); }
    const WganConfig& wgan() const;
    std::uint64_t seed_for_task(std::size_t task) const;
    void validate() const;
};

std::string bootstrap_config_json(const BootstrapConfig& cfg);

RunResult bootstrap_run(const GmmSpec& spec, const BootstrapConfig& cfg);

// ---------------------------------------------------------------------------
// Generative experience replay
// ---------------------------------------------------------------------------

enum class GerRegime { Joint, Separate };

std::string to_string(GerRegime r);

struct GerConfig {
    Stream stream;
    std::vector<Dataset> validation; // real validation split per task
    GerRegime regime = GerRegime::Separate;
    ConditionalWganConfig wgan;
    ClassifierConfig classifier;
    bool replay = true;
    double replay_fraction = 0.5;            // share of replayed rows per batch (Joint)
    std::size_t replay_sample_count = 5000;  // replayed rows added per task (Separate)
    std::size_t synthetic_sample_count = 5000;
    std::vector<MetricName> metrics{MetricName::CLS_ACCURACY, MetricName::CFID};
    OtddOptions otdd;
    std::uint64_t seed = 0;

    std::optional<std::filesystem::path> output_dir;

    void validate() const;
};

std::string ger_config_json(const GerConfig& cfg);

// Two phases per task: train the generator on current data plus replay, then
// train the classifier on generated data only.
RunResult ger_separate_run(const GerConfig& cfg);

// One shared batch per step updates critic, generator and classifier.
RunResult ger_joint_run(const GerConfig& cfg);

// Number of replayed rows in a joint batch: ceil(r * B).
std::size_t replay_rows(std::size_t batch_size, double replay_fraction);

// Batch schedule of the joint regime: each batch mixes B - ceil(r*B) rows of
// the current task with ceil(r*B) rows replayed from a frozen generator.
class JointBatchSource {
public:
    JointBatchSource(const Dataset& current, const GeneratorHandle* replay_generator, std::vector<int> replay_classes,
                     std::size_t batch_size, double replay_fraction, std::uint64_t seed);

    void next(Matrix& x, std::vector<int>& labels);
    std::size_t replayed_per_batch() const noexcept { return replayed_; }

private:
    const Dataset& current_;
    const GeneratorHandle* replay_generator_;
    std::vector<int> replay_classes_;
    std::size_t batch_size_;
    std::size_t replayed_;
    Rng rng_;
};

} // namespace collapse
