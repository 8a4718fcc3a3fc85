#pragma once

// Experiment configuration files, SVG figures and the collapse_lab
// command-line driver.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "collapse/continual.hpp"

namespace collapse {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class Experiment { Bootstrap, GerJoint, GerSeparate, MetricsOnly };

std::string to_string(Experiment e);

struct GerSettings {
    std::size_t task_count = 5;
    std::size_t classes_per_task = 1;
    std::size_t samples_per_task = 5000;
    std::size_t validation_per_task = 1000;
    bool replay = true;
    double replay_fraction = 0.5;
    std::size_t replay_sample_count = 5000;
    std::size_t synthetic_sample_count = 5000;
    std::vector<MetricName> metrics{MetricName::CLS_ACCURACY, MetricName::CFID};
    std::uint64_t seed = 0;

    friend bool operator==(const GerSettings&, const GerSettings&) = default;
};

struct MetricsOnlySettings {
    std::string a;
    std::string b;
    std::vector<MetricName> metrics{MetricName::FD};
    std::uint64_t seed = 0;

    friend bool operator==(const MetricsOnlySettings&, const MetricsOnlySettings&) = default;
};

struct ExperimentConfig {
    Experiment experiment = Experiment::Bootstrap;
    std::string output_dir = "out";
    bool plot = false;
    std::vector<std::uint64_t> seed_sweep;

    // [bootstrap]; the model variant follows `conditional`.
    std::size_t real_sample_count = 100000;
    std::size_t synthetic_sample_count = 5000;
    std::size_t task_count = 10;
    bool reinitialize_weights = true; // cold start per task; false continues from the previous weights
    bool conditional = false;
    std::vector<MetricName> bootstrap_metrics{MetricName::FD, MetricName::MLE_BIAS, MetricName::MLE_VARIANCE};
    std::size_t eval_reference_count = 10000;
    std::size_t eval_sample_count = 5000;
    std::uint64_t seed = 0;

    WganConfig wgan;                 // [wgan]
    std::size_t class_embed_dim = 4; // [conditional]
    bool freeze_embedding = false;
    ClassifierConfig classifier;     // [classifier]
    OtddOptions otdd;                // [otdd]
    GerSettings ger;                 // [ger]
    MetricsOnlySettings metrics_only; // [metrics_only]

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Line/column-aware parse of the sectioned key = value format. Throws
// ConfigError on syntax errors, unknown keys or sections, and violated
// constraints.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Fully resolved document; parse_config(echo_config(c)) == c.
std::string echo_config(const ExperimentConfig& cfg);

ConditionalWganConfig conditional_model(const ExperimentConfig& cfg);
BootstrapConfig to_bootstrap_config(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
GerConfig to_ger_config(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Plots
// ---------------------------------------------------------------------------

enum class PlotKind { Scatter2D, LineTrace, DensityHeatmap };

struct PlotSeries {
    std::string label;
    std::vector<std::array<double, 2>> points;
};

struct PlotSpec {
    PlotKind kind = PlotKind::Scatter2D;
    std::vector<PlotSeries> series;
    std::string title;
    std::string x_label;
    std::string y_label;
    std::filesystem::path output;
    std::size_t heatmap_bins = 40;
};

// Canvas geometry shared with tests.
struct PlotFrame {
    static constexpr double width = 640.0;
    static constexpr double height = 480.0;
    static constexpr double left = 70.0;
    static constexpr double right = 150.0; // legend column
    static constexpr double top = 40.0;
    static constexpr double bottom = 60.0;
};

std::string render_svg(const PlotSpec& spec);
void write_svg(const PlotSpec& spec);

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitRuntime = 3, kExitIo = 4 };

// Metric between two stored datasets, as printed by `metrics --a --b`.
MetricValue compute_pair_metric(MetricName name, const Dataset& a, const Dataset& b, const ExperimentConfig& cfg);

// Analytic oracle suite; writes one line per check, returns true when all pass.
bool run_selftest(std::ostream& out);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace collapse
