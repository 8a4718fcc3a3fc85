#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "collapse/continual.hpp"

namespace collapse::detail {

struct MetricContext {
    std::span<const MetricName> selection;
    const Dataset* reference = nullptr;          // real, labeled
    const GmmSpec* spec = nullptr;               // exact reference density for MLE_*
    const ClassifierHandle* feature_net = nullptr; // bottleneck features and pseudo-labels
    ClassifierConfig classifier;
    OtddOptions otdd;
};

bool selected(std::span<const MetricName> selection, MetricName name);

// Every selected metric except CLS_ACCURACY, which needs a training set and is
// added by the caller. `eval` must be labeled for CFID/OTDD unless a feature
// net is available for pseudo-labels.
std::vector<MetricValue> evaluate_task(const MetricContext& ctx, std::size_t task, const Dataset& eval,
                                       std::uint64_t seed);

// Optional on-disk mirror of a run.
class RunWriter {
public:
    RunWriter(std::optional<std::filesystem::path> dir, const std::string& run_json);

    // Writes task_<t>/synthetic.csv and task_<t>/model.bin; records the
    // relative paths in the trace.
    void persist_task(TaskTrace& trace, const Dataset& synthetic, const WganState& state,
                      const std::string& config_json);
    void finish(const std::vector<TaskTrace>& traces);

private:
    std::optional<std::filesystem::path> dir_;
};

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

std::vector<int> sorted_classes(const Dataset& d);

} // namespace collapse::detail
