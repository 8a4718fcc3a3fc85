#include "internal.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <set>

namespace collapse {

void Stream::validate() const {
    if (tasks.empty()) throw ContractError("stream: no tasks");
    const Dataset& first = tasks.front();
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        const Dataset& d = tasks[t];
        d.validate();
        if (d.size() == 0) throw ContractError("stream: task " + std::to_string(t + 1) + " is empty");
        if (d.dim() != first.dim()) throw DimensionError("stream: task " + std::to_string(t + 1) + " dimension differs");
        if (d.is_labeled() != first.is_labeled() || d.class_count != first.class_count)
            throw ContractError("stream: task " + std::to_string(t + 1) + " labeling differs");
    }
}

Stream stream_from_gmm(const GmmSpec& spec, std::size_t task_count, std::size_t classes_per_task,
                       std::size_t samples_per_task, std::uint64_t seed) {
    spec.validate();
    if (task_count < 1 || classes_per_task < 1 || samples_per_task < 1)
        throw ConfigError("stream_from_gmm: task_count, classes_per_task and samples_per_task must be >= 1");
    if (task_count * classes_per_task > spec.component_count())
        throw ConfigError("stream_from_gmm: " + std::to_string(task_count) + " tasks x " +
                          std::to_string(classes_per_task) + " classes exceeds " +
                          std::to_string(spec.component_count()) + " components");
    Stream s;
    for (std::size_t t = 0; t < task_count; ++t) {
        GmmSpec part;
        double total = 0.0;
        for (std::size_t c = 0; c < classes_per_task; ++c) {
            part.components.push_back(spec.components[t * classes_per_task + c]);
            total += part.components.back().weight;
        }
        for (auto& comp : part.components) comp.weight /= total;
        Dataset d = gmm_sample(part, samples_per_task, derive_seed(seed, {t + 1}));
        for (int& y : *d.labels) y += static_cast<int>(t * classes_per_task);
        d.class_count = spec.component_count();
        s.tasks.push_back(std::move(d));
    }
    return s;
}

const MetricValue* TaskTrace::find(MetricName name, const std::string& meta_key, const std::string& meta_value) const {
    for (const auto& m : metrics) {
        if (m.name != name) continue;
        if (meta_key.empty()) return &m;
        auto it = m.metadata.find(meta_key);
        if (it != m.metadata.end() && it->second == meta_value) return &m;
    }
    return nullptr;
}

TaskFailure::TaskFailure(std::size_t task_index, const std::string& cause, std::vector<TaskTrace> partial)
    : std::runtime_error("task " + std::to_string(task_index) + " failed: " + cause),
      task_index_(task_index),
      partial_(std::move(partial)) {}

std::uint64_t dataset_hash(const Dataset& d) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    };
    mix(d.size());
    mix(d.dim());
    for (double v : d.points.values()) mix(std::bit_cast<std::uint64_t>(v));
    if (d.labels)
        for (int y : *d.labels) mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(y)));
    return h;
}

std::uint64_t task_seed(std::uint64_t base, std::size_t task, SeedPurpose purpose) {
    return derive_seed(base, {task, static_cast<std::uint64_t>(purpose)});
}

void write_metrics_csv(const std::vector<TaskTrace>& traces, const std::filesystem::path& path) {
    if (traces.empty()) throw ContractError("write_metrics_csv: no traces");
    std::vector<MetricValue> rows;
    for (const auto& t : traces) rows.insert(rows.end(), t.metrics.begin(), t.metrics.end());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    write_metric_rows(f, std::move(rows));
}

std::size_t replay_rows(std::size_t batch_size, double replay_fraction) {
    if (!(replay_fraction >= 0.0 && replay_fraction <= 1.0)) throw ContractError("replay_fraction must be in [0, 1]");
    return static_cast<std::size_t>(std::ceil(replay_fraction * static_cast<double>(batch_size)));
}

namespace detail {

bool selected(std::span<const MetricName> selection, MetricName name) {
    return std::find(selection.begin(), selection.end(), name) != selection.end();
}

std::vector<int> sorted_classes(const Dataset& d) {
    std::set<int> s(d.labels->begin(), d.labels->end());
    return {s.begin(), s.end()};
}

std::vector<MetricValue> evaluate_task(const MetricContext& ctx, std::size_t task, const Dataset& eval,
                                       std::uint64_t seed) {
    const Dataset& ref = *ctx.reference;
    std::vector<MetricValue> out;
    auto emit = [&](MetricName name, double value, std::map<std::string, std::string> md = {}) {
        out.push_back({name, value, task, std::move(md)});
    };

    // Labels for the class-aware metrics: the generator's own, else pseudo-labels.
    std::optional<Dataset> labeled_eval;
    std::string label_source;
    const bool needs_labels = selected(ctx.selection, MetricName::CFID) || selected(ctx.selection, MetricName::OTDD);
    if (needs_labels) {
        if (eval.is_labeled()) {
            labeled_eval = eval;
            label_source = "generator";
        } else if (ctx.feature_net) {
            labeled_eval = Dataset::labeled(eval.points, classifier_predict(*ctx.feature_net, eval.points),
                                            ctx.feature_net->class_count);
            label_source = "reference_classifier";
        } else {
            throw ContractError("evaluate_task: CFID/OTDD need labeled samples or a feature classifier");
        }
    }

    for (MetricName name : ctx.selection) {
        switch (name) {
        case MetricName::FD:
            emit(name, frechet_distance_sq(fit_gaussian(eval), fit_gaussian(ref)), {{"features", "raw"}});
            break;
        case MetricName::FID: {
            if (!ctx.feature_net) throw ContractError("evaluate_task: FID needs a feature classifier");
            emit(name, fid(encoder_embed(*ctx.feature_net, eval), encoder_embed(*ctx.feature_net, ref)),
                 {{"features", "bottleneck"}});
            break;
        }
        case MetricName::CFID: {
            const CfidResult r = cfid_detailed(*labeled_eval, ref);
            emit(name, r.value,
                 {{"classes_skipped", std::to_string(r.classes_skipped)},
                  {"classes_used", std::to_string(r.classes_used)},
                  {"labels", label_source}});
            break;
        }
        case MetricName::OTDD: {
            OtddOptions opt = ctx.otdd;
            opt.seed = seed;
            opt.subsample = std::min({opt.subsample, labeled_eval->size(), ref.size()});
            const OtddResult r = otdd_detailed(*labeled_eval, ref, opt);
            emit(name, r.value,
                 {{"epsilon", format_double(r.epsilon)},
                  {"labels", label_source},
                  {"seed", std::to_string(seed)},
                  {"subsample", std::to_string(opt.subsample)}});
            break;
        }
        case MetricName::MLE_BIAS:
        case MetricName::MLE_VARIANCE: {
            if (!ctx.spec) throw ContractError("evaluate_task: MLE metrics need the reference mixture");
            const KdeModel kde = kde_fit(eval, seed);
            const LogDensity hat = kde_density(kde);
            const double v = name == MetricName::MLE_BIAS ? mle_bias_estimate(hat, gmm_density(*ctx.spec), ref)
                                                          : mle_variance_estimate(hat, ref);
            emit(name, v, {{"density", "kde"}});
            break;
        }
        case MetricName::CLS_ACCURACY:
            break;
        }
    }
    return out;
}

RunWriter::RunWriter(std::optional<std::filesystem::path> dir, const std::string& run_json) : dir_(std::move(dir)) {
    if (!dir_) return;
    std::error_code ec;
    std::filesystem::create_directories(*dir_, ec);
    if (ec) throw IoError("cannot create " + dir_->string() + ": " + ec.message());
    std::ofstream f(*dir_ / "run.json", std::ios::binary);
    if (!f) throw IoError("cannot write " + (*dir_ / "run.json").string());
    f << run_json << '\n';
}

void RunWriter::persist_task(TaskTrace& trace, const Dataset& synthetic, const WganState& state,
                             const std::string& config_json) {
    if (!dir_) return;
    const std::string sub = "task_" + std::to_string(trace.task_index);
    std::error_code ec;
    std::filesystem::create_directories(*dir_ / sub, ec);
    if (ec) throw IoError("cannot create " + (*dir_ / sub).string() + ": " + ec.message());
    write_dataset_csv((*dir_ / sub / "synthetic.csv").string(), synthetic);
    save_wgan_checkpoint((*dir_ / sub / "model.bin").string(), state, config_json);
    trace.dataset_refs.push_back(sub + "/synthetic.csv");
}

void RunWriter::finish(const std::vector<TaskTrace>& traces) {
    if (!dir_ || traces.empty()) return;
    write_metrics_csv(traces, *dir_ / "metrics.csv");
}

} // namespace detail
} // namespace collapse
