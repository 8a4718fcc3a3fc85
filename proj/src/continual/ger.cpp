#include "internal.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

namespace collapse {

namespace detail {
nlohmann::json model_json(const std::variant<WganConfig, ConditionalWganConfig>& m);
nlohmann::json classifier_config_json(const ClassifierConfig& c);
nlohmann::json metrics_json(const std::vector<MetricName>& m);
nlohmann::json otdd_options_json(const OtddOptions& o);
} // namespace detail

std::string to_string(GerRegime r) { return r == GerRegime::Joint ? "joint" : "separate"; }

void GerConfig::validate() const {
    stream.validate();
    if (!stream.tasks.front().is_labeled()) throw ConfigError("ger: stream must be labeled");
    if (validation.size() != stream.size()) throw ConfigError("ger: need one validation split per task");
    for (const auto& v : validation) {
        v.validate();
        if (!v.is_labeled() || v.dim() != stream.tasks.front().dim())
            throw ConfigError("ger: validation splits must be labeled and match the stream dimension");
    }
    wgan.validate();
    classifier.validate();
    const std::size_t k = *stream.tasks.front().class_count;
    if (wgan.class_count != k || classifier.class_count != k)
        throw ConfigError("ger: generator and classifier class_count must equal the stream's " + std::to_string(k));
    if (!(replay_fraction >= 0.0 && replay_fraction < 1.0)) throw ConfigError("ger: replay_fraction must be in [0, 1)");
    if (replay_sample_count < 1 || synthetic_sample_count < 3)
        throw ConfigError("ger: replay_sample_count >= 1 and synthetic_sample_count >= 3 required");
    if (detail::selected(metrics, MetricName::MLE_BIAS) || detail::selected(metrics, MetricName::MLE_VARIANCE))
        throw ConfigError("ger: MLE metrics need a reference density and are bootstrap-only");
}

std::string ger_config_json(const GerConfig& cfg) {
    nlohmann::json tasks = nlohmann::json::array();
    for (std::size_t t = 0; t < cfg.stream.size(); ++t)
        tasks.push_back({{"classes", detail::sorted_classes(cfg.stream.tasks[t])},
                         {"train_rows", cfg.stream.tasks[t].size()},
                         {"validation_rows", cfg.validation[t].size()}});
    nlohmann::json j = {{"experiment", "ger"},
                        {"regime", to_string(cfg.regime)},
                        {"tasks", tasks},
                        {"model", detail::model_json(cfg.wgan)},
                        {"classifier", detail::classifier_config_json(cfg.classifier)},
                        {"replay", cfg.replay},
                        {"replay_fraction", cfg.replay_fraction},
                        {"replay_sample_count", cfg.replay_sample_count},
                        {"synthetic_sample_count", cfg.synthetic_sample_count},
                        {"metrics", detail::metrics_json(cfg.metrics)},
                        {"otdd", detail::otdd_options_json(cfg.otdd)},
                        {"seed", cfg.seed}};
    return j.dump(2);
}

JointBatchSource::JointBatchSource(const Dataset& current, const GeneratorHandle* replay_generator,
                                   std::vector<int> replay_classes, std::size_t batch_size, double replay_fraction,
                                   std::uint64_t seed)
    : current_(current),
      replay_generator_(replay_generator),
      replay_classes_(std::move(replay_classes)),
      batch_size_(batch_size),
      replayed_(replay_generator ? replay_rows(batch_size, replay_fraction) : 0),
      rng_(seed) {
    if (!current_.is_labeled()) throw ContractError("JointBatchSource: current task must be labeled");
    if (replayed_ > 0 && replay_classes_.empty()) throw ContractError("JointBatchSource: replay needs past classes");
    if (replayed_ >= batch_size_) throw ContractError("JointBatchSource: batch has no room for current-task rows");
}

void JointBatchSource::next(Matrix& x, std::vector<int>& labels) {
    const std::size_t d = current_.dim();
    const std::size_t own = batch_size_ - replayed_;
    x = Matrix(batch_size_, d);
    labels.assign(batch_size_, 0);
    std::uniform_int_distribution<std::size_t> pick(0, current_.size() - 1);
    for (std::size_t r = 0; r < own; ++r) {
        const std::size_t i = pick(rng_);
        auto src = current_.points.row(i);
        std::copy(src.begin(), src.end(), x.row(r).begin());
        labels[r] = (*current_.labels)[i];
    }
    if (replayed_ == 0) return;
    const std::uint64_t s = rng_();
    const Dataset rep = generator_sample(*replay_generator_, replayed_, s,
                                         uniform_labels(replay_classes_, replayed_, derive_seed(s, {1})));
    for (std::size_t r = 0; r < replayed_; ++r) {
        auto src = rep.points.row(r);
        std::copy(src.begin(), src.end(), x.row(own + r).begin());
        labels[own + r] = (*rep.labels)[r];
    }
}

namespace {

struct TaskContext {
    std::vector<int> past_classes; // seen before this task
    std::vector<int> seen_classes; // including this task
    Dataset seen_val;
    Dataset past_val;              // empty rows when t == 1
};

std::vector<int> merge(std::vector<int> a, const std::vector<int>& b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
}

// End-of-task metrics shared by both regimes.
void evaluate_ger(const GerConfig& cfg, std::size_t t, const TaskContext& tc, const Dataset& synthetic,
                  const std::optional<Dataset>& replay, const ClassifierHandle& clf, TaskTrace& trace) {
    const std::uint64_t ms = task_seed(cfg.seed, t, SeedPurpose::Metrics);
    std::vector<MetricName> generic;
    for (MetricName m : cfg.metrics)
        if (m != MetricName::CLS_ACCURACY) generic.push_back(m);

    detail::MetricContext ctx;
    ctx.selection = generic;
    ctx.reference = &tc.seen_val;
    ctx.feature_net = &clf;
    ctx.classifier = cfg.classifier;
    ctx.otdd = cfg.otdd;
    for (auto m : detail::evaluate_task(ctx, t, synthetic, ms)) {
        m.metadata["data"] = "synthetic";
        trace.metrics.push_back(std::move(m));
    }
    // Replay data against the real past domains it stands in for.
    if (replay && detail::selected(cfg.metrics, MetricName::CFID)) {
        const CfidResult r = cfid_detailed(*replay, tc.past_val);
        trace.metrics.push_back({MetricName::CFID,
                                 r.value,
                                 t,
                                 {{"classes_skipped", std::to_string(r.classes_skipped)},
                                  {"classes_used", std::to_string(r.classes_used)},
                                  {"data", "replay"},
                                  {"labels", "generator"}}});
    }
    if (detail::selected(cfg.metrics, MetricName::CLS_ACCURACY)) {
        trace.metrics.push_back(
            {MetricName::CLS_ACCURACY, classifier_accuracy(clf, tc.seen_val), t, {{"split", "seen"}}});
        trace.metrics.push_back(
            {MetricName::CLS_ACCURACY, classifier_accuracy(clf, cfg.validation.front()), t, {{"split", "task_1"}}});
    }
}

template <class TaskBody>
RunResult run_tasks(const GerConfig& cfg, TaskBody body) {
    cfg.validate();
    const std::string config_json = ger_config_json(cfg);
    detail::RunWriter writer(cfg.output_dir, config_json);

    RunResult result;
    TaskContext tc;
    for (std::size_t t = 1; t <= cfg.stream.size(); ++t) {
        detail::Stopwatch clock;
        const Dataset& current = cfg.stream.tasks[t - 1];
        tc.past_classes = tc.seen_classes;
        tc.past_val = tc.seen_val;
        tc.seen_classes = merge(tc.seen_classes, detail::sorted_classes(current));
        tc.seen_val = t == 1 ? cfg.validation.front() : concat(tc.seen_val, cfg.validation[t - 1]);

        TaskTrace trace;
        trace.task_index = t;
        try {
            std::optional<Dataset> replay;
            Dataset synthetic = body(t, current, tc, result.memory, trace, replay);
            trace.synthetic_data_hash = dataset_hash(synthetic);
            trace.generator_steps = result.memory.generator->trained_steps;
            evaluate_ger(cfg, t, tc, synthetic, replay, *result.memory.classifier, trace);
            writer.persist_task(trace, synthetic, {*result.memory.generator, *result.memory.critic}, config_json);
            result.memory.replay_buffer.reset();
        } catch (const DivergenceError& e) {
            writer.finish(result.traces);
            throw TaskFailure(t, e.what(), std::move(result.traces));
        } catch (const NumericError& e) {
            writer.finish(result.traces);
            throw TaskFailure(t, e.what(), std::move(result.traces));
        }
        trace.wall_time = clock.seconds();
        result.traces.push_back(std::move(trace));
    }
    writer.finish(result.traces);
    return result;
}

std::optional<WganState> memory_state(const Memory& m) {
    if (!m.generator) return std::nullopt;
    return WganState{*m.generator, *m.critic};
}

// Labels of the end-of-task synthetic set: every class the generator is meant
// to remember.
std::vector<int> synthetic_label_pool(const GerConfig& cfg, const TaskContext& tc, const Dataset& current) {
    return cfg.replay ? tc.seen_classes : detail::sorted_classes(current);
}

} // namespace

RunResult ger_separate_run(const GerConfig& cfg) {
    return run_tasks(cfg, [&cfg](std::size_t t, const Dataset& current, const TaskContext& tc, Memory& mem,
                                 TaskTrace& trace, std::optional<Dataset>& replay) {
        // Phase 1: generator on current data plus replay of past classes.
        Dataset gen_data = current;
        trace.generator_data = DataSource::Real;
        if (cfg.replay && mem.generator && !tc.past_classes.empty()) {
            const std::uint64_t rs = task_seed(cfg.seed, t, SeedPurpose::Replay);
            replay = generator_sample(*mem.generator, cfg.replay_sample_count, rs,
                                      uniform_labels(tc.past_classes, cfg.replay_sample_count, derive_seed(rs, {1})));
            gen_data = concat(current, *replay);
            trace.generator_data = DataSource::Mixed;
            mem.replay_buffer = *replay;
        }
        trace.training_data_hash = dataset_hash(gen_data);
        ConditionalWganConfig wc = cfg.wgan;
        wc.wgan.seed = task_seed(cfg.seed, t, SeedPurpose::Train);
        WganState st = cwgan_train(gen_data, wc, memory_state(mem)).state;
        mem.generator = st.generator;
        mem.critic = st.critic;

        // Phase 2: classifier sees generated data only.
        const std::uint64_t ss = task_seed(cfg.seed, t, SeedPurpose::Synthetic);
        Dataset synthetic = generator_sample(
            *mem.generator, cfg.synthetic_sample_count, ss,
            uniform_labels(synthetic_label_pool(cfg, tc, current), cfg.synthetic_sample_count, derive_seed(ss, {1})));
        ClassifierConfig cc = cfg.classifier;
        cc.seed = task_seed(cfg.seed, t, SeedPurpose::Classifier);
        trace.classifier_data = DataSource::Synthetic;
        mem.classifier = classifier_train(synthetic, tc.seen_val, cc, mem.classifier).handle;
        trace.classifier_steps = cc.epochs * ((synthetic.size() + cc.batch_size - 1) / cc.batch_size);
        return synthetic;
    });
}

RunResult ger_joint_run(const GerConfig& cfg) {
    return run_tasks(cfg, [&cfg](std::size_t t, const Dataset& current, const TaskContext& tc, Memory& mem,
                                 TaskTrace& trace, std::optional<Dataset>& replay) {
        ConditionalWganConfig wc = cfg.wgan;
        wc.wgan.seed = task_seed(cfg.seed, t, SeedPurpose::Train);
        ClassifierConfig cc = cfg.classifier;
        cc.seed = task_seed(cfg.seed, t, SeedPurpose::Classifier);

        // The replay source is the generator as it stood at the end of t-1.
        const std::optional<GeneratorHandle> frozen = mem.generator;
        const bool replaying = cfg.replay && frozen && !tc.past_classes.empty() && cfg.replay_fraction > 0.0;
        JointBatchSource batches(current, replaying ? &*frozen : nullptr, replaying ? tc.past_classes : std::vector<int>{},
                                 wc.wgan.batch_size, cfg.replay_fraction, task_seed(cfg.seed, t, SeedPurpose::Batch));
        trace.generator_data = replaying ? DataSource::Mixed : DataSource::Real;
        trace.classifier_data = trace.generator_data;
        trace.training_data_hash = dataset_hash(current);

        std::optional<WganState> start = memory_state(mem);
        WganTrainer gan(start ? std::move(*start) : init_cwgan(wc), wc, task_seed(cfg.seed, t, SeedPurpose::Noise));
        ClassifierTrainer clf(mem.classifier ? *mem.classifier : init_classifier(cc), cc);

        Matrix x;
        std::vector<int> y;
        const std::size_t steps = wc.wgan.total_gen_steps;
        for (std::size_t s = 0; s < steps; ++s) {
            batches.next(x, y);
            for (std::size_t c = 0; c < wc.wgan.critic_steps_per_gen_step; ++c) gan.critic_step(x, y, y);
            gan.generator_step(y);
            clf.step(x, y);
        }
        trace.classifier_steps = steps;

        WganState st = std::move(gan).release();
        mem.generator = st.generator;
        mem.critic = st.critic;
        mem.classifier = std::move(clf).release();

        if (replaying) {
            const std::uint64_t rs = task_seed(cfg.seed, t, SeedPurpose::Replay);
            replay = generator_sample(*frozen, cfg.replay_sample_count, rs,
                                      uniform_labels(tc.past_classes, cfg.replay_sample_count, derive_seed(rs, {1})));
        }
        const std::uint64_t ss = task_seed(cfg.seed, t, SeedPurpose::Synthetic);
        return generator_sample(
            *mem.generator, cfg.synthetic_sample_count, ss,
            uniform_labels(synthetic_label_pool(cfg, tc, current), cfg.synthetic_sample_count, derive_seed(ss, {1})));
    });
}

} // namespace collapse
