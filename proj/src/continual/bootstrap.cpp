#include "internal.hpp"

#include <json.hpp>

namespace collapse {

namespace {

using nlohmann::json;

enum RunTag : std::uint64_t { kRealTrain = 101, kReference = 102, kFeatureTrain = 103 };

json wgan_json(const WganConfig& c) {
    return {{"z_dim", c.z_dim},
            {"gen_dims", c.gen_dims},
            {"critic_dims", c.critic_dims},
            {"clip_value", c.clip_value},
            {"critic_steps_per_gen_step", c.critic_steps_per_gen_step},
            {"learning_rate", c.learning_rate},
            {"rmsprop_decay", c.rmsprop_decay},
            {"rmsprop_epsilon", c.rmsprop_epsilon},
            {"batch_size", c.batch_size},
            {"total_gen_steps", c.total_gen_steps},
            {"seed", c.seed}};
}

json classifier_json(const ClassifierConfig& c) {
    return {{"encoder_dims", c.encoder_dims}, {"class_count", c.class_count}, {"learning_rate", c.learning_rate},
            {"momentum", c.momentum},         {"batch_size", c.batch_size},   {"epochs", c.epochs},
            {"seed", c.seed}};
}

json metric_list(const std::vector<MetricName>& names) {
    json j = json::array();
    for (MetricName n : names) j.push_back(to_string(n));
    return j;
}

json otdd_json(const OtddOptions& o) {
    json j = {{"relative_epsilon", o.relative_epsilon}, {"subsample", o.subsample}, {"max_iters", o.max_iters}};
    j["epsilon"] = o.epsilon ? json(*o.epsilon) : json(nullptr);
    return j;
}

} // namespace

namespace detail {
json model_json(const std::variant<WganConfig, ConditionalWganConfig>& m) {
    if (const auto* c = std::get_if<ConditionalWganConfig>(&m))
        return {{"kind", "conditional"},
                {"wgan", wgan_json(c->wgan)},
                {"class_count", c->class_count},
                {"class_embed_dim", c->class_embed_dim},
                {"freeze_embedding", c->freeze_embedding}};
    return {{"kind", "unconditional"}, {"wgan", wgan_json(std::get<WganConfig>(m))}};
}
json classifier_config_json(const ClassifierConfig& c) { return classifier_json(c); }
json metrics_json(const std::vector<MetricName>& m) { return metric_list(m); }
json otdd_options_json(const OtddOptions& o) { return otdd_json(o); }
} // namespace detail

const WganConfig& BootstrapConfig::wgan() const {
    if (const auto* c = std::get_if<ConditionalWganConfig>(&model)) return c->wgan;
    return std::get<WganConfig>(model);
}

std::uint64_t BootstrapConfig::seed_for_task(std::size_t task) const {
    if (!task_seeds.empty()) return task_seeds.at(task - 1);
    return derive_seed(seed, {task});
}

void BootstrapConfig::validate() const {
    if (task_count < 2) throw ConfigError("bootstrap: task_count must be >= 2");
    if (real_sample_count < 2) throw ConfigError("bootstrap: real_sample_count must be >= 2");
    if (synthetic_sample_count < 2) throw ConfigError("bootstrap: synthetic_sample_count must be >= 2");
    if (synthetic_sample_count > real_sample_count)
        throw ConfigError("bootstrap: synthetic_sample_count (" + std::to_string(synthetic_sample_count) +
                          ") exceeds real_sample_count (" + std::to_string(real_sample_count) + ")");
    if (eval_reference_count < 3 || eval_sample_count < 3)
        throw ConfigError("bootstrap: evaluation sets need at least 3 rows");
    if (!task_seeds.empty() && task_seeds.size() != task_count)
        throw ConfigError("bootstrap: task_seeds must list one seed per task");
    if (const auto* c = std::get_if<ConditionalWganConfig>(&model))
        c->validate();
    else
        std::get<WganConfig>(model).validate();
    if (detail::selected(metrics, MetricName::CLS_ACCURACY) && !conditional())
        throw ConfigError("bootstrap: CLS_ACCURACY needs a conditional generator");
    classifier.validate();
}

std::string bootstrap_config_json(const BootstrapConfig& cfg) {
    json j = {{"experiment", "bootstrap"},
              {"real_sample_count", cfg.real_sample_count},
              {"synthetic_sample_count", cfg.synthetic_sample_count},
              {"task_count", cfg.task_count},
              {"reinitialize_weights", cfg.reinitialize_weights},
              {"model", detail::model_json(cfg.model)},
              {"metrics", metric_list(cfg.metrics)},
              {"eval_reference_count", cfg.eval_reference_count},
              {"eval_sample_count", cfg.eval_sample_count},
              {"classifier", classifier_json(cfg.classifier)},
              {"otdd", otdd_json(cfg.otdd)},
              {"seed", cfg.seed},
              {"task_seeds", cfg.task_seeds}};
    return j.dump(2);
}

RunResult bootstrap_run(const GmmSpec& spec, const BootstrapConfig& cfg) {
    cfg.validate();
    spec.validate();
    if (spec.dim() != cfg.wgan().data_dim()) throw DimensionError("bootstrap_run: mixture dimension mismatch");
    const auto* cond = std::get_if<ConditionalWganConfig>(&cfg.model);
    if (cond && cond->class_count != spec.component_count())
        throw ConfigError("bootstrap_run: conditional class_count must equal the mixture component count");

    const Dataset reference = gmm_sample(spec, cfg.eval_reference_count, derive_seed(cfg.seed, {kReference}));

    // Feature/pseudo-label network trained once on a separate real draw.
    std::optional<ClassifierHandle> feature_net;
    const bool wants_features = detail::selected(cfg.metrics, MetricName::FID) ||
                                (!cond && (detail::selected(cfg.metrics, MetricName::CFID) ||
                                           detail::selected(cfg.metrics, MetricName::OTDD)));
    if (wants_features) {
        ClassifierConfig fc = cfg.classifier;
        fc.class_count = spec.component_count();
        fc.seed = derive_seed(cfg.seed, {kFeatureTrain, 1});
        const Dataset train = gmm_sample(spec, cfg.eval_reference_count, derive_seed(cfg.seed, {kFeatureTrain}));
        feature_net = classifier_train(train, reference, fc).handle;
    }

    detail::MetricContext ctx;
    ctx.selection = cfg.metrics;
    ctx.reference = &reference;
    ctx.spec = &spec;
    ctx.feature_net = feature_net ? &*feature_net : nullptr;
    ctx.classifier = cfg.classifier;
    ctx.otdd = cfg.otdd;

    const std::string config_json = bootstrap_config_json(cfg);
    detail::RunWriter writer(cfg.output_dir, config_json);

    Dataset train = gmm_sample(spec, cfg.real_sample_count, derive_seed(cfg.seed, {kRealTrain}));
    if (!cond) train = Dataset::unlabeled(train.points);

    RunResult result;
    std::optional<WganState> state;
    for (std::size_t t = 1; t <= cfg.task_count; ++t) {
        detail::Stopwatch clock;
        const std::uint64_t ts = cfg.seed_for_task(t);
        TaskTrace trace;
        trace.task_index = t;
        trace.training_data_hash = dataset_hash(train);
        trace.generator_data = t == 1 ? DataSource::Real : DataSource::Synthetic;

        std::optional<WganState> initial = cfg.reinitialize_weights ? std::nullopt : state;
        try {
            if (cond) {
                ConditionalWganConfig c = *cond;
                c.wgan.seed = task_seed(ts, t, SeedPurpose::Train);
                state = cwgan_train(train, c, std::move(initial)).state;
            } else {
                WganConfig c = std::get<WganConfig>(cfg.model);
                c.seed = task_seed(ts, t, SeedPurpose::Train);
                state = wgan_train(train, c, std::move(initial)).state;
            }

            const GeneratorHandle& g = state->generator;
            Dataset synthetic = generator_sample(g, cfg.synthetic_sample_count, task_seed(ts, t, SeedPurpose::Synthetic));
            const Dataset eval = generator_sample(g, cfg.eval_sample_count, task_seed(ts, t, SeedPurpose::Eval));
            trace.synthetic_data_hash = dataset_hash(synthetic);
            trace.generator_steps = g.trained_steps;

            trace.metrics = detail::evaluate_task(ctx, t, eval, task_seed(ts, t, SeedPurpose::Metrics));
            if (detail::selected(cfg.metrics, MetricName::CLS_ACCURACY)) {
                ClassifierConfig cc = cfg.classifier;
                cc.class_count = spec.component_count();
                cc.seed = task_seed(ts, t, SeedPurpose::Classifier);
                const ClassifierResult r = classifier_train(synthetic, reference, cc);
                trace.classifier_steps = cc.epochs * ((synthetic.size() + cc.batch_size - 1) / cc.batch_size);
                trace.metrics.push_back({MetricName::CLS_ACCURACY, r.best_accuracy, t, {{"split", "reference"}}});
            }

            writer.persist_task(trace, synthetic, *state, config_json);
            train = std::move(synthetic);
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
    result.memory.generator = state->generator;
    result.memory.critic = state->critic;
    result.memory.replay_buffer = train;
    return result;
}

} // namespace collapse
