#include "collapse/metrics.hpp"

namespace collapse {

std::vector<MetricValue> classification_degradation(std::span<const Dataset> synthetic_per_task,
                                                     const Dataset& real_val, const ClassifierConfig& cfg) {
    std::vector<MetricValue> out;
    out.reserve(synthetic_per_task.size());
    for (std::size_t t = 0; t < synthetic_per_task.size(); ++t) {
        ClassifierConfig task_cfg = cfg;
        task_cfg.seed = derive_seed(cfg.seed, {t + 1});
        ClassifierResult r;
        try {
            r = classifier_train(synthetic_per_task[t], real_val, task_cfg);
        } catch (const DivergenceError& e) {
            throw DivergenceError("classification_degradation task " + std::to_string(t + 1) + ": " + e.what(),
                                  e.step());
        }
        MetricValue m;
        m.name = MetricName::CLS_ACCURACY;
        m.value = r.best_accuracy;
        m.task_index = t + 1;
        m.metadata["epochs"] = std::to_string(cfg.epochs);
        out.push_back(std::move(m));
    }
    return out;
}

} // namespace collapse
