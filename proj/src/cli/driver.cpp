#include "collapse/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

namespace collapse {

namespace {

namespace fs = std::filesystem;

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string metric;
    std::string a;
    std::string b;
    std::string trace;
    std::string kind = "scatter";
};

std::size_t worker_cap(std::size_t jobs) {
    std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("COLLAPSE_LAB_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end == env || *end != '\0' || v == 0) throw ConfigError("COLLAPSE_LAB_THREADS must be a positive integer");
        cap = v;
    }
    return std::min(cap, std::max<std::size_t>(jobs, 1));
}

// Runs job(i) for i in [0, n) on up to worker_cap(n) threads; rethrows the
// first failure (lowest index) after all workers finish.
template <class Job>
void fan_out(std::size_t n, Job job) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                job(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = worker_cap(n);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void plot_traces(const std::vector<TaskTrace>& traces, const fs::path& dir) {
    std::map<std::string, PlotSpec> by_metric;
    for (const auto& t : traces)
        for (const auto& m : t.metrics) {
            PlotSpec& spec = by_metric[to_string(m.name)];
            std::string label;
            for (const auto& [k, v] : m.metadata)
                if (k == "split" || k == "data") label += (label.empty() ? "" : ",") + v;
            if (label.empty()) label = to_string(m.name);
            auto it = std::find_if(spec.series.begin(), spec.series.end(), [&](const auto& s) { return s.label == label; });
            if (it == spec.series.end()) {
                spec.series.push_back({label, {}});
                it = spec.series.end() - 1;
            }
            it->points.push_back({static_cast<double>(m.task_index), m.value});
        }
    for (auto& [name, spec] : by_metric) {
        spec.kind = PlotKind::LineTrace;
        spec.title = name + " per task";
        spec.x_label = "task";
        spec.y_label = name;
        spec.output = dir / (name + ".svg");
        write_svg(spec);
    }
}

PlotSpec scatter_of(const Dataset& d, PlotKind kind) {
    PlotSpec spec;
    spec.kind = kind;
    spec.x_label = "x0";
    spec.y_label = "x1";
    if (d.dim() != 2) throw ContractError("plots need 2D data, got dimension " + std::to_string(d.dim()));
    std::map<int, PlotSeries> groups;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const int y = d.labels ? (*d.labels)[i] : -1;
        auto& s = groups[y];
        if (s.label.empty()) s.label = y < 0 ? "samples" : "class " + std::to_string(y);
        s.points.push_back({d.points(i, 0), d.points(i, 1)});
    }
    for (auto& [y, s] : groups) spec.series.push_back(std::move(s));
    return spec;
}

void print_traces(std::ostream& out, const std::vector<TaskTrace>& traces) {
    for (const auto& t : traces) {
        out << "task " << t.task_index;
        for (const auto& m : t.metrics) {
            out << "  " << to_string(m.name);
            for (const auto& [k, v] : m.metadata)
                if (k == "split" || k == "data") out << '[' << v << ']';
            out << '=' << format_double(m.value);
        }
        out << "  (" << format_double(std::round(t.wall_time * 10.0) / 10.0) << " s)\n";
    }
}

ExperimentConfig resolve(const Flags& f, std::initializer_list<Experiment> allowed, const char* command) {
    if (f.config.empty()) throw ConfigError(std::string(command) + ": --config is required");
    ExperimentConfig cfg = load_config(f.config);
    if (std::find(allowed.begin(), allowed.end(), cfg.experiment) == allowed.end())
        throw ConfigError(std::string(command) + ": experiment " + to_string(cfg.experiment) + " is not handled here");
    if (f.seed) {
        cfg.seed = *f.seed;
        cfg.ger.seed = *f.seed;
        cfg.metrics_only.seed = *f.seed;
        cfg.seed_sweep.clear();
    }
    if (!f.out.empty()) cfg.output_dir = f.out;
    return cfg;
}

// One directory per seed when sweeping, else the output directory itself.
std::vector<std::pair<std::uint64_t, fs::path>> run_plan(const ExperimentConfig& cfg, std::uint64_t base_seed) {
    std::vector<std::pair<std::uint64_t, fs::path>> plan;
    if (cfg.seed_sweep.empty()) {
        plan.emplace_back(base_seed, fs::path(cfg.output_dir));
    } else {
        for (std::uint64_t s : cfg.seed_sweep) plan.emplace_back(s, fs::path(cfg.output_dir) / ("seed_" + std::to_string(s)));
    }
    return plan;
}

void write_echo(const ExperimentConfig& cfg, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    std::ofstream f(dir / "config.toml", std::ios::binary);
    if (!f) throw IoError("cannot write " + (dir / "config.toml").string());
    f << echo_config(cfg);
}

int cmd_simulate(const Flags& f, std::ostream& out) {
    const ExperimentConfig cfg = resolve(f, {Experiment::Bootstrap}, "simulate");
    const auto plan = run_plan(cfg, cfg.seed);
    std::vector<RunResult> results(plan.size());
    std::mutex io;
    fan_out(plan.size(), [&](std::size_t i) {
        ExperimentConfig one = cfg;
        one.seed = plan[i].first;
        one.seed_sweep.clear();
        one.output_dir = plan[i].second.string();
        write_echo(one, plan[i].second);
        results[i] = bootstrap_run(default_gmm(), to_bootstrap_config(one, plan[i].second));
        if (one.plot) {
            plot_traces(results[i].traces, plan[i].second / "plots");
            PlotSpec s = scatter_of(*results[i].memory.replay_buffer, PlotKind::Scatter2D);
            s.title = "final synthetic samples";
            s.output = plan[i].second / "plots" / "final_samples.svg";
            write_svg(s);
        }
        std::lock_guard lock(io);
        out << "seed " << plan[i].first << " -> " << plan[i].second.string() << '\n';
        print_traces(out, results[i].traces);
    });
    return kExitOk;
}

int cmd_ger(const Flags& f, std::ostream& out) {
    const ExperimentConfig cfg = resolve(f, {Experiment::GerJoint, Experiment::GerSeparate}, "ger");
    const auto plan = run_plan(cfg, cfg.ger.seed);
    std::mutex io;
    fan_out(plan.size(), [&](std::size_t i) {
        ExperimentConfig one = cfg;
        one.ger.seed = plan[i].first;
        one.seed_sweep.clear();
        one.output_dir = plan[i].second.string();
        write_echo(one, plan[i].second);
        const GerConfig g = to_ger_config(one, plan[i].second);
        const RunResult r = g.regime == GerRegime::Joint ? ger_joint_run(g) : ger_separate_run(g);
        if (one.plot) plot_traces(r.traces, plan[i].second / "plots");
        std::lock_guard lock(io);
        out << "seed " << plan[i].first << " -> " << plan[i].second.string() << '\n';
        print_traces(out, r.traces);
    });
    return kExitOk;
}

int cmd_metrics(const Flags& f, std::ostream& out) {
    ExperimentConfig cfg;
    std::vector<MetricName> names;
    std::string a_path = f.a, b_path = f.b;
    if (!f.config.empty()) {
        cfg = resolve(f, {Experiment::MetricsOnly}, "metrics");
        names = cfg.metrics_only.metrics;
        if (a_path.empty()) a_path = cfg.metrics_only.a;
        if (b_path.empty()) b_path = cfg.metrics_only.b;
    } else if (f.seed) {
        cfg.metrics_only.seed = *f.seed;
    }
    if (!f.metric.empty()) names = {parse_metric_name(f.metric)};
    if (names.empty()) throw ConfigError("metrics: --metric or a MetricsOnly --config is required");
    if (a_path.empty() || b_path.empty()) throw ConfigError("metrics: --a and --b are required");

    const Dataset b = read_dataset_csv(b_path);
    // A run directory: recompute the metric for every persisted task.
    if (fs::is_directory(a_path)) {
        std::vector<MetricValue> rows;
        for (std::size_t t = 1;; ++t) {
            const fs::path p = fs::path(a_path) / ("task_" + std::to_string(t)) / "synthetic.csv";
            if (!fs::exists(p)) break;
            const Dataset a = read_dataset_csv(p.string());
            for (MetricName n : names) {
                MetricValue m = compute_pair_metric(n, a, b, cfg);
                m.task_index = t;
                rows.push_back(std::move(m));
            }
        }
        if (rows.empty()) throw IoError("metrics: no task_<t>/synthetic.csv under " + a_path);
        if (!f.out.empty()) {
            std::ofstream file(f.out, std::ios::binary);
            if (!file) throw IoError("cannot open " + f.out + " for writing");
            write_metric_rows(file, rows);
        } else {
            write_metric_rows(out, rows);
        }
        return kExitOk;
    }

    const Dataset a = read_dataset_csv(a_path);
    if (names.size() == 1 && f.out.empty()) {
        out << format_double(compute_pair_metric(names.front(), a, b, cfg).value) << '\n';
        return kExitOk;
    }
    std::vector<MetricValue> rows;
    for (MetricName n : names) rows.push_back(compute_pair_metric(n, a, b, cfg));
    if (f.out.empty()) {
        write_metric_rows(out, rows);
    } else {
        std::error_code ec;
        fs::create_directories(f.out, ec);
        std::ofstream file(fs::path(f.out) / "metrics.csv", std::ios::binary);
        if (!file) throw IoError("cannot write metrics.csv under " + f.out);
        write_metric_rows(file, rows);
    }
    return kExitOk;
}

int cmd_plot(const Flags& f, std::ostream& out) {
    if (f.out.empty()) throw ConfigError("plot: --out is required");
    PlotSpec spec;
    if (!f.trace.empty()) {
        if (f.metric.empty()) throw ConfigError("plot: --metric is required with --trace");
        const MetricName wanted = parse_metric_name(f.metric);
        std::ifstream in(f.trace, std::ios::binary);
        if (!in) throw IoError("cannot open " + f.trace);
        std::map<std::string, PlotSeries> series;
        for (const auto& m : read_metric_rows(in)) {
            if (m.name != wanted) continue;
            std::string label;
            for (const auto& [k, v] : m.metadata)
                if (k == "split" || k == "data") label += (label.empty() ? "" : ",") + v;
            if (label.empty()) label = to_string(m.name);
            series[label].label = label;
            series[label].points.push_back({static_cast<double>(m.task_index), m.value});
        }
        if (series.empty()) throw ConfigError("plot: no " + to_string(wanted) + " rows in " + f.trace);
        for (auto& [k, s] : series) spec.series.push_back(std::move(s));
        spec.kind = PlotKind::LineTrace;
        spec.title = to_string(wanted) + " per task";
        spec.x_label = "task";
        spec.y_label = to_string(wanted);
    } else if (!f.a.empty()) {
        PlotKind kind = PlotKind::Scatter2D;
        if (f.kind == "density")
            kind = PlotKind::DensityHeatmap;
        else if (f.kind != "scatter")
            throw ConfigError("plot: --kind must be scatter or density");
        spec = scatter_of(read_dataset_csv(f.a), kind);
        spec.title = fs::path(f.a).filename().string();
    } else {
        throw ConfigError("plot: --trace or --a is required");
    }
    spec.output = f.out;
    write_svg(spec);
    out << spec.output.string() << '\n';
    return kExitOk;
}

} // namespace

MetricValue compute_pair_metric(MetricName name, const Dataset& a_in, const Dataset& b_in, const ExperimentConfig& cfg) {
    Dataset a = a_in, b = b_in;
    if (a.is_labeled() && b.is_labeled()) {
        const std::size_t k = std::max(*a.class_count, *b.class_count);
        a.class_count = k;
        b.class_count = k;
    }
    MetricValue m;
    m.name = name;
    const std::uint64_t seed = cfg.metrics_only.seed;
    switch (name) {
    case MetricName::FD:
        m.value = frechet_distance_sq(fit_gaussian(a), fit_gaussian(b));
        m.metadata["features"] = "raw";
        break;
    case MetricName::FID:
        m.value = fid(a, b);
        m.metadata["features"] = "raw";
        break;
    case MetricName::CFID: {
        const CfidResult r = cfid_detailed(a, b);
        m.value = r.value;
        m.metadata["classes_skipped"] = std::to_string(r.classes_skipped);
        m.metadata["classes_used"] = std::to_string(r.classes_used);
        break;
    }
    case MetricName::OTDD: {
        OtddOptions opt = cfg.otdd;
        opt.seed = seed;
        opt.subsample = std::min({opt.subsample, a.size(), b.size()});
        const OtddResult r = otdd_detailed(a, b, opt);
        m.value = r.value;
        m.metadata["epsilon"] = format_double(r.epsilon);
        m.metadata["seed"] = std::to_string(seed);
        m.metadata["subsample"] = std::to_string(opt.subsample);
        break;
    }
    case MetricName::MLE_BIAS:
    case MetricName::MLE_VARIANCE: {
        // a is the synthetic side (KDE), b is evaluated under both densities.
        const LogDensity hat = kde_density(kde_fit(a, seed));
        m.value = name == MetricName::MLE_BIAS ? mle_bias_estimate(hat, gmm_density(default_gmm()), b)
                                               : mle_variance_estimate(hat, b);
        m.metadata["density"] = "kde";
        break;
    }
    case MetricName::CLS_ACCURACY: {
        ClassifierConfig cc = cfg.classifier;
        cc.seed = seed;
        m.value = classifier_train(a, b, cc).best_accuracy;
        m.metadata["split"] = "b";
        break;
    }
    }
    return m;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"collapse_lab: model collapse and generative replay experiments"};
    app.require_subcommand(1);
    Flags f;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", f.config, "experiment configuration file");
        sub->add_option("--seed", f.seed, "override the experiment seed");
        sub->add_option("--out", f.out, "output directory (or file for plot)");
    };
    auto* simulate = app.add_subcommand("simulate", "bootstrap a generator on its own samples");
    add_common(simulate);
    auto* ger = app.add_subcommand("ger", "generative experience replay on a class-incremental stream");
    add_common(ger);
    auto* metrics = app.add_subcommand("metrics", "metrics between stored datasets");
    add_common(metrics);
    metrics->add_option("--metric", f.metric, "FD, FID, CFID, OTDD, MLE_BIAS, MLE_VARIANCE or CLS_ACCURACY");
    metrics->add_option("--a", f.a, "dataset CSV or run directory");
    metrics->add_option("--b", f.b, "reference dataset CSV");
    auto* plot = app.add_subcommand("plot", "render SVG figures");
    plot->add_option("--trace", f.trace, "metrics CSV");
    plot->add_option("--metric", f.metric, "metric to draw from the trace");
    plot->add_option("--a", f.a, "dataset CSV to scatter");
    plot->add_option("--kind", f.kind, "scatter or density (dataset plots)");
    plot->add_option("--out", f.out, "SVG path");
    auto* selftest = app.add_subcommand("selftest", "analytic oracle checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(f, out);
        if (ger->parsed()) return cmd_ger(f, out);
        if (metrics->parsed()) return cmd_metrics(f, out);
        if (plot->parsed()) return cmd_plot(f, out);
        if (selftest->parsed()) return run_selftest(out) ? kExitOk : kExitFailure;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const TaskFailure& e) {
        err << "run failed: " << e.what() << " (" << e.partial().size() << " task(s) completed)\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitFailure;
}

} // namespace collapse
