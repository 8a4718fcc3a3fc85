// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance --out <dir> [--only 1,2,...]
//
// Long runs (criteria 4, 5, 8, 9) write their run directories under <dir>.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "collapse/cli.hpp"
#include "oracles.hpp"

using namespace collapse;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Clock {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream o;
    o.precision(prec);
    o << v;
    return o.str();
}

std::string series(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i], 3);
    return s + "]";
}

GaussianSummary random_summary(std::size_t d, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix b(d, d);
    for (double& v : b.values()) v = n(rng);
    std::vector<double> mu(d);
    for (double& v : mu) v = n(rng);
    return {mu, matmul_nt(b, b), 0};
}

// ---------------------------------------------------------------------------

Outcome frechet_suite() {
    Clock clock;
    auto s = [](std::vector<double> m, Matrix c) { return GaussianSummary{std::move(m), std::move(c), 0}; };
    const auto a = s({0.5, -1.0}, Matrix::from_rows({{2.0, 0.3}, {0.3, 1.0}}));
    const double identity = frechet_distance_sq(a, a);
    const double shift = frechet_distance_sq(s({0.0}, Matrix(1, 1, 1.0)), s({1.0}, Matrix(1, 1, 1.0)));
    const double scale = frechet_distance_sq(s({0, 0}, Matrix::identity(2)), s({0, 0}, 4.0 * Matrix::identity(2)));
    bool ok = std::abs(identity) <= 1e-9 && std::abs(shift - 1.0) <= 1e-9 && std::abs(scale - 2.0) <= 1e-9;

    Rng rng(101);
    double worst_sym = 0.0, worst_self = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const std::size_t d = 1 + static_cast<std::size_t>(k % 8);
        const auto p = random_summary(d, rng), q = random_summary(d, rng);
        const double pq = frechet_distance_sq(p, q), qp = frechet_distance_sq(q, p);
        worst_sym = std::max(worst_sym, std::abs(pq - qp));
        worst_self = std::max(worst_self, std::abs(frechet_distance_sq(p, p)));
    }
    ok = ok && worst_sym <= 1e-9 && worst_self <= 1e-10;
    const double t = clock.seconds();
    ok = ok && t < 5.0;
    return {ok, "identity=" + fmt(identity) + " shift=" + fmt(shift, 12) + " scale=" + fmt(scale, 12) +
                    " max_asym=" + fmt(worst_sym) + " max_self=" + fmt(worst_self) + " time=" + fmt(t, 3) + "s"};
}

Outcome gradient_suite() {
    Clock clock;
    Rng rng(202);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> width(1, 8);
    double worst = 0.0;
    for (std::size_t k = 0; k < 100; ++k) {
        std::vector<std::size_t> dims;
        std::vector<Activation> acts;
        if (k % 3 == 0) {
            dims = {2, 32, 64, 2};
            acts = {Activation::relu(), Activation::relu(), Activation::identity()};
        } else if (k % 3 == 1) {
            dims = {2, 64, 32, 1};
            acts = {Activation::leaky_relu(0.2), Activation::leaky_relu(0.2), Activation::identity()};
        } else {
            dims = {width(rng), width(rng), width(rng), width(rng)};
            const Activation h = k % 2 ? Activation::relu() : Activation::leaky_relu(0.2);
            acts = {h, h, Activation::identity()};
        }
        const MlpParams p = MlpParams::init_uniform(dims, acts, 5000 + k);
        Matrix x(4, dims.front()), w(4, dims.back());
        for (double& v : x.values()) v = normal(rng);
        for (double& v : w.values()) v = normal(rng);
        auto loss = [&](const MlpParams& q) {
            const Matrix y = mlp_predict(q, x);
            double s = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) s += w.values()[i] * y.values()[i];
            return s;
        };
        const GradientSet g = mlp_backward(p, mlp_forward(p, x).cache, w);
        const GradientSet fd = finite_diff_grad(loss, p, 1e-5);
        auto cmp = [&worst](double u, double v) {
            worst = std::max(worst, std::abs(u - v) / std::max({std::abs(u), std::abs(v), 1e-6}));
        };
        for (std::size_t l = 0; l < p.layer_count(); ++l) {
            for (std::size_t i = 0; i < g.weights[l].size(); ++i) cmp(g.weights[l].values()[i], fd.weights[l].values()[i]);
            for (std::size_t i = 0; i < g.biases[l].size(); ++i) cmp(g.biases[l][i], fd.biases[l][i]);
        }
    }
    const double t = clock.seconds();
    return {worst < 1e-4 && t < 30.0, "nets=100 max_rel_err=" + fmt(worst) + " time=" + fmt(t, 3) + "s"};
}

Outcome transport_suite() {
    Clock clock;
    Rng rng(303);
    std::uniform_real_distribution<double> u(0.0, 1.0), w(0.1, 1.0);
    std::uniform_int_distribution<std::size_t> size(1, 4);
    auto weights = [&](std::size_t n) {
        std::vector<double> v(n);
        double s = 0.0;
        for (double& x : v) s += (x = w(rng));
        for (double& x : v) x /= s;
        double head = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) head += v[i];
        v.back() = 1.0 - head;
        return v;
    };
    double worst_gap = 0.0, worst_marginal = 0.0;
    for (int k = 0; k < 200; ++k) {
        const std::size_t n = size(rng), m = size(rng);
        Matrix c(n, m);
        for (double& v : c.values()) v = u(rng);
        const auto a = weights(n), b = weights(m);
        const TransportPlan plan = sinkhorn(c, a, b, 1e-3, 1000000);
        const double exact = oracle::transport_lp(c, a, b);
        worst_gap = std::max(worst_gap, std::abs(plan.cost - exact) / std::max(exact, 1e-12));
        worst_marginal = std::max(worst_marginal, plan.marginal_error);
    }
    const double t = clock.seconds();
    return {worst_gap < 0.01 && worst_marginal < 1e-6 && t < 30.0,
            "instances=200 eps=1e-3 max_rel_gap=" + fmt(worst_gap) + " max_marginal_err=" + fmt(worst_marginal) +
                " time=" + fmt(t, 3) + "s"};
}

Outcome mle_closed_form() {
    Clock clock;
    auto draws = [](double mu, std::uint64_t seed) {
        Rng rng(seed);
        std::normal_distribution<double> d(mu, 1.0);
        Matrix x(100000, 1);
        for (double& v : x.values()) v = d(rng);
        return Dataset::unlabeled(x);
    };
    auto normal = [](double mu) -> LogDensity {
        return [mu](std::span<const double> p) { return -0.5 * std::log(2.0 * M_PI) - 0.5 * (p[0] - mu) * (p[0] - mu); };
    };
    const double bias = mle_bias_estimate(normal(0.0), normal(1.0), draws(1.0, 404));
    const double var = mle_variance_estimate(normal(0.0), draws(0.0, 405));
    const double t = clock.seconds();
    return {std::abs(bias + 0.5) <= 0.02 && std::abs(var - 0.5) <= 0.02 && t < 60.0,
            "bias=" + fmt(bias) + " variance=" + fmt(var) + " time=" + fmt(t, 3) + "s"};
}

Outcome cfid_suite() {
    Clock clock;
    const GmmSpec g = default_gmm();
    double worst = 0.0;
    for (std::uint64_t k = 0; k < 50; ++k) {
        Dataset a = gmm_sample(g, 100 + 20 * k, 700 + k);
        Dataset b = gmm_sample(g, 150 + 10 * k, 800 + k);
        for (std::size_t r = 0; r < b.size(); ++r) b.points(r, 0) += 0.05 * static_cast<double>(k);
        a = Dataset::labeled(a.points, std::vector<int>(a.size(), 0), 1);
        b = Dataset::labeled(b.points, std::vector<int>(b.size(), 0), 1);
        worst = std::max(worst, std::abs(cfid(a, b) - fid(a, b)));
    }
    const Dataset self = gmm_sample(g, 5000, 900);
    const double self_value = cfid(self, self);

    GmmSpec two;
    two.components.push_back({{-2, 0}, {1, 1}, 0.5});
    two.components.push_back({{2, 0}, {1, 1}, 0.5});
    const Dataset p = gmm_sample(two, 20000, 901);
    Dataset q = p;
    for (std::size_t r = 0; r < q.size(); ++r)
        if ((*q.labels)[r] == 1) q.points(r, 0) += 3.0;
    const auto counts = p.class_counts();
    const double translated = cfid(p, q);
    const double t = clock.seconds();
    const bool ok = worst <= 1e-12 && std::abs(self_value) <= 1e-10 && std::abs(translated - 4.5) <= 1e-2 && t < 60.0;
    return {ok, "max|cfid-fid|(k=1)=" + fmt(worst) + " cfid(a,a)=" + fmt(self_value) + " translated=" +
                    fmt(translated, 6) + " (per-class n=" + std::to_string(counts[0]) + "/" +
                    std::to_string(counts[1]) + ") time=" + fmt(t, 3) + "s"};
}

// ---------------------------------------------------------------------------
// Long runs

std::vector<double> metric_trace(const RunResult& r, MetricName name, const std::string& key = {},
                                 const std::string& value = {}) {
    std::vector<double> out;
    for (const auto& t : r.traces) {
        const MetricValue* m = t.find(name, key, value);
        out.push_back(m ? m->value : std::nan(""));
    }
    return out;
}

std::vector<double> task_axis(std::size_t n) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i + 1);
    return x;
}

RunResult run_bootstrap(const ExperimentConfig& cfg, const fs::path& dir) {
    fs::remove_all(dir);
    return bootstrap_run(default_gmm(), to_bootstrap_config(cfg, dir));
}

struct CollapseRuns {
    std::vector<RunResult> runs; // seeds 0, 1, 2
    std::vector<double> seconds;
};

CollapseRuns collapse_runs(const fs::path& out) {
    CollapseRuns c;
    for (std::uint64_t s = 0; s < 3; ++s) {
        ExperimentConfig cfg = parse_config("experiment = \"Bootstrap\"\n");
        cfg.seed = s;
        Clock clock;
        c.runs.push_back(run_bootstrap(cfg, out / "c4" / ("seed_" + std::to_string(s))));
        c.seconds.push_back(clock.seconds());
        std::cout << "  [c4] seed " << s << " FD " << series(metric_trace(c.runs.back(), MetricName::FD)) << " ("
                  << fmt(c.seconds.back(), 4) << "s)" << std::endl;
    }
    return c;
}

Outcome collapse_trend(const CollapseRuns& c) {
    bool ok = true;
    std::string detail;
    for (std::size_t s = 0; s < c.runs.size(); ++s) {
        const auto fd = metric_trace(c.runs[s], MetricName::FD);
        const double rho = oracle::spearman(task_axis(fd.size()), fd);
        const bool seed_ok = fd.size() == 10 && fd.back() > fd.front() && rho > 0.5 && c.seconds[s] < 1200.0;
        ok = ok && seed_ok;
        detail += "seed" + std::to_string(s) + ": FD1=" + fmt(fd.front()) + " FD10=" + fmt(fd.back()) +
                  " spearman=" + fmt(rho, 3) + " time=" + fmt(c.seconds[s], 4) + "s" + (seed_ok ? "" : " (fails)") + "; ";
    }
    return {ok, detail};
}

Outcome mle_trend(const CollapseRuns& c, const Outcome& closed_form) {
    const auto bias = metric_trace(c.runs.front(), MetricName::MLE_BIAS);
    const bool trend = std::abs(bias.back()) > std::abs(bias.front());
    std::string others;
    for (std::size_t s = 1; s < c.runs.size(); ++s) {
        const auto b = metric_trace(c.runs[s], MetricName::MLE_BIAS);
        others += " seed" + std::to_string(s) + ": " + fmt(b.front()) + " -> " + fmt(b.back()) + ";";
    }
    return {closed_form.pass && trend, closed_form.detail + "; seed0 bias task1=" + fmt(bias.front()) +
                                           " task10=" + fmt(bias.back()) + " (|.| rises: " + (trend ? "yes" : "no") +
                                           "); other seeds:" + others};
}

Outcome determinism(const fs::path& out, const fs::path& first) {
    ExperimentConfig cfg = parse_config("experiment = \"Bootstrap\"\n");
    cfg.seed = 0;
    const fs::path again = out / "c9" / "seed_0_rerun";
    run_bootstrap(cfg, again);
    std::map<std::string, fs::path> a, b;
    for (const auto& e : fs::recursive_directory_iterator(first))
        if (e.is_regular_file()) a[fs::relative(e.path(), first).string()] = e.path();
    for (const auto& e : fs::recursive_directory_iterator(again))
        if (e.is_regular_file()) b[fs::relative(e.path(), again).string()] = e.path();
    bool same = a.size() == b.size() && !a.empty();
    std::size_t bytes = 0;
    std::string diff;
    for (const auto& [rel, p] : a) {
        if (!b.count(rel)) {
            same = false;
            diff = rel + " missing in rerun";
            break;
        }
        std::ifstream fa(p, std::ios::binary), fb(b[rel], std::ios::binary);
        const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
        bytes += sa.size();
        if (sa != sb) {
            same = false;
            diff = rel + " differs";
            break;
        }
    }
    return {same, std::to_string(a.size()) + " files, " + std::to_string(bytes) + " bytes compared" +
                      (diff.empty() ? "" : "; " + diff)};
}

Outcome classification_degradation_run(const fs::path& out) {
    Clock clock;
    ExperimentConfig cfg = parse_config("experiment = \"Bootstrap\"\n[bootstrap]\nconditional = true\ntask_count = 8\n"
                                        "metrics = [\"CLS_ACCURACY\"]\n");
    const RunResult r = run_bootstrap(cfg, out / "c5");
    const auto acc = metric_trace(r, MetricName::CLS_ACCURACY);
    const double rho = oracle::spearman(task_axis(acc.size()), acc);
    const double t = clock.seconds();
    const bool ok = acc.size() == 8 && acc.front() >= 0.9 && acc.back() <= 0.4 && t < 1800.0;
    return {ok, "best-per-task accuracy " + series(acc) + " spearman=" + fmt(rho, 3) + " chance=0.2 time=" +
                    fmt(t, 4) + "s"};
}

Outcome ger_forgetting(const fs::path& out) {
    Clock clock;
    ExperimentConfig on = parse_config("experiment = \"GerSeparate\"\n");
    ExperimentConfig off = on;
    off.ger.replay = false;
    fs::remove_all(out / "c8");
    const RunResult r_on = ger_separate_run(to_ger_config(on, out / "c8" / "replay_on"));
    const RunResult r_off = ger_separate_run(to_ger_config(off, out / "c8" / "replay_off"));
    const auto on_t1 = metric_trace(r_on, MetricName::CLS_ACCURACY, "split", "task_1");
    const auto on_seen = metric_trace(r_on, MetricName::CLS_ACCURACY, "split", "seen");
    const auto off_t1 = metric_trace(r_off, MetricName::CLS_ACCURACY, "split", "task_1");
    const auto off_seen = metric_trace(r_off, MetricName::CLS_ACCURACY, "split", "seen");
    const double chance = 0.2;
    const double t = clock.seconds();
    const bool ok = on_t1.size() == 5 && on_t1.back() > chance + 0.15 && on_seen.back() > chance + 0.15 &&
                    std::abs(off_seen.back() - chance) <= 0.05 && t < 1800.0;
    return {ok, "replay on: task_1 " + series(on_t1) + " seen " + series(on_seen) + "; replay off: task_1 " +
                    series(off_t1) + " seen " + series(off_seen) + "; time=" + fmt(t, 4) + "s"};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria runner"};
    std::string out_dir = "acceptance_runs";
    std::vector<int> only;
    app.add_option("--out", out_dir, "directory for run outputs");
    app.add_option("--only", only, "criteria to run")->delimiter(',');
    CLI11_PARSE(app, argc, argv);
    const std::set<int> wanted(only.begin(), only.end());
    auto want = [&](int c) { return wanted.empty() || wanted.count(c) > 0; };
    const fs::path out(out_dir);
    fs::create_directories(out);

    std::map<int, Outcome> results;
    auto record = [&](int c, const std::string& name, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << "criterion " << c << " [" << name << "]: " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail
                  << std::endl;
        results[c] = o;
    };

    if (want(1)) record(1, "analytic Frechet", frechet_suite);
    if (want(2)) record(2, "gradient correctness", gradient_suite);
    if (want(3)) record(3, "OT oracle", transport_suite);
    if (want(7)) record(7, "CFID consistency", cfid_suite);

    std::optional<CollapseRuns> runs;
    std::string runs_error;
    if (want(4) || want(6) || want(9)) {
        try {
            runs = collapse_runs(out);
        } catch (const std::exception& e) {
            runs_error = e.what();
        }
    }
    auto need_runs = [&]() {
        if (!runs) throw std::runtime_error("collapse runs failed: " + runs_error);
        return *runs;
    };
    if (want(4)) record(4, "collapse reproduction", [&] { return collapse_trend(need_runs()); });
    if (want(6)) record(6, "MLE estimators", [&] { return mle_trend(need_runs(), mle_closed_form()); });
    if (want(9)) record(9, "determinism", [&] {
        need_runs();
        return determinism(out, out / "c4" / "seed_0");
    });
    if (want(5)) record(5, "classification degradation", [&] { return classification_degradation_run(out); });
    if (want(8)) record(8, "GER forgetting control", [&] { return ger_forgetting(out); });

    std::cout << "\nsummary\n";
    bool all = true;
    for (const auto& [c, o] : results) {
        std::cout << "criterion " << c << ": " << (o.pass ? "PASS" : "FAIL") << '\n';
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
