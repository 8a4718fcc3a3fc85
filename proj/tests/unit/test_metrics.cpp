#include "doctest.h"

#include <cmath>
#include <sstream>

#include "collapse/metrics.hpp"
#include "collapse/random.hpp"
#include "oracles.hpp"

using namespace collapse;

namespace {

GaussianSummary summary(std::vector<double> mean, Matrix cov) { return {std::move(mean), std::move(cov), 0}; }

GaussianSummary random_summary(std::size_t d, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix b(d, d);
    for (double& v : b.values()) v = n(rng);
    std::vector<double> mu(d);
    for (double& v : mu) v = n(rng);
    return summary(mu, matmul_nt(b, b));
}

Dataset shifted(const Dataset& d, double dx, double dy) {
    Dataset out = d;
    for (std::size_t r = 0; r < out.size(); ++r) {
        out.points(r, 0) += dx;
        out.points(r, 1) += dy;
    }
    return out;
}

Dataset relabel_all(const Dataset& d, int label, std::size_t k) {
    return Dataset::labeled(d.points, std::vector<int>(d.size(), label), k);
}

std::vector<double> random_weights(std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::vector<double> w(n);
    double s = 0.0;
    for (double& v : w) s += (v = u(rng));
    for (double& v : w) v /= s;
    // Renormalize so the sum is 1 to the last bit the solver checks.
    double t = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) t += w[i];
    w.back() = 1.0 - t;
    return w;
}

LogDensity normal1d(double mu) {
    return [mu](std::span<const double> p) { return -0.5 * std::log(2.0 * M_PI) - 0.5 * (p[0] - mu) * (p[0] - mu); };
}

Dataset normal_draws(double mu, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> d(mu, 1.0);
    Matrix x(n, 1);
    for (double& v : x.values()) v = d(rng);
    return Dataset::unlabeled(x);
}

} // namespace

TEST_SUITE("metrics") {

TEST_CASE("frechet analytic cases") {
    const GaussianSummary a = summary({0.5, -1.0}, Matrix::from_rows({{2.0, 0.3}, {0.3, 1.0}}));
    CHECK(std::abs(frechet_distance_sq(a, a)) <= 1e-9);
    CHECK(frechet_distance_sq(summary({0.0}, Matrix(1, 1, 1.0)), summary({1.0}, Matrix(1, 1, 1.0))) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(frechet_distance_sq(summary({0, 0}, Matrix::identity(2)), summary({0, 0}, 4.0 * Matrix::identity(2))) -
                   2.0) <= 1e-9);
    CHECK_THROWS_AS(frechet_distance_sq(a, summary({0}, Matrix(1, 1, 1.0))), DimensionError);
    CHECK_THROWS_AS(frechet_distance_sq(a, summary({0, 0}, Matrix::diagonal(std::vector<double>{1, -1}))), ContractError);
}

TEST_CASE("frechet matches the closed-form 2x2 root") {
    Rng rng(1);
    for (int k = 0; k < 200; ++k) {
        const GaussianSummary a = random_summary(2, rng), b = random_summary(2, rng);
        const double ref = oracle::frechet_2d(a.mean, a.cov, b.mean, b.cov);
        CHECK(frechet_distance_sq(a, b) == doctest::Approx(ref).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("frechet symmetry and self-distance up to 8x8") {
    Rng rng(2);
    for (int k = 0; k < 1000; ++k) {
        const std::size_t d = 1 + static_cast<std::size_t>(k % 8);
        const GaussianSummary a = random_summary(d, rng), b = random_summary(d, rng);
        const double ab = frechet_distance_sq(a, b), ba = frechet_distance_sq(b, a);
        CHECK(std::abs(ab - ba) <= 1e-9);
        CHECK(std::abs(frechet_distance_sq(a, a)) <= 1e-10);
        CHECK(ab >= 0.0);
    }
}

TEST_CASE("fid") {
    const GmmSpec g = default_gmm();
    const Dataset a = gmm_sample(g, 10000, 3);
    CHECK(std::abs(fid(a, a)) <= 1e-10);
    CHECK(fid(a, gmm_sample(g, 10000, 4)) < 0.01);
    CHECK(std::abs(fid(a, shifted(a, 5.0, 0.0)) - 25.0) < 1e-2);
    CHECK_THROWS_AS(fid(a, a.subset(std::vector<std::size_t>{0, 1})), InsufficientDataError);
}

TEST_CASE("cfid") {
    const GmmSpec g = default_gmm();
    const Dataset a = gmm_sample(g, 3000, 5);
    CHECK(std::abs(cfid(a, a)) <= 1e-10);

    // k = 1 reduces to fid.
    Rng rng(6);
    for (std::uint64_t k = 0; k < 50; ++k) {
        const Dataset x = relabel_all(gmm_sample(g, 200 + k, 100 + k), 0, 1);
        const Dataset y = relabel_all(shifted(gmm_sample(g, 300, 200 + k), 0.1 * static_cast<double>(k), 0.0), 0, 1);
        CHECK(std::abs(cfid(x, y) - fid(x, y)) <= 1e-12);
    }

    // Two classes, class 1 translated by (3, 0): (0 + 9) / 2.
    GmmSpec two;
    two.components.push_back({{-2, 0}, {1, 1}, 0.5});
    two.components.push_back({{2, 0}, {1, 1}, 0.5});
    Dataset p = gmm_sample(two, 20000, 7);
    Dataset q = p;
    for (std::size_t r = 0; r < q.size(); ++r)
        if ((*q.labels)[r] == 1) q.points(r, 0) += 3.0;
    CHECK(std::abs(cfid(p, q) - 4.5) < 1e-2);

    // Classes short of d+1 rows are skipped and counted.
    const Dataset sparse = Dataset::labeled(Matrix::from_rows({{0, 0}, {1, 0}, {0, 1}, {5, 5}}), {0, 0, 0, 1}, 2);
    const CfidResult r = cfid_detailed(sparse, sparse);
    CHECK(r.classes_used == 1);
    CHECK(r.classes_skipped == 1);
    const Dataset none = Dataset::labeled(Matrix::from_rows({{0, 0}, {1, 0}}), {0, 1}, 2);
    CHECK_THROWS_AS(cfid(none, none), InsufficientDataError);
    CHECK_THROWS_AS(cfid(a, Dataset::unlabeled(a.points)), ContractError);
}

TEST_CASE("sinkhorn small cases") {
    const Matrix one(1, 1, 2.5);
    const std::vector<double> w1{1.0};
    const TransportPlan p1 = sinkhorn(one, w1, w1, 0.1, 100);
    CHECK(p1.plan(0, 0) == doctest::Approx(1.0));
    CHECK(p1.cost == doctest::Approx(2.5));

    const std::vector<double> half{0.5, 0.5};
    const TransportPlan p2 = sinkhorn(Matrix::from_rows({{0, 1}, {1, 0}}), half, half, 1e-3, 100000);
    CHECK(p2.cost < 1e-6);
    CHECK(p2.marginal_error < 1e-6);

    CHECK_THROWS_AS(sinkhorn(one, w1, w1, 0.0, 10), ContractError);
    CHECK_THROWS_AS(sinkhorn(Matrix(1, 1, -1.0), w1, w1, 0.1, 10), ContractError);
    const std::vector<double> bad{0.5, 0.6};
    CHECK_THROWS_AS(sinkhorn(Matrix(2, 2, 1.0), bad, half, 0.1, 10), ContractError);
}

TEST_CASE("sinkhorn against the exact transportation LP") {
    Rng rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> size(1, 4);
    double worst_gap = 0.0, worst_marginal = 0.0;
    for (int k = 0; k < 200; ++k) {
        const std::size_t n = size(rng), m = size(rng);
        Matrix c(n, m);
        for (double& v : c.values()) v = u(rng);
        const auto a = random_weights(n, rng), b = random_weights(m, rng);
        const TransportPlan plan = sinkhorn(c, a, b, 1e-3, 1000000);
        const double exact = oracle::transport_lp(c, a, b);
        worst_gap = std::max(worst_gap, std::abs(plan.cost - exact) / std::max(exact, 1e-12));
        worst_marginal = std::max(worst_marginal, plan.marginal_error);
        for (double v : plan.plan.values()) CHECK(v >= 0.0);
    }
    MESSAGE("worst relative gap " << worst_gap << ", worst marginal error " << worst_marginal);
    CHECK(worst_gap < 0.01);
    CHECK(worst_marginal < 1e-6);
}

TEST_CASE("transport LP oracle on hand-solved instances") {
    // Northwest corner is optimal for a Monge cost.
    const Matrix c = Matrix::from_rows({{0, 1, 4}, {1, 0, 1}, {4, 1, 0}});
    const std::vector<double> a{0.5, 0.3, 0.2}, b{0.2, 0.3, 0.5};
    // Moves: 0.2 stays in column 0, 0.3 goes 0->1, 0.3 goes 1->2 and 0.2 stays.
    CHECK(oracle::transport_lp(c, a, b) == doctest::Approx(0.3 * 1 + 0.3 * 1));
    const std::vector<double> u{0.5, 0.5};
    CHECK(oracle::transport_lp(Matrix::from_rows({{0, 1}, {1, 0}}), u, u) == doctest::Approx(0.0));
}

TEST_CASE("otdd self distance") {
    const Dataset a = gmm_sample(default_gmm(), 300, 9);
    OtddOptions o;
    o.subsample = 300;
    o.epsilon = 0.01;
    const OtddResult r = otdd_detailed(a, a, o);
    CHECK(r.value < 0.05);
    CHECK(r.marginal_error < 1e-6);
    CHECK(otdd(a, a, o) == r.value);
}

TEST_CASE("otdd of a translated single-class cloud is 2t^2") {
    Rng rng(10);
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix x(10, 2);
    for (double& v : x.values()) v = n(rng);
    const Dataset a = Dataset::labeled(x, std::vector<int>(10, 0), 1);
    for (double t : {0.5, 1.0, 2.0}) {
        const Dataset b = shifted(a, t, 0.0);
        // Ground cost built independently, solved by enumerating permutations.
        Matrix cost(10, 10);
        for (std::size_t i = 0; i < 10; ++i)
            for (std::size_t j = 0; j < 10; ++j) {
                const double dx = a.points(i, 0) - b.points(j, 0), dy = a.points(i, 1) - b.points(j, 1);
                cost(i, j) = dx * dx + dy * dy + t * t;
            }
        const double exact = oracle::permutation_ot(cost);
        CHECK(exact == doctest::Approx(2 * t * t).epsilon(1e-9));
        OtddOptions o;
        o.subsample = 10;
        o.epsilon = 1e-3 * t * t;
        CHECK(otdd(a, b, o) == doctest::Approx(exact).epsilon(1e-3));
        // The default relative epsilon stays within a few percent.
        CHECK(otdd(a, b, OtddOptions{std::nullopt, 0.01, 10, 0, 20000}) == doctest::Approx(exact).epsilon(0.05));
    }
}

TEST_CASE("label geometry adds to the point-cloud cost") {
    const Dataset cloud = gmm_sample(default_gmm(), 200, 11);
    const Dataset a = relabel_all(cloud, 0, 1);
    std::vector<int> split(cloud.size());
    for (std::size_t r = 0; r < cloud.size(); ++r) split[r] = cloud.points(r, 0) > 0 ? 1 : 0;
    const Dataset b = Dataset::labeled(cloud.points, split, 2);
    OtddOptions o;
    o.subsample = 200;
    o.seed = 4;
    const double with_labels = otdd(a, b, o);
    const double points_only = point_cloud_ot(a, b, o);
    CHECK(with_labels > points_only + 1e-3);
}

TEST_CASE("otdd is deterministic per seed and validates inputs") {
    const Dataset a = gmm_sample(default_gmm(), 400, 12), b = gmm_sample(default_gmm(), 400, 13);
    OtddOptions o;
    o.subsample = 100;
    o.seed = 5;
    CHECK(otdd(a, b, o) == otdd(a, b, o));
    o.subsample = 1000;
    CHECK_THROWS_AS(otdd(a, b, o), ContractError);
    o.subsample = 100;
    CHECK_THROWS_AS(otdd(a, Dataset::unlabeled(b.points), o), ContractError);
}

TEST_CASE("mle bias") {
    const Dataset eval = normal_draws(1.0, 100000, 14);
    CHECK(mle_bias_estimate(normal1d(0), normal1d(0), eval) == 0.0);
    const double b = mle_bias_estimate(normal1d(0), normal1d(1), eval);
    CHECK(std::abs(b + 0.5) < 0.02);
    CHECK(mle_bias_estimate(normal1d(1), normal1d(0), eval) == -b);
    const double far = mle_bias_estimate(normal1d(-5), normal1d(1), eval);
    const double farther = mle_bias_estimate(normal1d(-10), normal1d(1), eval);
    CHECK(far < -10.0);
    CHECK(farther < far);
    const LogDensity broken = [](std::span<const double> p) { return p[0] > 3.0 ? std::nan("") : 0.0; };
    CHECK_THROWS_AS(mle_bias_estimate(broken, normal1d(0), eval), NumericError);
}

TEST_CASE("mle variance") {
    const Dataset eval = normal_draws(0.0, 100000, 15);
    CHECK(mle_variance_estimate([](std::span<const double>) { return -1.3; }, eval) == 0.0);
    const double matched = mle_variance_estimate(normal1d(0), eval);
    CHECK(std::abs(matched - 0.5) < 0.02);
    const double mismatched = mle_variance_estimate(normal1d(0), normal_draws(3.0, 100000, 16));
    CHECK(mismatched > matched);
    CHECK(mle_variance_estimate(normal1d(2), eval) >= 0.0);
    CHECK_THROWS_AS(mle_variance_estimate(normal1d(0), normal_draws(0.0, 1, 1)), InsufficientDataError);
}

TEST_CASE("classification degradation controls") {
    const GmmSpec g = default_gmm();
    const Dataset real = gmm_sample(g, 3000, 17), val = gmm_sample(g, 1000, 18);
    ClassifierConfig cfg;
    cfg.epochs = 10;
    cfg.seed = 2;

    const std::vector<Dataset> same{real, real};
    const auto rows = classification_degradation(same, val, cfg);
    REQUIRE(rows.size() == 2);
    ClassifierConfig direct_cfg = cfg;
    direct_cfg.seed = 99;
    const double direct = classifier_train(real, val, direct_cfg).best_accuracy;
    for (const auto& r : rows) {
        CHECK(r.name == MetricName::CLS_ACCURACY);
        CHECK(r.value >= direct - 0.02);
    }
    CHECK(rows[0].task_index == 1);
    CHECK(rows[1].task_index == 2);

    Dataset shuffled = real;
    Rng rng(19);
    std::shuffle(shuffled.labels->begin(), shuffled.labels->end(), rng);
    Dataset shuffled_val = val;
    std::shuffle(shuffled_val.labels->begin(), shuffled_val.labels->end(), rng);
    // Labels independent of the features on both sides: any classifier sits at chance.
    const std::vector<Dataset> noise{shuffled};
    const auto chance = classification_degradation(noise, shuffled_val, cfg);
    CHECK(std::abs(chance[0].value - 0.2) <= 0.05);
}

TEST_CASE("metric trace csv") {
    std::vector<MetricValue> rows{
        {MetricName::FD, 0.5, 2, {}},
        {MetricName::CFID, 1.25, 1, {{"data", "replay"}, {"note", "a,\"b\""}}},
        {MetricName::CFID, 0.75, 1, {{"data", "synthetic"}}},
        {MetricName::CLS_ACCURACY, 1.0 / 3.0, 1, {}},
    };
    std::stringstream ss;
    write_metric_rows(ss, rows);
    const std::string text = ss.str();
    CHECK(text.rfind("task,metric,value,metadata_json\n", 0) == 0);
    const auto back = read_metric_rows(ss);
    REQUIRE(back.size() == 4);
    CHECK(back[0].task_index == 1);
    CHECK(back[0].name == MetricName::CFID);
    CHECK(back[0].metadata.at("data") == "replay");
    CHECK(back[0].metadata.at("note") == "a,\"b\"");
    CHECK(back[2].name == MetricName::CLS_ACCURACY);
    CHECK(back[2].value == 1.0 / 3.0);
    CHECK(back[3].task_index == 2);

    CHECK(parse_metric_name("cfid") == MetricName::CFID);
    CHECK(parse_metric_name("Mle_Bias") == MetricName::MLE_BIAS);
    CHECK_THROWS_AS(parse_metric_name("KL"), ConfigError);
    for (MetricName n : all_metric_names()) CHECK(parse_metric_name(to_string(n)) == n);

    std::stringstream bad("task,metric,value,metadata_json\n1,FD,notanumber,{}\n");
    CHECK_THROWS_AS(read_metric_rows(bad), IoError);
}

}
