// Copyright 2026 The DQGP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "dqgp/pipeline.hpp"

using namespace dqgp;
using namespace dqgp::pipeline;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

TrainConfig small_config(Method method, std::size_t M, std::size_t N, std::uint64_t seed) {
    TrainConfig c;
    c.method = method;
    c.qubits = 2;
    c.theta_true = {0.58, 2.45, 1.88, 1.40};
    c.samples = N;
    c.agents = M;
    c.seed = seed;
    c.s_max = 10;
    c.folds = 3;
    c.baseline_iterations = 200;
    c.apx_iterations = 200;
    return c;
}

Eigen::MatrixXd se_gram(const Eigen::MatrixXd &X) {
    const auto n = X.rows();
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            K(i, j) = std::exp(-0.5 * (X.row(i) - X.row(j)).squaredNorm());
        }
    }
    return K;
}

// Score sequence replayed through the loop, residuals never small.
LoopOutcome scripted(const std::vector<double> &cv, std::size_t patience,
                     std::vector<std::size_t> *kept = nullptr) {
    return run_training_loop(
        LoopLimits{cv.size(), patience, 1e-2, 1e-2},
        [](std::size_t) { return consensus::Residuals{1.0, 1.0}; },
        [&](std::size_t s) { return cv[s]; },
        [&](std::size_t s) {
            if (kept) {
                kept->push_back(s);
            }
        });
}

} // namespace

TEST_CASE("make_folds covers every row once", "[pipeline]") {
    const auto folds = make_folds(23, 5, 7);
    REQUIRE(folds.size() == 5);
    std::vector<std::size_t> all;
    for (const auto &f : folds) {
        CHECK((f.size() == 4 || f.size() == 5));
        all.insert(all.end(), f.begin(), f.end());
    }
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) {
        CHECK(all[i] == i);
    }
    CHECK(make_folds(23, 5, 7) == folds);
    CHECK_THROWS_AS(make_folds(3, 5, 0), ConfigError);
    CHECK_THROWS_AS(make_folds(10, 1, 0), ConfigError);
}

TEST_CASE("leave-one-out CV matches a direct loop", "[pipeline]") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01;
    Eigen::MatrixXd X(5, 2);
    Eigen::VectorXd y(5);
    for (Eigen::Index i = 0; i < 5; ++i) {
        X(i, 0) = n01(rng);
        X(i, 1) = n01(rng);
        y[i] = n01(rng);
    }
    const Eigen::MatrixXd K = se_gram(X);
    const double noise = 0.05;

    double total = 0.0;
    for (Eigen::Index k = 0; k < 5; ++k) {
        std::vector<Eigen::Index> tr;
        for (Eigen::Index i = 0; i < 5; ++i) {
            if (i != k) {
                tr.push_back(i);
            }
        }
        Eigen::MatrixXd C = K(tr, tr);
        C.diagonal().array() += noise;
        const Eigen::MatrixXd Ci = C.inverse();
        const Eigen::RowVectorXd ks = K(k, tr);
        const double mu = ks * Ci * Eigen::VectorXd(y(tr));
        const double var = K(k, k) - (ks * Ci * ks.transpose())(0, 0);
        total += 0.5 * std::log(2.0 * std::numbers::pi * var) +
                 0.5 * (y[k] - mu) * (y[k] - mu) / var;
    }
    CHECK_THAT(ffold_cv_nlpd(K, y, noise, 5, 11), WithinAbs(total / 5.0, 1e-10));
}

TEST_CASE("CV of a perfect unit-variance predictor", "[pipeline]") {
    // Independent unit-variance latent, zero targets, vanishing noise:
    // every held-out point has mean 0 and variance 1.
    const Eigen::MatrixXd K = Eigen::MatrixXd::Identity(10, 10);
    const Eigen::VectorXd y = Eigen::VectorXd::Zero(10);
    CHECK_THAT(ffold_cv_nlpd(K, y, 1e-6, 5, 0),
               WithinAbs(0.5 * std::log(2.0 * std::numbers::pi), 1e-9));
}

TEST_CASE("CV is deterministic and checks shapes", "[pipeline]") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(12, 2);
    Eigen::VectorXd y = Eigen::VectorXd::Random(12);
    const Eigen::MatrixXd K = se_gram(X);
    CHECK(ffold_cv_nlpd(K, y, 0.1, 4, 5) == ffold_cv_nlpd(K, y, 0.1, 4, 5));
    CHECK_THROWS_AS(ffold_cv_nlpd(K, Eigen::VectorXd(y.head(5)), 0.1, 4, 5),
                    StructuralError);
    CHECK_THROWS_AS(ffold_cv_nlpd(K, y, 0.1, 13, 5), ConfigError);
}

TEST_CASE("patience stops after T rounds without improvement", "[pipeline]") {
    std::vector<std::size_t> kept;
    const auto out = scripted({5.0, 4.0, 4.5, 4.0, 6.0, 1.0, 0.5}, 3, &kept);
    CHECK(out.reason == StopReason::Patience);
    CHECK(out.last_iteration == 4);
    CHECK(out.best_iteration == 1);
    CHECK(out.best_cv == 4.0);
    CHECK(kept == std::vector<std::size_t>{0, 1});
    REQUIRE(out.best_cv_trace.size() == 5);
    for (std::size_t s = 1; s < out.best_cv_trace.size(); ++s) {
        CHECK(out.best_cv_trace[s] <= out.best_cv_trace[s - 1]);
    }
}

TEST_CASE("loop stops on max iterations and on residuals", "[pipeline]") {
    const auto out = scripted({3.0, 2.0, 1.0}, 5);
    CHECK(out.reason == StopReason::MaxIterations);
    CHECK(out.last_iteration == 2);
    CHECK(out.best_iteration == 2);

    const auto res = run_training_loop(
        LoopLimits{50, 5, 1e-2, 1e-2},
        [](std::size_t s) {
            return s == 3 ? consensus::Residuals{1e-3, 1e-3}
                          : consensus::Residuals{1.0, 1.0};
        },
        [](std::size_t s) { return 1.0 + static_cast<double>(s); },
        [](std::size_t) {});
    CHECK(res.reason == StopReason::Residuals);
    CHECK(res.last_iteration == 3);
    CHECK(res.best_iteration == 0);
}

TEST_CASE("loop errors carry the iteration", "[pipeline]") {
    try {
        run_training_loop(
            LoopLimits{},
            [](std::size_t s) {
                if (s == 2) {
                    throw NumericError("boom");
                }
                return consensus::Residuals{1.0, 1.0};
            },
            [](std::size_t s) { return -static_cast<double>(s); },
            [](std::size_t) {});
        FAIL("no error");
    } catch (const Error &e) {
        CHECK(e.category() == ErrorCategory::Numeric);
        CHECK(std::string(e.what()).find("iteration 2: ") != std::string::npos);
    }
}

TEST_CASE("single-agent DQGP does not end worse than its start", "[pipeline][slow]") {
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        TrainConfig cfg;
        cfg.agents = 1;
        cfg.seed = seed;
        const auto data = prepare(load_raw(cfg, seed), cfg, seed, 1);
        const auto r = dqgp_train(cfg, data, seed);

        std::mt19937_64 rng(SeedPlan::derive(seed).init);
        std::uniform_real_distribution<double> u(0.0, std::numbers::pi);
        Eigen::VectorXd t0(6);
        for (auto &v : t0) {
            v = u(rng);
        }
        const auto kernel = make_kernel(cfg, data.train.dim());
        const qkernels::BoundQuantumKernel bound{&kernel, TorusPoint(t0)};
        const gp::GPModel<qkernels::BoundQuantumKernel> model(
            bound, data.train.X, data.train.y, cfg.noise_variance);
        const double start = gp::nrmse(model.predict(data.test.X), data.test.y);
        ok += r.nrmse_test <= start + 1e-12 ? 1 : 0;
        CHECK(std::isfinite(r.nlpd_test));
    }
    CHECK(ok >= 18);
}

TEST_CASE("final DQGP prediction uses the whole training set", "[pipeline]") {
    const auto cfg = small_config(Method::Dqgp, 3, 60, 4);
    const auto data = prepare(load_raw(cfg, 4), cfg, 4, 3);
    const auto r = dqgp_train(cfg, data, 4);
    REQUIRE(r.z_quantum.has_value());
    const auto kernel = make_kernel(cfg, data.train.dim());
    const qkernels::BoundQuantumKernel bound{&kernel, *r.z_quantum};
    const gp::GPModel<qkernels::BoundQuantumKernel> model(
        bound, data.train.X, data.train.y, cfg.noise_variance);
    const auto preds = model.predict(data.test.X);
    CHECK(gp::nlpd(preds, data.test.y) == r.nlpd_test);
    CHECK(gp::nrmse(preds, data.test.y) == r.nrmse_test);
    CHECK(r.iterations >= 1);
    CHECK(r.iterations <= cfg.s_max);
    CHECK(r.gram_evaluations > 0);
    for (std::size_t s = 1; s < r.cv_trace.size(); ++s) {
        CHECK(r.cv_trace[s] <= r.cv_trace[s - 1]);
    }
}

TEST_CASE("FACT with one agent equals the full GP", "[pipeline]") {
    const auto cfg = small_config(Method::Fact, 1, 80, 2);
    const auto data = prepare(load_raw(cfg, 2), cfg, 2, 1);
    const auto fact = baseline_train(cfg, data, 2, Method::Fact);
    const auto full = baseline_train(cfg, data, 2, Method::Full);
    CHECK_THAT(fact.nlpd_test, WithinAbs(full.nlpd_test, 1e-8));
    CHECK_THAT(fact.nrmse_test, WithinAbs(full.nrmse_test, 1e-8));
}

TEST_CASE("methods share the split and never train on test rows", "[pipeline]") {
    const auto cfg = small_config(Method::Dqgp, 2, 60, 9);
    const auto data = prepare(load_raw(cfg, 9), cfg, 9, 2);
    std::vector<RunResult> runs;
    for (auto m : {Method::Dqgp, Method::Full, Method::Fact, Method::Apx}) {
        runs.push_back(run_method(cfg, data, 9, m));
    }
    for (const auto &r : runs) {
        CHECK(r.train_origin == runs.front().train_origin);
        CHECK(r.test_origin == runs.front().test_origin);
        CHECK(std::isfinite(r.nlpd_test));
        CHECK(std::isfinite(r.nrmse_test));
    }
    const std::set<std::size_t> train(runs[0].train_origin.begin(),
                                      runs[0].train_origin.end());
    for (auto i : runs[0].test_origin) {
        CHECK(train.count(i) == 0);
    }
    CHECK(train.size() + runs[0].test_origin.size() == 60);
    CHECK_THROWS_AS(baseline_train(cfg, data, 9, Method::Dqgp), ConfigError);
}

TEST_CASE("metrics are finite at table scale", "[pipeline][slow]") {
    TrainConfig cfg;
    cfg.grid_methods = {Method::Dqgp, Method::Full, Method::Fact, Method::Apx};
    cfg.grid_agents = {4, 8, 27};
    const auto rows = benchmark(cfg);
    REQUIRE(rows.size() == 12);
    for (const auto &r : rows) {
        INFO(r.method << " M=" << r.agents);
        CHECK(r.samples == 500);
        CHECK(std::isfinite(r.nlpd_test));
        CHECK(std::isfinite(r.nrmse_test));
    }
}

TEST_CASE("train runs from a config", "[pipeline]") {
    auto cfg = small_config(Method::Fact, 2, 40, 1);
    const auto a = train(cfg);
    const auto b = train(cfg);
    CHECK(a.nlpd_test == b.nlpd_test);
    CHECK(a.nrmse_test == b.nrmse_test);
    cfg.rho = -1.0;
    CHECK_THROWS_AS(train(cfg), ConfigError);
}

TEST_CASE("benchmark with one replication reproduces a single run", "[pipeline]") {
    const auto cfg = small_config(Method::Fact, 2, 50, 6);
    const auto rows = benchmark(cfg);
    REQUIRE(rows.size() == 1);
    const auto r = train(cfg);
    CHECK(rows[0].nlpd_test == r.nlpd_test);
    CHECK(rows[0].nrmse_test == r.nrmse_test);
    CHECK(rows[0].method == "fact");
    CHECK(rows[0].agents == 2);
    CHECK(rows[0].samples == 50);
    CHECK(rows[0].seed == 6);
}

TEST_CASE("benchmark grid order is stable", "[pipeline]") {
    auto cfg = small_config(Method::Fact, 2, 40, 3);
    cfg.grid_methods = {Method::Full, Method::Fact};
    cfg.grid_agents = {1, 2};
    cfg.replications = 2;
    const auto a = benchmark(cfg);
    cfg.jobs = 2;
    const auto b = benchmark(cfg);
    REQUIRE(a.size() == 8);
    REQUIRE(b.size() == 8);
    const std::vector<std::string> methods{"full", "full", "fact", "fact"};
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].agents == (i < 4 ? 1u : 2u));
        CHECK(a[i].method == methods[i % 4]);
        CHECK(a[i].seed == 3 + i % 2);
        CHECK(a[i].method == b[i].method);
        CHECK(a[i].nlpd_test == b[i].nlpd_test);
        CHECK(a[i].nrmse_test == b[i].nrmse_test);
    }
}

TEST_CASE("results table round trip", "[pipeline]") {
    std::vector<BenchmarkRow> rows{
        {"synthetic", "set1", "dqgp", 4, 500, 0, 0.25, 0.0625, 12, 1534.0},
        {"srtm", "N46E008", "apx", 8, 500, 1, -1.5, 0.125, 500, 88.0}};
    std::ostringstream os;
    write_results(os, rows);
    std::istringstream is(os.str());
    const auto back = read_results(is, "mem");
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back[i].dataset == rows[i].dataset);
        CHECK(back[i].subset == rows[i].subset);
        CHECK(back[i].method == rows[i].method);
        CHECK(back[i].agents == rows[i].agents);
        CHECK(back[i].samples == rows[i].samples);
        CHECK(back[i].seed == rows[i].seed);
        CHECK(back[i].nlpd_test == rows[i].nlpd_test);
        CHECK(back[i].nrmse_test == rows[i].nrmse_test);
        CHECK(back[i].iterations == rows[i].iterations);
        CHECK(back[i].wall_ms == rows[i].wall_ms);
    }
    std::istringstream bad("a,b\n");
    CHECK_THROWS_AS(read_results(bad, "mem"), FormatError);
    std::istringstream short_row(std::string(kResultsHeader) + "\n1,2,3\n");
    CHECK_THROWS_AS(read_results(short_row, "mem"), FormatError);
}

TEST_CASE("summary statistics", "[pipeline]") {
    const auto one = mean_std({2.5});
    CHECK(one.mean == 2.5);
    CHECK(one.std == 0.0);
    CHECK_THROWS_AS(mean_std({}), StructuralError);

    std::vector<BenchmarkRow> rows{
        {"synthetic", "set1", "dqgp", 4, 500, 0, 1.0, 0.1, 1, 0.0},
        {"synthetic", "set1", "fact", 4, 500, 0, 9.0, 0.9, 1, 0.0},
        {"synthetic", "set1", "dqgp", 4, 500, 1, 2.0, 0.2, 1, 0.0},
        {"synthetic", "set1", "dqgp", 4, 500, 2, 4.0, 0.4, 1, 0.0}};
    const auto cells = summarize(rows);
    REQUIRE(cells.size() == 2);
    CHECK(cells[0].method == "dqgp");
    CHECK(cells[0].runs == 3);
    // mean 7/3, sum of squared deviations 42/9
    CHECK_THAT(cells[0].nlpd.mean, WithinAbs(7.0 / 3.0, 1e-12));
    CHECK_THAT(cells[0].nlpd.std, WithinAbs(std::sqrt(42.0 / 18.0), 1e-12));
    CHECK_THAT(cells[0].nrmse.mean, WithinAbs(0.7 / 3.0, 1e-12));
    CHECK_THAT(cells[0].nrmse.std, WithinAbs(0.1 * std::sqrt(42.0 / 18.0), 1e-12));
    CHECK(cells[1].method == "fact");
    CHECK(cells[1].runs == 1);

    std::ostringstream os;
    write_summary(os, cells);
    CHECK(os.str().find("synthetic set1 N=500 M=4 dqgp runs=3 nlpd=2.33 ± 1.53") !=
          std::string::npos);
}

TEST_CASE("subset labels", "[pipeline]") {
    TrainConfig c;
    CHECK(subset_label(c) == "set1");
    c.subset = "set2";
    CHECK(subset_label(c) == "set2");
    c.theta_true = {0.1, 0.2};
    CHECK(subset_label(c) == "custom");
    c.source = "hgt";
    c.data_path = "/tiles/N46E008.hgt";
    CHECK(subset_label(c) == "N46E008");
}

TEST_CASE("methods parse by name", "[pipeline]") {
    CHECK(method_from_string("dqgp") == Method::Dqgp);
    CHECK(method_from_string("full") == Method::Full);
    CHECK(method_from_string("fact") == Method::Fact);
    CHECK(method_from_string("apx") == Method::Apx);
    CHECK_THROWS_AS(method_from_string("svgp"), ConfigError);
    CHECK(to_string(Method::Apx) == "apx");
}
