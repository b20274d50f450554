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
/**
 * @file pipeline.hpp
 * End-to-end training: data preparation, the DQGP loop (DR-ADMM rounds,
 * cross-validated model selection, patience and residual stopping), the
 * classical baselines under the same split, and the benchmark grid.
 */
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "baselines.hpp"
#include "consensus.hpp"
#include "datahub.hpp"
#include "encodings.hpp"
#include "errors.hpp"
#include "gp.hpp"
#include "parallel.hpp"
#include "qgrad.hpp"
#include "qkernels.hpp"
#include "torus.hpp"

namespace dqgp::pipeline {

enum class Method { Dqgp, Full, Fact, Apx };

constexpr std::string_view to_string(Method m) {
    switch (m) {
    case Method::Dqgp:
        return "dqgp";
    case Method::Full:
        return "full";
    case Method::Fact:
        return "fact";
    case Method::Apx:
        return "apx";
    }
    return "?";
}

inline Method method_from_string(std::string_view s) {
    for (auto m : {Method::Dqgp, Method::Full, Method::Fact, Method::Apx}) {
        if (s == to_string(m)) {
            return m;
        }
    }
    throw ConfigError("unknown method '" + std::string(s) + "'");
}

struct TrainConfig {
    Method method{Method::Dqgp};

    // data
    std::string source{"synthetic"}; // synthetic | csv | hgt
    std::string data_path;
    std::string subset{"set1"};
    std::vector<double> theta_true; // empty: taken from subset
    std::size_t input_dim{2};
    std::size_t samples{500};
    double test_fraction{0.1};

    // quantum kernel
    std::string family{"hubregtsen"};
    std::size_t qubits{3};
    std::size_t layers{1};
    qkernels::ObservableKind observables{qkernels::ObservableKind::XyzPerQubit};
    qkernels::OuterKind outer{qkernels::OuterKind::Gaussian};
    double outer_param{1.0};

    // optimizer
    double delta{std::numbers::pi / 8.0};
    bool exact_shift{false};
    double rho{100.0};
    std::vector<double> lipschitz; // one value for all agents, or one per agent
    std::size_t folds{5};
    std::size_t s_max{50};
    std::size_t patience{5};
    double eps_pri{-1.0}; // < 0: 1e-2 sqrt(M)
    double eps_dual{1e-2};
    double noise_variance{1e-2};
    std::size_t agents{4};

    // classical baselines
    std::size_t baseline_iterations{500};
    double baseline_grad_tol{1e-4};
    std::size_t apx_iterations{500};

    // benchmark grid (empty: the single values above)
    std::vector<Method> grid_methods;
    std::vector<std::size_t> grid_agents;
    std::vector<std::size_t> grid_samples;
    std::size_t replications{1};

    std::uint64_t seed{0};
    std::size_t jobs{1};

    [[nodiscard]] double primal_tolerance(std::size_t M) const {
        return eps_pri < 0.0 ? 1e-2 * std::sqrt(static_cast<double>(M))
                             : eps_pri;
    }

    [[nodiscard]] std::vector<double> lipschitz_for(std::size_t M) const {
        if (lipschitz.empty()) {
            return std::vector<double>(M, 100.0);
        }
        if (lipschitz.size() == 1) {
            return std::vector<double>(M, lipschitz.front());
        }
        if (lipschitz.size() != M) {
            throw ConfigError("lipschitz lists " +
                              std::to_string(lipschitz.size()) +
                              " values for " + std::to_string(M) + " agents");
        }
        return lipschitz;
    }

    void validate() const {
        auto positive = [](double v, const char *name) {
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw ConfigError(std::string(name) + " must be positive");
            }
        };
        positive(rho, "admm.rho");
        positive(noise_variance, "gp.noise_variance");
        positive(outer_param, "kernel.outer_param");
        positive(eps_dual, "admm.eps_dual");
        positive(baseline_grad_tol, "baseline.grad_tol");
        if (eps_pri >= 0.0) {
            positive(eps_pri, "admm.eps_pri");
        }
        for (double l : lipschitz) {
            positive(l, "admm.lipschitz");
        }
        qgrad::ShiftRule(delta, exact_shift).validate();
        if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
            throw ConfigError("data.test_fraction must lie in (0, 1)");
        }
        if (folds < 2) {
            throw ConfigError("train.folds must be at least 2");
        }
        if (patience < 1 || s_max < 1) {
            throw ConfigError("train.patience and train.s_max must be >= 1");
        }
        if (agents < 1 || samples < 2 || qubits < 1 || layers < 1 ||
            input_dim < 1 || replications < 1 || jobs < 1) {
            throw ConfigError("counts must be positive");
        }
        if (qubits > 10) {
            throw ConfigError("circuit.qubits must be at most 10");
        }
        if (family != "hubregtsen" && family != "chebyshev") {
            throw ConfigError("unknown circuit family '" + family + "'");
        }
        if (source != "synthetic" && source != "csv" && source != "hgt") {
            throw ConfigError("unknown data source '" + source + "'");
        }
        if (source != "synthetic" && data_path.empty()) {
            throw ConfigError("data.path is required for " + source + " data");
        }
        for (auto m : grid_agents) {
            if (m < 1) {
                throw ConfigError("benchmark.agents must be positive");
            }
        }
        for (auto n : grid_samples) {
            if (n < 2) {
                throw ConfigError("benchmark.samples must be at least 2");
            }
        }
    }
};

// --------------------------------------------------------------- seeds --

/// Every stream derives from the master seed by a fixed offset.
struct SeedPlan {
    std::uint64_t data;
    std::uint64_t subsample;
    std::uint64_t split;
    std::uint64_t init; // agent m uses init + m
    std::uint64_t cv;

    static SeedPlan derive(std::uint64_t master) {
        const std::uint64_t base = master * 1000003ULL;
        return {base + 11, base + 23, base + 37, base + 101, base + 53};
    }
};

// ---------------------------------------------------------- components --

inline std::vector<double> subset_theta(const TrainConfig &cfg) {
    if (!cfg.theta_true.empty()) {
        return cfg.theta_true;
    }
    if (cfg.subset == "set1") {
        return datahub::kThetaSet1;
    }
    if (cfg.subset == "set2") {
        return datahub::kThetaSet2;
    }
    throw ConfigError("synthetic subset '" + cfg.subset +
                      "' needs data.theta");
}

/// Subset column of result tables: the synthetic set, or the file stem.
inline std::string subset_label(const TrainConfig &cfg) {
    if (cfg.source == "synthetic") {
        return cfg.theta_true.empty() ? cfg.subset : "custom";
    }
    return std::filesystem::path(cfg.data_path).stem().string();
}

inline qkernels::QuantumKernel make_kernel(const TrainConfig &cfg,
                                           std::size_t input_dim) {
    auto circuit =
        cfg.family == "chebyshev"
            ? encodings::build_chebyshev(cfg.qubits, cfg.layers, input_dim)
            : encodings::build_hubregtsen(cfg.qubits, cfg.layers, input_dim);
    const auto outer = cfg.outer == qkernels::OuterKind::Gaussian
                           ? qkernels::OuterKernel::gaussian(cfg.outer_param)
                           : qkernels::OuterKernel::matern15(cfg.outer_param);
    return {std::move(circuit),
            qkernels::ObservableSet::make(cfg.observables, cfg.qubits), outer,
            1};
}

/// Raw (unnormalized) data for one replication.
inline datahub::Dataset load_raw(const TrainConfig &cfg, std::uint64_t master) {
    const auto seeds = SeedPlan::derive(master);
    if (cfg.source == "synthetic") {
        const auto kernel = make_kernel(cfg, cfg.input_dim);
        const TorusPoint theta(Eigen::Map<const Eigen::VectorXd>(
            subset_theta(cfg).data(),
            static_cast<Eigen::Index>(subset_theta(cfg).size())));
        const auto X = datahub::uniform_inputs(cfg.samples, cfg.input_dim,
                                               seeds.data);
        return datahub::sample_qgp_prior(kernel, theta, X, cfg.noise_variance,
                                         seeds.data);
    }
    auto ds = cfg.source == "csv" ? datahub::load_csv(cfg.data_path)
                                  : datahub::load_hgt(cfg.data_path);
    if (cfg.samples < ds.size()) {
        ds = datahub::subsample(ds, cfg.samples, seeds.subsample);
    }
    return ds;
}

struct PreparedData {
    datahub::Dataset train; // normalized with train statistics
    datahub::Dataset test;  // normalized with the same statistics
    datahub::Partition partition;
    datahub::NormalizationParams normalization;
};

/**
 * Split, normalize with training statistics only, then partition.
 * Synthetic inputs are drawn on the normalized domain already and keep
 * their scale, so the generating circuit sees the same angles.
 */
inline PreparedData prepare(const datahub::Dataset &raw, const TrainConfig &cfg,
                            std::uint64_t master, std::size_t M) {
    const auto seeds = SeedPlan::derive(master);
    auto [train_raw, test_raw] =
        datahub::train_test_split(raw, cfg.test_fraction, seeds.split);
    PreparedData out;
    auto [train, params] =
        datahub::zscore_normalize(train_raw, cfg.source != "synthetic");
    out.test = datahub::apply_normalization(test_raw, params);
    out.train = std::move(train);
    out.normalization = params;
    out.partition = datahub::kdtree_split(out.train, M);
    return out;
}

inline std::vector<baselines::Partition>
partition_data(const datahub::Dataset &ds, const datahub::Partition &part) {
    std::vector<baselines::Partition> out;
    out.reserve(part.size());
    for (const auto &idx : part) {
        auto sub = datahub::select(ds, idx);
        out.emplace_back(std::move(sub.X), std::move(sub.y));
    }
    return out;
}

// ------------------------------------------------------------------ CV --

/// Shuffled fold membership: folds[k] lists row indices of fold k.
inline std::vector<std::vector<std::size_t>>
make_folds(std::size_t N, std::size_t F, std::uint64_t seed) {
    if (F < 2 || N < F) {
        throw ConfigError("cross-validation needs 2 <= F <= N (F = " +
                          std::to_string(F) + ", N = " + std::to_string(N) +
                          ")");
    }
    std::vector<std::size_t> perm(N);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<std::size_t>> folds(F);
    for (std::size_t k = 0; k < F; ++k) {
        folds[k].assign(perm.begin() + static_cast<std::ptrdiff_t>(k * N / F),
                        perm.begin() +
                            static_cast<std::ptrdiff_t>((k + 1) * N / F));
    }
    return folds;
}

/**
 * Mean over folds of the held-out NLPD, with every fold predicted from
 * the remaining folds under the fixed kernel matrix K (no noise) of the
 * combined data.
 */
inline double ffold_cv_nlpd(const Eigen::MatrixXd &K, const Eigen::VectorXd &y,
                            double noise_variance, std::size_t F,
                            std::uint64_t seed) {
    const auto N = static_cast<std::size_t>(y.size());
    if (K.rows() != y.size() || K.cols() != y.size()) {
        throw StructuralError("cv: kernel matrix does not match targets");
    }
    const auto folds = make_folds(N, F, seed);
    double total = 0.0;
    std::vector<char> held(N);
    for (const auto &fold : folds) {
        std::fill(held.begin(), held.end(), 0);
        for (auto i : fold) {
            held[i] = 1;
        }
        std::vector<Eigen::Index> tr;
        for (std::size_t i = 0; i < N; ++i) {
            if (!held[i]) {
                tr.push_back(static_cast<Eigen::Index>(i));
            }
        }
        std::vector<Eigen::Index> te(fold.begin(), fold.end());
        if (tr.empty() || te.empty()) {
            throw ConfigError("cross-validation fold is too small");
        }
        const Eigen::MatrixXd C =
            K(tr, tr) + noise_variance * Eigen::MatrixXd::Identity(
                                             static_cast<Eigen::Index>(tr.size()),
                                             static_cast<Eigen::Index>(tr.size()));
        const auto f = gp::factorize(C);
        const Eigen::VectorXd alpha = f.solve(Eigen::VectorXd(y(tr)));
        const Eigen::MatrixXd Ks = K(te, tr);
        const Eigen::VectorXd mu = Ks * alpha;
        const Eigen::MatrixXd V = f.llt.matrixL().solve(Ks.transpose());
        std::vector<gp::Prediction> preds(te.size());
        for (std::size_t j = 0; j < te.size(); ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            preds[j] = {mu[jj], std::max(K(te[j], te[j]) -
                                             V.col(jj).squaredNorm(),
                                         gp::kVarianceFloor)};
        }
        total += gp::nlpd(preds, Eigen::VectorXd(y(te)));
    }
    return total / static_cast<double>(F);
}

inline double ffold_cv_nlpd(const qkernels::QuantumKernel &kernel,
                            const TorusPoint &z, const Eigen::MatrixXd &X,
                            const Eigen::VectorXd &y, double noise_variance,
                            std::size_t F, std::uint64_t seed) {
    const Eigen::MatrixXd K = kernel.outer_gram(kernel.features(X, z));
    return ffold_cv_nlpd(K, y, noise_variance, F, seed);
}

// -------------------------------------------------------- training loop --

enum class StopReason { MaxIterations, Patience, Residuals };

constexpr std::string_view to_string(StopReason r) {
    switch (r) {
    case StopReason::MaxIterations:
        return "max_iterations";
    case StopReason::Patience:
        return "patience";
    case StopReason::Residuals:
        return "residuals";
    }
    return "?";
}

struct LoopLimits {
    std::size_t s_max{50};
    std::size_t patience{5};
    double eps_pri{1e-2};
    double eps_dual{1e-2};
};

struct LoopOutcome {
    std::size_t last_iteration{0};
    std::size_t best_iteration{0};
    double best_cv{std::numeric_limits<double>::infinity()};
    StopReason reason{StopReason::MaxIterations};
    std::vector<double> cv;      // NLPD_CV per iteration
    std::vector<double> best_cv_trace; // running best, non-increasing
};

/**
 * The outer loop. `step(s)` runs one consensus round and returns its
 * residuals; `score(s)` is NLPD_CV at the new consensus point and
 * `keep(s)` stores it as the current best. Patience counts iterations
 * without strict improvement.
 */
template <class Step, class Score, class Keep>
LoopOutcome run_training_loop(const LoopLimits &limits, Step &&step,
                              Score &&score, Keep &&keep) {
    LoopOutcome out;
    std::size_t t = 0;
    for (std::size_t s = 0; s < limits.s_max; ++s) {
        out.last_iteration = s;
        consensus::Residuals r;
        double cv = 0.0;
        try {
            r = step(s);
            cv = score(s);
        } catch (const Error &e) {
            throw Error(e.category(),
                        "iteration " + std::to_string(s) + ": " + e.what());
        }
        out.cv.push_back(cv);
        if (cv < out.best_cv) {
            out.best_cv = cv;
            out.best_iteration = s;
            keep(s);
            t = 0;
        } else {
            ++t;
        }
        out.best_cv_trace.push_back(out.best_cv);
        if (r.primal <= limits.eps_pri && r.dual <= limits.eps_dual) {
            out.reason = StopReason::Residuals;
            return out;
        }
        if (t >= limits.patience) {
            out.reason = StopReason::Patience;
            return out;
        }
    }
    out.reason = StopReason::MaxIterations;
    return out;
}

// ---------------------------------------------------------------- runs --

struct RunResult {
    Method method{Method::Dqgp};
    std::optional<TorusPoint> z_quantum;
    std::optional<gp::ClassicalHyperparams> z_classical;
    double nlpd_test{0.0};
    double nrmse_test{0.0};
    std::size_t iterations{0};
    StopReason stop{StopReason::MaxIterations};
    std::vector<consensus::ResidualRecord> history;
    std::vector<double> cv_trace;
    double wall_ms{0.0};
    std::uint64_t seed{0};
    std::size_t agents{0};
    std::size_t samples{0};
    std::size_t gram_evaluations{0};
    /// Origin tags of the rows used for training and for testing.
    std::vector<std::size_t> train_origin;
    std::vector<std::size_t> test_origin;
};

namespace detail {

inline void finish(RunResult &r, const std::vector<gp::Prediction> &preds,
                   const PreparedData &data) {
    r.nlpd_test = gp::nlpd(preds, data.test.y);
    r.nrmse_test = gp::nrmse(preds, data.test.y);
    if (!std::isfinite(r.nlpd_test) || !std::isfinite(r.nrmse_test)) {
        throw NumericError("test metrics are not finite");
    }
    r.train_origin = data.train.origin;
    r.test_origin = data.test.origin;
}

} // namespace detail

/// DQGP on prepared data. `seed` is the master seed of the run.
inline RunResult dqgp_train(const TrainConfig &cfg, const PreparedData &data,
                            std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto seeds = SeedPlan::derive(seed);
    const std::size_t M = data.partition.size();
    const auto kernel = make_kernel(cfg, data.train.dim());
    const qgrad::ShiftRule rule(cfg.delta, cfg.exact_shift);

    std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>> parts =
        partition_data(data.train, data.partition);
    auto [agents, state] =
        consensus::initialize(std::move(parts), kernel.num_params(), seeds.init,
                              cfg.rho, cfg.lipschitz_for(M));

    auto provider = [&](const consensus::AgentState &a, const TorusPoint &z) {
        const auto e = qgrad::quantum_loss(kernel, a.X, a.y, z, rule,
                                           cfg.noise_variance);
        return consensus::LocalEval{e.nll, e.grad, e.gram_evaluations};
    };

    RunResult r;
    r.method = Method::Dqgp;
    r.seed = seed;
    r.agents = M;
    r.samples = data.train.size() + data.test.size();
    TorusPoint best = state.z;

    const LoopLimits limits{cfg.s_max, cfg.patience, cfg.primal_tolerance(M),
                            cfg.eps_dual};
    const auto outcome = run_training_loop(
        limits,
        [&](std::size_t) {
            const auto rep = consensus::dr_admm_step(agents, state, provider,
                                                     cfg.jobs);
            r.gram_evaluations += rep.gram_evaluations;
            return rep.residuals;
        },
        [&](std::size_t) {
            return ffold_cv_nlpd(kernel, state.z, data.train.X, data.train.y,
                                 cfg.noise_variance, cfg.folds, seeds.cv);
        },
        [&](std::size_t) { best = state.z; });

    r.z_quantum = best;
    r.iterations = outcome.last_iteration + 1;
    r.stop = outcome.reason;
    r.history = state.history;
    r.cv_trace = outcome.best_cv_trace;

    // final prediction: full training set with z*
    const qkernels::BoundQuantumKernel bound{&kernel, best};
    const gp::GPModel<qkernels::BoundQuantumKernel> model(
        bound, data.train.X, data.train.y, cfg.noise_variance);
    detail::finish(r, model.predict(data.test.X), data);
    r.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    return r;
}

/// Classical initial hyperparameters: l = 1, sigma_f = 1, sigma_eps = 0.1.
inline gp::ClassicalHyperparams classical_init() { return {}; }

inline RunResult baseline_train(const TrainConfig &cfg, const PreparedData &data,
                                std::uint64_t seed, Method method) {
    const auto t0 = std::chrono::steady_clock::now();
    RunResult r;
    r.method = method;
    r.seed = seed;
    r.agents = data.partition.size();
    r.samples = data.train.size() + data.test.size();

    baselines::OptimizerConfig opt;
    opt.max_iterations = cfg.baseline_iterations;
    opt.grad_tol = cfg.baseline_grad_tol;
    opt.jobs = cfg.jobs;
    std::vector<gp::Prediction> preds;
    switch (method) {
    case Method::Full: {
        const auto tr =
            baselines::full_gp_train(data.train.X, data.train.y, classical_init(), opt);
        const gp::GPModel<qkernels::SquaredExponential> model(
            tr.hyperparams.kernel(), data.train.X, data.train.y,
            tr.hyperparams.noise_variance());
        preds = model.predict(data.test.X);
        r.z_classical = tr.hyperparams;
        r.iterations = tr.iterations;
        r.agents = 1;
        break;
    }
    case Method::Fact: {
        const auto parts = partition_data(data.train, data.partition);
        const auto tr = baselines::fact_gp_train(parts, classical_init(), opt);
        preds = baselines::poe_predict(
            baselines::fit_local_models(parts, tr.hyperparams), data.test.X);
        r.z_classical = tr.hyperparams;
        r.iterations = tr.iterations;
        break;
    }
    case Method::Apx: {
        const auto parts = partition_data(data.train, data.partition);
        baselines::ApxConfig apx;
        apx.rho = cfg.rho;
        apx.lipschitz = cfg.lipschitz_for(parts.size());
        apx.max_iterations = cfg.apx_iterations;
        apx.eps_pri = cfg.primal_tolerance(parts.size());
        apx.eps_dual = cfg.eps_dual;
        apx.jobs = cfg.jobs;
        const auto tr = baselines::apx_gp_train(parts, classical_init(), apx);
        preds = baselines::poe_predict(
            baselines::fit_local_models(parts, tr.hyperparams), data.test.X);
        r.z_classical = tr.hyperparams;
        r.iterations = tr.iterations;
        r.stop = tr.converged ? StopReason::Residuals : StopReason::MaxIterations;
        break;
    }
    case Method::Dqgp:
        throw ConfigError("baseline_train does not run dqgp");
    }
    detail::finish(r, preds, data);
    r.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    return r;
}

inline RunResult run_method(const TrainConfig &cfg, const PreparedData &data,
                            std::uint64_t seed, Method method) {
    return method == Method::Dqgp ? dqgp_train(cfg, data, seed)
                                  : baseline_train(cfg, data, seed, method);
}

/// Load, split, partition and train with cfg.method, cfg.agents, cfg.seed.
inline RunResult train(const TrainConfig &cfg) {
    cfg.validate();
    const auto raw = load_raw(cfg, cfg.seed);
    const auto data = prepare(raw, cfg, cfg.seed, cfg.agents);
    return run_method(cfg, data, cfg.seed, cfg.method);
}

// ----------------------------------------------------------- benchmark --

struct BenchmarkRow {
    std::string dataset;
    std::string subset;
    std::string method;
    std::size_t agents{0};
    std::size_t samples{0};
    std::uint64_t seed{0};
    double nlpd_test{0.0};
    double nrmse_test{0.0};
    std::size_t iterations{0};
    double wall_ms{0.0};
};

inline constexpr std::string_view kResultsHeader =
    "dataset,subset,method,M,N,seed,nlpd_test,nrmse_test,iters,wall_ms";

/**
 * Every (N, M, method) cell R times with seeds seed..seed+R-1. For each
 * (N, seed) the data, split and partitions are shared by all methods.
 * Rows come back in cell order regardless of `jobs`.
 */
inline std::vector<BenchmarkRow> benchmark(const TrainConfig &cfg) {
    cfg.validate();
    const auto methods =
        cfg.grid_methods.empty() ? std::vector<Method>{cfg.method} : cfg.grid_methods;
    const auto agent_grid =
        cfg.grid_agents.empty() ? std::vector<std::size_t>{cfg.agents} : cfg.grid_agents;
    const auto sample_grid = cfg.grid_samples.empty()
                                 ? std::vector<std::size_t>{cfg.samples}
                                 : cfg.grid_samples;
    struct Job {
        std::size_t N;
        std::size_t M;
        Method method;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (auto N : sample_grid) {
        for (auto M : agent_grid) {
            for (auto method : methods) {
                for (std::size_t r = 0; r < cfg.replications; ++r) {
                    jobs.push_back({N, M, method, cfg.seed + r});
                }
            }
        }
    }
    std::vector<BenchmarkRow> rows(jobs.size());
    TrainConfig inner = cfg;
    inner.jobs = 1;
    parallel_for(jobs.size(), cfg.jobs, [&](std::size_t j) {
        const auto &job = jobs[j];
        TrainConfig c = inner;
        c.samples = job.N;
        c.agents = job.M;
        c.method = job.method;
        const auto raw = load_raw(c, job.seed);
        const auto data = prepare(raw, c, job.seed, job.M);
        const auto res = run_method(c, data, job.seed, job.method);
        rows[j] = {c.source, subset_label(c), std::string(to_string(job.method)),
                   job.M, job.N, job.seed, res.nlpd_test, res.nrmse_test,
                   res.iterations, res.wall_ms};
    });
    return rows;
}

inline void write_results(std::ostream &os, const std::vector<BenchmarkRow> &rows) {
    os << kResultsHeader << '\n';
    os.precision(12);
    for (const auto &r : rows) {
        os << r.dataset << ',' << r.subset << ',' << r.method << ',' << r.agents
           << ',' << r.samples << ',' << r.seed << ',' << r.nlpd_test << ','
           << r.nrmse_test << ',' << r.iterations << ','
           << static_cast<long long>(std::llround(r.wall_ms)) << '\n';
    }
}

inline std::vector<BenchmarkRow> read_results(std::istream &in,
                                              const std::string &source) {
    std::string line;
    if (!std::getline(in, line) || datahub::detail::trim(line) != kResultsHeader) {
        throw FormatError(source + ": not a results table");
    }
    std::vector<BenchmarkRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (datahub::detail::trim(line).empty()) {
            continue;
        }
        const auto c = datahub::detail::split_commas(datahub::detail::trim(line));
        if (c.size() != 10) {
            throw FormatError(source + ": line " + std::to_string(lineno) +
                              " does not have 10 columns");
        }
        auto num = [&](std::size_t k) {
            return datahub::detail::parse_finite(c[k], lineno);
        };
        BenchmarkRow r;
        r.dataset = std::string(c[0]);
        r.subset = std::string(c[1]);
        r.method = std::string(c[2]);
        r.agents = static_cast<std::size_t>(num(3));
        r.samples = static_cast<std::size_t>(num(4));
        r.seed = static_cast<std::uint64_t>(num(5));
        r.nlpd_test = num(6);
        r.nrmse_test = num(7);
        r.iterations = static_cast<std::size_t>(num(8));
        r.wall_ms = num(9);
        rows.push_back(std::move(r));
    }
    return rows;
}

struct MeanStd {
    double mean{0.0};
    double std{0.0}; // sample standard deviation; 0 for one value
};

inline MeanStd mean_std(const std::vector<double> &v) {
    if (v.empty()) {
        throw StructuralError("mean_std of no values");
    }
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    if (v.size() == 1) {
        return {mean, 0.0};
    }
    double ss = 0.0;
    for (double x : v) {
        ss += (x - mean) * (x - mean);
    }
    return {mean, std::sqrt(ss / (n - 1.0))};
}

struct SummaryCell {
    std::string dataset;
    std::string subset;
    std::string method;
    std::size_t agents{0};
    std::size_t samples{0};
    std::size_t runs{0};
    MeanStd nlpd;
    MeanStd nrmse;
};

/// Cells in order of first appearance.
inline std::vector<SummaryCell> summarize(const std::vector<BenchmarkRow> &rows) {
    using Key = std::tuple<std::string, std::string, std::string, std::size_t,
                           std::size_t>;
    std::vector<Key> order;
    std::map<Key, std::pair<std::vector<double>, std::vector<double>>> acc;
    for (const auto &r : rows) {
        Key k{r.dataset, r.subset, r.method, r.agents, r.samples};
        auto it = acc.find(k);
        if (it == acc.end()) {
            order.push_back(k);
            it = acc.emplace(k, decltype(acc)::mapped_type{}).first;
        }
        it->second.first.push_back(r.nlpd_test);
        it->second.second.push_back(r.nrmse_test);
    }
    std::vector<SummaryCell> out;
    for (const auto &k : order) {
        const auto &[nl, nr] = acc.at(k);
        out.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k),
                       std::get<3>(k), std::get<4>(k), nl.size(), mean_std(nl),
                       mean_std(nr)});
    }
    return out;
}

/// One line per cell: "dataset subset N M method nlpd=m ± s nrmse=m ± s".
inline void write_summary(std::ostream &os, const std::vector<SummaryCell> &cells) {
    os << "# dataset subset N M method runs nlpd_test nrmse_test\n";
    char buf[256];
    for (const auto &c : cells) {
        std::snprintf(buf, sizeof buf,
                      "%s %s N=%zu M=%zu %s runs=%zu nlpd=%.2f ± %.2f "
                      "nrmse=%.3f ± %.3f\n",
                      c.dataset.c_str(), c.subset.c_str(), c.samples, c.agents,
                      c.method.c_str(), c.runs, c.nlpd.mean, c.nlpd.std,
                      c.nrmse.mean, c.nrmse.std);
        os << buf;
    }
}

} // namespace dqgp::pipeline
