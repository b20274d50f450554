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

#include <cmath>
#include <random>

#include "dqgp/baselines.hpp"
#include "dqgp/gp.hpp"

using namespace dqgp;
using namespace dqgp::baselines;
using Catch::Matchers::WithinAbs;

namespace {

// Draw from a zero-mean SE GP using a plain-loop kernel.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> se_sample(std::size_t n, double ell, double sf, double sn,
                                                      std::uint64_t seed, double lo = -5.0, double hi = 5.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::normal_distribution<double> nd(0.0, 1.0);
    const auto N = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd X(N, 1);
    for (Eigen::Index i = 0; i < N; ++i) {
        X(i, 0) = u(rng);
    }
    Eigen::MatrixXd C(N, N);
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index j = 0; j < N; ++j) {
            const double r = X(i, 0) - X(j, 0);
            C(i, j) = sf * sf * std::exp(-r * r / (2 * ell * ell)) + (i == j ? sn * sn + 1e-10 : 0.0);
        }
    }
    const Eigen::MatrixXd L = C.llt().matrixL();
    Eigen::VectorXd z(N);
    for (auto &v : z) {
        v = nd(rng);
    }
    return {X, L * z};
}

std::vector<Partition> split_even(const Eigen::MatrixXd &X, const Eigen::VectorXd &y, int M) {
    std::vector<Partition> parts;
    const auto n = X.rows() / M;
    for (int m = 0; m < M; ++m) {
        const auto a = m * n;
        const auto len = m == M - 1 ? X.rows() - a : n;
        parts.emplace_back(X.middleRows(a, len), y.segment(a, len));
    }
    return parts;
}

} // namespace

TEST_CASE("full GP recovers a known lengthscale", "[baselines][oracle]") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto [X, y] = se_sample(100, 1.0, 1.0, 0.1, 100 + seed);
        const auto tr = full_gp_train(X, y, ClassicalHyperparams{});
        const double ell = tr.hyperparams.lengthscale();
        hits += (ell >= 1.0 / 1.5 && ell <= 1.5) ? 1 : 0;
        CHECK(tr.nll_history.back() <= tr.nll_history.front());
    }
    CHECK(hits >= 4);
}

TEST_CASE("optimizer descent properties", "[baselines]") {
    SECTION("zero targets drive the noise to its lower bound") {
        const auto [X, y0] = se_sample(30, 1.0, 1.0, 0.1, 7);
        const Eigen::VectorXd y = Eigen::VectorXd::Zero(X.rows());
        const auto tr = full_gp_train(X, y, ClassicalHyperparams{});
        for (std::size_t i = 1; i < tr.nll_history.size(); ++i) {
            CHECK(tr.nll_history[i] <= tr.nll_history[i - 1]);
        }
        CHECK(tr.hyperparams.log_noise_std < std::log(0.1) - 1.0);
    }
    SECTION("one step from the truth does not increase the loss") {
        const auto [X, y] = se_sample(60, 1.0, 1.0, 0.1, 8);
        const ClassicalHyperparams truth{0.0, 0.0, std::log(0.1)};
        OptimizerConfig cfg;
        cfg.max_iterations = 1;
        const auto tr = full_gp_train(X, y, truth, cfg);
        CHECK(gp::classical_loss(X, y, tr.hyperparams).nll <= gp::classical_loss(X, y, truth).nll);
    }
    SECTION("starts outside the box are clamped") {
        const auto [X, y] = se_sample(20, 1.0, 1.0, 0.1, 9);
        OptimizerConfig cfg;
        cfg.max_iterations = 0;
        const auto tr = full_gp_train(X, y, ClassicalHyperparams{20.0, -20.0, 0.0}, cfg);
        CHECK(tr.hyperparams.log_lengthscale == cfg.bounds.upper[0]);
        CHECK(tr.hyperparams.log_signal_std == cfg.bounds.lower[1]);
    }
    CHECK_THROWS_AS(full_gp_train(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1), {}), ConfigError);
    CHECK_THROWS_AS(fact_gp_train({}, {}), ConfigError);
}

TEST_CASE("FACT-GP with one partition follows the full GP", "[baselines]") {
    const auto [X, y] = se_sample(50, 0.8, 1.2, 0.1, 11);
    const auto full = full_gp_train(X, y, ClassicalHyperparams{});
    const auto fact = fact_gp_train({Partition{X, y}}, ClassicalHyperparams{});
    CHECK((full.hyperparams.as_vector() - fact.hyperparams.as_vector()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(full.iterations == fact.iterations);
}

TEST_CASE("factorized loss is the block-diagonal NLL", "[baselines][oracle]") {
    const auto [X, y] = se_sample(24, 1.0, 1.0, 0.2, 12);
    const auto parts = split_even(X, y, 3);
    const ClassicalHyperparams h{-0.2, 0.1, std::log(0.3)};
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(24, 24);
    for (int m = 0; m < 3; ++m) {
        Eigen::MatrixXd B = h.kernel().gram(parts[static_cast<std::size_t>(m)].first);
        B.diagonal().array() += h.noise_variance();
        C.block(8 * m, 8 * m, 8, 8) = B;
    }
    CHECK_THAT(factorized_loss(parts, h).nll, WithinAbs(gp::nll(C, y), 1e-9));

    const auto g = factorized_loss(parts, h).grad;
    for (int k = 0; k < 3; ++k) {
        Eigen::Vector3d a = h.as_vector();
        Eigen::Vector3d b = a;
        a[k] += 1e-5;
        b[k] -= 1e-5;
        const double fd = (factorized_loss(parts, ClassicalHyperparams::from_vector(a)).nll -
                           factorized_loss(parts, ClassicalHyperparams::from_vector(b)).nll) /
                          2e-5;
        CHECK(std::abs(fd - g[k]) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
    CHECK(factorized_loss(parts, h, 3).nll == factorized_loss(parts, h, 1).nll);
}

TEST_CASE("product of experts", "[baselines]") {
    const std::vector<Prediction> one{{0.7, 0.3}};
    const auto p1 = poe_combine(one);
    CHECK(p1.mean == 0.7);
    CHECK(p1.variance == 0.3);

    const std::vector<Prediction> two{{1.0, 0.4}, {3.0, 0.4}};
    CHECK_THAT(poe_combine(two).mean, WithinAbs(2.0, 1e-15));
    CHECK_THAT(poe_combine(two).variance, WithinAbs(0.2, 1e-15));

    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.01, 3.0);
    for (int i = 0; i < 100; ++i) {
        std::vector<Prediction> e{{u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}};
        const double vmin = std::min({e[0].variance, e[1].variance, e[2].variance});
        CHECK(poe_combine(e).variance <= vmin + 1e-12);
    }
    CHECK_THROWS_AS(poe_combine(std::vector<Prediction>{}), ConfigError);

    // single local model: PoE is the local prediction
    const auto [X, y] = se_sample(20, 1.0, 1.0, 0.1, 14);
    const auto models = fit_local_models({Partition{X, y}}, ClassicalHyperparams{});
    const Eigen::MatrixXd Xs = Eigen::VectorXd::LinSpaced(7, -4.0, 4.0);
    const auto local = models.front().predict(Xs);
    const auto poe = poe_predict(models, Xs);
    for (std::size_t j = 0; j < local.size(); ++j) {
        CHECK(poe[j].mean == local[j].mean);
        CHECK(poe[j].variance == local[j].variance);
    }
}

TEST_CASE("PoE defers to the nearby expert", "[baselines][property]") {
    // two clusters far apart; the far expert reverts to a broad prior
    const auto [Xa, ya] = se_sample(15, 0.5, 1.0, 0.05, 15, -2.0, 2.0);
    const auto [Xb, yb] = se_sample(15, 0.5, 1.0, 0.05, 16, 98.0, 102.0);
    const ClassicalHyperparams h{std::log(0.5), std::log(10.0), std::log(0.05)};
    const auto models = fit_local_models({Partition{Xa, ya}, Partition{Xb, yb}}, h);
    // at the near expert's inputs its variance is of noise size
    const Eigen::MatrixXd Xs = Xa.topRows(6);
    const auto near = models[0].predict(Xs);
    const auto poe = poe_predict(models, Xs);
    for (std::size_t j = 0; j < near.size(); ++j) {
        CHECK_THAT(poe[j].mean, WithinAbs(near[j].mean, 1e-3));
        CHECK_THAT(poe[j].variance, WithinAbs(near[j].variance, 1e-3));
    }
}

TEST_CASE("apx-GP update equations", "[baselines]") {
    const std::vector<Eigen::VectorXd> theta{Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 3.0)};
    const std::vector<Eigen::VectorXd> psi(2, Eigen::VectorXd::Zero(1));
    CHECK(apx_consensus(theta, psi, 10.0)[0] == 2.0);

    const Eigen::VectorXd z = Eigen::VectorXd::Constant(2, 0.5);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
    CHECK(apx_local(z, zero, zero, 100.0, 100.0) == z);
    CHECK(apx_dual(zero, z, z, 100.0) == zero);

    // M = 1 with zero gradient at the start: nothing moves
    const auto run = apx_admm(
        1, z, [](std::size_t, const Eigen::VectorXd &v) { return Eigen::VectorXd(Eigen::VectorXd::Zero(v.size())); },
        [](const Eigen::VectorXd &v) { return v; }, 100.0, {100.0}, 10, 1e-12, 1e-12);
    CHECK(run.z == z);
    CHECK(run.converged);
    CHECK(run.iterations == 1);
}

TEST_CASE("apx-GP solves a separable quadratic", "[baselines][oracle]") {
    // sum_m (theta - c_m)^2, gradient 2 (theta - c_m), Lipschitz 2
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd(0.0, 2.0);
    for (int rep = 0; rep < 5; ++rep) {
        std::vector<Eigen::VectorXd> c;
        for (int m = 0; m < 4; ++m) {
            c.push_back(Eigen::Vector3d(nd(rng), nd(rng), nd(rng)));
        }
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
        for (const auto &v : c) {
            mean += v / 4.0;
        }
        const double rho = 10.0;
        const double L = 2.0;
        const auto grad = [&](std::size_t m, const Eigen::VectorXd &z) { return Eigen::VectorXd(2.0 * (z - c[m])); };
        const auto run = apx_admm(4, Eigen::VectorXd::Zero(3), grad, [](const Eigen::VectorXd &v) { return v; }, rho,
                                  std::vector<double>(4, L), 200, 1e-6, 1e-6);
        CHECK(run.iterations <= 200);
        CHECK((run.z - mean).norm() <= 1e-3);

        // each proximal step does not increase the local augmented model
        std::vector<Eigen::VectorXd> theta(4, Eigen::VectorXd::Zero(3));
        std::vector<Eigen::VectorXd> psi(4, Eigen::VectorXd::Zero(3));
        for (int s = 0; s < 50; ++s) {
            const Eigen::VectorXd z = apx_consensus(theta, psi, rho);
            for (std::size_t m = 0; m < 4; ++m) {
                const auto f = [&](const Eigen::VectorXd &t) {
                    return (t - c[m]).squaredNorm() + psi[m].dot(t - z) + 0.5 * rho * (t - z).squaredNorm();
                };
                theta[m] = apx_local(z, grad(m, z), psi[m], rho, L);
                CHECK(f(theta[m]) <= f(z) + 1e-12);
                psi[m] = apx_dual(psi[m], theta[m], z, rho);
            }
        }
    }
}

TEST_CASE("apx-GP with one partition reaches the full-GP stationary point", "[baselines]") {
    const auto [X, y] = se_sample(30, 1.0, 1.0, 0.1, 18);
    OptimizerConfig ocfg;
    ocfg.grad_tol = 1e-9;
    const auto full = full_gp_train(X, y, ClassicalHyperparams{}, ocfg);
    ApxConfig acfg;
    acfg.max_iterations = 5000;
    acfg.eps_pri = 1e-10;
    acfg.eps_dual = 1e-10;
    const auto apx = apx_gp_train({Partition{X, y}}, ClassicalHyperparams{}, acfg);
    CHECK(apx.converged);
    CHECK(gp::classical_loss(X, y, apx.hyperparams).grad.norm() <= 1e-3);
    CHECK(gp::classical_loss(X, y, full.hyperparams).grad.norm() <= 1e-3);
    CHECK((apx.hyperparams.as_vector() - full.hyperparams.as_vector()).norm() <= 1e-5);
    CHECK_THROWS_AS(apx_gp_train({}, {}), ConfigError);
}
