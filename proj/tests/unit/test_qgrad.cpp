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

#include <atomic>
#include <cmath>
#include <numbers>
#include <random>

#include "dqgp/encodings.hpp"
#include "dqgp/gp.hpp"
#include "dqgp/qgrad.hpp"
#include "dqgp/qkernels.hpp"

using namespace dqgp;
using namespace dqgp::qgrad;
using qkernels::ObservableKind;
using qkernels::ObservableSet;
using qkernels::OuterKernel;
using qkernels::QuantumKernel;
using Catch::Matchers::WithinAbs;

namespace {

const double kPi = std::numbers::pi;

Eigen::MatrixXd random_inputs(std::mt19937_64 &rng, Eigen::Index n, Eigen::Index d) {
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    Eigen::MatrixXd X(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            X(i, j) = u(rng);
        }
    }
    return X;
}

Eigen::VectorXd random_targets(std::mt19937_64 &rng, Eigen::Index n) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::VectorXd y(n);
    for (auto &v : y) {
        v = nd(rng);
    }
    return y;
}

TorusPoint random_theta(std::size_t P, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(0.0, kPi);
    Eigen::VectorXd t(static_cast<Eigen::Index>(P));
    for (auto &v : t) {
        v = u(rng);
    }
    return TorusPoint(t);
}

// The circuits are 2 pi periodic in each angle while the parameter domain
// is [0, pi), so the loss jumps at the seam. Difference oracles use points
// whose stencils stay clear of it.
TorusPoint interior_theta(std::size_t P, double margin, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(margin, kPi - margin);
    Eigen::VectorXd t(static_cast<Eigen::Index>(P));
    for (auto &v : t) {
        v = u(rng);
    }
    return TorusPoint(t);
}

QuantumKernel hub_kernel(std::size_t q = 2, double gamma = 1.0) {
    return {encodings::build_hubregtsen(q, 1, 2), ObservableSet::make(ObservableKind::XyzPerQubit, q),
            OuterKernel::gaussian(gamma), 1};
}

Eigen::MatrixXd gram_at(const QuantumKernel &k, const Eigen::MatrixXd &X, const Eigen::VectorXd &raw) {
    return qkernels::gram(k, X, TorusPoint(raw), 0.0).K;
}

// central difference of the loss on the torus; raw coordinates are
// perturbed and projected inside TorusPoint
Eigen::VectorXd fd_gradient(const QuantumKernel &k, const Eigen::MatrixXd &X, const Eigen::VectorXd &y,
                            const TorusPoint &theta, double noise, double h) {
    Eigen::VectorXd g(theta.coords().size());
    for (Eigen::Index p = 0; p < g.size(); ++p) {
        Eigen::VectorXd a = theta.coords();
        Eigen::VectorXd b = theta.coords();
        a[p] += h;
        b[p] -= h;
        g[p] = (quantum_nll(k, X, y, TorusPoint(a), noise) - quantum_nll(k, X, y, TorusPoint(b), noise)) /
               (2 * h);
    }
    return g;
}

} // namespace

TEST_CASE("shift rule validation", "[qgrad]") {
    CHECK(ShiftRule().delta == kPi / 8);
    CHECK_FALSE(ShiftRule().exact_two_term);
    CHECK_THROWS_AS(ShiftRule(0.0), ConfigError);
    CHECK_THROWS_AS(ShiftRule(-0.1), ConfigError);
    CHECK_THROWS_AS(ShiftRule(kPi / 2 + 1e-9), ConfigError);
    CHECK_NOTHROW(ShiftRule(kPi / 2));
    CHECK(ShiftRule(0.25).denominator() == 0.5);
    CHECK_THAT(ShiftRule(0.25, true).denominator(), WithinAbs(2 * std::sin(0.25), 1e-15));
}

TEST_CASE("shifted points are projected", "[qgrad]") {
    const TorusPoint t{0.1, 3.0};
    CHECK_THAT(shifted(t, 0, -0.2)[0], WithinAbs(kPi - 0.1, 1e-14));
    CHECK_THAT(shifted(t, 1, 0.2)[1], WithinAbs(3.2 - kPi, 1e-14));
    CHECK(shifted(t, 1, 0.2)[0] == 0.1);
}

TEST_CASE("parameter on a bypassed gate has zero derivative", "[qgrad]") {
    using encodings::Binding;
    using encodings::GateTemplate;
    using statevec::GateKind;
    // qubit 0 stays in |0>, so the CRZ it controls acts as the identity
    const encodings::CircuitSpec spec("custom", 2, 1, 1, 2,
                                      {GateTemplate{GateKind::H, 1, 0, Binding::fixed(0.0)},
                                       GateTemplate{GateKind::RZ, 1, 0, Binding::feature_of(0)},
                                       GateTemplate{GateKind::RY, 1, 0, Binding::parameter(0)},
                                       GateTemplate{GateKind::CRZ, 0, 1, Binding::parameter(1)}});
    // local Z only: a full Bloch-vector feature is blind to single-qubit rotations
    const QuantumKernel k{spec, ObservableSet::make(ObservableKind::LocalZ, 2), OuterKernel::gaussian(1.0), 1};
    std::mt19937_64 rng(1);
    const auto X = random_inputs(rng, 6, 1);
    const TorusPoint theta{0.7, 1.3};
    const auto d1 = kernel_param_derivative(k, X, theta, 1, ShiftRule());
    CHECK(d1.cwiseAbs().maxCoeff() <= 1e-10);
    const auto d0 = kernel_param_derivative(k, X, theta, 0, ShiftRule());
    CHECK(d0.cwiseAbs().maxCoeff() > 1e-3);
    CHECK_THROWS_AS(kernel_param_derivative(k, X, theta, 2, ShiftRule()), StructuralError);
}

TEST_CASE("shift quotient is the stencil average of the derivative", "[qgrad][oracle]") {
    // (K(t + d) - K(t - d)) / 2d = (1 / 2d) * integral of dK/dt over [t - d, t + d];
    // the integrand is a small-step central difference, integrated by Simpson's rule
    std::mt19937_64 rng(2);
    const auto k = hub_kernel();
    const ShiftRule rule;
    const double d = rule.delta;
    for (int rep = 0; rep < 3; ++rep) {
        const auto X = random_inputs(rng, 5, 2);
        const auto theta = interior_theta(k.num_params(), d + 1e-3, rng);
        for (std::size_t p = 0; p < k.num_params(); ++p) {
            const auto pi = static_cast<Eigen::Index>(p);
            const auto deriv = [&](double s) {
                Eigen::VectorXd a = theta.coords();
                Eigen::VectorXd b = theta.coords();
                a[pi] += s + 1e-5;
                b[pi] += s - 1e-5;
                return Eigen::MatrixXd((gram_at(k, X, a) - gram_at(k, X, b)) / 2e-5);
            };
            const int n = 64;
            const double h = 2 * d / n;
            Eigen::MatrixXd integral = deriv(-d) + deriv(d);
            for (int i = 1; i < n; ++i) {
                integral += (i % 2 == 1 ? 4.0 : 2.0) * deriv(-d + i * h);
            }
            integral *= h / 3.0;
            const auto q = kernel_param_derivative(k, X, theta, p, rule);
            CHECK((q - integral / (2 * d)).norm() <= 1e-6 * std::max(1.0, q.norm()));
            CHECK((q - q.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("small shifts approach the derivative", "[qgrad][oracle]") {
    std::mt19937_64 rng(12);
    const auto k = hub_kernel();
    const ShiftRule rule(kPi / 256);
    for (int rep = 0; rep < 10; ++rep) {
        const auto X = random_inputs(rng, 6, 2);
        const auto theta = interior_theta(k.num_params(), rule.delta + 1e-3, rng);
        for (std::size_t p = 0; p < k.num_params(); ++p) {
            Eigen::VectorXd a = theta.coords();
            Eigen::VectorXd b = theta.coords();
            a[static_cast<Eigen::Index>(p)] += 1e-5;
            b[static_cast<Eigen::Index>(p)] -= 1e-5;
            const Eigen::MatrixXd fd = (gram_at(k, X, a) - gram_at(k, X, b)) / 2e-5;
            const auto q = kernel_param_derivative(k, X, theta, p, rule);
            CHECK((q - fd).norm() <= 1e-3 * fd.norm() + 1e-8);
        }
    }
}

TEST_CASE("exact two-term rule rescales the quotient", "[qgrad]") {
    std::mt19937_64 rng(3);
    const auto k = hub_kernel();
    const auto X = random_inputs(rng, 4, 2);
    const auto theta = random_theta(k.num_params(), rng);
    const auto plain = kernel_param_derivative(k, X, theta, 2, ShiftRule(kPi / 8));
    const auto exact = kernel_param_derivative(k, X, theta, 2, ShiftRule(kPi / 8, true));
    const double ratio = (kPi / 8) / std::sin(kPi / 8);
    CHECK((exact - ratio * plain).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("NLL gradient matches wrap-aware finite differences", "[qgrad][oracle]") {
    std::mt19937_64 rng(4);
    const auto k = hub_kernel();
    REQUIRE(k.num_params() == 4);
    const ShiftRule rule(kPi / 64);
    for (int rep = 0; rep < 10; ++rep) {
        const auto X = random_inputs(rng, 8, 2);
        const auto y = random_targets(rng, 8);
        const auto theta = interior_theta(4, kPi / 64 + 1e-3, rng);
        const auto g = quantum_nll_grad(k, X, y, theta, rule, 0.1);
        const auto fd = fd_gradient(k, X, y, theta, 0.1, 1e-4);
        CHECK((g.coords - fd).norm() <= 1e-2 * fd.norm() + 1e-6);
        CHECK(g.coords.allFinite());
        CHECK(g.coords.cwiseAbs().maxCoeff() < kGradientBound);
    }
}

TEST_CASE("zero targets leave only the log-determinant term", "[qgrad][oracle]") {
    std::mt19937_64 rng(5);
    const auto k = hub_kernel();
    const auto X = random_inputs(rng, 7, 2);
    const Eigen::VectorXd y = Eigen::VectorXd::Zero(7);
    const auto theta = random_theta(4, rng);
    const ShiftRule rule;
    const auto g = quantum_nll_grad(k, X, y, theta, rule, 0.05);

    Eigen::MatrixXd C = qkernels::gram(k, X, theta, 0.05).covariance();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    const Eigen::MatrixXd Cinv =
        es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    for (std::size_t p = 0; p < 4; ++p) {
        const double want = 0.5 * (Cinv * kernel_param_derivative(k, X, theta, p, rule)).trace();
        CHECK_THAT(g.coords[static_cast<Eigen::Index>(p)], WithinAbs(want, 1e-8 * std::max(1.0, std::abs(want))));
    }
}

TEST_CASE("small steps against the gradient decrease the NLL", "[qgrad][property]") {
    std::mt19937_64 rng(6);
    const auto k = hub_kernel();
    int decreased = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const auto X = random_inputs(rng, 8, 2);
        const auto y = random_targets(rng, 8);
        const auto theta = random_theta(4, rng);
        const auto ev = quantum_loss(k, X, y, theta, ShiftRule(), 0.1);
        const auto next = retract(theta, TangentVector(Eigen::VectorXd(-1e-3 * ev.grad.coords)));
        if (quantum_nll(k, X, y, next, 0.1) < ev.nll) {
            ++decreased;
        }
    }
    CHECK(decreased >= 18);
}

TEST_CASE("one gradient costs one base gram and two per parameter", "[qgrad]") {
    std::mt19937_64 rng(7);
    std::atomic<std::size_t> passes{0};
    for (std::size_t q : {2U, 3U}) {
        auto k = hub_kernel(q);
        k.passes = &passes;
        passes = 0;
        const auto X = random_inputs(rng, 5, 2);
        const auto y = random_targets(rng, 5);
        const auto theta = random_theta(k.num_params(), rng);
        const auto ev = quantum_loss(k, X, y, theta, ShiftRule(), 0.1, 2);
        CHECK(passes.load() == 1 + 2 * k.num_params());
        CHECK(ev.gram_evaluations == 1 + 2 * k.num_params());
    }
}

TEST_CASE("shifts across the period boundary are wrap-safe", "[qgrad][property]") {
    std::mt19937_64 rng(8);
    const auto k = hub_kernel();
    const auto X = random_inputs(rng, 5, 2);
    const ShiftRule rule;
    const double d = rule.delta;
    for (double tp : {d / 2, kPi - d / 2}) {
        for (std::size_t p = 0; p < 4; ++p) {
            Eigen::VectorXd raw = random_theta(4, rng).coords();
            raw[static_cast<Eigen::Index>(p)] = tp;
            const TorusPoint theta(raw);
            // manual: project the shifted coordinates first, then evaluate
            Eigen::VectorXd up = raw;
            Eigen::VectorXd dn = raw;
            up[static_cast<Eigen::Index>(p)] = torus::project(tp + d);
            dn[static_cast<Eigen::Index>(p)] = torus::project(tp - d);
            const Eigen::MatrixXd manual = (gram_at(k, X, up) - gram_at(k, X, dn)) / rule.denominator();
            const auto got = kernel_param_derivative(k, X, theta, p, rule);
            CHECK((got - manual).cwiseAbs().maxCoeff() <= 1e-14);
            // the unwrapped representative gives the same matrix
            Eigen::VectorXd up_raw = raw;
            Eigen::VectorXd dn_raw = raw;
            up_raw[static_cast<Eigen::Index>(p)] += d;
            dn_raw[static_cast<Eigen::Index>(p)] -= d;
            const Eigen::MatrixXd unwrapped = (gram_at(k, X, up_raw) - gram_at(k, X, dn_raw)) / rule.denominator();
            CHECK((got - unwrapped).cwiseAbs().maxCoeff() <= 1e-10);
        }
    }
}

TEST_CASE("gradient is independent of the thread count", "[qgrad]") {
    std::mt19937_64 rng(9);
    const auto k = hub_kernel(3);
    const auto X = random_inputs(rng, 6, 2);
    const auto y = random_targets(rng, 6);
    const auto theta = random_theta(k.num_params(), rng);
    const auto a = quantum_loss(k, X, y, theta, ShiftRule(), 0.1, 1);
    const auto b = quantum_loss(k, X, y, theta, ShiftRule(), 0.1, 4);
    CHECK(a.nll == b.nll);
    CHECK(a.grad.coords == b.grad.coords);
}

TEST_CASE("gradient input validation", "[qgrad]") {
    const auto k = hub_kernel();
    const Eigen::MatrixXd X = Eigen::MatrixXd::Zero(3, 2);
    CHECK_THROWS_AS(quantum_loss(k, X, Eigen::VectorXd::Zero(2), TorusPoint::zero(4), ShiftRule(), 0.1),
                    StructuralError);
    CHECK_THROWS_AS(quantum_loss(k, X, Eigen::VectorXd::Zero(3), TorusPoint::zero(3), ShiftRule(), 0.1),
                    StructuralError);
}
