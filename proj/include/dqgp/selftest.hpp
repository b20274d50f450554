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
 * @file selftest.hpp
 * Fast invariant checks run by `dqgp selftest` before benchmark claims.
 * Each check is self-contained and seeded.
 */
#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "baselines.hpp"
#include "encodings.hpp"
#include "gp.hpp"
#include "pipeline.hpp"
#include "qgrad.hpp"
#include "qkernels.hpp"
#include "statevec.hpp"
#include "torus.hpp"

namespace dqgp::selftest {

struct CheckResult {
    std::string name;
    bool passed{false};
    std::string detail;
};

namespace detail {

inline CheckResult check(std::string name, double value, double tol) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "error %.3e (tol %.1e)", value, tol);
    return {std::move(name), std::isfinite(value) && value <= tol, buf};
}

inline CheckResult ry_expectation() {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
    statevec::PauliString z;
    z.set(0, statevec::Pauli::Z);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double t = u(rng);
        statevec::StateVector s(1);
        s.apply(statevec::Gate::single(statevec::GateKind::RY, 0, t));
        worst = std::max(worst, std::abs(statevec::expectation(s, z) - std::cos(t)));
    }
    return check("statevec: <Z> after RY(t) equals cos t", worst, 1e-12);
}

inline CheckResult torus_inversion() {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, std::numbers::pi);
    std::uniform_real_distribution<double> v(-1.5, 1.5);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        Eigen::VectorXd a(4);
        Eigen::VectorXd t(4);
        for (int k = 0; k < 4; ++k) {
            a[k] = u(rng);
            t[k] = v(rng);
        }
        const TorusPoint base(a);
        const TangentVector tv(t);
        worst = std::max(worst, (torus::logmap(base, torus::retract(base, tv)).coords -
                                 t).cwiseAbs().maxCoeff());
    }
    return check("torus: logmap inverts retract", worst, 1e-12);
}

inline CheckResult metric_identity() {
    const std::vector<gp::Prediction> p{{0.3, 1.0}, {-1.2, 1.0}};
    Eigen::VectorXd y(2);
    y << 0.3, -1.2;
    const double err = std::abs(gp::nlpd(p, y) - 0.5 * std::log(2.0 * std::numbers::pi)) +
                       gp::nrmse(p, y);
    return check("gp: perfect unit-variance predictions", err, 1e-12);
}

inline Eigen::MatrixXd random_inputs(std::mt19937_64 &rng, int n, int d) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Eigen::MatrixXd X(n, d);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) {
            X(i, j) = u(rng);
        }
    }
    return X;
}

inline CheckResult classical_gradient() {
    std::mt19937_64 rng(3);
    const Eigen::MatrixXd X = random_inputs(rng, 10, 2);
    Eigen::VectorXd y = X.col(0).array().sin();
    const gp::ClassicalHyperparams h{0.2, -0.1, std::log(0.3)};
    const auto g = gp::classical_loss(X, y, h).grad;
    double worst = 0.0;
    for (int k = 0; k < 3; ++k) {
        Eigen::Vector3d a = h.as_vector();
        Eigen::Vector3d b = a;
        a[k] += 1e-5;
        b[k] -= 1e-5;
        const double fd = (gp::classical_loss(X, y, gp::ClassicalHyperparams::from_vector(a)).nll -
                           gp::classical_loss(X, y, gp::ClassicalHyperparams::from_vector(b)).nll) /
                          2e-5;
        worst = std::max(worst, std::abs(fd - g[k]) / std::max(1.0, std::abs(fd)));
    }
    return check("gp: classical NLL gradient vs finite differences", worst, 1e-4);
}

inline CheckResult quantum_gradient() {
    std::mt19937_64 rng(4);
    const Eigen::MatrixXd X = random_inputs(rng, 8, 2);
    const Eigen::VectorXd y = X.col(1).array().cos();
    const qkernels::QuantumKernel k{
        encodings::build_hubregtsen(2, 1, 2),
        qkernels::ObservableSet::make(qkernels::ObservableKind::XyzPerQubit, 2),
        qkernels::OuterKernel::gaussian(1.0), 1};
    const TorusPoint theta{0.4, 1.1, 2.0, 0.7};
    const qgrad::ShiftRule rule(std::numbers::pi / 64.0);
    const auto g = qgrad::quantum_nll_grad(k, X, y, theta, rule, 1e-2);
    double worst = 0.0;
    const double h = 1e-5;
    for (std::size_t p = 0; p < 4; ++p) {
        const double fd = (qgrad::quantum_nll(k, X, y, qgrad::shifted(theta, p, h), 1e-2) -
                           qgrad::quantum_nll(k, X, y, qgrad::shifted(theta, p, -h), 1e-2)) /
                          (2.0 * h);
        worst = std::max(worst, std::abs(fd - g.coords[static_cast<Eigen::Index>(p)]) /
                                    std::max(1.0, std::abs(fd)));
    }
    return check("qgrad: shift-rule gradient vs finite differences", worst, 1e-2);
}

inline CheckResult gram_psd() {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, std::numbers::pi);
    const qkernels::QuantumKernel k{
        encodings::build_chebyshev(3, 2, 2),
        qkernels::ObservableSet::make(qkernels::ObservableKind::MixedPairs, 3),
        qkernels::OuterKernel::matern15(1.0), 1};
    Eigen::VectorXd t(static_cast<Eigen::Index>(k.num_params()));
    for (auto &v : t) {
        v = u(rng);
    }
    const auto g = qkernels::gram(k, random_inputs(rng, 16, 2), TorusPoint(t), 1e-2);
    const double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g.K).eigenvalues().minCoeff();
    gp::factorize(g.covariance());
    return check("qkernels: gram is PSD and factorizes", std::max(0.0, -lo), 1e-8);
}

inline CheckResult poe_single() {
    const std::vector<gp::Prediction> one{{0.7, 0.2}};
    const auto c = baselines::poe_combine(one);
    return check("baselines: PoE of one expert is that expert",
                 std::abs(c.mean - 0.7) + std::abs(c.variance - 0.2), 0.0);
}

inline CheckResult cv_loo() {
    std::mt19937_64 rng(6);
    const Eigen::MatrixXd X = random_inputs(rng, 5, 1);
    const Eigen::VectorXd y = X.col(0).array().sin();
    const qkernels::SquaredExponential se(1.0, 1.0);
    const Eigen::MatrixXd K = se.gram(X);
    const double cv = pipeline::ffold_cv_nlpd(K, y, 0.1, 5, 7);
    double loo = 0.0;
    for (Eigen::Index i = 0; i < 5; ++i) {
        Eigen::MatrixXd Xr(4, 1);
        Eigen::VectorXd yr(4);
        for (Eigen::Index j = 0, r = 0; j < 5; ++j) {
            if (j != i) {
                Xr.row(r) = X.row(j);
                yr[r++] = y[j];
            }
        }
        const gp::GPModel<qkernels::SquaredExponential> m(se, Xr, yr, 0.1);
        loo += gp::nlpd(m.predict(X.row(i)), y.segment(i, 1));
    }
    return check("pipeline: F = N cross-validation equals leave-one-out",
                 std::abs(cv - loo / 5.0), 1e-10);
}

} // namespace detail

inline std::vector<CheckResult> run_all() {
    std::vector<std::function<CheckResult()>> checks{
        detail::ry_expectation, detail::torus_inversion, detail::metric_identity,
        detail::classical_gradient, detail::quantum_gradient, detail::gram_psd,
        detail::poe_single, detail::cv_loo};
    std::vector<CheckResult> out;
    for (const auto &c : checks) {
        try {
            out.push_back(c());
        } catch (const std::exception &e) {
            out.push_back({"(check raised)", false, e.what()});
        }
    }
    return out;
}

} // namespace dqgp::selftest
