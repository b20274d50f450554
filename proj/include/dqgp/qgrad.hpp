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
 * @file qgrad.hpp
 * Shift-rule derivatives of quantum gram matrices and the gradient of
 * the quantum NLL with respect to the circuit parameters.
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "errors.hpp"
#include "gp.hpp"
#include "parallel.hpp"
#include "qkernels.hpp"
#include "torus.hpp"

namespace dqgp::qgrad {

/**
 * Central shift quotient (K(theta + delta e_p) - K(theta - delta e_p)) / d.
 * By default d = 2 delta; with `exact_two_term` it is 2 sin(delta), the
 * exact rule for a single rotation generator.
 */
struct ShiftRule {
    double delta{std::numbers::pi / 8.0};
    bool exact_two_term{false};

    ShiftRule() = default;
    explicit ShiftRule(double d, bool exact = false)
        : delta(d), exact_two_term(exact) {
        validate();
    }

    void validate() const {
        if (!(delta > 0.0) || delta > std::numbers::pi / 2.0) {
            throw ConfigError("shift must lie in (0, pi/2]");
        }
    }

    [[nodiscard]] double denominator() const {
        return exact_two_term ? 2.0 * std::sin(delta) : 2.0 * delta;
    }
};

/// theta +/- delta e_p, projected back onto the torus.
inline TorusPoint shifted(const TorusPoint &theta, std::size_t p,
                          double offset) {
    Eigen::VectorXd raw = theta.coords();
    raw[static_cast<Eigen::Index>(p)] += offset;
    return TorusPoint(raw);
}

inline Eigen::MatrixXd kernel_param_derivative(
    const qkernels::QuantumKernel &kernel, const Eigen::MatrixXd &X,
    const TorusPoint &theta, std::size_t p, const ShiftRule &rule) {
    if (p >= kernel.num_params()) {
        throw StructuralError("parameter index " + std::to_string(p) +
                              " out of range");
    }
    const Eigen::MatrixXd plus =
        kernel.outer_gram(kernel.features(X, shifted(theta, p, rule.delta)));
    const Eigen::MatrixXd minus =
        kernel.outer_gram(kernel.features(X, shifted(theta, p, -rule.delta)));
    return (plus - minus) / rule.denominator();
}

/// Loss, gradient and the number of gram evaluations that produced them.
struct QuantumLossEval {
    double nll{0.0};
    TangentVector grad;
    std::size_t gram_evaluations{0};
};

inline constexpr double kGradientBound = 1e6;

/**
 * NLL of C = K(theta) + sigma^2 I and its gradient
 *   g_p = 1/2 Tr{(C^-1 - C^-1 y y^T C^-1) dK/dtheta_p},
 * using one base gram and 2P shifted grams. The shifted grams are
 * independent and run on up to `jobs` threads.
 */
inline QuantumLossEval quantum_loss(const qkernels::QuantumKernel &kernel,
                                    const Eigen::MatrixXd &X,
                                    const Eigen::VectorXd &y,
                                    const TorusPoint &theta,
                                    const ShiftRule &rule,
                                    double noise_variance,
                                    std::size_t jobs = 1) {
    if (X.rows() != y.size()) {
        throw StructuralError("quantum_loss: data size mismatch");
    }
    const std::size_t P = kernel.num_params();
    if (theta.dim() != P) {
        throw StructuralError("quantum_loss: parameter dimension mismatch");
    }
    QuantumLossEval out;
    const auto base = qkernels::gram(kernel, X, theta, noise_variance);
    const gp::Factorization f = gp::factorize(base.covariance());
    out.nll = gp::nll(f, y);
    out.gram_evaluations = 1;
    const Eigen::MatrixXd W = gp::gradient_weight(f, y);

    Eigen::VectorXd g(static_cast<Eigen::Index>(P));
    parallel_for(P, jobs, [&](std::size_t p) {
        const Eigen::MatrixXd dK =
            kernel_param_derivative(kernel, X, theta, p, rule);
        g[static_cast<Eigen::Index>(p)] = 0.5 * W.cwiseProduct(dK).sum();
    });
    out.gram_evaluations += 2 * P;
    if (!g.allFinite() || g.cwiseAbs().maxCoeff() >= kGradientBound) {
        throw NumericError("quantum NLL gradient is not bounded "
                           "(ill-conditioned covariance)");
    }
    out.grad = TangentVector(std::move(g));
    return out;
}

inline TangentVector quantum_nll_grad(const qkernels::QuantumKernel &kernel,
                                      const Eigen::MatrixXd &X,
                                      const Eigen::VectorXd &y,
                                      const TorusPoint &theta,
                                      const ShiftRule &rule,
                                      double noise_variance) {
    return quantum_loss(kernel, X, y, theta, rule, noise_variance).grad;
}

/// NLL only (one gram evaluation).
inline double quantum_nll(const qkernels::QuantumKernel &kernel,
                          const Eigen::MatrixXd &X, const Eigen::VectorXd &y,
                          const TorusPoint &theta, double noise_variance) {
    return gp::nll(qkernels::gram(kernel, X, theta, noise_variance), y);
}

} // namespace dqgp::qgrad
