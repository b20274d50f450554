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
 * @file baselines.hpp
 * Classical comparison methods on a squared-exponential kernel:
 * Full-GP, FACT-GP (factorized training, product-of-experts prediction)
 * and apx-GP (Euclidean proximal consensus ADMM).
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "gp.hpp"
#include "parallel.hpp"
#include "qkernels.hpp"

namespace dqgp::baselines {

using gp::ClassicalHyperparams;
using gp::ClassicalLoss;
using gp::Prediction;

using Partition = std::pair<Eigen::MatrixXd, Eigen::VectorXd>;

/// Box on the log hyperparameters; keeps every kernel evaluation finite.
struct LogBounds {
    Eigen::Vector3d lower{std::log(1e-3), std::log(1e-3), std::log(1e-3)};
    Eigen::Vector3d upper{std::log(1e3), std::log(1e3), std::log(10.0)};

    [[nodiscard]] Eigen::Vector3d clamp(const Eigen::Vector3d &v) const {
        return v.cwiseMax(lower).cwiseMin(upper);
    }
};

struct OptimizerConfig {
    std::size_t max_iterations{500};
    double grad_tol{1e-4};
    double initial_step{1.0};
    double armijo{1e-4};
    double shrink{0.5};
    std::size_t max_backtracks{50};
    double max_step{1.0};
    LogBounds bounds{};
    std::size_t jobs{1};
};

struct TrainTrace {
    ClassicalHyperparams hyperparams;
    std::vector<double> nll_history;
    std::size_t iterations{0};
    double final_grad_norm{0.0};
};

using Objective = std::function<ClassicalLoss(const ClassicalHyperparams &)>;

/**
 * Projected quasi-Newton descent (BFGS inverse-Hessian update) with Armijo
 * backtracking. Each step moves at most `max_step` in log space. Stops when
 * the projected gradient norm drops to grad_tol or after max_iterations.
 * Accepted steps never increase the objective.
 */
inline TrainTrace minimize(const Objective &objective,
                           const ClassicalHyperparams &init,
                           const OptimizerConfig &cfg) {
    TrainTrace out;
    Eigen::Vector3d x = cfg.bounds.clamp(init.as_vector());
    ClassicalLoss cur = objective(ClassicalHyperparams::from_vector(x));
    out.nll_history.push_back(cur.nll);
    Eigen::Matrix3d H = Eigen::Matrix3d::Identity();
    auto pgrad_norm = [&](const Eigen::Vector3d &at,
                          const Eigen::Vector3d &g) {
        return (cfg.bounds.clamp(at - g) - at).norm();
    };
    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
        out.final_grad_norm = pgrad_norm(x, cur.grad);
        if (out.final_grad_norm <= cfg.grad_tol) {
            break;
        }
        Eigen::Vector3d dir = -H * cur.grad;
        if (!(dir.dot(cur.grad) < 0.0)) {
            H.setIdentity();
            dir = -cur.grad;
        }
        if (dir.norm() > cfg.max_step) {
            dir *= cfg.max_step / dir.norm();
        }
        bool accepted = false;
        double t = cfg.initial_step;
        for (std::size_t b = 0; b < cfg.max_backtracks; ++b, t *= cfg.shrink) {
            const Eigen::Vector3d trial = cfg.bounds.clamp(x + t * dir);
            const Eigen::Vector3d dx = trial - x;
            if (dx.norm() == 0.0) {
                break;
            }
            ClassicalLoss next;
            try {
                next = objective(ClassicalHyperparams::from_vector(trial));
            } catch (const NumericError &) {
                continue;
            }
            if (next.nll <= cur.nll + cfg.armijo * cur.grad.dot(dx)) {
                const Eigen::Vector3d yk = next.grad - cur.grad;
                const double sy = dx.dot(yk);
                if (sy > 1e-12 * dx.norm() * yk.norm()) {
                    const double r = 1.0 / sy;
                    const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
                    H = (I - r * dx * yk.transpose()) * H *
                            (I - r * yk * dx.transpose()) +
                        r * dx * dx.transpose();
                }
                x = trial;
                cur = next;
                accepted = true;
                break;
            }
        }
        ++out.iterations;
        if (!accepted) {
            if (H.isIdentity()) {
                break;
            }
            H.setIdentity();
            continue;
        }
        out.nll_history.push_back(cur.nll);
    }
    out.final_grad_norm = pgrad_norm(x, cur.grad);
    out.hyperparams = ClassicalHyperparams::from_vector(x);
    return out;
}

/// sum_m L_m(h) and its gradient (sum of per-partition gradients).
inline ClassicalLoss factorized_loss(std::span<const Partition> parts,
                                     const ClassicalHyperparams &h,
                                     std::size_t jobs = 1) {
    std::vector<ClassicalLoss> each(parts.size());
    parallel_for(parts.size(), jobs, [&](std::size_t m) {
        each[m] = gp::classical_loss(parts[m].first, parts[m].second, h);
    });
    ClassicalLoss total;
    for (const auto &l : each) {
        total.nll += l.nll;
        total.grad += l.grad;
    }
    return total;
}

/// FACT-GP training: shared hyperparameters minimizing sum_m L_m.
inline TrainTrace fact_gp_train(const std::vector<Partition> &parts,
                                const ClassicalHyperparams &init,
                                const OptimizerConfig &cfg = {}) {
    if (parts.empty()) {
        throw ConfigError("FACT-GP needs at least one partition");
    }
    const std::span<const Partition> view(parts);
    return minimize(
        [&](const ClassicalHyperparams &h) {
            return factorized_loss(view, h, cfg.jobs);
        },
        init, cfg);
}

/// Full-GP training; the one-partition case of fact_gp_train.
inline TrainTrace full_gp_train(const Eigen::MatrixXd &X,
                                const Eigen::VectorXd &y,
                                const ClassicalHyperparams &init,
                                const OptimizerConfig &cfg = {}) {
    if (X.rows() < 2) {
        throw ConfigError("Full-GP training needs at least two points");
    }
    return fact_gp_train({Partition{X, y}}, init, cfg);
}

/// Product of experts: 1/var = sum 1/var_m, mean = var sum mu_m / var_m.
inline Prediction poe_combine(std::span<const Prediction> experts) {
    if (experts.empty()) {
        throw ConfigError("product of experts needs at least one expert");
    }
    if (experts.size() == 1) {
        return experts.front();
    }
    double precision = 0.0;
    double weighted = 0.0;
    for (const auto &e : experts) {
        const double p = 1.0 / std::max(e.variance, gp::kVarianceFloor);
        precision += p;
        weighted += p * e.mean;
    }
    const double var = 1.0 / precision;
    return {var * weighted, var};
}

using LocalModel = gp::GPModel<qkernels::SquaredExponential>;

inline std::vector<LocalModel> fit_local_models(const std::vector<Partition> &parts,
                                                const ClassicalHyperparams &h) {
    std::vector<LocalModel> models;
    models.reserve(parts.size());
    for (const auto &[X, y] : parts) {
        models.emplace_back(h.kernel(), X, y, h.noise_variance());
    }
    return models;
}

inline std::vector<Prediction> poe_predict(const std::vector<LocalModel> &models,
                                           const Eigen::MatrixXd &X_test) {
    if (models.empty()) {
        throw ConfigError("product of experts needs at least one model");
    }
    std::vector<std::vector<Prediction>> local;
    local.reserve(models.size());
    for (const auto &m : models) {
        local.push_back(m.predict(X_test));
    }
    std::vector<Prediction> out(static_cast<std::size_t>(X_test.rows()));
    std::vector<Prediction> at(models.size());
    for (std::size_t j = 0; j < out.size(); ++j) {
        for (std::size_t m = 0; m < models.size(); ++m) {
            at[m] = local[m][j];
        }
        out[j] = poe_combine(at);
    }
    return out;
}

struct ApxConfig {
    double rho{100.0};
    std::vector<double> lipschitz; // empty: 100 for every agent
    std::size_t max_iterations{500};
    double eps_pri{-1.0};          // < 0: 1e-2 sqrt(M)
    double eps_dual{1e-2};
    LogBounds bounds{};
    std::size_t jobs{1};
};

struct ApxResult {
    ClassicalHyperparams hyperparams;
    std::size_t iterations{0};
    std::vector<std::pair<double, double>> residuals; // (r_pri, r_dual)
    bool converged{false};
};

/// z = mean_m(theta_m + psi_m / rho)
inline Eigen::VectorXd apx_consensus(const std::vector<Eigen::VectorXd> &theta,
                                     const std::vector<Eigen::VectorXd> &psi,
                                     double rho) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(theta.front().size());
    for (std::size_t m = 0; m < theta.size(); ++m) {
        z += theta[m] + psi[m] / rho;
    }
    return z / static_cast<double>(theta.size());
}

/// theta_m = z - (grad L_m(z) + psi_m) / (rho + L_m)
inline Eigen::VectorXd apx_local(const Eigen::VectorXd &z,
                                 const Eigen::VectorXd &grad,
                                 const Eigen::VectorXd &psi, double rho,
                                 double lipschitz) {
    return z - (grad + psi) / (rho + lipschitz);
}

/// psi_m + rho (theta_m - z)
inline Eigen::VectorXd apx_dual(const Eigen::VectorXd &psi,
                                const Eigen::VectorXd &theta,
                                const Eigen::VectorXd &z, double rho) {
    return psi + rho * (theta - z);
}

struct ApxRun {
    Eigen::VectorXd z;
    std::size_t iterations{0};
    std::vector<std::pair<double, double>> residuals;
    bool converged{false};
};

/**
 * Euclidean consensus ADMM. `grad(m, z)` is agent m's gradient at z and
 * `clamp` maps iterates back into the feasible box. Stops when
 * ||r_pri|| <= eps_pri and r_dual <= eps_dual.
 */
template <class Grad, class Clamp>
ApxRun apx_admm(std::size_t M, const Eigen::VectorXd &start, Grad &&grad,
                Clamp &&clamp, double rho, const std::vector<double> &L,
                std::size_t max_iterations, double eps_pri, double eps_dual,
                std::size_t jobs = 1) {
    if (M == 0) {
        throw ConfigError("apx-GP needs at least one partition");
    }
    if (!(rho > 0.0)) {
        throw ConfigError("apx-GP penalty must be positive");
    }
    if (L.size() != M) {
        throw ConfigError("apx-GP: one Lipschitz constant per partition");
    }
    std::vector<Eigen::VectorXd> theta(M, start);
    std::vector<Eigen::VectorXd> psi(M, Eigen::VectorXd::Zero(start.size()));
    ApxRun out;
    out.z = start;
    for (std::size_t s = 0; s < max_iterations; ++s) {
        const Eigen::VectorXd z = clamp(apx_consensus(theta, psi, rho));
        std::vector<Eigen::VectorXd> g(M);
        parallel_for(M, jobs, [&](std::size_t m) { g[m] = grad(m, z); });
        double pri = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            theta[m] = clamp(apx_local(z, g[m], psi[m], rho, L[m]));
            psi[m] = apx_dual(psi[m], theta[m], z, rho);
            pri += (theta[m] - z).squaredNorm();
        }
        const double dual = rho * (z - out.z).norm();
        out.z = z;
        out.residuals.emplace_back(std::sqrt(pri), dual);
        out.iterations = s + 1;
        if (std::sqrt(pri) <= eps_pri && dual <= eps_dual) {
            out.converged = true;
            break;
        }
    }
    return out;
}

/// apx-GP on the classical NLL in log-hyperparameter space, iterates
/// kept inside the log bounds.
inline ApxResult apx_gp_train(const std::vector<Partition> &parts,
                              const ClassicalHyperparams &init,
                              const ApxConfig &cfg = {}) {
    const std::size_t M = parts.size();
    std::vector<double> L = cfg.lipschitz;
    if (L.empty()) {
        L.assign(M, 100.0);
    }
    const double eps_pri =
        cfg.eps_pri < 0.0 ? 1e-2 * std::sqrt(static_cast<double>(M))
                          : cfg.eps_pri;
    const Eigen::VectorXd start = cfg.bounds.clamp(init.as_vector());
    const auto run = apx_admm(
        M, start,
        [&](std::size_t m, const Eigen::VectorXd &z) {
            return Eigen::VectorXd(
                gp::classical_loss(parts[m].first, parts[m].second,
                                   ClassicalHyperparams::from_vector(z))
                    .grad);
        },
        [&](const Eigen::VectorXd &v) {
            return Eigen::VectorXd(cfg.bounds.clamp(v));
        },
        cfg.rho, L, cfg.max_iterations, eps_pri, cfg.eps_dual, cfg.jobs);
    ApxResult out;
    out.hyperparams = ClassicalHyperparams::from_vector(run.z);
    out.iterations = run.iterations;
    out.residuals = run.residuals;
    out.converged = run.converged;
    return out;
}

} // namespace dqgp::baselines
