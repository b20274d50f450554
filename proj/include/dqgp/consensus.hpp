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
 * @file consensus.hpp
 * Consensus Riemannian ADMM on the torus.
 *
 * One round, for penalty rho and agents m = 1..M:
 *   z      = circular mean of Pi_T(theta_m + psi_m / rho)
 *   theta_m = R_z( -(grad L_m(z) + psi_m) / (rho + L_m) )
 *   psi_m  += rho Log_z(theta_m)
 * followed by the residuals r_pri = [d(theta_m, z)]_m and
 * r_dual = rho d(z, z_prev). The coordinator owns z; each agent owns its
 * (theta_m, psi_m). Per-agent work may run concurrently; every reduction
 * over agents runs in id order.
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "parallel.hpp"
#include "torus.hpp"

namespace dqgp::consensus {

struct AgentState {
    std::size_t id{0};
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    TorusPoint theta;
    TangentVector psi;
    double lipschitz{100.0};
};

/// What a gradient provider reports for one agent at the consensus point.
struct LocalEval {
    double loss{0.0};
    TangentVector grad;
    std::size_t gram_evaluations{0};
};

struct ResidualRecord {
    std::size_t iteration{0};
    double r_pri{0.0};
    double r_dual{0.0};
    double lyapunov{0.0};
};

struct Residuals {
    double primal{0.0};
    double dual{std::numeric_limits<double>::infinity()};
};

struct ConsensusState {
    TorusPoint z;
    std::size_t iteration{0};
    double rho{100.0};
    std::vector<ResidualRecord> history;
    std::size_t degenerate_means{0};
};

/// z = circular_mean({Pi_T(theta_m + psi_m / rho)}).
inline torus::CircularMean
consensus_update(const std::vector<AgentState> &agents, double rho) {
    if (agents.empty()) {
        throw ConfigError("consensus needs at least one agent");
    }
    if (!(rho > 0.0)) {
        throw ConfigError("penalty rho must be positive");
    }
    std::vector<TorusPoint> phi;
    phi.reserve(agents.size());
    for (const auto &a : agents) {
        torus::detail::check_same_dim(a.theta.dim(), a.psi.dim(),
                                      "consensus_update");
        phi.emplace_back(Eigen::VectorXd(a.theta.coords() + a.psi.coords / rho));
    }
    return torus::circular_mean(phi);
}

/// R_z( -(grad + psi) / (rho + L) ).
inline TorusPoint local_update(const AgentState &agent, const TorusPoint &z,
                               const TangentVector &grad, double rho) {
    if (!grad.coords.allFinite()) {
        throw NumericError("local gradient is not finite");
    }
    const double step = 1.0 / (rho + agent.lipschitz);
    return torus::retract(
        z, TangentVector(Eigen::VectorXd(-(grad.coords + agent.psi.coords) * step)));
}

/// psi + rho Log_z(theta_new).
inline TangentVector dual_update(const AgentState &agent, const TorusPoint &z,
                                 const TorusPoint &theta_new, double rho) {
    return TangentVector(
        Eigen::VectorXd(agent.psi.coords + rho * torus::logmap(z, theta_new).coords));
}

/// (||[d(theta_m, z)]_m||, rho d(z, z_prev)); dual is +inf without z_prev.
inline Residuals residuals(const std::vector<AgentState> &agents,
                           const TorusPoint &z,
                           const std::optional<TorusPoint> &z_prev,
                           double rho) {
    Residuals r;
    double s = 0.0;
    for (const auto &a : agents) {
        const double d = torus::distance(a.theta, z);
        s += d * d;
    }
    r.primal = std::sqrt(s);
    if (z_prev) {
        r.dual = rho * torus::distance(z, *z_prev);
    }
    return r;
}

/**
 * V = sum_m [L_m(z) + <psi_m, Log_z theta_m> + rho/2 d^2(z, theta_m)]
 *     + 1/(2 rho) sum_m ||psi_m||^2
 * with `losses[m]` = L_m(z).
 */
inline double lyapunov(const std::vector<AgentState> &agents,
                       const TorusPoint &z, double rho,
                       const std::vector<double> &losses) {
    if (losses.size() != agents.size()) {
        throw StructuralError("lyapunov: one loss per agent required");
    }
    double v = 0.0;
    double dual_sq = 0.0;
    for (std::size_t m = 0; m < agents.size(); ++m) {
        const auto &a = agents[m];
        const TangentVector log = torus::logmap(z, a.theta);
        v += losses[m] + a.psi.coords.dot(log.coords) +
             0.5 * rho * log.coords.squaredNorm();
        dual_sq += a.psi.coords.squaredNorm();
    }
    return v + dual_sq / (2.0 * rho);
}

struct StepReport {
    Residuals residuals;
    double lyapunov{0.0};
    std::vector<double> local_losses;
    /// sum_m grad L_m(z^{s+1})
    TangentVector gradient_sum;
    std::size_t gram_evaluations{0};
    bool degenerate_mean{false};
};

/**
 * One full DR-ADMM round. `provider(agent, z)` returns the agent's
 * LocalEval at z. An error raised for any agent aborts the round with
 * the agent id in the message; agents and state are then untouched.
 */
template <class Provider>
StepReport dr_admm_step(std::vector<AgentState> &agents, ConsensusState &state,
                        Provider &&provider, std::size_t jobs = 1) {
    const double rho = state.rho;
    const auto mean = consensus_update(agents, rho);
    const TorusPoint z = mean.point;

    std::vector<LocalEval> evals(agents.size());
    std::vector<TorusPoint> thetas(agents.size());
    std::vector<TangentVector> psis(agents.size());
    parallel_for(agents.size(), jobs, [&](std::size_t m) {
        try {
            evals[m] = provider(static_cast<const AgentState &>(agents[m]), z);
            if (evals[m].grad.dim() != z.dim()) {
                throw StructuralError("gradient dimension mismatch");
            }
            thetas[m] = local_update(agents[m], z, evals[m].grad, rho);
            psis[m] = dual_update(agents[m], z, thetas[m], rho);
        } catch (const Error &e) {
            throw Error(e.category(), "agent " + std::to_string(agents[m].id) +
                                          ": " + e.what());
        }
    });

    StepReport report;
    report.degenerate_mean = mean.degenerate_components > 0;
    report.gradient_sum = TangentVector::zero(z.dim());
    for (std::size_t m = 0; m < agents.size(); ++m) {
        agents[m].theta = thetas[m];
        agents[m].psi = psis[m];
        report.local_losses.push_back(evals[m].loss);
        report.gradient_sum.coords += evals[m].grad.coords;
        report.gram_evaluations += evals[m].gram_evaluations;
    }
    const TorusPoint z_prev = state.z;
    state.z = z;
    state.iteration += 1;
    if (report.degenerate_mean) {
        ++state.degenerate_means;
    }
    report.residuals = residuals(agents, z, z_prev, rho);
    report.lyapunov = lyapunov(agents, z, rho, report.local_losses);
    state.history.push_back({state.iteration, report.residuals.primal,
                             report.residuals.dual, report.lyapunov});
    return report;
}

/**
 * theta_m ~ U[0, pi)^P seeded with master_seed + m, psi_m = 0 and
 * z = circular mean of the theta_m.
 */
inline std::pair<std::vector<AgentState>, ConsensusState>
initialize(std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>> data,
           std::size_t num_params, std::uint64_t master_seed, double rho,
           const std::vector<double> &lipschitz) {
    if (data.empty()) {
        throw ConfigError("at least one agent is required");
    }
    if (!lipschitz.empty() && lipschitz.size() != data.size()) {
        throw ConfigError("one Lipschitz constant per agent is required");
    }
    std::vector<AgentState> agents;
    std::vector<TorusPoint> thetas;
    for (std::size_t m = 0; m < data.size(); ++m) {
        std::mt19937_64 rng(master_seed + m);
        std::uniform_real_distribution<double> u(0.0, torus::kPeriod);
        Eigen::VectorXd t(static_cast<Eigen::Index>(num_params));
        for (auto &v : t) {
            v = u(rng);
        }
        AgentState a;
        a.id = m;
        a.X = std::move(data[m].first);
        a.y = std::move(data[m].second);
        a.theta = TorusPoint(t);
        a.psi = TangentVector::zero(num_params);
        a.lipschitz = lipschitz.empty() ? 100.0 : lipschitz[m];
        if (!(a.lipschitz > 0.0)) {
            throw ConfigError("Lipschitz constants must be positive");
        }
        thetas.push_back(a.theta);
        agents.push_back(std::move(a));
    }
    ConsensusState state;
    state.rho = rho;
    state.z = torus::circular_mean(thetas).point;
    return {std::move(agents), std::move(state)};
}

/// CSV trace rows "s,r_pri,r_dual,V".
inline void write_trace(std::ostream &os,
                        const std::vector<ResidualRecord> &history) {
    os << "s,r_pri,r_dual,V\n";
    os.precision(17);
    for (const auto &r : history) {
        os << r.iteration << ',' << r.r_pri << ',' << r.r_dual << ','
           << r.lyapunov << '\n';
    }
}

} // namespace dqgp::consensus
