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
 * @file qkernels.hpp
 * Quantum kernels (fidelity, projected) and the classical squared-
 * exponential kernel used by the baselines, plus gram assembly.
 */
#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "encodings.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "statevec.hpp"
#include "torus.hpp"

namespace dqgp::qkernels {

using encodings::CircuitSpec;
using statevec::Pauli;
using statevec::PauliString;

enum class ObservableKind { PauliZGlobal, LocalZ, MixedPairs, XyzPerQubit };

constexpr std::string_view to_string(ObservableKind k) {
    switch (k) {
    case ObservableKind::PauliZGlobal:
        return "pauli_z_global";
    case ObservableKind::LocalZ:
        return "local_z";
    case ObservableKind::MixedPairs:
        return "mixed_pairs";
    case ObservableKind::XyzPerQubit:
        return "xyz_per_qubit";
    }
    return "?";
}

inline ObservableKind observable_kind_from_string(std::string_view s) {
    for (auto k : {ObservableKind::PauliZGlobal, ObservableKind::LocalZ,
                   ObservableKind::MixedPairs, ObservableKind::XyzPerQubit}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    throw ConfigError("unknown observable kind '" + std::string(s) + "'");
}

/**
 * Measured observables of a projected kernel:
 *  - pauli_z_global: Z_0 Z_1 ... Z_{q-1}
 *  - local_z:        Z_i for each qubit
 *  - mixed_pairs:    Z_i Z_{i+1} and X_i Y_{i+1} for adjacent pairs
 *  - xyz_per_qubit:  X_i, Y_i, Z_i for each qubit (3q features)
 */
struct ObservableSet {
    ObservableKind kind{ObservableKind::XyzPerQubit};
    std::vector<PauliString> strings;

    static ObservableSet make(ObservableKind kind, std::size_t q) {
        ObservableSet out{kind, {}};
        switch (kind) {
        case ObservableKind::PauliZGlobal: {
            PauliString s;
            for (std::size_t i = 0; i < q; ++i) {
                s.set(i, Pauli::Z);
            }
            out.strings.push_back(s);
            break;
        }
        case ObservableKind::LocalZ:
            for (std::size_t i = 0; i < q; ++i) {
                out.strings.push_back(PauliString{{i, Pauli::Z}});
            }
            break;
        case ObservableKind::MixedPairs:
            if (q < 2) {
                throw ConfigError("mixed_pairs observables need q >= 2");
            }
            for (std::size_t i = 0; i + 1 < q; ++i) {
                out.strings.push_back(
                    PauliString{{i, Pauli::Z}, {i + 1, Pauli::Z}});
                out.strings.push_back(
                    PauliString{{i, Pauli::X}, {i + 1, Pauli::Y}});
            }
            break;
        case ObservableKind::XyzPerQubit:
            for (std::size_t i = 0; i < q; ++i) {
                out.strings.push_back(PauliString{{i, Pauli::X}});
                out.strings.push_back(PauliString{{i, Pauli::Y}});
                out.strings.push_back(PauliString{{i, Pauli::Z}});
            }
            break;
        }
        return out;
    }

    [[nodiscard]] std::size_t size() const { return strings.size(); }
};

enum class OuterKind { Gaussian, Matern15 };

/// gaussian: exp(-gamma r^2); matern15: (1 + sqrt3 r / l) exp(-sqrt3 r / l).
struct OuterKernel {
    OuterKind kind{OuterKind::Gaussian};
    double parameter{1.0};

    static OuterKernel gaussian(double gamma) {
        if (!(gamma > 0.0)) {
            throw ConfigError("gaussian outer kernel needs gamma > 0");
        }
        return {OuterKind::Gaussian, gamma};
    }
    static OuterKernel matern15(double lengthscale) {
        if (!(lengthscale > 0.0)) {
            throw ConfigError("matern outer kernel needs lengthscale > 0");
        }
        return {OuterKind::Matern15, lengthscale};
    }

    [[nodiscard]] double from_sq_dist(double r2) const {
        switch (kind) {
        case OuterKind::Gaussian:
            return std::exp(-parameter * r2);
        case OuterKind::Matern15: {
            const double a = std::sqrt(3.0 * std::max(r2, 0.0)) / parameter;
            return (1.0 + a) * std::exp(-a);
        }
        }
        return 0.0;
    }

    [[nodiscard]] double operator()(const Eigen::VectorXd &f1,
                                    const Eigen::VectorXd &f2) const {
        return from_sq_dist((f1 - f2).squaredNorm());
    }
};

/// |<psi_x|psi_x'>|^2
inline double fidelity_kernel(const CircuitSpec &spec, const Eigen::VectorXd &x1,
                              const Eigen::VectorXd &x2,
                              const TorusPoint &theta) {
    const auto a = encodings::evaluate(spec, x1, theta);
    const auto b = encodings::evaluate(spec, x2, theta);
    statevec::Complex dot{0.0, 0.0};
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += std::conj(a[i]) * b[i];
    }
    return std::norm(dot);
}

/// Vector of <O_k> over the observable set.
inline Eigen::VectorXd pqk_features(const CircuitSpec &spec,
                                    const Eigen::VectorXd &x,
                                    const TorusPoint &theta,
                                    const ObservableSet &obs) {
    const auto psi = encodings::evaluate(spec, x, theta);
    Eigen::VectorXd f(static_cast<Eigen::Index>(obs.size()));
    for (std::size_t k = 0; k < obs.size(); ++k) {
        f[static_cast<Eigen::Index>(k)] =
            statevec::expectation(psi, obs.strings[k]);
    }
    return f;
}

inline double pqk_kernel(const CircuitSpec &spec, const Eigen::VectorXd &x1,
                         const Eigen::VectorXd &x2, const TorusPoint &theta,
                         const ObservableSet &obs, const OuterKernel &outer) {
    return outer(pqk_features(spec, x1, theta, obs),
                 pqk_features(spec, x2, theta, obs));
}

/// A projected quantum kernel: circuit, measured observables and outer
/// kernel. `jobs` bounds the threads used when projecting many inputs.
struct QuantumKernel {
    CircuitSpec circuit;
    ObservableSet observables;
    OuterKernel outer;
    std::size_t jobs = 1;
    /// Optional counter bumped once per features() pass over a data matrix.
    std::atomic<std::size_t> *passes = nullptr;

    [[nodiscard]] std::size_t num_params() const {
        return circuit.num_params();
    }

    /// Row n holds the projected features of X.row(n).
    [[nodiscard]] Eigen::MatrixXd features(const Eigen::MatrixXd &X,
                                           const TorusPoint &theta) const {
        if (passes != nullptr) {
            passes->fetch_add(1, std::memory_order_relaxed);
        }
        Eigen::MatrixXd F(X.rows(),
                          static_cast<Eigen::Index>(observables.size()));
        parallel_for(static_cast<std::size_t>(X.rows()), jobs,
                     [&](std::size_t n) {
                         const auto i = static_cast<Eigen::Index>(n);
                         F.row(i) = pqk_features(circuit,
                                                 X.row(i).transpose(), theta,
                                                 observables)
                                        .transpose();
                     });
        return F;
    }

    /// Outer kernel between two feature matrices.
    [[nodiscard]] Eigen::MatrixXd outer_gram(const Eigen::MatrixXd &F1,
                                             const Eigen::MatrixXd &F2) const {
        Eigen::MatrixXd K(F1.rows(), F2.rows());
        for (Eigen::Index i = 0; i < F1.rows(); ++i) {
            for (Eigen::Index j = 0; j < F2.rows(); ++j) {
                K(i, j) = outer.from_sq_dist((F1.row(i) - F2.row(j)).squaredNorm());
            }
        }
        return K;
    }

    /// Symmetric outer gram; fills the lower triangle by mirroring so the
    /// result is exactly symmetric.
    [[nodiscard]] Eigen::MatrixXd outer_gram(const Eigen::MatrixXd &F) const {
        const Eigen::Index n = F.rows();
        Eigen::MatrixXd K(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            K(i, i) = outer.from_sq_dist(0.0);
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double v =
                    outer.from_sq_dist((F.row(i) - F.row(j)).squaredNorm());
                K(i, j) = v;
                K(j, i) = v;
            }
        }
        return K;
    }
};

/// Kernel matrix K plus the diagonal noise sigma_eps^2 of C = K + s^2 I.
struct GramMatrix {
    Eigen::MatrixXd K;
    double noise_variance{0.0};

    [[nodiscard]] Eigen::MatrixXd covariance() const {
        Eigen::MatrixXd C = K;
        C.diagonal().array() += noise_variance;
        return C;
    }
    [[nodiscard]] Eigen::Index size() const { return K.rows(); }
};

/// N feature evaluations, then the outer kernel on all pairs.
inline GramMatrix gram(const QuantumKernel &kernel, const Eigen::MatrixXd &X,
                       const TorusPoint &theta, double noise_variance) {
    if (X.rows() < 1) {
        throw ConfigError("gram needs at least one input");
    }
    return {kernel.outer_gram(kernel.features(X, theta)), noise_variance};
}

/// sigma_f^2 exp(-||x - x'||^2 / (2 l^2)).
struct SquaredExponential {
    double lengthscale{1.0};
    double signal_variance{1.0};

    SquaredExponential(double ell, double sf2)
        : lengthscale(ell), signal_variance(sf2) {
        if (!(ell > 0.0) || !(sf2 > 0.0)) {
            throw ConfigError("squared-exponential parameters must be > 0");
        }
    }

    [[nodiscard]] double operator()(const Eigen::VectorXd &a,
                                    const Eigen::VectorXd &b) const {
        return signal_variance *
               std::exp(-(a - b).squaredNorm() /
                        (2.0 * lengthscale * lengthscale));
    }

    [[nodiscard]] Eigen::MatrixXd cross(const Eigen::MatrixXd &A,
                                        const Eigen::MatrixXd &B) const {
        Eigen::MatrixXd K(A.rows(), B.rows());
        const double inv = 1.0 / (2.0 * lengthscale * lengthscale);
        for (Eigen::Index i = 0; i < A.rows(); ++i) {
            for (Eigen::Index j = 0; j < B.rows(); ++j) {
                K(i, j) = signal_variance *
                          std::exp(-(A.row(i) - B.row(j)).squaredNorm() * inv);
            }
        }
        return K;
    }

    [[nodiscard]] Eigen::MatrixXd gram(const Eigen::MatrixXd &A) const {
        const Eigen::Index n = A.rows();
        Eigen::MatrixXd K(n, n);
        const double inv = 1.0 / (2.0 * lengthscale * lengthscale);
        for (Eigen::Index i = 0; i < n; ++i) {
            K(i, i) = signal_variance;
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double v =
                    signal_variance *
                    std::exp(-(A.row(i) - A.row(j)).squaredNorm() * inv);
                K(i, j) = v;
                K(j, i) = v;
            }
        }
        return K;
    }

    [[nodiscard]] Eigen::VectorXd diag(const Eigen::MatrixXd &A) const {
        return Eigen::VectorXd::Constant(A.rows(), signal_variance);
    }
};

inline double classical_kernel(const Eigen::VectorXd &a,
                               const Eigen::VectorXd &b, double lengthscale,
                               double signal_variance) {
    return SquaredExponential(lengthscale, signal_variance)(a, b);
}

/// A quantum kernel evaluated at fixed circuit parameters, usable
/// wherever the GP code expects a kernel with cross/gram/diag.
struct BoundQuantumKernel {
    const QuantumKernel *kernel;
    TorusPoint theta;

    [[nodiscard]] Eigen::MatrixXd cross(const Eigen::MatrixXd &A,
                                        const Eigen::MatrixXd &B) const {
        return kernel->outer_gram(kernel->features(A, theta),
                                  kernel->features(B, theta));
    }
    [[nodiscard]] Eigen::MatrixXd gram(const Eigen::MatrixXd &A) const {
        return kernel->outer_gram(kernel->features(A, theta));
    }
    [[nodiscard]] Eigen::VectorXd diag(const Eigen::MatrixXd &A) const {
        return Eigen::VectorXd::Constant(A.rows(),
                                         kernel->outer.from_sq_dist(0.0));
    }
};

} // namespace dqgp::qkernels
