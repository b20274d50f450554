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
 * @file encodings.hpp
 * Parameterized encoding circuits U(x, theta) as declarative gate lists.
 *
 * Each gate template binds its angle to a constant, an input feature,
 * a trainable parameter, or a parameter-scaled Chebyshev feature
 * theta_p * arccos(clip(x_d / 3, -1, 1)).
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "statevec.hpp"
#include "torus.hpp"

namespace dqgp::encodings {

using statevec::Gate;
using statevec::GateKind;
using statevec::StateVector;

enum class BindingKind { Constant, Feature, Parameter, ChebyshevFeature };

/// Features are z-scored and clipped to [-3, 3]; the Chebyshev map
/// rescales by this bound before arccos.
inline constexpr double kFeatureBound = 3.0;

struct Binding {
    BindingKind kind{BindingKind::Constant};
    double constant{0.0};
    std::size_t feature{0};
    std::size_t param{0};

    static Binding fixed(double angle) {
        return {BindingKind::Constant, angle, 0, 0};
    }
    static Binding feature_of(std::size_t d) {
        return {BindingKind::Feature, 0.0, d, 0};
    }
    static Binding parameter(std::size_t p) {
        return {BindingKind::Parameter, 0.0, 0, p};
    }
    static Binding chebyshev(std::size_t p, std::size_t d) {
        return {BindingKind::ChebyshevFeature, 0.0, d, p};
    }

    [[nodiscard]] bool uses_feature() const {
        return kind == BindingKind::Feature ||
               kind == BindingKind::ChebyshevFeature;
    }
    [[nodiscard]] bool uses_param() const {
        return kind == BindingKind::Parameter ||
               kind == BindingKind::ChebyshevFeature;
    }
};

struct GateTemplate {
    GateKind kind{GateKind::H};
    std::size_t target0{0};
    std::size_t target1{0};
    Binding binding{};
};

inline double chebyshev_angle(double x) {
    return std::acos(std::clamp(x / kFeatureBound, -1.0, 1.0));
}

class CircuitSpec {
  public:
    /**
     * Validates the gate list: targets in range, feature indices below
     * input_dim and covering every feature, parameter slots below
     * num_params and each used at least once.
     */
    CircuitSpec(std::string family, std::size_t num_qubits,
                std::size_t num_layers, std::size_t input_dim,
                std::size_t num_params, std::vector<GateTemplate> gates)
        : family_(std::move(family)), num_qubits_(num_qubits),
          num_layers_(num_layers), input_dim_(input_dim),
          num_params_(num_params), gates_(std::move(gates)) {
        audit();
    }

    [[nodiscard]] const std::string &family() const { return family_; }
    [[nodiscard]] std::size_t num_qubits() const { return num_qubits_; }
    [[nodiscard]] std::size_t num_layers() const { return num_layers_; }
    [[nodiscard]] std::size_t input_dim() const { return input_dim_; }
    [[nodiscard]] std::size_t num_params() const { return num_params_; }
    [[nodiscard]] const std::vector<GateTemplate> &gates() const {
        return gates_;
    }

    /// Concrete gate for template `g` under (x, theta).
    [[nodiscard]] Gate bind(const GateTemplate &g, const Eigen::VectorXd &x,
                            const Eigen::VectorXd &theta) const {
        double angle = 0.0;
        switch (g.binding.kind) {
        case BindingKind::Constant:
            angle = g.binding.constant;
            break;
        case BindingKind::Feature:
            angle = x[static_cast<Eigen::Index>(g.binding.feature)];
            break;
        case BindingKind::Parameter:
            angle = theta[static_cast<Eigen::Index>(g.binding.param)];
            break;
        case BindingKind::ChebyshevFeature:
            angle = theta[static_cast<Eigen::Index>(g.binding.param)] *
                    chebyshev_angle(
                        x[static_cast<Eigen::Index>(g.binding.feature)]);
            break;
        }
        return Gate{g.kind, {g.target0, g.target1}, angle};
    }

  private:
    void audit() const {
        if (num_qubits_ < 1 || num_qubits_ > statevec::kMaxQubits) {
            throw ConfigError("circuit qubit count out of range");
        }
        if (input_dim_ < 1) {
            throw ConfigError("circuit input dimension must be >= 1");
        }
        std::vector<bool> feature_used(input_dim_, false);
        std::vector<bool> param_used(num_params_, false);
        for (const auto &g : gates_) {
            if (g.target0 >= num_qubits_ ||
                (statevec::arity(g.kind) == 2 &&
                 (g.target1 >= num_qubits_ || g.target1 == g.target0))) {
                throw StructuralError("gate template has invalid targets");
            }
            if (g.binding.uses_feature()) {
                if (g.binding.feature >= input_dim_) {
                    throw StructuralError("gate binds feature out of range");
                }
                feature_used[g.binding.feature] = true;
            }
            if (g.binding.uses_param()) {
                if (g.binding.param >= num_params_) {
                    throw StructuralError("gate binds parameter out of range");
                }
                param_used[g.binding.param] = true;
            }
            if (g.binding.kind != BindingKind::Constant &&
                !statevec::is_parametric(g.kind)) {
                throw StructuralError("non-rotational gate cannot be bound");
            }
        }
        for (std::size_t d = 0; d < input_dim_; ++d) {
            if (!feature_used[d]) {
                throw StructuralError("feature " + std::to_string(d) +
                                      " is not bound by any gate");
            }
        }
        for (std::size_t p = 0; p < num_params_; ++p) {
            if (!param_used[p]) {
                throw StructuralError("parameter slot " + std::to_string(p) +
                                      " is never used");
            }
        }
    }

    std::string family_;
    std::size_t num_qubits_;
    std::size_t num_layers_;
    std::size_t input_dim_;
    std::size_t num_params_;
    std::vector<GateTemplate> gates_;
};

namespace detail {

inline void check_dims(std::size_t q, std::size_t layers, std::size_t dim) {
    if (q < 2) {
        throw ConfigError("encoding circuits need q >= 2 for the ring "
                          "entangler");
    }
    if (q > statevec::kMaxQubits) {
        throw ConfigError("too many qubits");
    }
    if (layers < 1 || dim < 1) {
        throw ConfigError("layers and input dimension must be >= 1");
    }
}

/// Encoding rounds per layer so that q * layers * rounds >= D.
inline std::size_t encoding_rounds(std::size_t q, std::size_t layers,
                                   std::size_t dim) {
    const std::size_t slots = q * layers;
    return std::max<std::size_t>(1, (dim + slots - 1) / slots);
}

inline void append_ring(std::vector<GateTemplate> &gates, std::size_t q,
                        std::size_t first_param) {
    for (std::size_t i = 0; i < q; ++i) {
        gates.push_back({GateKind::CRZ, i, (i + 1) % q,
                         Binding::parameter(first_param + i)});
    }
}

} // namespace detail

/**
 * Chebyshev circuit. Per layer l and qubit i:
 *   RX(theta_{2ql+i} * arccos(clip(x_d / 3)))   with d = (l q + i) mod D,
 * then a CRZ ring (i, i+1 mod q) on theta_{2ql+q+i}. P = 2 q layers.
 * When D exceeds q * layers, extra rounds of RY encodings reuse each
 * qubit's scale parameter so that every feature is bound.
 * `final_ry` appends a parameter-free RY(pi/4) on every qubit.
 */
inline CircuitSpec build_chebyshev(std::size_t q, std::size_t layers,
                                   std::size_t dim, bool final_ry = false) {
    detail::check_dims(q, layers, dim);
    const std::size_t rounds = detail::encoding_rounds(q, layers, dim);
    std::vector<GateTemplate> gates;
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t base = 2 * q * l;
        for (std::size_t r = 0; r < rounds; ++r) {
            for (std::size_t i = 0; i < q; ++i) {
                const std::size_t d = ((l * rounds + r) * q + i) % dim;
                gates.push_back({r == 0 ? GateKind::RX : GateKind::RY, i, i,
                                 Binding::chebyshev(base + i, d)});
            }
        }
        detail::append_ring(gates, q, base + q);
    }
    if (final_ry) {
        for (std::size_t i = 0; i < q; ++i) {
            gates.push_back({GateKind::RY, i, i,
                             Binding::fixed(std::numbers::pi / 4.0)});
        }
    }
    return CircuitSpec("chebyshev", q, layers, dim, 2 * q * layers,
                       std::move(gates));
}

/**
 * Hubregtsen circuit. Per layer l: H and RZ(x_d) on every qubit
 * (d = (l q + i) mod D, repeated in extra H/RZ rounds when D > q layers),
 * RY(theta_{2ql+i}) on every qubit, then a CRZ ring on theta_{2ql+q+i}.
 */
inline CircuitSpec build_hubregtsen(std::size_t q, std::size_t layers,
                                    std::size_t dim) {
    detail::check_dims(q, layers, dim);
    const std::size_t rounds = detail::encoding_rounds(q, layers, dim);
    std::vector<GateTemplate> gates;
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t base = 2 * q * l;
        for (std::size_t r = 0; r < rounds; ++r) {
            for (std::size_t i = 0; i < q; ++i) {
                gates.push_back({GateKind::H, i, i, Binding::fixed(0.0)});
            }
            for (std::size_t i = 0; i < q; ++i) {
                const std::size_t d = ((l * rounds + r) * q + i) % dim;
                gates.push_back({GateKind::RZ, i, i, Binding::feature_of(d)});
            }
        }
        for (std::size_t i = 0; i < q; ++i) {
            gates.push_back({GateKind::RY, i, i, Binding::parameter(base + i)});
        }
        detail::append_ring(gates, q, base + q);
    }
    return CircuitSpec("hubregtsen", q, layers, dim, 2 * q * layers,
                       std::move(gates));
}

/// U(x, theta)|0...0>.
inline StateVector evaluate(const CircuitSpec &spec, const Eigen::VectorXd &x,
                            const TorusPoint &theta) {
    if (static_cast<std::size_t>(x.size()) != spec.input_dim()) {
        throw StructuralError("feature vector has length " +
                              std::to_string(x.size()) + ", circuit expects " +
                              std::to_string(spec.input_dim()));
    }
    if (theta.dim() != spec.num_params()) {
        throw StructuralError("parameter vector has length " +
                              std::to_string(theta.dim()) +
                              ", circuit expects " +
                              std::to_string(spec.num_params()));
    }
    StateVector psi(spec.num_qubits());
    for (const auto &g : spec.gates()) {
        psi.apply(spec.bind(g, x, theta.coords()));
    }
    return psi;
}

// Text format, one record per line:
//   circuit <family>
//   qubits <q>
//   layers <l>
//   input_dim <D>
//   params <P>
//   gate <KIND> <t0> [<t1>] const <angle> | feature <d> | param <p>
//        | chebyshev <p> <d>

inline std::string to_text(const CircuitSpec &spec) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    os << "circuit " << spec.family() << '\n'
       << "qubits " << spec.num_qubits() << '\n'
       << "layers " << spec.num_layers() << '\n'
       << "input_dim " << spec.input_dim() << '\n'
       << "params " << spec.num_params() << '\n';
    for (const auto &g : spec.gates()) {
        os << "gate " << statevec::to_string(g.kind) << ' ' << g.target0;
        if (statevec::arity(g.kind) == 2) {
            os << ' ' << g.target1;
        }
        switch (g.binding.kind) {
        case BindingKind::Constant:
            os << " const " << g.binding.constant;
            break;
        case BindingKind::Feature:
            os << " feature " << g.binding.feature;
            break;
        case BindingKind::Parameter:
            os << " param " << g.binding.param;
            break;
        case BindingKind::ChebyshevFeature:
            os << " chebyshev " << g.binding.param << ' '
               << g.binding.feature;
            break;
        }
        os << '\n';
    }
    return os.str();
}

inline CircuitSpec from_text(const std::string &text) {
    std::istringstream is(text);
    std::string family;
    std::size_t q = 0, layers = 0, dim = 0, params = 0;
    std::vector<GateTemplate> gates;
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string &why) -> FormatError {
        return FormatError("circuit text line " + std::to_string(lineno) +
                           ": " + why);
    };
    while (std::getline(is, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) {
            continue;
        }
        if (key == "circuit") {
            ls >> family;
        } else if (key == "qubits") {
            ls >> q;
        } else if (key == "layers") {
            ls >> layers;
        } else if (key == "input_dim") {
            ls >> dim;
        } else if (key == "params") {
            ls >> params;
        } else if (key == "gate") {
            std::string kind;
            GateTemplate g;
            ls >> kind;
            g.kind = statevec::gate_kind_from_string(kind);
            ls >> g.target0;
            g.target1 = g.target0;
            if (statevec::arity(g.kind) == 2) {
                ls >> g.target1;
            }
            std::string bk;
            ls >> bk;
            if (bk == "const") {
                g.binding.kind = BindingKind::Constant;
                ls >> g.binding.constant;
            } else if (bk == "feature") {
                g.binding.kind = BindingKind::Feature;
                ls >> g.binding.feature;
            } else if (bk == "param") {
                g.binding.kind = BindingKind::Parameter;
                ls >> g.binding.param;
            } else if (bk == "chebyshev") {
                g.binding.kind = BindingKind::ChebyshevFeature;
                ls >> g.binding.param >> g.binding.feature;
            } else {
                throw fail("unknown binding '" + bk + "'");
            }
            if (ls.fail()) {
                throw fail("malformed gate record");
            }
            gates.push_back(g);
        } else {
            throw fail("unknown record '" + key + "'");
        }
        if (ls.fail()) {
            throw fail("malformed value");
        }
    }
    return CircuitSpec(family, q, layers, dim, params, std::move(gates));
}

} // namespace dqgp::encodings
