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
 * @file statevec.hpp
 * Dense statevector simulator for small registers.
 *
 * Amplitudes are stored little-endian: qubit 0 is the least-significant
 * bit of the basis index. Rotation conventions are
 * RX(t) = exp(-i t X / 2), RY(t) = exp(-i t Y / 2),
 * RZ(t) = diag(e^{-i t/2}, e^{+i t/2}) and P(t) = diag(1, e^{i t}).
 * Two-qubit gates take (control, target) in that order; SWAP is symmetric.
 */
#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace dqgp::statevec {

using Complex = std::complex<double>;

inline constexpr std::size_t kMaxQubits = 10;

enum class GateKind { H, P, RX, RY, RZ, CNOT, CRZ, SWAP };

constexpr std::string_view to_string(GateKind k) {
    switch (k) {
    case GateKind::H:
        return "H";
    case GateKind::P:
        return "P";
    case GateKind::RX:
        return "RX";
    case GateKind::RY:
        return "RY";
    case GateKind::RZ:
        return "RZ";
    case GateKind::CNOT:
        return "CNOT";
    case GateKind::CRZ:
        return "CRZ";
    case GateKind::SWAP:
        return "SWAP";
    }
    return "?";
}

inline GateKind gate_kind_from_string(std::string_view s) {
    for (auto k : {GateKind::H, GateKind::P, GateKind::RX, GateKind::RY,
                   GateKind::RZ, GateKind::CNOT, GateKind::CRZ,
                   GateKind::SWAP}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    throw FormatError("unknown gate kind '" + std::string(s) + "'");
}

constexpr std::size_t arity(GateKind k) {
    switch (k) {
    case GateKind::CNOT:
    case GateKind::CRZ:
    case GateKind::SWAP:
        return 2;
    default:
        return 1;
    }
}

constexpr bool is_parametric(GateKind k) {
    return k == GateKind::P || k == GateKind::RX || k == GateKind::RY ||
           k == GateKind::RZ || k == GateKind::CRZ;
}

struct Gate {
    GateKind kind{GateKind::H};
    std::array<std::size_t, 2> targets{0, 0};
    double angle{0.0};

    static Gate single(GateKind k, std::size_t q, double angle = 0.0) {
        return Gate{k, {q, q}, angle};
    }
    static Gate two(GateKind k, std::size_t a, std::size_t b,
                    double angle = 0.0) {
        return Gate{k, {a, b}, angle};
    }
};

class StateVector {
  public:
    /// |0...0> on q qubits.
    explicit StateVector(std::size_t num_qubits) : num_qubits_(num_qubits) {
        if (num_qubits < 1 || num_qubits > kMaxQubits) {
            throw ConfigError("qubit count " + std::to_string(num_qubits) +
                              " outside [1, " + std::to_string(kMaxQubits) +
                              "]");
        }
        amps_.assign(std::size_t{1} << num_qubits, Complex{0.0, 0.0});
        amps_[0] = 1.0;
    }

    StateVector(std::size_t num_qubits, std::vector<Complex> amplitudes)
        : num_qubits_(num_qubits), amps_(std::move(amplitudes)) {
        if (num_qubits < 1 || num_qubits > kMaxQubits) {
            throw ConfigError("qubit count out of range");
        }
        if (amps_.size() != (std::size_t{1} << num_qubits)) {
            throw StructuralError("amplitude vector length must be 2^q");
        }
    }

    [[nodiscard]] std::size_t num_qubits() const noexcept {
        return num_qubits_;
    }
    [[nodiscard]] std::size_t size() const noexcept { return amps_.size(); }
    [[nodiscard]] const std::vector<Complex> &amplitudes() const noexcept {
        return amps_;
    }
    [[nodiscard]] const Complex &operator[](std::size_t i) const {
        return amps_[i];
    }

    [[nodiscard]] double norm() const {
        double s = 0.0;
        for (const auto &a : amps_) {
            s += std::norm(a);
        }
        return std::sqrt(s);
    }

    void apply(const Gate &g);

  private:
    void check_target(std::size_t q) const {
        if (q >= num_qubits_) {
            throw StructuralError("gate target " + std::to_string(q) +
                                  " out of range for " +
                                  std::to_string(num_qubits_) + " qubits");
        }
    }

    void apply_1q(std::size_t q, const std::array<Complex, 4> &m) {
        const std::size_t bit = std::size_t{1} << q;
        for (std::size_t i = 0; i < amps_.size(); ++i) {
            if (i & bit) {
                continue;
            }
            const Complex a0 = amps_[i];
            const Complex a1 = amps_[i | bit];
            amps_[i] = m[0] * a0 + m[1] * a1;
            amps_[i | bit] = m[2] * a0 + m[3] * a1;
        }
    }

    std::size_t num_qubits_;
    std::vector<Complex> amps_;
};

/// 2x2 matrix of a single-qubit gate in row-major order.
inline std::array<Complex, 4> single_qubit_matrix(GateKind kind,
                                                  double angle) {
    using namespace std::complex_literals;
    const double c = std::cos(angle / 2.0);
    const double s = std::sin(angle / 2.0);
    switch (kind) {
    case GateKind::H: {
        const double r = 1.0 / std::sqrt(2.0);
        return {r, r, r, -r};
    }
    case GateKind::P:
        return {1.0, 0.0, 0.0, std::polar(1.0, angle)};
    case GateKind::RX:
        return {c, -1i * s, -1i * s, c};
    case GateKind::RY:
        return {c, -s, s, c};
    case GateKind::RZ:
        return {std::polar(1.0, -angle / 2.0), 0.0, 0.0,
                std::polar(1.0, angle / 2.0)};
    default:
        throw StructuralError("not a single-qubit gate: " +
                              std::string(to_string(kind)));
    }
}

inline void StateVector::apply(const Gate &g) {
    const std::size_t n = arity(g.kind);
    check_target(g.targets[0]);
    if (n == 1) {
        apply_1q(g.targets[0], single_qubit_matrix(g.kind, g.angle));
        return;
    }
    check_target(g.targets[1]);
    if (g.targets[0] == g.targets[1]) {
        throw StructuralError("two-qubit gate targets must be distinct");
    }
    const std::size_t c = std::size_t{1} << g.targets[0];
    const std::size_t t = std::size_t{1} << g.targets[1];
    switch (g.kind) {
    case GateKind::CNOT:
        for (std::size_t i = 0; i < amps_.size(); ++i) {
            if ((i & c) && !(i & t)) {
                std::swap(amps_[i], amps_[i | t]);
            }
        }
        break;
    case GateKind::CRZ: {
        const Complex lo = std::polar(1.0, -g.angle / 2.0);
        const Complex hi = std::polar(1.0, g.angle / 2.0);
        for (std::size_t i = 0; i < amps_.size(); ++i) {
            if (i & c) {
                amps_[i] *= (i & t) ? hi : lo;
            }
        }
        break;
    }
    case GateKind::SWAP:
        for (std::size_t i = 0; i < amps_.size(); ++i) {
            if ((i & c) && !(i & t)) {
                std::swap(amps_[i], amps_[(i & ~c) | t]);
            }
        }
        break;
    default:
        throw StructuralError("not a two-qubit gate");
    }
}

inline StateVector init_zero(std::size_t q) { return StateVector(q); }

inline StateVector apply_gate(StateVector state, const Gate &gate) {
    state.apply(gate);
    return state;
}

enum class Pauli : std::uint8_t { X, Y, Z };

/// Tensor product of Pauli factors; identity on qubits not listed.
class PauliString {
  public:
    PauliString() = default;
    PauliString(std::initializer_list<std::pair<std::size_t, Pauli>> f) {
        for (auto [q, p] : f) {
            set(q, p);
        }
    }

    void set(std::size_t qubit, Pauli p) {
        if (qubit >= kMaxQubits) {
            throw StructuralError("Pauli factor index out of range");
        }
        const std::uint32_t bit = 1U << qubit;
        x_mask_ &= ~bit;
        z_mask_ &= ~bit;
        y_count_ -= (y_mask_ & bit) ? 1 : 0;
        y_mask_ &= ~bit;
        switch (p) {
        case Pauli::X:
            x_mask_ |= bit;
            break;
        case Pauli::Y:
            x_mask_ |= bit;
            z_mask_ |= bit;
            y_mask_ |= bit;
            ++y_count_;
            break;
        case Pauli::Z:
            z_mask_ |= bit;
            break;
        }
    }

    [[nodiscard]] std::uint32_t x_mask() const noexcept { return x_mask_; }
    [[nodiscard]] std::uint32_t z_mask() const noexcept { return z_mask_; }
    [[nodiscard]] int y_count() const noexcept { return y_count_; }
    [[nodiscard]] std::size_t max_qubit() const noexcept {
        const std::uint32_t all = x_mask_ | z_mask_;
        return all == 0 ? 0 : static_cast<std::size_t>(std::bit_width(all));
    }

    [[nodiscard]] std::string to_string() const {
        std::string out;
        for (std::size_t q = 0; q < kMaxQubits; ++q) {
            const std::uint32_t bit = 1U << q;
            if (!((x_mask_ | z_mask_) & bit)) {
                continue;
            }
            char c = (y_mask_ & bit) ? 'Y' : ((x_mask_ & bit) ? 'X' : 'Z');
            out += c;
            out += std::to_string(q);
        }
        return out.empty() ? "I" : out;
    }

  private:
    std::uint32_t x_mask_ = 0;
    std::uint32_t z_mask_ = 0;
    std::uint32_t y_mask_ = 0;
    int y_count_ = 0;
};

/**
 * Re <psi|O|psi> for a Pauli string O. Uses O|i> = phase(i) |i ^ xmask>
 * with phase(i) = i^{#Y} (-1)^{popcount(i & zmask)}.
 */
inline double expectation(const StateVector &state, const PauliString &obs) {
    if (obs.max_qubit() > state.num_qubits()) {
        throw StructuralError("observable acts outside the register");
    }
    const auto &a = state.amplitudes();
    const std::uint32_t xm = obs.x_mask();
    const std::uint32_t zm = obs.z_mask();
    Complex acc{0.0, 0.0};
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double sign =
            (std::popcount(static_cast<std::uint32_t>(i) & zm) & 1) ? -1.0
                                                                   : 1.0;
        acc += std::conj(a[i ^ xm]) * a[i] * sign;
    }
    // i^{#Y}
    static constexpr std::array<Complex, 4> kIPow{
        Complex{1, 0}, Complex{0, 1}, Complex{-1, 0}, Complex{0, -1}};
    acc *= kIPow[static_cast<std::size_t>(obs.y_count() & 3)];
    return acc.real();
}

} // namespace dqgp::statevec
