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
 * @file torus.hpp
 * The flat torus T^P of period pi that houses rotational circuit
 * parameters.
 *
 * Points are stored canonically in [0, pi). Tangent vectors are plain
 * Euclidean vectors; since the torus is flat, transport is the identity
 * and the Riemannian gradient equals the Euclidean one.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace dqgp::torus {

inline constexpr double kPeriod = std::numbers::pi;

/// theta mod pi into [0, pi).
inline double project(double theta) {
    if (!std::isfinite(theta)) {
        throw NumericError("cannot project a non-finite angle onto the torus");
    }
    double r = std::fmod(theta, kPeriod);
    if (r < 0.0) {
        r += kPeriod;
    }
    // fmod of a tiny negative can round up to exactly pi
    if (r >= kPeriod) {
        r = 0.0;
    }
    return r;
}

/// [(theta + pi/2) mod pi] - pi/2, the minimal representative in
/// [-pi/2, pi/2).
inline double wrap(double theta) {
    return project(theta + kPeriod / 2.0) - kPeriod / 2.0;
}

inline Eigen::VectorXd wrap(const Eigen::VectorXd &v) {
    Eigen::VectorXd out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out[i] = wrap(v[i]);
    }
    return out;
}

/// Element of the tangent space (radians); finite components.
struct TangentVector {
    Eigen::VectorXd coords;

    TangentVector() = default;
    explicit TangentVector(Eigen::VectorXd c) : coords(std::move(c)) {}
    static TangentVector zero(std::size_t dim) {
        return TangentVector(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)));
    }

    [[nodiscard]] std::size_t dim() const {
        return static_cast<std::size_t>(coords.size());
    }
    [[nodiscard]] double norm() const { return coords.norm(); }
};

/// Point on T^P; every component lies in [0, pi).
class TorusPoint {
  public:
    TorusPoint() = default;

    /// Projects the raw coordinates onto the torus.
    explicit TorusPoint(const Eigen::VectorXd &raw) : coords_(raw.size()) {
        for (Eigen::Index i = 0; i < raw.size(); ++i) {
            coords_[i] = project(raw[i]);
        }
    }
    TorusPoint(std::initializer_list<double> raw)
        : TorusPoint(Eigen::Map<const Eigen::VectorXd>(
              raw.begin(), static_cast<Eigen::Index>(raw.size()))) {}

    static TorusPoint zero(std::size_t dim) {
        return TorusPoint(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)));
    }

    [[nodiscard]] std::size_t dim() const {
        return static_cast<std::size_t>(coords_.size());
    }
    [[nodiscard]] const Eigen::VectorXd &coords() const noexcept {
        return coords_;
    }
    [[nodiscard]] double operator[](std::size_t i) const {
        return coords_[static_cast<Eigen::Index>(i)];
    }

    friend bool operator==(const TorusPoint &a, const TorusPoint &b) {
        return a.coords_.size() == b.coords_.size() &&
               a.coords_ == b.coords_;
    }

  private:
    Eigen::VectorXd coords_;
};

inline TorusPoint project(const Eigen::VectorXd &theta) {
    return TorusPoint(theta);
}

namespace detail {
inline void check_same_dim(std::size_t a, std::size_t b, const char *op) {
    if (a != b) {
        throw StructuralError(std::string(op) + ": dimension mismatch (" +
                              std::to_string(a) + " vs " + std::to_string(b) +
                              ")");
    }
}
} // namespace detail

/// ||W(a - b)||_2
inline double distance(const TorusPoint &a, const TorusPoint &b) {
    detail::check_same_dim(a.dim(), b.dim(), "distance");
    // difference taken as max - min so that d(a, b) == d(b, a) bitwise
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        const double w = wrap(std::max(a[i], b[i]) - std::min(a[i], b[i]));
        s += w * w;
    }
    return std::sqrt(s);
}

/// Pi_T(base + v)
inline TorusPoint retract(const TorusPoint &base, const TangentVector &v) {
    detail::check_same_dim(base.dim(), v.dim(), "retract");
    return TorusPoint(Eigen::VectorXd(base.coords() + v.coords));
}

/**
 * Tangent vector from `base` towards `target`. Returns the minimal
 * representative W(target - base) in [-pi/2, pi/2) so that
 * ||logmap(b, t)|| == distance(b, t).
 */
inline TangentVector logmap(const TorusPoint &base, const TorusPoint &target) {
    detail::check_same_dim(base.dim(), target.dim(), "logmap");
    return TangentVector(wrap(Eigen::VectorXd(target.coords() - base.coords())));
}

inline TangentVector transport(const TangentVector &v) { return v; }

/// <W(a), W(b)>
inline double inner(const Eigen::VectorXd &a, const Eigen::VectorXd &b) {
    detail::check_same_dim(static_cast<std::size_t>(a.size()),
                           static_cast<std::size_t>(b.size()), "inner");
    return wrap(a).dot(wrap(b));
}
inline double inner(const TorusPoint &a, const TorusPoint &b) {
    return inner(a.coords(), b.coords());
}
inline double inner(const TangentVector &a, const TangentVector &b) {
    return inner(a.coords, b.coords);
}

struct CircularMean {
    TorusPoint point;
    /// Components whose resultant vanished and were set to 0.
    std::size_t degenerate_components = 0;
};

inline constexpr double kDegenerateResultant = 1e-12;

/**
 * Componentwise period-pi circular mean
 *   z_p = Pi_T( atan2(sum_m w_m sin 2 phi_mp, sum_m w_m cos 2 phi_mp) / 2 ).
 */
inline CircularMean circular_mean(std::span<const TorusPoint> points,
                                  std::span<const double> weights = {}) {
    if (points.empty()) {
        throw ConfigError("circular_mean needs at least one point");
    }
    if (!weights.empty() && weights.size() != points.size()) {
        throw StructuralError("circular_mean: weight count mismatch");
    }
    const std::size_t dim = points.front().dim();
    Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    for (std::size_t m = 0; m < points.size(); ++m) {
        detail::check_same_dim(dim, points[m].dim(), "circular_mean");
        const double w = weights.empty() ? 1.0 : weights[m];
        for (std::size_t p = 0; p < dim; ++p) {
            const double phi2 = 2.0 * points[m][p];
            s[static_cast<Eigen::Index>(p)] += w * std::sin(phi2);
            c[static_cast<Eigen::Index>(p)] += w * std::cos(phi2);
        }
    }
    CircularMean out;
    Eigen::VectorXd z(static_cast<Eigen::Index>(dim));
    for (Eigen::Index p = 0; p < z.size(); ++p) {
        // coincident coordinates are returned as is, without the trig round trip
        const auto pp = static_cast<std::size_t>(p);
        const bool coincident =
            std::all_of(points.begin(), points.end(), [&](const TorusPoint &t) {
                return t[pp] == points.front()[pp];
            });
        if (coincident && (std::abs(s[p]) > 0.0 || std::abs(c[p]) > 0.0)) {
            z[p] = points.front()[pp];
        } else if (std::abs(s[p]) < kDegenerateResultant &&
            std::abs(c[p]) < kDegenerateResultant) {
            z[p] = 0.0;
            ++out.degenerate_components;
        } else {
            z[p] = 0.5 * std::atan2(s[p], c[p]);
        }
    }
    out.point = TorusPoint(z);
    return out;
}

inline CircularMean circular_mean(const std::vector<TorusPoint> &points) {
    return circular_mean(std::span<const TorusPoint>(points));
}

} // namespace dqgp::torus

namespace dqgp {
using torus::TangentVector;
using torus::TorusPoint;
} // namespace dqgp
