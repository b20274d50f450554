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
 * @file gp.hpp
 * Gaussian-process mathematics shared by every method: Cholesky with a
 * jitter ladder, negative log marginal likelihood and its gradient,
 * posterior prediction, and the NLPD / NRMSE metrics.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "qkernels.hpp"

namespace dqgp::gp {

inline constexpr double kLog2Pi = 1.8378770664093453; // log(2 pi)
inline constexpr double kVarianceFloor = 1e-12;
inline constexpr double kJitterStart = 1e-8;
inline constexpr double kJitterMax = 1e-2;

/// Lower Cholesky factor of C (+ jitter I when plain factorization fails).
struct Factorization {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter{0.0};
    std::vector<double> jitter_trail;

    [[nodiscard]] Eigen::MatrixXd lower() const { return llt.matrixL(); }
    [[nodiscard]] Eigen::Index size() const { return llt.rows(); }

    [[nodiscard]] double log_det() const {
        const auto &m = llt.matrixLLT();
        double s = 0.0;
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            s += std::log(m(i, i));
        }
        return 2.0 * s;
    }

    [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd &b) const {
        return llt.solve(b);
    }
    [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixXd &B) const {
        return llt.solve(B);
    }
    [[nodiscard]] Eigen::MatrixXd inverse() const {
        return llt.solve(Eigen::MatrixXd::Identity(size(), size()));
    }
};

/**
 * Factorizes C. On failure adds jitter 1e-8 and escalates by x10 up to
 * 1e-2; beyond that throws NumericError listing the attempted jitters.
 */
inline Factorization factorize(const Eigen::MatrixXd &C) {
    if (C.rows() != C.cols() || C.rows() < 1) {
        throw StructuralError("covariance must be square and non-empty");
    }
    if (!C.allFinite()) {
        throw NumericError("covariance has non-finite entries");
    }
    Factorization f;
    f.llt.compute(C);
    if (f.llt.info() == Eigen::Success) {
        return f;
    }
    for (double j = kJitterStart; j <= kJitterMax * (1.0 + 1e-9); j *= 10.0) {
        f.jitter_trail.push_back(j);
        Eigen::MatrixXd Cj = C;
        Cj.diagonal().array() += j;
        f.llt.compute(Cj);
        if (f.llt.info() == Eigen::Success) {
            f.jitter = j;
            return f;
        }
    }
    std::ostringstream os;
    os << "covariance is not positive definite (jitter tried:";
    for (double j : f.jitter_trail) {
        os << ' ' << j;
    }
    os << ')';
    throw NumericError(os.str());
}

/// 1/2 (y^T C^-1 y + log|C| + N log 2 pi) from a factorization.
inline double nll(const Factorization &f, const Eigen::VectorXd &y) {
    const Eigen::VectorXd alpha = f.solve(y);
    return 0.5 * (y.dot(alpha) + f.log_det() +
                  static_cast<double>(y.size()) * kLog2Pi);
}

inline double nll(const Eigen::MatrixXd &C, const Eigen::VectorXd &y) {
    if (C.rows() != y.size()) {
        throw StructuralError("nll: covariance and target sizes differ");
    }
    return nll(factorize(C), y);
}

inline double nll(const qkernels::GramMatrix &g, const Eigen::VectorXd &y) {
    return nll(g.covariance(), y);
}

/// (C^-1 - C^-1 y y^T C^-1); the gradient of the NLL with respect to any
/// parameter is 1/2 Tr(W dC/dparam) = 1/2 sum(W .* dC) for symmetric dC.
inline Eigen::MatrixXd gradient_weight(const Factorization &f,
                                       const Eigen::VectorXd &y) {
    const Eigen::VectorXd alpha = f.solve(y);
    Eigen::MatrixXd W = f.inverse();
    W.noalias() -= alpha * alpha.transpose();
    return W;
}

/// Squared-exponential hyperparameters, stored in log space.
struct ClassicalHyperparams {
    double log_lengthscale{0.0};
    double log_signal_std{0.0};
    double log_noise_std{std::log(0.1)};

    [[nodiscard]] double lengthscale() const {
        return std::exp(log_lengthscale);
    }
    [[nodiscard]] double signal_variance() const {
        return std::exp(2.0 * log_signal_std);
    }
    [[nodiscard]] double noise_variance() const {
        return std::exp(2.0 * log_noise_std);
    }
    [[nodiscard]] qkernels::SquaredExponential kernel() const {
        return {lengthscale(), signal_variance()};
    }

    [[nodiscard]] Eigen::Vector3d as_vector() const {
        return {log_lengthscale, log_signal_std, log_noise_std};
    }
    static ClassicalHyperparams from_vector(const Eigen::Vector3d &v) {
        return {v[0], v[1], v[2]};
    }
};

struct ClassicalLoss {
    double nll{0.0};
    Eigen::Vector3d grad{Eigen::Vector3d::Zero()};
};

/**
 * NLL and its gradient with respect to (log l, log sigma_f, log sigma_eps):
 *   dC/dlog l         = K .* r^2 / l^2
 *   dC/dlog sigma_f   = 2 K
 *   dC/dlog sigma_eps = 2 sigma_eps^2 I
 */
inline ClassicalLoss classical_loss(const Eigen::MatrixXd &X,
                                    const Eigen::VectorXd &y,
                                    const ClassicalHyperparams &h) {
    if (X.rows() != y.size() || X.rows() < 1) {
        throw StructuralError("classical_loss: data size mismatch");
    }
    const double ell2 = h.lengthscale() * h.lengthscale();
    const double sn2 = h.noise_variance();
    const Eigen::MatrixXd K = h.kernel().gram(X);
    Eigen::MatrixXd C = K;
    C.diagonal().array() += sn2;
    const Factorization f = factorize(C);
    const Eigen::MatrixXd W = gradient_weight(f, y);

    ClassicalLoss out;
    out.nll = nll(f, y);
    double g_ell = 0.0;
    const Eigen::Index n = X.rows();
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double r2 = (X.row(i) - X.row(j)).squaredNorm();
            g_ell += W(i, j) * K(i, j) * r2 / ell2;
        }
    }
    out.grad[0] = 0.5 * g_ell;
    out.grad[1] = 0.5 * 2.0 * (W.cwiseProduct(K)).sum();
    out.grad[2] = 0.5 * 2.0 * sn2 * W.trace();
    return out;
}

inline Eigen::Vector3d nll_grad_classical(const Eigen::MatrixXd &X,
                                          const Eigen::VectorXd &y,
                                          const ClassicalHyperparams &h) {
    return classical_loss(X, y, h).grad;
}

struct Prediction {
    double mean{0.0};
    double variance{1.0};
};

/**
 * A fitted GP: the kernel, training inputs, the factorized covariance
 * C = K + sigma_eps^2 I and alpha = C^-1 y. Immutable after construction.
 * Kernel must provide cross(A, B), gram(A) and diag(A).
 */
template <class Kernel> class GPModel {
  public:
    GPModel(Kernel kernel, Eigen::MatrixXd X, Eigen::VectorXd y,
            double noise_variance)
        : kernel_(std::move(kernel)), X_(std::move(X)), y_(std::move(y)),
          noise_variance_(noise_variance) {
        if (X_.rows() != y_.size() || X_.rows() < 1) {
            throw StructuralError("GPModel: data size mismatch");
        }
        Eigen::MatrixXd C = kernel_.gram(X_);
        C.diagonal().array() += noise_variance_;
        chol_ = factorize(C);
        alpha_ = chol_.solve(y_);
    }

    /// From a precomputed training gram (K without noise).
    GPModel(Kernel kernel, Eigen::MatrixXd X, Eigen::VectorXd y,
            double noise_variance, const Eigen::MatrixXd &K)
        : kernel_(std::move(kernel)), X_(std::move(X)), y_(std::move(y)),
          noise_variance_(noise_variance) {
        Eigen::MatrixXd C = K;
        C.diagonal().array() += noise_variance_;
        chol_ = factorize(C);
        alpha_ = chol_.solve(y_);
    }

    [[nodiscard]] const Factorization &factorization() const { return chol_; }
    [[nodiscard]] const Eigen::VectorXd &alpha() const { return alpha_; }
    [[nodiscard]] const Kernel &kernel() const { return kernel_; }
    [[nodiscard]] const Eigen::MatrixXd &inputs() const { return X_; }
    [[nodiscard]] const Eigen::VectorXd &targets() const { return y_; }
    [[nodiscard]] double noise_variance() const { return noise_variance_; }

    [[nodiscard]] double nll() const { return gp::nll(chol_, y_); }

    /// mu = k*^T alpha, var = k** - k*^T C^-1 k*, floored at 1e-12.
    [[nodiscard]] std::vector<Prediction>
    predict(const Eigen::MatrixXd &X_test) const {
        return predict_from(kernel_.cross(X_test, X_), kernel_.diag(X_test));
    }

    /// Same as predict() with the test/train cross kernel supplied.
    [[nodiscard]] std::vector<Prediction>
    predict_from(const Eigen::MatrixXd &K_star,
                 const Eigen::VectorXd &k_diag) const {
        const Eigen::VectorXd mu = K_star * alpha_;
        const Eigen::MatrixXd V =
            chol_.llt.matrixL().solve(K_star.transpose());
        std::vector<Prediction> out(static_cast<std::size_t>(K_star.rows()));
        for (Eigen::Index i = 0; i < K_star.rows(); ++i) {
            const double var = k_diag[i] - V.col(i).squaredNorm();
            out[static_cast<std::size_t>(i)] = {mu[i],
                                                std::max(var, kVarianceFloor)};
        }
        return out;
    }

  private:
    Kernel kernel_;
    Eigen::MatrixXd X_;
    Eigen::VectorXd y_;
    double noise_variance_;
    Factorization chol_;
    Eigen::VectorXd alpha_;
};

/// Mean of 1/2 log(2 pi var) + (y - mu)^2 / (2 var).
inline double nlpd(const std::vector<Prediction> &preds,
                   const Eigen::VectorXd &y_true) {
    if (preds.size() != static_cast<std::size_t>(y_true.size()) ||
        preds.empty()) {
        throw StructuralError("nlpd: prediction and target counts differ");
    }
    double s = 0.0;
    for (std::size_t j = 0; j < preds.size(); ++j) {
        const double var = std::max(preds[j].variance, kVarianceFloor);
        const double r = y_true[static_cast<Eigen::Index>(j)] - preds[j].mean;
        s += 0.5 * std::log(2.0 * std::numbers::pi * var) + r * r / (2.0 * var);
    }
    return s / static_cast<double>(preds.size());
}

/// RMSE / |max(y) - min(y)| with the range taken over y_true.
inline double nrmse(const std::vector<Prediction> &preds,
                    const Eigen::VectorXd &y_true) {
    if (preds.size() != static_cast<std::size_t>(y_true.size()) ||
        preds.empty()) {
        throw StructuralError("nrmse: prediction and target counts differ");
    }
    const double range = y_true.maxCoeff() - y_true.minCoeff();
    if (!(std::abs(range) > 0.0)) {
        throw NumericError("nrmse: test targets have zero range");
    }
    double s = 0.0;
    for (std::size_t j = 0; j < preds.size(); ++j) {
        const double r = y_true[static_cast<Eigen::Index>(j)] - preds[j].mean;
        s += r * r;
    }
    return std::sqrt(s / static_cast<double>(preds.size())) / std::abs(range);
}

} // namespace dqgp::gp
