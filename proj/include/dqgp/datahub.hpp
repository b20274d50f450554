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
 * @file datahub.hpp
 * Datasets: SRTM .hgt tiles, CSV files, synthetic quantum-GP prior draws,
 * z-score normalization, seeded subsampling and splits, and the regional
 * k-d tree partition that assigns training points to agents.
 */
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "gp.hpp"
#include "qkernels.hpp"
#include "torus.hpp"

namespace dqgp::datahub {

struct NormalizationParams {
    Eigen::VectorXd x_mean;
    Eigen::VectorXd x_std;
    double y_mean{0.0};
    double y_std{1.0};
    std::size_t clipped{0};
};

inline constexpr double kClipBound = 3.0;

struct Dataset {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::string source;
    std::uint64_t seed{0};
    /// Row index of every sample in the dataset it was drawn from.
    std::vector<std::size_t> origin;
    std::optional<NormalizationParams> normalization;

    [[nodiscard]] std::size_t size() const {
        return static_cast<std::size_t>(y.size());
    }
    [[nodiscard]] std::size_t dim() const {
        return static_cast<std::size_t>(X.cols());
    }
};

inline Dataset make_dataset(Eigen::MatrixXd X, Eigen::VectorXd y,
                            std::string source, std::uint64_t seed = 0) {
    if (X.rows() != y.size()) {
        throw StructuralError("dataset inputs and targets differ in length");
    }
    Dataset ds;
    ds.X = std::move(X);
    ds.y = std::move(y);
    ds.source = std::move(source);
    ds.seed = seed;
    ds.origin.resize(ds.size());
    std::iota(ds.origin.begin(), ds.origin.end(), std::size_t{0});
    return ds;
}

/// Rows `idx` of ds, in the given order; origin tags follow the rows.
inline Dataset select(const Dataset &ds, const std::vector<std::size_t> &idx) {
    Dataset out;
    out.X.resize(static_cast<Eigen::Index>(idx.size()), ds.X.cols());
    out.y.resize(static_cast<Eigen::Index>(idx.size()));
    out.origin.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= ds.size()) {
            throw StructuralError("row index out of range");
        }
        const auto r = static_cast<Eigen::Index>(idx[i]);
        out.X.row(static_cast<Eigen::Index>(i)) = ds.X.row(r);
        out.y[static_cast<Eigen::Index>(i)] = ds.y[r];
        out.origin.push_back(ds.origin.empty() ? idx[i] : ds.origin[idx[i]]);
    }
    out.source = ds.source;
    out.seed = ds.seed;
    out.normalization = ds.normalization;
    return out;
}

// ---------------------------------------------------------------- HGT --

struct TileOrigin {
    double lat_south{0.0};
    double lon_west{0.0};
};

/// "N17E073" -> (17, 73); S and W give negative coordinates.
inline TileOrigin parse_tile_name(std::string_view name) {
    if (name.size() < 7 || (name[0] != 'N' && name[0] != 'S') ||
        (name[3] != 'E' && name[3] != 'W')) {
        throw FormatError("tile name '" + std::string(name) +
                          "' is not of the form N17E073");
    }
    int lat = 0;
    int lon = 0;
    auto r1 = std::from_chars(name.data() + 1, name.data() + 3, lat);
    auto r2 = std::from_chars(name.data() + 4, name.data() + 7, lon);
    if (r1.ec != std::errc{} || r2.ec != std::errc{}) {
        throw FormatError("tile name '" + std::string(name) +
                          "' has malformed coordinates");
    }
    return {name[0] == 'S' ? -lat : static_cast<double>(lat),
            name[3] == 'W' ? -lon : static_cast<double>(lon)};
}

inline constexpr std::int16_t kHgtVoid = -32768;

/**
 * Reads an SRTM tile: n x n big-endian int16 samples (n = 1201 or 3601),
 * row-major from the north-west corner. Inputs are (lat, lon); void
 * samples are dropped.
 */
inline Dataset load_hgt(const std::filesystem::path &path,
                        const TileOrigin &origin) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    const std::vector<unsigned char> bytes(
        (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t n = 0;
    if (bytes.size() == 2 * 1201 * 1201) {
        n = 1201;
    } else if (bytes.size() == 2 * 3601 * 3601) {
        n = 3601;
    } else {
        throw FormatError(path.string() + ": size " +
                          std::to_string(bytes.size()) +
                          " bytes is not a 1201^2 or 3601^2 int16 grid");
    }
    std::vector<std::size_t> keep;
    std::vector<double> values;
    keep.reserve(n * n);
    values.reserve(n * n);
    for (std::size_t k = 0; k < n * n; ++k) {
        const auto v = static_cast<std::int16_t>(
            static_cast<std::uint16_t>(bytes[2 * k] << 8) | bytes[2 * k + 1]);
        if (v != kHgtVoid) {
            keep.push_back(k);
            values.push_back(v);
        }
    }
    if (keep.empty()) {
        throw FormatError(path.string() + ": every sample is void");
    }
    Eigen::MatrixXd X(static_cast<Eigen::Index>(keep.size()), 2);
    Eigen::VectorXd y(static_cast<Eigen::Index>(keep.size()));
    const double step = 1.0 / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < keep.size(); ++i) {
        const std::size_t row = keep[i] / n;
        const std::size_t col = keep[i] % n;
        const auto r = static_cast<Eigen::Index>(i);
        X(r, 0) = origin.lat_south + 1.0 - static_cast<double>(row) * step;
        X(r, 1) = origin.lon_west + static_cast<double>(col) * step;
        y[r] = values[i];
    }
    auto ds = make_dataset(std::move(X), std::move(y), "hgt:" + path.filename().string());
    ds.origin = std::move(keep);
    return ds;
}

inline Dataset load_hgt(const std::filesystem::path &path) {
    return load_hgt(path, parse_tile_name(path.stem().string()));
}

/// Writes big-endian int16 samples (row-major, north-west first).
inline void write_hgt(const std::filesystem::path &path,
                      const std::vector<std::int16_t> &samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    for (auto s : samples) {
        const auto u = static_cast<std::uint16_t>(s);
        const char b[2] = {static_cast<char>(u >> 8), static_cast<char>(u & 0xFF)};
        out.write(b, 2);
    }
}

// ---------------------------------------------------------------- CSV --

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos
                                             ? std::string_view::npos
                                             : pos - start));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() &&
           (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline double parse_finite(std::string_view s, std::size_t line) {
    s = trim(s);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() ||
        !std::isfinite(v)) {
        throw FormatError("line " + std::to_string(line) + ": '" +
                          std::string(s) + "' is not a finite number");
    }
    return v;
}

} // namespace detail

/// CSV with header x1,...,xD,y; every value must be a finite number.
inline Dataset read_csv(std::istream &in, const std::string &source) {
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError(source + ": empty file");
    }
    const auto header = detail::split_commas(detail::trim(line));
    if (header.size() < 2) {
        throw FormatError(source + ": header needs at least x1,y");
    }
    const std::size_t D = header.size() - 1;
    for (std::size_t d = 0; d < D; ++d) {
        if (detail::trim(header[d]) != "x" + std::to_string(d + 1)) {
            throw FormatError(source + ": header column " +
                              std::to_string(d + 1) + " must be x" +
                              std::to_string(d + 1));
        }
    }
    if (detail::trim(header[D]) != "y") {
        throw FormatError(source + ": last header column must be y");
    }
    std::vector<double> vals;
    std::size_t rows = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto cells = detail::split_commas(detail::trim(line));
        if (cells.size() != D + 1) {
            throw FormatError(source + ": line " + std::to_string(lineno) +
                              " has " + std::to_string(cells.size()) +
                              " columns, expected " + std::to_string(D + 1));
        }
        for (auto c : cells) {
            vals.push_back(detail::parse_finite(c, lineno));
        }
        ++rows;
    }
    if (rows == 0) {
        throw FormatError(source + ": no data rows");
    }
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(D));
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t d = 0; d < D; ++d) {
            X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)) =
                vals[r * (D + 1) + d];
        }
        y[static_cast<Eigen::Index>(r)] = vals[r * (D + 1) + D];
    }
    return make_dataset(std::move(X), std::move(y), source);
}

inline Dataset load_csv(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return read_csv(in, "csv:" + path.filename().string());
}

inline void write_csv(std::ostream &os, const Dataset &ds) {
    for (std::size_t d = 0; d < ds.dim(); ++d) {
        os << 'x' << d + 1 << ',';
    }
    os << "y\n";
    os.precision(17);
    for (Eigen::Index r = 0; r < ds.X.rows(); ++r) {
        for (Eigen::Index d = 0; d < ds.X.cols(); ++d) {
            os << ds.X(r, d) << ',';
        }
        os << ds.y[r] << '\n';
    }
}

// ---------------------------------------------------- sampling/splits --

/// n rows drawn uniformly without replacement, kept in original order.
inline Dataset subsample(const Dataset &ds, std::size_t n, std::uint64_t seed) {
    if (n == 0 || n > ds.size()) {
        throw ConfigError("subsample size " + std::to_string(n) +
                          " outside [1, " + std::to_string(ds.size()) + "]");
    }
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    auto out = select(ds, idx);
    out.seed = seed;
    return out;
}

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// ceil(N f) test rows, the rest for training; both index lists sorted.
inline Split split_indices(std::size_t N, double test_fraction,
                           std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("test fraction must lie in (0, 1)");
    }
    const auto n_test = static_cast<std::size_t>(
        std::ceil(static_cast<double>(N) * test_fraction - 1e-9));
    if (n_test == 0 || n_test >= N) {
        throw ConfigError("split leaves an empty train or test set");
    }
    std::vector<std::size_t> idx(N);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    Split s;
    s.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    std::sort(s.test.begin(), s.test.end());
    std::sort(s.train.begin(), s.train.end());
    return s;
}

inline std::pair<Dataset, Dataset>
train_test_split(const Dataset &ds, double test_fraction, std::uint64_t seed) {
    const auto s = split_indices(ds.size(), test_fraction, seed);
    return {select(ds, s.train), select(ds, s.test)};
}

// ------------------------------------------------------- normalization --

/// Applies stored z-score params, clipping every value to [-3, 3].
inline Dataset apply_normalization(const Dataset &ds,
                                   const NormalizationParams &p,
                                   std::size_t *clip_count = nullptr) {
    Dataset out = ds;
    std::size_t clipped = 0;
    auto clip = [&](double v) {
        if (v > kClipBound || v < -kClipBound) {
            ++clipped;
            return std::clamp(v, -kClipBound, kClipBound);
        }
        return v;
    };
    for (Eigen::Index d = 0; d < out.X.cols(); ++d) {
        for (Eigen::Index r = 0; r < out.X.rows(); ++r) {
            out.X(r, d) = clip((out.X(r, d) - p.x_mean[d]) / p.x_std[d]);
        }
    }
    for (Eigen::Index r = 0; r < out.y.size(); ++r) {
        out.y[r] = clip((out.y[r] - p.y_mean) / p.y_std);
    }
    out.normalization = p;
    out.normalization->clipped = clipped;
    if (clip_count) {
        *clip_count = clipped;
    }
    return out;
}

/**
 * Population mean / std per column and for y, then clip to [-3, 3].
 * With `inputs` false the feature columns keep their scale (mean 0,
 * std 1 are stored) and only y is standardized.
 */
inline std::pair<Dataset, NormalizationParams>
zscore_normalize(const Dataset &ds, bool inputs = true) {
    if (ds.size() < 2) {
        throw ConfigError("normalization needs at least two rows");
    }
    NormalizationParams p;
    const auto n = static_cast<double>(ds.size());
    p.x_mean = ds.X.colwise().mean().transpose();
    p.x_std.resize(ds.X.cols());
    for (Eigen::Index d = 0; d < ds.X.cols(); ++d) {
        p.x_std[d] =
            std::sqrt((ds.X.col(d).array() - p.x_mean[d]).square().sum() / n);
        if (!(p.x_std[d] > 0.0)) {
            throw NumericError("feature column " + std::to_string(d + 1) +
                               " is constant");
        }
    }
    if (!inputs) {
        p.x_mean.setZero();
        p.x_std.setOnes();
    }
    p.y_mean = ds.y.mean();
    p.y_std = std::sqrt((ds.y.array() - p.y_mean).square().sum() / n);
    if (!(p.y_std > 0.0)) {
        throw NumericError("target column is constant");
    }
    Dataset out = apply_normalization(ds, p, &p.clipped);
    return {std::move(out), p};
}

inline double denormalize_target(double y, const NormalizationParams &p) {
    return y * p.y_std + p.y_mean;
}

// ------------------------------------------------------------- k-d tree --

using Partition = std::vector<std::vector<std::size_t>>;

namespace detail {

inline void kd_split(const Eigen::MatrixXd &X, std::vector<std::size_t> idx,
                     std::size_t leaves, Partition &out) {
    if (leaves == 1) {
        out.push_back(std::move(idx));
        return;
    }
    Eigen::Index widest = 0;
    double best = -1.0;
    for (Eigen::Index d = 0; d < X.cols(); ++d) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (auto i : idx) {
            lo = std::min(lo, X(static_cast<Eigen::Index>(i), d));
            hi = std::max(hi, X(static_cast<Eigen::Index>(i), d));
        }
        if (hi - lo > best) {
            best = hi - lo;
            widest = d;
        }
    }
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return X(static_cast<Eigen::Index>(a), widest) <
               X(static_cast<Eigen::Index>(b), widest);
    });
    const std::size_t left_leaves = leaves / 2;
    const std::size_t cut = (idx.size() * left_leaves + leaves / 2) / leaves;
    std::vector<std::size_t> right(idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
    idx.resize(cut);
    kd_split(X, std::move(idx), left_leaves, out);
    kd_split(X, std::move(right), leaves - left_leaves, out);
}

} // namespace detail

/**
 * Regional partition into M leaves. A node owed k leaves is cut along its
 * widest input dimension at the point that leaves round(n * floor(k/2) / k)
 * samples on the low side (the median when k is even); the halves recurse
 * with floor(k/2) and ceil(k/2) leaves. Ties are broken by row index.
 */
inline Partition kdtree_split(const Dataset &ds, std::size_t M) {
    if (M == 0 || M > ds.size()) {
        throw ConfigError("cannot split " + std::to_string(ds.size()) +
                          " points into " + std::to_string(M) + " regions");
    }
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    Partition out;
    detail::kd_split(ds.X, std::move(all), M, out);
    // coverage / disjointness audit
    std::vector<int> seen(ds.size(), 0);
    for (const auto &leaf : out) {
        if (leaf.empty()) {
            throw StructuralError("k-d split produced an empty region");
        }
        for (auto i : leaf) {
            ++seen[i];
        }
    }
    if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; })) {
        throw StructuralError("k-d split is not a partition");
    }
    return out;
}

// ---------------------------------------------------- synthetic data --

/// Set 1 and Set 2 circuit parameters of the synthetic benchmark.
inline const std::vector<double> kThetaSet1{0.58, 2.45, 1.88, 1.40, 0.31, 1.44};
inline const std::vector<double> kThetaSet2{1.18, 2.99, 2.30, 1.88, 0.49, 0.49};

/// N points uniform in [lo, hi]^D.
inline Eigen::MatrixXd uniform_inputs(std::size_t N, std::size_t D,
                                      std::uint64_t seed, double lo = -3.0,
                                      double hi = 3.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd X(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(D));
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        for (Eigen::Index d = 0; d < X.cols(); ++d) {
            X(r, d) = u(rng);
        }
    }
    return X;
}

/// y ~ N(0, K(X, X | theta) + sigma^2 I) drawn through the Cholesky factor.
inline Dataset sample_qgp_prior(const qkernels::QuantumKernel &kernel,
                                const TorusPoint &theta,
                                const Eigen::MatrixXd &X,
                                double noise_variance, std::uint64_t seed) {
    if (theta.dim() != kernel.num_params()) {
        throw StructuralError("prior parameters do not match the circuit");
    }
    const auto g = qkernels::gram(kernel, X, theta, noise_variance);
    const auto f = gp::factorize(g.covariance());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd e(X.rows());
    for (auto &v : e) {
        v = normal(rng);
    }
    Eigen::VectorXd y = f.llt.matrixL() * e;
    return make_dataset(X, std::move(y), "qgp_prior", seed);
}

} // namespace dqgp::datahub
