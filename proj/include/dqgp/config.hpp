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
 * @file config.hpp
 * Flat `key = value` configuration files. Keys may carry one dotted
 * section prefix, `#` starts a comment, lists are comma separated.
 * Unknown keys, duplicate keys and out-of-range values are rejected
 * before any work starts.
 */
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "datahub.hpp"
#include "errors.hpp"
#include "pipeline.hpp"
#include "qkernels.hpp"

namespace dqgp::config {

using pipeline::TrainConfig;

namespace detail {

using datahub::detail::trim;

inline std::string where(std::string_view key) {
    return "config key '" + std::string(key) + "': ";
}

/// A real number, optionally written as "pi", "pi/k", "a*pi" or "a*pi/k".
inline double parse_real(std::string_view key, std::string_view s) {
    s = trim(s);
    auto plain = [&](std::string_view t) {
        t = trim(t);
        double v = 0.0;
        const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
        if (r.ec != std::errc{} || r.ptr != t.data() + t.size() ||
            !std::isfinite(v)) {
            throw ConfigError(where(key) + "'" + std::string(s) +
                              "' is not a number");
        }
        return v;
    };
    const auto pi_at = s.find("pi");
    if (pi_at == std::string_view::npos) {
        return plain(s);
    }
    double factor = 1.0;
    if (pi_at > 0) {
        auto head = trim(s.substr(0, pi_at));
        if (head.empty() || head.back() != '*') {
            throw ConfigError(where(key) + "malformed multiple of pi");
        }
        head.remove_suffix(1);
        factor = plain(head);
    }
    auto tail = trim(s.substr(pi_at + 2));
    double divisor = 1.0;
    if (!tail.empty()) {
        if (tail.front() != '/') {
            throw ConfigError(where(key) + "malformed multiple of pi");
        }
        divisor = plain(tail.substr(1));
        if (divisor == 0.0) {
            throw ConfigError(where(key) + "division by zero");
        }
    }
    return factor * std::numbers::pi / divisor;
}

inline std::uint64_t parse_uint(std::string_view key, std::string_view s) {
    s = trim(s);
    std::uint64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || s.empty()) {
        throw ConfigError(where(key) + "'" + std::string(s) +
                          "' is not a non-negative integer");
    }
    return v;
}

inline bool parse_bool(std::string_view key, std::string_view s) {
    s = trim(s);
    if (s == "true" || s == "1" || s == "yes") {
        return true;
    }
    if (s == "false" || s == "0" || s == "no") {
        return false;
    }
    throw ConfigError(where(key) + "expected true or false");
}

inline std::vector<std::string_view> parse_list(std::string_view s) {
    std::vector<std::string_view> out;
    for (auto item : datahub::detail::split_commas(trim(s))) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

using Setter = std::function<void(TrainConfig &, std::string_view key,
                                  std::string_view value)>;

inline Setter real(double TrainConfig::*field) {
    return [field](TrainConfig &c, std::string_view k, std::string_view v) {
        c.*field = parse_real(k, v);
    };
}

inline Setter count(std::size_t TrainConfig::*field) {
    return [field](TrainConfig &c, std::string_view k, std::string_view v) {
        c.*field = static_cast<std::size_t>(parse_uint(k, v));
    };
}

inline Setter text(std::string TrainConfig::*field) {
    return [field](TrainConfig &c, std::string_view, std::string_view v) {
        c.*field = std::string(trim(v));
    };
}

inline Setter count_list(std::vector<std::size_t> TrainConfig::*field) {
    return [field](TrainConfig &c, std::string_view k, std::string_view v) {
        (c.*field).clear();
        for (auto item : parse_list(v)) {
            (c.*field).push_back(static_cast<std::size_t>(parse_uint(k, item)));
        }
    };
}

inline Setter real_list(std::vector<double> TrainConfig::*field) {
    return [field](TrainConfig &c, std::string_view k, std::string_view v) {
        (c.*field).clear();
        for (auto item : parse_list(v)) {
            (c.*field).push_back(parse_real(k, item));
        }
    };
}

inline const std::map<std::string, Setter, std::less<>> &schema() {
    static const std::map<std::string, Setter, std::less<>> table{
        {"method",
         [](TrainConfig &c, std::string_view, std::string_view v) {
             c.method = pipeline::method_from_string(trim(v));
         }},
        {"seed",
         [](TrainConfig &c, std::string_view k, std::string_view v) {
             c.seed = parse_uint(k, v);
         }},
        {"jobs", count(&TrainConfig::jobs)},
        {"agents", count(&TrainConfig::agents)},
        {"data.source", text(&TrainConfig::source)},
        {"data.path", text(&TrainConfig::data_path)},
        {"data.subset", text(&TrainConfig::subset)},
        {"data.theta", real_list(&TrainConfig::theta_true)},
        {"data.input_dim", count(&TrainConfig::input_dim)},
        {"data.samples", count(&TrainConfig::samples)},
        {"data.test_fraction", real(&TrainConfig::test_fraction)},
        {"circuit.family", text(&TrainConfig::family)},
        {"circuit.qubits", count(&TrainConfig::qubits)},
        {"circuit.layers", count(&TrainConfig::layers)},
        {"kernel.observables",
         [](TrainConfig &c, std::string_view, std::string_view v) {
             c.observables = qkernels::observable_kind_from_string(trim(v));
         }},
        {"kernel.outer",
         [](TrainConfig &c, std::string_view k, std::string_view v) {
             const auto s = trim(v);
             if (s == "gaussian") {
                 c.outer = qkernels::OuterKind::Gaussian;
             } else if (s == "matern15") {
                 c.outer = qkernels::OuterKind::Matern15;
             } else {
                 throw ConfigError(where(k) + "expected gaussian or matern15");
             }
         }},
        {"kernel.outer_param", real(&TrainConfig::outer_param)},
        {"shift.delta", real(&TrainConfig::delta)},
        {"shift.exact",
         [](TrainConfig &c, std::string_view k, std::string_view v) {
             c.exact_shift = parse_bool(k, v);
         }},
        {"admm.rho", real(&TrainConfig::rho)},
        {"admm.lipschitz", real_list(&TrainConfig::lipschitz)},
        {"admm.eps_pri", real(&TrainConfig::eps_pri)},
        {"admm.eps_dual", real(&TrainConfig::eps_dual)},
        {"train.folds", count(&TrainConfig::folds)},
        {"train.s_max", count(&TrainConfig::s_max)},
        {"train.patience", count(&TrainConfig::patience)},
        {"gp.noise_variance", real(&TrainConfig::noise_variance)},
        {"baseline.max_iterations", count(&TrainConfig::baseline_iterations)},
        {"baseline.grad_tol", real(&TrainConfig::baseline_grad_tol)},
        {"baseline.apx_iterations", count(&TrainConfig::apx_iterations)},
        {"benchmark.methods",
         [](TrainConfig &c, std::string_view, std::string_view v) {
             c.grid_methods.clear();
             for (auto item : parse_list(v)) {
                 c.grid_methods.push_back(pipeline::method_from_string(item));
             }
         }},
        {"benchmark.agents", count_list(&TrainConfig::grid_agents)},
        {"benchmark.samples", count_list(&TrainConfig::grid_samples)},
        {"benchmark.replications", count(&TrainConfig::replications)},
    };
    return table;
}

} // namespace detail

/// Every accepted key, in schema order.
inline std::vector<std::string> known_keys() {
    std::vector<std::string> out;
    for (const auto &[k, _] : detail::schema()) {
        out.push_back(k);
    }
    return out;
}

/// Parses and validates; defaults fill every key not given.
inline TrainConfig parse(std::istream &in, const std::string &source = "config") {
    TrainConfig cfg;
    std::map<std::string, std::size_t, std::less<>> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = line;
        if (const auto hash = s.find('#'); hash != std::string_view::npos) {
            s = s.substr(0, hash);
        }
        s = detail::trim(s);
        if (s.empty()) {
            continue;
        }
        const auto eq = s.find('=');
        const std::string at = source + ":" + std::to_string(lineno) + ": ";
        if (eq == std::string_view::npos) {
            throw ConfigError(at + "expected 'key = value'");
        }
        const auto key = detail::trim(s.substr(0, eq));
        const auto value = detail::trim(s.substr(eq + 1));
        if (std::count(key.begin(), key.end(), '.') > 1) {
            throw ConfigError(at + "key '" + std::string(key) +
                              "' nests deeper than one section");
        }
        const auto it = detail::schema().find(key);
        if (it == detail::schema().end()) {
            throw ConfigError(at + "unknown key '" + std::string(key) + "'");
        }
        if (const auto [pos, fresh] = seen.emplace(std::string(key), lineno);
            !fresh) {
            throw ConfigError(at + "key '" + std::string(key) +
                              "' already set on line " +
                              std::to_string(pos->second));
        }
        try {
            it->second(cfg, key, value);
        } catch (const Error &e) {
            throw ConfigError(at + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

inline TrainConfig parse_string(const std::string &text) {
    std::istringstream in(text);
    return parse(in, "config");
}

inline TrainConfig validate_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config " + path.string());
    }
    return parse(in, path.string());
}

/// Normalized key = value dump of every setting (manifest echo).
inline void write_config(std::ostream &os, const TrainConfig &c) {
    auto list = [](const auto &v) {
        std::ostringstream s;
        s.precision(17);
        for (std::size_t i = 0; i < v.size(); ++i) {
            s << (i ? "," : "") << v[i];
        }
        return s.str();
    };
    std::vector<std::string> methods;
    for (auto m : c.grid_methods) {
        methods.emplace_back(pipeline::to_string(m));
    }
    os.precision(17);
    os << "method = " << pipeline::to_string(c.method) << '\n'
       << "seed = " << c.seed << '\n'
       << "jobs = " << c.jobs << '\n'
       << "agents = " << c.agents << '\n'
       << "data.source = " << c.source << '\n'
       << "data.path = " << c.data_path << '\n'
       << "data.subset = " << c.subset << '\n'
       << "data.theta = " << list(c.theta_true) << '\n'
       << "data.input_dim = " << c.input_dim << '\n'
       << "data.samples = " << c.samples << '\n'
       << "data.test_fraction = " << c.test_fraction << '\n'
       << "circuit.family = " << c.family << '\n'
       << "circuit.qubits = " << c.qubits << '\n'
       << "circuit.layers = " << c.layers << '\n'
       << "kernel.observables = " << qkernels::to_string(c.observables) << '\n'
       << "kernel.outer = "
       << (c.outer == qkernels::OuterKind::Gaussian ? "gaussian" : "matern15")
       << '\n'
       << "kernel.outer_param = " << c.outer_param << '\n'
       << "shift.delta = " << c.delta << '\n'
       << "shift.exact = " << (c.exact_shift ? "true" : "false") << '\n'
       << "admm.rho = " << c.rho << '\n'
       << "admm.lipschitz = " << list(c.lipschitz) << '\n'
       << "admm.eps_pri = " << c.eps_pri << '\n'
       << "admm.eps_dual = " << c.eps_dual << '\n'
       << "train.folds = " << c.folds << '\n'
       << "train.s_max = " << c.s_max << '\n'
       << "train.patience = " << c.patience << '\n'
       << "gp.noise_variance = " << c.noise_variance << '\n'
       << "baseline.max_iterations = " << c.baseline_iterations << '\n'
       << "baseline.grad_tol = " << c.baseline_grad_tol << '\n'
       << "baseline.apx_iterations = " << c.apx_iterations << '\n'
       << "benchmark.methods = " << list(methods) << '\n'
       << "benchmark.agents = " << list(c.grid_agents) << '\n'
       << "benchmark.samples = " << list(c.grid_samples) << '\n'
       << "benchmark.replications = " << c.replications << '\n';
}

} // namespace dqgp::config
