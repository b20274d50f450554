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
// dqgp command-line front end: gen-data, train, benchmark, report, selftest.
//
// Exit status: 0 ok, 1 selftest failure, 2 configuration or schema error,
// 3 numeric failure, 4 I/O or file-format error. Errors are reported on
// stderr as "error: category=<name> message=<text>".

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "dqgp/dqgp.hpp"

namespace fs = std::filesystem;
using namespace dqgp;

namespace {

int exit_code(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::Configuration:
    case ErrorCategory::Structural:
        return 2;
    case ErrorCategory::Numeric:
        return 3;
    case ErrorCategory::Format:
    case ErrorCategory::Io:
        return 4;
    }
    return 2;
}

// SHA-1 of "blob <size>\0<content>", as git computes it.
std::string git_blob_sha1(const std::string &content) {
    const std::string header = "blob " + std::to_string(content.size()) + '\0';
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX *ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, header.data(), header.size()) != 1 ||
        EVP_DigestUpdate(ctx, content.data(), content.size()) != 1 ||
        EVP_DigestFinal_ex(ctx, md, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw IoError("sha1 digest failed");
    }
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) {
        os << std::hex << std::setw(2) << std::setfill('0')
           << static_cast<int>(md[i]);
    }
    return os.str();
}

std::string read_file(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw IoError("cannot read " + p.string());
    }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Collects outputs in memory and commits each with temp file + rename.
class OutputSet {
  public:
    explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

    void add(const std::string &name, std::string content) {
        files_.emplace_back(name, std::move(content));
    }

    [[nodiscard]] const std::vector<std::pair<std::string, std::string>> &
    files() const {
        return files_;
    }

    void commit() const {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) {
            throw IoError("cannot create " + dir_.string() + ": " + ec.message());
        }
        for (const auto &[name, content] : files_) {
            const fs::path target = dir_ / name;
            const fs::path tmp =
                dir_ / ("." + name + ".tmp." + std::to_string(::getpid()));
            {
                std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
                if (!out) {
                    throw IoError("cannot write " + tmp.string());
                }
                out << content;
                out.flush();
                if (!out) {
                    throw IoError("write failed for " + tmp.string());
                }
            }
            fs::rename(tmp, target, ec);
            if (ec) {
                fs::remove(tmp);
                throw IoError("cannot rename into " + target.string() + ": " +
                              ec.message());
            }
        }
    }

  private:
    fs::path dir_;
    std::vector<std::pair<std::string, std::string>> files_;
};

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir{"out"};
    bool trace{false};
    std::optional<std::size_t> jobs;
};

struct Loaded {
    pipeline::TrainConfig cfg;
    std::string config_text;
};

Loaded load_config(const Common &c) {
    Loaded l;
    if (!c.config_path.empty()) {
        l.config_text = read_file(c.config_path);
        std::istringstream in(l.config_text);
        l.cfg = config::parse(in, c.config_path);
    } else {
        l.cfg = config::parse_string("");
    }
    if (c.seed) {
        l.cfg.seed = *c.seed;
    }
    if (c.jobs) {
        l.cfg.jobs = *c.jobs;
    }
    l.cfg.validate();
    return l;
}

std::string manifest(const std::string &verb, const Common &c, const Loaded &l,
                     const OutputSet &outputs) {
    std::ostringstream os;
    const auto seeds = pipeline::SeedPlan::derive(l.cfg.seed);
    os << "# dqgp run manifest\n"
       << "verb = " << verb << '\n'
       << "master_seed = " << l.cfg.seed << '\n'
       << "seed.data = " << seeds.data << '\n'
       << "seed.subsample = " << seeds.subsample << '\n'
       << "seed.split = " << seeds.split << '\n'
       << "seed.init = " << seeds.init << '\n'
       << "seed.cv = " << seeds.cv << '\n';
    if (!c.config_path.empty()) {
        os << "input.config = " << c.config_path << '\n'
           << "input.config.sha1 = " << git_blob_sha1(l.config_text) << '\n';
    }
    if (l.cfg.source != "synthetic") {
        os << "input.data = " << l.cfg.data_path << '\n'
           << "input.data.sha1 = " << git_blob_sha1(read_file(l.cfg.data_path))
           << '\n';
    }
    for (const auto &[name, content] : outputs.files()) {
        os << "output." << name << ".sha1 = " << git_blob_sha1(content) << '\n';
    }
    os << "\n# normalized configuration\n";
    config::write_config(os, l.cfg);
    return os.str();
}

void finish(const std::string &verb, const Common &c, const Loaded &l,
            OutputSet &outputs) {
    outputs.add("manifest.txt", manifest(verb, c, l, outputs));
    outputs.commit();
    std::cout << verb << ": wrote " << outputs.files().size() << " files to "
              << c.out_dir << '\n';
}

int cmd_gen_data(const Common &c) {
    const auto l = load_config(c);
    const auto ds = pipeline::load_raw(l.cfg, l.cfg.seed);
    std::ostringstream csv;
    datahub::write_csv(csv, ds);
    OutputSet out(c.out_dir);
    out.add("data.csv", csv.str());
    std::ostringstream meta;
    meta.precision(17);
    meta << "source = " << ds.source << '\n'
         << "rows = " << ds.size() << '\n'
         << "input_dim = " << ds.dim() << '\n';
    if (l.cfg.source == "synthetic") {
        const auto theta = pipeline::subset_theta(l.cfg);
        const TorusPoint projected(Eigen::Map<const Eigen::VectorXd>(
            theta.data(), static_cast<Eigen::Index>(theta.size())));
        meta << "theta =";
        for (double t : theta) {
            meta << ' ' << t;
        }
        meta << "\ntheta_projected =";
        for (Eigen::Index i = 0; i < projected.coords().size(); ++i) {
            meta << ' ' << projected[static_cast<std::size_t>(i)];
        }
        meta << "\nnoise_variance = " << l.cfg.noise_variance << '\n';
    }
    out.add("data.meta.txt", meta.str());
    finish("gen-data", c, l, out);
    return 0;
}

int cmd_train(const Common &c) {
    const auto l = load_config(c);
    const auto r = pipeline::train(l.cfg);
    std::ostringstream res;
    pipeline::write_results(
        res, {{l.cfg.source, pipeline::subset_label(l.cfg), std::string(pipeline::to_string(r.method)),
               r.agents, r.samples, r.seed, r.nlpd_test, r.nrmse_test,
               r.iterations, r.wall_ms}});
    std::ostringstream hp;
    hp.precision(17);
    hp << "method = " << pipeline::to_string(r.method) << '\n'
       << "stop = " << pipeline::to_string(r.stop) << '\n'
       << "iterations = " << r.iterations << '\n';
    if (r.z_quantum) {
        hp << "z =";
        for (std::size_t i = 0; i < r.z_quantum->dim(); ++i) {
            hp << ' ' << (*r.z_quantum)[i];
        }
        hp << '\n' << "gram_evaluations = " << r.gram_evaluations << '\n';
    }
    if (r.z_classical) {
        hp << "lengthscale = " << r.z_classical->lengthscale() << '\n'
           << "signal_variance = " << r.z_classical->signal_variance() << '\n'
           << "noise_variance = " << r.z_classical->noise_variance() << '\n';
    }
    OutputSet out(c.out_dir);
    out.add("result.csv", res.str());
    out.add("hyperparams.txt", hp.str());
    if (c.trace && !r.history.empty()) {
        std::ostringstream tr;
        consensus::write_trace(tr, r.history);
        out.add("trace.csv", tr.str());
        std::ostringstream cv;
        cv.precision(17);
        cv << "s,nlpd_cv_best\n";
        for (std::size_t s = 0; s < r.cv_trace.size(); ++s) {
            cv << s << ',' << r.cv_trace[s] << '\n';
        }
        out.add("cv_trace.csv", cv.str());
    }
    std::cout << "nlpd_test = " << r.nlpd_test << "\nnrmse_test = " << r.nrmse_test
              << '\n';
    finish("train", c, l, out);
    return 0;
}

int cmd_benchmark(const Common &c) {
    const auto l = load_config(c);
    const auto rows = pipeline::benchmark(l.cfg);
    std::ostringstream res;
    pipeline::write_results(res, rows);
    std::ostringstream sum;
    pipeline::write_summary(sum, pipeline::summarize(rows));
    OutputSet out(c.out_dir);
    out.add("results.csv", res.str());
    out.add("summary.txt", sum.str());
    std::cout << sum.str();
    finish("benchmark", c, l, out);
    return 0;
}

int cmd_report(const Common &c, const std::vector<std::string> &inputs) {
    if (inputs.empty()) {
        throw ConfigError("report needs at least one results CSV");
    }
    std::vector<pipeline::BenchmarkRow> rows;
    for (const auto &p : inputs) {
        std::ifstream in(p);
        if (!in) {
            throw IoError("cannot read " + p);
        }
        auto part = pipeline::read_results(in, p);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    std::ostringstream sum;
    pipeline::write_summary(sum, pipeline::summarize(rows));
    std::cout << sum.str();
    OutputSet out(c.out_dir);
    out.add("summary.txt", sum.str());
    out.commit();
    return 0;
}

int cmd_selftest() {
    bool ok = true;
    for (const auto &r : selftest::run_all()) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.detail
                  << ")\n";
        ok = ok && r.passed;
    }
    return ok ? 0 : 1;
}

void add_common(CLI::App *sub, Common &c, bool with_config = true) {
    if (with_config) {
        sub->add_option("--config", c.config_path, "configuration file");
        sub->add_option("--seed", c.seed, "master seed override");
        sub->add_option("--jobs", c.jobs, "worker threads")
            ->check(CLI::PositiveNumber);
    }
    sub->add_option("--out", c.out_dir, "output directory");
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Distributed quantum Gaussian process regression"};
    app.require_subcommand(1);
    Common common;
    std::vector<std::string> report_inputs;

    auto *gen = app.add_subcommand("gen-data", "write a dataset CSV and manifest");
    add_common(gen, common);
    auto *train = app.add_subcommand("train", "train one method and evaluate it");
    add_common(train, common);
    train->add_flag("--trace", common.trace, "write residual and CV traces");
    auto *bench = app.add_subcommand("benchmark", "run the replication grid");
    add_common(bench, common);
    auto *report = app.add_subcommand("report", "summarize result CSVs");
    add_common(report, common, false);
    report->add_option("inputs", report_inputs, "results CSV files")->required();
    auto *self = app.add_subcommand("selftest", "run the invariant checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*gen) {
            return cmd_gen_data(common);
        }
        if (*train) {
            return cmd_train(common);
        }
        if (*bench) {
            return cmd_benchmark(common);
        }
        if (*report) {
            return cmd_report(common, report_inputs);
        }
        if (*self) {
            return cmd_selftest();
        }
    } catch (const Error &e) {
        std::cerr << "error: category=" << to_string(e.category())
                  << " message=" << e.what() << '\n';
        return exit_code(e.category());
    } catch (const fs::filesystem_error &e) {
        std::cerr << "error: category=io message=" << e.what() << '\n';
        return 4;
    } catch (const std::exception &e) {
        std::cerr << "error: category=internal message=" << e.what() << '\n';
        return 3;
    }
    return 0;
}
