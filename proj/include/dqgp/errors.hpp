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
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dqgp {

/// Broad failure classes. The CLI maps these onto exit statuses.
enum class ErrorCategory { Configuration, Structural, Numeric, Format, Io };

constexpr std::string_view to_string(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::Configuration:
        return "configuration";
    case ErrorCategory::Structural:
        return "structural";
    case ErrorCategory::Numeric:
        return "numeric";
    case ErrorCategory::Format:
        return "format";
    case ErrorCategory::Io:
        return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
  public:
    Error(ErrorCategory category, const std::string &what)
        : std::runtime_error(what), category_(category) {}

    [[nodiscard]] ErrorCategory category() const noexcept { return category_; }

  private:
    ErrorCategory category_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string &what)
        : Error(ErrorCategory::Configuration, what) {}
};

struct StructuralError : Error {
    explicit StructuralError(const std::string &what)
        : Error(ErrorCategory::Structural, what) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string &what)
        : Error(ErrorCategory::Numeric, what) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string &what)
        : Error(ErrorCategory::Format, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string &what)
        : Error(ErrorCategory::Io, what) {}
};

} // namespace dqgp
