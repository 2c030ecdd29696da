#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace occ {

/// Error categories map 1:1 onto CLI exit codes.
enum class ErrorCategory : int {
    config = 2,
    data = 3,
    numeric = 4,
    annotation = 5,
};

/// All module errors carry a stable machine-readable code (e.g. "MalformedCode")
/// plus a human-readable message.
class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message),
          category_(category),
          code_(std::move(code)) {}

    ErrorCategory category() const noexcept { return category_; }
    const std::string& code() const noexcept { return code_; }
    int exit_code() const noexcept { return static_cast<int>(category_); }

private:
    ErrorCategory category_;
    std::string code_;
};

[[noreturn]] inline void throw_config(std::string code, const std::string& msg) {
    throw Error(ErrorCategory::config, std::move(code), msg);
}

[[noreturn]] inline void throw_data(std::string code, const std::string& msg) {
    throw Error(ErrorCategory::data, std::move(code), msg);
}

[[noreturn]] inline void throw_numeric(std::string code, const std::string& msg) {
    throw Error(ErrorCategory::numeric, std::move(code), msg);
}

[[noreturn]] inline void throw_annotation(std::string code, const std::string& msg) {
    throw Error(ErrorCategory::annotation, std::move(code), msg);
}

}  // namespace occ
