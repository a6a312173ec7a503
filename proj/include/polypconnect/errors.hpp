#pragma once

#include <stdexcept>
#include <string>

namespace polyp {

// Every failure surfaced by the library carries one of these categories.
// The CLI maps them to exit codes; tests match on them.
enum class ErrorCategory {
    config,
    ingestion,
    missing_annotation,
    invalid_split,
    invalid_argument,
    shape,
    insufficient_data,
    training_diverged,
    dependency,
    io,
    numeric,
};

const char* to_string(ErrorCategory cat);

class PipelineError : public std::runtime_error {
public:
    PipelineError(ErrorCategory cat, const std::string& msg)
        : std::runtime_error(msg), cat_(cat) {}

    ErrorCategory category() const noexcept { return cat_; }

private:
    ErrorCategory cat_;
};

[[noreturn]] inline void fail(ErrorCategory cat, const std::string& msg) {
    throw PipelineError(cat, msg);
}

} // namespace polyp
