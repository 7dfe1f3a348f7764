#pragma once

#include <stdexcept>
#include <string>

namespace biasprobe {

// Configuration / artifact precondition problems. CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Transport or backend protocol failures. CLI exit code 3.
struct BackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unresolved review items blocking report finalization. CLI exit code 4.
struct PendingReviewError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace biasprobe
