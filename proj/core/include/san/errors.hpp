#pragma once

#include <stdexcept>
#include <string>

namespace san {

// Error taxonomy. Everything derives from std::runtime_error so callers can
// catch coarsely; the CLI maps ConfigError/ParseError/DataError to exit 2 and
// the rest to exit 1.

// Shape or axis disagreement between tensors.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse (non-scalar loss, empty gold list, rate out of range).
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user data (gold span out of range, malformed embedding row).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input file; message carries the line number where known.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unknown or invalid configuration key/value.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace san
