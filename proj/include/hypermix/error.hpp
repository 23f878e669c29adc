#pragma once

#include <stdexcept>
#include <string>

namespace hypermix {

// Error taxonomy. Callers that want to distinguish bad shapes from bad
// configs catch the subtype; everything derives from Error so the CLI can
// catch one thing and map it to an exit code.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Mismatched or unsupported tensor shapes.
struct DimensionError : Error {
    using Error::Error;
};

// Invalid model/config field values (non-divisible heads, bad preset, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Out-of-range runtime inputs (labels outside vocab, too few frames, ...).
struct InputError : Error {
    using Error::Error;
};

// Fixed-size resource exceeded (position table shorter than the sequence).
struct CapacityError : Error {
    using Error::Error;
};

// Target sequence cannot be aligned to the given number of frames.
struct InfeasibleError : Error {
    using Error::Error;
};

// Training produced a non-finite loss.
struct DivergenceError : Error {
    using Error::Error;
};

// Caller asked for something unservable (empty report, unknown flag value);
// the CLI maps this to its usage exit code.
struct UsageError : Error {
    using Error::Error;
};

}  // namespace hypermix
