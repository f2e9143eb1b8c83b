#pragma once

#include <stdexcept>
#include <string>

namespace t2v {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/rank mismatches between tensors or between tensor and config.
struct DimensionError : Error {
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Caller violated an operation precondition (bad label, empty dataset, ...).
struct ContractError : Error {
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Invalid static configuration (bounds, unknown key, missing checkpoint).
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Numeric domain violation (log of non-positive in strict mode, singular step).
struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

// Malformed file (bad magic, wrong version, unparsable line).
struct FormatError : Error {
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

// Physically damaged/truncated file; carries the byte offset of the failure.
struct CorruptionError : FormatError {
    CorruptionError(const std::string& msg, size_t offset)
        : FormatError(msg + " at byte offset " + std::to_string(offset)),
          byte_offset(offset) {}
    size_t byte_offset;
};

// Training op invoked on a frozen network.
struct FrozenModelError : Error {
    explicit FrozenModelError(const std::string& msg) : Error(msg) {}
};

}  // namespace t2v
