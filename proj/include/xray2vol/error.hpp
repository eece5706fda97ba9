#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace xray2vol {

/// Precondition violated by a caller-supplied argument.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or truncated file. The message names the byte offset.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " at offset " + std::to_string(offset)), detail_(what), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }
    /// Message without the offset suffix.
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string detail_;
    std::uint64_t offset_;
};

/// Weights do not match the network topology. The message names the layer.
class TopologyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace xray2vol
