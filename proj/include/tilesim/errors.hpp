#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tilesim {

// Base class for all failures raised by the library. The CLI catches this
// at the top level and maps subtypes to exit codes.
class SimError : public std::runtime_error {
public:
    explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

// A required key is absent from a configuration or schedule document.
class MissingField : public SimError {
public:
    explicit MissingField(const std::string& key)
        : SimError("missing field: " + key), key_(key) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

// A value that must be strictly positive is zero or negative.
class NonPositiveValue : public SimError {
public:
    explicit NonPositiveValue(const std::string& key)
        : SimError("value must be positive: " + key), key_(key) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

// Grid dimensions must be powers of two so that every row/column/stride
// group is expressible by the bitwise mask rule.
class NonPowerOfTwoGrid : public SimError {
public:
    explicit NonPowerOfTwoGrid(const std::string& key)
        : SimError("grid dimension must be a power of two: " + key), key_(key) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

// More HBM channels requested than edge routers available on that side.
class ChannelCountExceedsEdge : public SimError {
public:
    explicit ChannelCountExceedsEdge(const std::string& key)
        : SimError("channel count exceeds edge routers: " + key), key_(key) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

// Malformed line, unknown key, or unparseable value in a text document.
class ParseError : public SimError {
public:
    using SimError::SimError;
};

// GroupSpec construction with selector bits outside the mask: such a group
// can never match any coordinate.
class SelectorOutsideMask : public SimError {
public:
    using SimError::SimError;
};

class IoFailure : public SimError {
public:
    using SimError::SimError;
};

// Manifest and channel binary disagree about sizes.
class SizeMismatch : public SimError {
public:
    using SimError::SimError;
};

class UnknownEncoding : public SimError {
public:
    using SimError::SimError;
};

// Physical and logical grids cannot be remapped onto each other.
class IncompatibleDims : public SimError {
public:
    using SimError::SimError;
};

class InvalidPlan : public SimError {
public:
    using SimError::SimError;
};

// A schedule's working set does not fit the per-tile scratchpad.
class SpmOverflow : public SimError {
public:
    SpmOverflow(std::uint64_t required, std::uint64_t available)
        : SimError("SPM budget exceeded: need " + std::to_string(required) +
                   " bytes, have " + std::to_string(available)),
          required_(required),
          available_(available) {}
    std::uint64_t required() const { return required_; }
    std::uint64_t available() const { return available_; }

private:
    std::uint64_t required_;
    std::uint64_t available_;
};

class SpmOverflowAtRuntime : public SimError {
public:
    using SimError::SimError;
};

// A Receive (or collective participant) could not be paired with a matching
// send within its superstep.
class UnmatchedReceive : public SimError {
public:
    using SimError::SimError;
};

class PreloadMissingMatrix : public SimError {
public:
    explicit PreloadMissingMatrix(const std::string& name)
        : SimError("preload does not provide matrix: " + name) {}
};

class ShapeMismatch : public SimError {
public:
    using SimError::SimError;
};

class ZeroTraffic : public SimError {
public:
    using SimError::SimError;
};

}  // namespace tilesim
