#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace relux {

/// Precondition violated by the caller (bad shape, out-of-range value, ...).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed file content. `offset` is the byte position where parsing failed.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Well-formed but unsupported variant (grayscale PFM, big-endian, ...).
class UnsupportedFormat : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A manifest-referenced file does not match its recorded content hash.
class HashMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A query frame had no light tokens to attend to.
class MissingLightingForFrame : public std::runtime_error {
public:
    explicit MissingLightingForFrame(int frame)
        : std::runtime_error("no light tokens for frame " + std::to_string(frame)), frame_(frame) {}
    int frame() const noexcept { return frame_; }

private:
    int frame_;
};

}  // namespace relux
