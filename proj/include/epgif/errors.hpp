#pragma once

#include <stdexcept>
#include <string>

namespace epgif {

/// File could not be opened, read or written.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// File exists but is not a format this library reads.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

/// Operands have incompatible dimensions.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

/// A parameter is outside its documented range.
struct ParamError : std::invalid_argument {
    explicit ParamError(const std::string& what) : std::invalid_argument(what) {}
};

/// A pixel value is outside [0, L] where the operation requires it.
struct RangeError : std::runtime_error {
    explicit RangeError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace epgif
