#pragma once

#include <stdexcept>
#include <string>

namespace egm {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct NonPositiveDepth : Error {
    explicit NonPositiveDepth(const std::string& msg) : Error("non-positive depth: " + msg) {}
};

struct DegenerateBaseline : Error {
    explicit DegenerateBaseline(const std::string& msg) : Error("degenerate baseline: " + msg) {}
};

struct DegenerateLine : Error {
    explicit DegenerateLine(const std::string& msg) : Error("degenerate epipolar line: " + msg) {}
};

struct InvalidBBox : Error {
    explicit InvalidBBox(const std::string& msg) : Error("invalid bbox: " + msg) {}
};

struct DimMismatch : Error {
    explicit DimMismatch(const std::string& msg) : Error("dimension mismatch: " + msg) {}
};

struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& msg) : Error("shape mismatch: " + msg) {}
};

struct TooLarge : Error {
    explicit TooLarge(const std::string& msg) : Error("problem too large: " + msg) {}
};

struct EmptyEdgeSet : Error {
    explicit EmptyEdgeSet(const std::string& msg) : Error("empty edge set: " + msg) {}
};

struct EmptyView : Error {
    explicit EmptyView(const std::string& msg) : Error("empty view: " + msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

struct CoverageMismatch : Error {
    explicit CoverageMismatch(const std::string& msg) : Error("coverage mismatch: " + msg) {}
};

struct LengthMismatch : Error {
    explicit LengthMismatch(const std::string& msg) : Error("length mismatch: " + msg) {}
};

struct NoImprovement : Error {
    explicit NoImprovement(const std::string& msg) : Error("no improvement: " + msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error("io error: " + msg) {}
};

}  // namespace egm
