#ifndef PROTOSEG_ERRORS_HPP
#define PROTOSEG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace protoseg {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Two grids that must share a shape do not.
class ShapeMismatchError : public Error {
public:
    explicit ShapeMismatchError(const std::string& msg) : Error(msg) {}
};

// A pooling mask selects no pixels; the pooled mean is undefined.
class EmptyMaskError : public Error {
public:
    explicit EmptyMaskError(const std::string& msg) : Error(msg) {}
};

// Soft-mask weights sum to zero; the weighted mean is undefined.
class ZeroEffectiveWeightError : public Error {
public:
    explicit ZeroEffectiveWeightError(const std::string& msg) : Error(msg) {}
};

// Cosine distance against a zero-norm vector.
class ZeroVectorError : public Error {
public:
    explicit ZeroVectorError(const std::string& msg) : Error(msg) {}
};

// No background pixels exist anywhere in a support set.
class EmptyBackgroundError : public Error {
public:
    explicit EmptyBackgroundError(const std::string& msg) : Error(msg) {}
};

// All distances in a set are identical; min-max normalization is undefined.
class DegenerateSetError : public Error {
public:
    explicit DegenerateSetError(const std::string& msg) : Error(msg) {}
};

// A synthetic-episode spec cannot be satisfied (e.g. separation constraint).
class InfeasibleSpecError : public Error {
public:
    explicit InfeasibleSpecError(const std::string& msg) : Error(msg) {}
};

// Training loss became non-finite.
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& msg) : Error(msg) {}
};

// Invalid or malformed configuration.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// File read/write failure.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace protoseg

#endif  // PROTOSEG_ERRORS_HPP
