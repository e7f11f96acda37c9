// error.hpp: Exception types raised by the simulation library

#pragma once

#include <stdexcept>
#include <string>

namespace qdso {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

struct FrameMismatch : Error {
    using Error::Error;
};

// Null space of the Liouvillian has dimension > 1.
struct DegenerateNessError : Error {
    using Error::Error;
};

// Steady-state residual above the acceptance threshold.
struct ConvergenceError : Error {
    using Error::Error;
};

// A ratio whose denominator vanished (η_converter at I_R = 0, ...).
struct UndefinedResultError : Error {
    using Error::Error;
};

// Density matrix with eigenvalues far below zero.
struct InvalidStateError : Error {
    using Error::Error;
};

struct EmptyProfileError : Error {
    using Error::Error;
};

// Differential entropy of a radial profile is not positive.
struct EntropyDegenerateError : Error {
    using Error::Error;
};

struct MarkovCheckFailure : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

} // namespace qdso
