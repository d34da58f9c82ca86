// errors.hpp: exception hierarchy shared by every qengine module

#pragma once

#include <stdexcept>
#include <string>

namespace qengine {

// Base class; catch this to handle any library failure.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid scalar argument (negative rate, non-positive temperature, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

// Generator variant not applicable to the requested operation.
class VariantMismatch : public Error {
public:
    using Error::Error;
};

// A state does not fit into the truncated Fock space.
class TruncationError : public Error {
public:
    using Error::Error;
};

class StabilityError : public Error {
public:
    using Error::Error;
};

class NoStationaryState : public Error {
public:
    using Error::Error;
};

class DegenerateKernel : public Error {
public:
    using Error::Error;
};

class DegenerateSpectrum : public Error {
public:
    using Error::Error;
};

// Probability flux into the top level of a birth-death ladder exceeded the monitor threshold.
class BoundaryLeak : public Error {
public:
    using Error::Error;
};

class CutoffTooSmall : public Error {
public:
    using Error::Error;
};

class InsufficientSamples : public Error {
public:
    using Error::Error;
};

class UnknownPreset : public Error {
public:
    using Error::Error;
};

// Config file unreadable or not matching the run schema.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace qengine
