#pragma once

#include <stdexcept>
#include <string>

namespace hkrm {

/// Base for errors caused by invalid input or violated preconditions.
/// The CLI maps these to exit code 2; everything else is an internal failure.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ParseError : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

class DegreeCapExceeded : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

class PreconditionViolated : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

class InvalidParameter : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

class InvalidConfig : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

class RegimeViolation : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

class PoleAtOne : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

class PrecisionError : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

/// Numerical failures.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularMatrix : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NonInvertibleSeries : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NoConvergence : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class IllConditioned : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class EigFailure : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ZeroSpectrumValue : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace hkrm
