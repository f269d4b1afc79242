#pragma once

#include <stdexcept>
#include <string>

namespace calib
{

/// Base class of every error raised by the calibration library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Model outputs and targets (or parameters and priors) are not index-aligned.
class AlignmentError : public Error
{
public:
    using Error::Error;
};

/// A model or likelihood evaluation produced a non-finite value.
class EvaluationError : public Error
{
public:
    using Error::Error;
};

/// An argument lies outside the mathematical domain of the operation.
class DomainError : public Error
{
public:
    using Error::Error;
};

/// Malformed input text. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error
{
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what)
        , m_line(line)
    {
    }
    std::size_t line() const
    {
        return m_line;
    }

private:
    std::size_t m_line;
};

class ConfigError : public Error
{
public:
    using Error::Error;
};

class NumericalError : public Error
{
public:
    using Error::Error;
};

/// Multipliers push a transition row outside the probability simplex.
class InfeasibleParameterError : public Error
{
public:
    using Error::Error;
};

class InitializationError : public Error
{
public:
    using Error::Error;
};

class InvalidStateError : public Error
{
public:
    using Error::Error;
};

class InsufficientChainsError : public Error
{
public:
    using Error::Error;
};

class DegenerateChainError : public Error
{
public:
    using Error::Error;
};

class InsufficientDataError : public Error
{
public:
    using Error::Error;
};

class IoError : public Error
{
public:
    using Error::Error;
};

} // namespace calib
