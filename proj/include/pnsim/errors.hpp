#pragma once

#include <stdexcept>
#include <string>

namespace pnsim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
public:
    using Error::Error;
};

class InvalidParamsError : public Error {
public:
    using Error::Error;
};

class ChannelMismatchError : public Error {
public:
    using Error::Error;
};

class ActuatorLimitError : public Error {
public:
    using Error::Error;
};

/// Bad topology or unknown references in a netlist.
class NetlistError : public Error {
public:
    using Error::Error;
};

/// Electro-optic fixed-point iteration inside a time step failed to settle.
class StepConvergenceError : public Error {
public:
    StepConvergenceError(const std::string& what, double time, double residual)
        : Error(what), time_(time), residual_(residual) {}
    double time() const noexcept { return time_; }
    double residual() const noexcept { return residual_; }

private:
    double time_;
    double residual_;
};

/// DC operating point search failed.
class DcConvergenceError : public Error {
public:
    DcConvergenceError(const std::string& what, double residual) : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Non-finite state while integrating an ODE.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, double time) : Error(what), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

class ContractViolation : public Error {
public:
    using Error::Error;
};

class CalibrationRangeError : public Error {
public:
    using Error::Error;
};

class CalibrationQualityError : public Error {
public:
    using Error::Error;
};

class WeightRangeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

}  // namespace pnsim
