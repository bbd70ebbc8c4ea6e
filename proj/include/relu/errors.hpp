#pragma once

#include <stdexcept>
#include <string>

namespace relu {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// process exit codes: InputError -> 1, ProtocolError -> 2, NumericalError -> 3.

// Malformed or out-of-contract data supplied by the caller (bad file, bad
// shape, label out of range, degenerate group, ...).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A hyperparameter outside its documented domain (T <= 0, alpha outside (0,1), ...).
class ParameterError : public InputError {
public:
    using InputError::InputError;
};

// A violation of the experimental protocol, e.g. tuning/evaluation overlap.
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure at runtime: diverging training loss, non-finite gradient,
// an iterative solver that did not converge.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace relu
