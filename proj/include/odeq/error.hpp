#pragma once

#include <stdexcept>
#include <string>

namespace odeq {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Text did not conform to the expression grammar.
struct ParseError : Error {
    ParseError(const std::string& msg, std::size_t pos)
        : Error(msg + " (at position " + std::to_string(pos) + ")"), position(pos) {}
    std::size_t position;
};

struct UndeclaredVariableError : Error {
    UndeclaredVariableError(const std::string& name, std::size_t pos)
        : Error("undeclared variable '" + name + "' (at position " + std::to_string(pos) + ")"),
          variable(name), position(pos) {}
    std::string variable;
    std::size_t position;
};

struct DomainError : Error {
    using Error::Error;
};

// A reduction step required an antiderivative or an inverse that the
// closed-form solver cannot produce.
struct NoClosedForm : Error {
    using Error::Error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct UnclassifiableError : Error {
    using Error::Error;
};

}  // namespace odeq
