#pragma once
#include <stdexcept>
#include <string>

namespace dpam {

/// Coarse classification used by the CLI to pick an exit code.
enum class ErrorClass { validation, unsupported, numerical, io };

inline const char* to_string(ErrorClass c)
{
    switch (c) {
        case ErrorClass::validation:  return "validation";
        case ErrorClass::unsupported: return "unsupported";
        case ErrorClass::numerical:   return "numerical";
        case ErrorClass::io:          return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error
{
public:
    Error(ErrorClass cls, const std::string& msg)
        : std::runtime_error(msg), cls_(cls) {}

    ErrorClass error_class() const noexcept { return cls_; }

private:
    ErrorClass cls_;
};

class ValidationError : public Error
{
public:
    explicit ValidationError(const std::string& msg)
        : Error(ErrorClass::validation, msg) {}
};

class UnsupportedError : public Error
{
public:
    explicit UnsupportedError(const std::string& msg)
        : Error(ErrorClass::unsupported, msg) {}
};

class NumericalError : public Error
{
public:
    explicit NumericalError(const std::string& msg)
        : Error(ErrorClass::numerical, msg) {}
};

class IoError : public Error
{
public:
    explicit IoError(const std::string& msg)
        : Error(ErrorClass::io, msg) {}
};

} // namespace dpam
