#pragma once

#include <stdexcept>
#include <string>

namespace iftd {

enum class ErrorCode {
    Argument,
    Io,
    Format,
    Validation,
    Config,
    DegenerateGeometry,
};

// Base exception for everything the library throws. The code is what the
// C API maps onto its status values.
class Error : public std::runtime_error
{
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

class ArgumentError : public Error
{
public:
    explicit ArgumentError(const std::string& what) : Error(ErrorCode::Argument, what) {}
};

class IoError : public Error
{
public:
    explicit IoError(const std::string& what) : Error(ErrorCode::Io, what) {}
};

class FormatError : public Error
{
public:
    explicit FormatError(const std::string& what) : Error(ErrorCode::Format, what) {}
};

class ValidationError : public Error
{
public:
    explicit ValidationError(const std::string& what) : Error(ErrorCode::Validation, what) {}
};

class ConfigError : public Error
{
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCode::Config, what) {}
};

class DegenerateGeometryError : public Error
{
public:
    explicit DegenerateGeometryError(const std::string& what)
        : Error(ErrorCode::DegenerateGeometry, what) {}
};

} // namespace iftd
