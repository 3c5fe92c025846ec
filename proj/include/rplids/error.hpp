#pragma once

#include <stdexcept>
#include <string>

namespace rplids {

enum class ErrorCode {
    Validation,   // bad configuration or argument
    Io,
    Parse,
    State,        // operation called in the wrong lifecycle state (cold model, empty window)
    DegenerateData,
    Runtime,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorCode::Validation, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorCode::Io, what) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(ErrorCode::Parse, "line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class StateError : public Error {
public:
    explicit StateError(const std::string& what) : Error(ErrorCode::State, what) {}
};

class DegenerateDataError : public Error {
public:
    explicit DegenerateDataError(const std::string& what) : Error(ErrorCode::DegenerateData, what) {}
};

}  // namespace rplids
