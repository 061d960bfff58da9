#pragma once

#include <stdexcept>
#include <string>

namespace leakscope {

enum class ErrorCode {
    not_found,
    permission_denied,
    parse_error,
    bad_magic,
    truncated_record,
    duplicate_ip,
    no_gateway,
    unknown_host,
    unknown_device,
    unknown_rule,
    invalid_window,
    invalid_argument,
    backend_io,
    unsupported,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

/// Parse failure in a line-oriented input file.
class ParseError : public Error {
public:
    ParseError(const std::string& path, int line, const std::string& what)
        : Error(ErrorCode::parse_error, path + ":" + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

}  // namespace leakscope
