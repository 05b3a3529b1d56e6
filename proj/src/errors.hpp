#pragma once

#include <stdexcept>
#include <string>

namespace ioncalib {

// Error categories mirror the status codes of the public C API.
enum class ErrorCode {
    Io = 1,
    Parse = 2,
    Validation = 3,
    Numeric = 4,
    Contract = 5,
    Unknown = 6,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

struct IoError : Error {
    explicit IoError(std::string msg) : Error(ErrorCode::Io, std::move(msg)) {}
};
struct ParseError : Error {
    explicit ParseError(std::string msg) : Error(ErrorCode::Parse, std::move(msg)) {}
};
struct ValidationError : Error {
    explicit ValidationError(std::string msg) : Error(ErrorCode::Validation, std::move(msg)) {}
};
struct NumericError : Error {
    explicit NumericError(std::string msg) : Error(ErrorCode::Numeric, std::move(msg)) {}
};
struct ContractError : Error {
    explicit ContractError(std::string msg) : Error(ErrorCode::Contract, std::move(msg)) {}
};

}  // namespace ioncalib
