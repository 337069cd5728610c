#ifndef PATCH3D_ERROR_HPP
#define PATCH3D_ERROR_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace patch3d {

enum class ErrorKind {
    EmptyInput,
    InvalidArgument,
    DegenerateInput,
    PreconditionFailed,
    InfeasibleBalance,
    EmptyBank,
    UndefinedMetric,
    ParseError,
    IoError,
    ConfigError,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers switch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what);
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Raised by balanced assignment when no partition can satisfy the ratio.
class InfeasibleBalanceError : public Error {
public:
    InfeasibleBalanceError(double requested, double minimal_feasible);
    double minimal_feasible_delta() const noexcept { return minimal_; }

private:
    double minimal_;
};

class EmptyBankError : public Error {
public:
    explicit EmptyBankError(std::size_t bank);
    std::size_t bank() const noexcept { return bank_; }

private:
    std::size_t bank_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::uint64_t byte_offset);
    std::uint64_t byte_offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

} // namespace patch3d

#endif // PATCH3D_ERROR_HPP
