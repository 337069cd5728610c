#include "patch3d/error.hpp"

#include <sstream>

namespace patch3d {

const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::PreconditionFailed: return "PreconditionFailed";
    case ErrorKind::InfeasibleBalance: return "InfeasibleBalance";
    case ErrorKind::EmptyBank: return "EmptyBank";
    case ErrorKind::UndefinedMetric: return "UndefinedMetric";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
{
}

namespace {
std::string infeasible_message(double requested, double minimal)
{
    std::ostringstream os;
    os << "delta " << requested << " cannot be met; minimal feasible delta is " << minimal;
    return os.str();
}
} // namespace

InfeasibleBalanceError::InfeasibleBalanceError(double requested, double minimal_feasible)
    : Error(ErrorKind::InfeasibleBalance, infeasible_message(requested, minimal_feasible)),
      minimal_(minimal_feasible)
{
}

EmptyBankError::EmptyBankError(std::size_t bank)
    : Error(ErrorKind::EmptyBank, "memory bank " + std::to_string(bank) + " is empty"), bank_(bank)
{
}

ParseError::ParseError(const std::string& what, std::uint64_t byte_offset)
    : Error(ErrorKind::ParseError, what + " (at byte " + std::to_string(byte_offset) + ")"),
      offset_(byte_offset)
{
}

} // namespace patch3d
