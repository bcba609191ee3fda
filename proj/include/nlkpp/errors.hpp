#pragma once

#include <stdexcept>
#include <string>

namespace nlkpp {

// Precondition or parameter violation detected on entry to an operation.
struct InvalidParam : std::invalid_argument {
    explicit InvalidParam(const std::string& msg) : std::invalid_argument(msg) {}
};

// Medium oscillation too large for the intended kernel mass (c_hi - c_lo >= J_bar).
struct OscillationViolation : std::invalid_argument {
    explicit OscillationViolation(const std::string& msg) : std::invalid_argument(msg) {}
};

// A nonlocal operator needed values beyond the stored halo of a truncated field.
struct HaloMissing : std::runtime_error {
    explicit HaloMissing(const std::string& msg) : std::runtime_error(msg) {}
};

// An exponent sum exceeded the safe range before exponentiation.
struct Overflow : std::runtime_error {
    explicit Overflow(const std::string& msg) : std::runtime_error(msg) {}
};

// Requested time step violates the monotonicity (CFL) bound.
struct CFLViolation : std::invalid_argument {
    explicit CFLViolation(const std::string& msg) : std::invalid_argument(msg) {}
};

// A simulated state left the invariant range [0,1] beyond round-off slack.
struct RangeViolation : std::runtime_error {
    explicit RangeViolation(const std::string& msg) : std::runtime_error(msg) {}
};

// No level-set crossing found when extracting a front.
struct EmptyFront : std::runtime_error {
    explicit EmptyFront(const std::string& msg) : std::runtime_error(msg) {}
};

// A decreasing-parameter sequence failed to settle (gaps not shrinking).
struct NonConvergent : std::runtime_error {
    explicit NonConvergent(const std::string& msg) : std::runtime_error(msg) {}
};

// An iterative solve exhausted its sweep budget.
struct MaxIterExceeded : std::runtime_error {
    explicit MaxIterExceeded(const std::string& msg) : std::runtime_error(msg) {}
};

// Problem data outside the regime where the scheme is well posed.
struct IllPosed : std::invalid_argument {
    explicit IllPosed(const std::string& msg) : std::invalid_argument(msg) {}
};

// A level set of the tabulated Hamiltonian reaches the table boundary.
struct LevelSetEscapesTable : std::runtime_error {
    explicit LevelSetEscapesTable(const std::string& msg) : std::runtime_error(msg) {}
};

// A slope fed to the tabulated Hamiltonian left the tabulated p-range.
struct TableRangeExceeded : std::runtime_error {
    explicit TableRangeExceeded(const std::string& msg) : std::runtime_error(msg) {}
};

// Configuration failed validation; message carries the offending key path.
struct ConfigError : std::invalid_argument {
    explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

}  // namespace nlkpp
