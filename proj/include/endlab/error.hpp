#pragma once

#include <stdexcept>
#include <string>

namespace endlab {

enum class Errc {
    invalid_argument,
    breakpoint,
    quadrature_fail,
    root_fail,
    not_applicable,
    no_dominating_end,
    coe_fail,
    profile_unsupported,
    step_fail,
    solve_fail,
    eigen_fail,
    constant_input,
    config_invalid,
    length_mismatch,
    nonpositive,
};

inline const char* to_string(Errc code) noexcept {
    switch (code) {
        case Errc::invalid_argument: return "INVALID_ARGUMENT";
        case Errc::breakpoint: return "BREAKPOINT";
        case Errc::quadrature_fail: return "QUADRATURE_FAIL";
        case Errc::root_fail: return "ROOT_FAIL";
        case Errc::not_applicable: return "NOT_APPLICABLE";
        case Errc::no_dominating_end: return "NO_DOMINATING_END";
        case Errc::coe_fail: return "COE_FAIL";
        case Errc::profile_unsupported: return "PROFILE_UNSUPPORTED";
        case Errc::step_fail: return "STEP_FAIL";
        case Errc::solve_fail: return "SOLVE_FAIL";
        case Errc::eigen_fail: return "EIGEN_FAIL";
        case Errc::constant_input: return "CONSTANT_INPUT";
        case Errc::config_invalid: return "CONFIG_INVALID";
        case Errc::length_mismatch: return "LENGTH_MISMATCH";
        case Errc::nonpositive: return "NONPOSITIVE";
    }
    return "UNKNOWN";
}

/// Exception carrying one of the library error codes. The message is
/// prefixed with the code name so it reads well when printed directly.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

inline void require(bool ok, Errc code, const std::string& detail) {
    if (!ok) throw Error(code, detail);
}

}  // namespace endlab
