#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ablatron {

enum class ErrorKind {
    MalformedDocument,
    UnknownKey,
    InvariantViolation,
    RateOutOfRange,
    PulseOutsideGate,
    UnknownIsotope,
    UnknownTransition,
    UnstableTrap,
    UnstableTimestep,
    DegenerateTrace,
    DegenerateData,
    NonBracketable,
};

inline std::string_view to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::MalformedDocument: return "malformed-document";
        case ErrorKind::UnknownKey: return "unknown-key";
        case ErrorKind::InvariantViolation: return "invariant-violation";
        case ErrorKind::RateOutOfRange: return "rate-out-of-range";
        case ErrorKind::PulseOutsideGate: return "pulse-outside-gate";
        case ErrorKind::UnknownIsotope: return "unknown-isotope";
        case ErrorKind::UnknownTransition: return "unknown-transition";
        case ErrorKind::UnstableTrap: return "unstable-trap";
        case ErrorKind::UnstableTimestep: return "unstable-timestep";
        case ErrorKind::DegenerateTrace: return "degenerate-trace";
        case ErrorKind::DegenerateData: return "degenerate-data";
        case ErrorKind::NonBracketable: return "non-bracketable";
    }
    return "unknown";
}

/// Config-class errors map to CLI exit code 2, everything else to 3.
inline bool is_config_error(ErrorKind k) {
    return k == ErrorKind::MalformedDocument || k == ErrorKind::UnknownKey ||
           k == ErrorKind::InvariantViolation;
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string_view key, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + (key.empty() ? "" : " [" + std::string(key) + "]") +
                             ": " + what),
          kind_(kind),
          key_(key),
          detail_(what) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& key() const noexcept { return key_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string key_;
    std::string detail_;
};

}  // namespace ablatron
