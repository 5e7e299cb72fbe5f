#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace crowdctl {

// Malformed input: bad expressions, inconsistent shapes, mass mismatch.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ParseError : ValidationError {
    std::size_t position;
    ParseError(const std::string& msg, std::size_t pos)
        : ValidationError(msg + " at position " + std::to_string(pos)), position(pos) {}
};

// Evaluation outside the mathematical domain (division by zero, ...).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct HorizonError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Some atom never reaches the control region within the horizon.
struct GeometricConditionError : std::runtime_error {
    std::vector<std::size_t> offending;
    GeometricConditionError(const std::string& msg, std::vector<std::size_t> idx)
        : std::runtime_error(msg), offending(std::move(idx)) {}
};

// The requested horizon does not exceed the infimum time.
struct InfeasibleTimeError : std::runtime_error {
    double infimum;
    InfeasibleTimeError(const std::string& msg, double inf) : std::runtime_error(msg), infimum(inf) {}
};

// No finite-cost perfect assignment exists.
struct InfeasibleAssignmentError : std::runtime_error {
    std::size_t max_matching;
    std::vector<int> partial;
    InfeasibleAssignmentError(const std::string& msg, std::size_t m, std::vector<int> p)
        : std::runtime_error(msg), max_matching(m), partial(std::move(p)) {}
};

struct CertificateNotApplicable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SynthesisError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace crowdctl
