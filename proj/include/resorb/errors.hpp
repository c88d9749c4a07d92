#ifndef RESORB_ERRORS_HPP
#define RESORB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace resorb {

// Base for every typed failure raised by the library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A continuum of critical points of d^2 (e.g. concentric coplanar circles).
struct DegenerateConfig : Error {
    using Error::Error;
};

// Tangents parallel at the minimum: the signed distance loses its sign.
struct SmoothingFails : Error {
    using Error::Error;
};

// Tangent crossing: det A_h below threshold, the quadratic model degenerates.
struct CrossingDegenerate : Error {
    using Error::Error;
};

// A displaced configuration jumped to a different minimum during FD.
struct BifurcationNearby : Error {
    using Error::Error;
};

// Iteration/quadrature did not converge within its budget.
struct NumericalFailure : Error {
    using Error::Error;
};

// Evaluation requested exactly at a divergent point (crossing configuration
// at the critical value of the resonant angle).
struct DivergentIntegral : Error {
    using Error::Error;
};

// Trajectory passed through the attracting centre in the full model.
struct CollisionError : Error {
    using Error::Error;
};

// An operation was called outside its stated domain.
struct ContractViolation : Error {
    using Error::Error;
};

// Malformed input file; carries a 1-based line number when known.
struct ParseError : Error {
    int line = 0;
    ParseError(const std::string& msg, int line_) : Error(msg), line(line_) {}
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

// Config value missing/invalid; message names the offending field path.
struct ConfigError : Error {
    using Error::Error;
};

// Time outside the span covered by an ephemeris table.
struct OutOfRange : Error {
    using Error::Error;
};

} // namespace resorb

#endif
