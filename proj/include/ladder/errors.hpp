#pragma once

#include <stdexcept>
#include <string>

namespace ladder {

// Base class for everything thrown by this library.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Geometry or parameter outside the supported domain (odd N, N < 4, tol <= 0, ...).
struct invalid_argument_error : error {
    using error::error;
};

// Basis dimension would overflow the index type, or a preflight memory check failed.
struct capacity_error : error {
    using error::error;
};

// A configuration or state violates the S_z^total = 0 sector.
struct sector_error : error {
    using error::error;
};

// State, plan and Hamiltonian were built over different bases.
struct dimension_error : error {
    using error::error;
};

// Iterative method hit its cap. Carries the best bracket found so far.
struct convergence_error : error {
    convergence_error(const std::string& msg, double lo, double hi)
        : error(msg), best_lo(lo), best_hi(hi) {}
    double best_lo;
    double best_hi;
};

// Projection annihilated the state.
struct projection_error : error {
    using error::error;
};

// Requested sigma_H above the unfiltered value.
struct unreachable_target_error : error {
    using error::error;
};

// Input state norm too far from 1 for a probability measurement.
struct unnormalized_input_error : error {
    using error::error;
};

// A quantity that must be (near) non-negative or conserved came out wrong.
struct numeric_error : error {
    using error::error;
};

// Config file failed validation. Carries the offending field path.
struct schema_error : error {
    schema_error(const std::string& msg, std::string path_in)
        : error(msg + " (at '" + path_in + "')"), path(std::move(path_in)) {}
    std::string path;
};

// Trace alignment left less than the minimum overlap window.
struct insufficient_overlap_error : error {
    using error::error;
};

// Trace never satisfied the equilibration detector.
struct not_equilibrated_error : error {
    using error::error;
};

// Least-squares fit failed to converge. Carries the residual at the best point.
struct fit_error : error {
    fit_error(const std::string& msg, double residual_in)
        : error(msg), residual(residual_in) {}
    double residual;
};

} // namespace ladder
