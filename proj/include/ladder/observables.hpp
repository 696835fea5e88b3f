#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "ladder/chebyshev.hpp"
#include "ladder/state_prep.hpp"

namespace ladder {

// Provenance carried alongside a trace; the engine fills the grid and plan
// fields, preparation code the recipe fields.
struct TraceMeta {
    int n_spins = 0;
    Couplings couplings;
    std::uint64_t seed = 0;
    std::optional<int> x_target;
    double alpha = 0.0;
    double e0 = 0.0;
    double dt_out = 0.0;
    double t_max = 0.0;
    std::size_t plan_order = 0;
    SpectralBounds bounds;
};

// Time series of P_X, x moments and energy moments on a fixed output grid.
struct ObservableTrace {
    std::vector<int> x_values;            // ascending, matches px columns
    std::vector<double> times;
    std::vector<std::vector<double>> px;  // [time][x slot]
    std::vector<double> mean_x;
    std::vector<double> var_x;
    std::vector<double> mean_h;
    std::vector<double> var_h;
    TraceMeta meta;

    std::size_t rows() const { return times.size(); }
};

// P_X = sum over the X block of |amplitude|^2, aligned with basis.x_values().
// Input must be unit norm to 1e-6.
std::vector<double> measure_px(const StateVector& state);

// mean = X.P, variance = X^2.P - mean^2. P must sum to 1 within 1e-9.
std::pair<double, double> moments_x(const std::vector<double>& px,
                                    const std::vector<int>& x_values);

// <x> computed directly from amplitudes (x is diagonal in this basis).
double mean_x_direct(const StateVector& state);

// Repeated fixed-step propagation with measurement at every output time,
// including t = 0. t_max must be an integer multiple of dt_out.
ObservableTrace evolve_and_trace(const StateVector& initial, const LadderHamiltonian& h,
                                 const ChebyshevPlan& step_plan, double t_max, double dt_out);

struct TypicalVariance {
    double value = 0.0;      // mean over seeds of var_x
    double std_error = 0.0;
    std::vector<double> per_seed;
};

// var_x of filtered random states |omega'>, averaged over n_seeds seeds
// derived from root_seed.
TypicalVariance typical_variance(double alpha, std::shared_ptr<const LadderHamiltonian> h,
                                 const SpectralBounds& bounds, int n_seeds,
                                 std::uint64_t root_seed, double e0 = 0.0);

// Earliest grid time from which |mean_x| stays below
// max(0.05 |mean_x(0)|, 0.2) for a full 10-time-unit window.
std::optional<double> equilibration_time(const ObservableTrace& trace);

// Time average of an per-time series over the final fraction of the trace.
double late_time_average(const std::vector<double>& times, const std::vector<double>& series,
                         double final_fraction = 0.2);

} // namespace ladder
