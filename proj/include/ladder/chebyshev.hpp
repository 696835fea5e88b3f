#pragma once

#include <memory>
#include <vector>

#include "ladder/hamiltonian.hpp"
#include "ladder/state_vector.hpp"

namespace ladder {

enum class PlanKind { propagator, gaussian };

// Truncated Chebyshev expansion of a function of the Hamiltonian on the
// rescaled operator (H - shift_b) / scale_a, whose spectrum lies in [-1, 1].
// Plans are immutable and shareable across threads.
struct ChebyshevPlan {
    std::shared_ptr<const LadderHamiltonian> hamiltonian;
    SpectralBounds bounds;
    double scale_a = 1.0;
    double shift_b = 0.0;
    PlanKind kind = PlanKind::propagator;
    double time = 0.0;  // propagator target e^{-iHt}
    double alpha = 0.0; // gaussian target e^{-alpha (H - e0)^2}
    double e0 = 0.0;
    double truncation_tol = 1e-14;
    std::vector<cplx> coeffs; // c_0 .. c_M

    std::size_t order() const { return coeffs.empty() ? 0 : coeffs.size() - 1; }
};

// J_0(z) .. J_k_max(z) by Miller's downward recurrence (z >= 0).
std::vector<double> bessel_j_sequence(double z, int k_max);

// Coefficients of e^{-i(a u + b)t} on u in [-1,1]: Bessel form
// c_k = (2 - delta_k0) (-i)^k J_k(a t) e^{-i b t}, truncated at the first
// order where |c_k| stays below tol for 3 consecutive orders.
ChebyshevPlan plan_propagator(std::shared_ptr<const LadderHamiltonian> h,
                              const SpectralBounds& bounds, double t, double tol = 1e-14);

// Coefficients of exp(-alpha (a u + b - e0)^2) by Gauss-Chebyshev quadrature
// at 4x the trial truncation order, same tail rule.
ChebyshevPlan plan_gaussian(std::shared_ptr<const LadderHamiltonian> h,
                            const SpectralBounds& bounds, double alpha, double e0 = 0.0,
                            double tol = 1e-14);

// sum_k c_k T_k(H~) |state> via the three-term recurrence; three vector
// buffers plus the accumulator. Never renormalizes: propagator norm drift is
// a diagnostic, gaussian output is normalized by the caller.
StateVector apply_plan(const ChebyshevPlan& plan, const StateVector& state);

} // namespace ladder
