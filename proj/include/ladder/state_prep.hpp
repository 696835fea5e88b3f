#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>

#include "ladder/chebyshev.hpp"

namespace ladder {

// Uniform double in [-1, 1) from the top 53 bits of the generator output.
// mt19937_64 is fully specified by the standard, so draws are identical on
// every platform for a fixed seed.
inline double uniform_pm1(std::mt19937_64& rng) {
    return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
}

// splitmix64 step; used to derive independent per-run seeds from a root seed.
std::uint64_t splitmix64(std::uint64_t x);

// Documented per-run seed derivation: two salts identify the run within an
// experiment (for example column and repetition).
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t salt_a, std::uint64_t salt_b = 0);

struct PrepRecipe {
    std::uint64_t seed = 0;
    std::optional<int> x_target;     // nullopt: unrestricted in x
    double alpha = 0.0;              // gaussian filter strength
    double e0 = 0.0;                 // window center
    double sigma_h_target = 0.37;    // recorded alongside alpha in manifests
};

// Real amplitudes drawn uniform in [-1,1] per sector basis vector, then
// normalized. Working inside the sector is the P(S_z=0) projection.
StateVector random_sector_state(std::uint64_t seed, std::shared_ptr<const SectorBasis> basis);

// Zero all amplitudes outside the x_target block and renormalize.
StateVector project_x(const StateVector& state, int x_target);

// sqrt(<H^2> - <H>^2)
double sigma_h(const StateVector& state, const LadderHamiltonian& h);

// |omega_X> = C e^{-alpha (H-E0)^2} P_x P(S_z=0) |Psi>; the filter acts after
// the projection. Unit norm on return.
StateVector prepare_omega(const PrepRecipe& recipe,
                          std::shared_ptr<const LadderHamiltonian> h,
                          const SpectralBounds& bounds);

// |omega'> = C e^{-alpha (H-E0)^2} |Psi>, unrestricted in x.
StateVector prepare_typical(std::uint64_t seed, double alpha,
                            std::shared_ptr<const LadderHamiltonian> h,
                            const SpectralBounds& bounds, double e0 = 0.0);

// Bisection on alpha against the monotone decreasing sigma_H(alpha) until
// |sigma_H - target| < 1e-3 * target. x_target nullopt tunes the unrestricted
// state.
double tune_alpha(std::uint64_t seed, std::optional<int> x_target, double target_sigma_h,
                  std::shared_ptr<const LadderHamiltonian> h, const SpectralBounds& bounds,
                  double e0 = 0.0);

// As tune_alpha, but returns 0 when the projected state is already narrower
// than the target. The extreme blocks |X| = N/2 hold a single configuration
// whose sigma_H is sqrt(N/2) kappa / 2, which falls below 0.37 for N < 28;
// those columns go unfiltered.
double tune_alpha_clamped(std::uint64_t seed, std::optional<int> x_target,
                          double target_sigma_h, std::shared_ptr<const LadderHamiltonian> h,
                          const SpectralBounds& bounds, double e0 = 0.0);

} // namespace ladder
