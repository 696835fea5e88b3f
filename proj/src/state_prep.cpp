#include "ladder/state_prep.hpp"

#include <cmath>
#include <string>

namespace ladder {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t salt_a, std::uint64_t salt_b) {
    return splitmix64(splitmix64(root ^ splitmix64(salt_a)) ^ splitmix64(~salt_b));
}

StateVector random_sector_state(std::uint64_t seed, std::shared_ptr<const SectorBasis> basis) {
    StateVector state(std::move(basis));
    std::mt19937_64 rng(seed);
    for (cplx& a : state.amplitudes()) {
        a = cplx{uniform_pm1(rng), 0.0};
    }
    state.normalize();
    return state;
}

StateVector project_x(const StateVector& state, int x_target) {
    const SectorBasis& basis = state.basis();
    if (!basis.x_admissible(x_target)) {
        throw invalid_argument_error("x_target " + std::to_string(x_target) +
                                     " is not an eigenvalue of x for N = " +
                                     std::to_string(basis.geometry().n_spins));
    }
    StateVector out(state.basis_ptr());
    double nrm = 0.0;
    for (std::size_t k = 0; k < state.dimension(); ++k) {
        if (basis.x_of_index(k) == x_target) {
            out[k] = state[k];
            nrm += std::norm(state[k]);
        }
    }
    if (nrm == 0.0) {
        throw projection_error("projection onto x = " + std::to_string(x_target) +
                               " annihilated the state");
    }
    const double inv = 1.0 / std::sqrt(nrm);
    for (cplx& a : out.amplitudes()) a *= inv;
    return out;
}

double sigma_h(const StateVector& state, const LadderHamiltonian& h) {
    const auto [mean, second] = h.energy_moments(state);
    return std::sqrt(std::max(0.0, second - mean * mean));
}

StateVector prepare_omega(const PrepRecipe& recipe,
                          std::shared_ptr<const LadderHamiltonian> h,
                          const SpectralBounds& bounds) {
    StateVector state = random_sector_state(recipe.seed, h->basis_ptr());
    if (recipe.x_target) {
        state = project_x(state, *recipe.x_target);
    }
    if (recipe.alpha > 0.0) {
        const ChebyshevPlan filter = plan_gaussian(h, bounds, recipe.alpha, recipe.e0);
        state = apply_plan(filter, state);
        state.normalize();
    }
    return state;
}

StateVector prepare_typical(std::uint64_t seed, double alpha,
                            std::shared_ptr<const LadderHamiltonian> h,
                            const SpectralBounds& bounds, double e0) {
    PrepRecipe recipe;
    recipe.seed = seed;
    recipe.alpha = alpha;
    recipe.e0 = e0;
    return prepare_omega(recipe, std::move(h), bounds);
}

double tune_alpha(std::uint64_t seed, std::optional<int> x_target, double target_sigma_h,
                  std::shared_ptr<const LadderHamiltonian> h, const SpectralBounds& bounds,
                  double e0) {
    if (target_sigma_h <= 0.0) {
        throw invalid_argument_error("target sigma_H must be positive");
    }
    StateVector base = random_sector_state(seed, h->basis_ptr());
    if (x_target) base = project_x(base, *x_target);

    auto sigma_at = [&](double alpha) {
        if (alpha == 0.0) return sigma_h(base, *h);
        const ChebyshevPlan filter = plan_gaussian(h, bounds, alpha, e0);
        StateVector filtered = apply_plan(filter, base);
        filtered.normalize();
        return sigma_h(filtered, *h);
    };

    const double tol = 1e-3 * target_sigma_h;
    const double unfiltered = sigma_at(0.0);
    if (target_sigma_h > unfiltered + tol) {
        throw unreachable_target_error(
            "target sigma_H " + std::to_string(target_sigma_h) +
            " exceeds the unfiltered value " + std::to_string(unfiltered));
    }
    if (std::abs(unfiltered - target_sigma_h) <= tol) return 0.0;

    double lo = 0.0;
    double hi = 1.0;
    double sigma_hi = sigma_at(hi);
    int doublings = 0;
    while (sigma_hi > target_sigma_h) {
        lo = hi;
        hi *= 2.0;
        if (++doublings > 60) {
            throw convergence_error("no alpha bracket reached the target sigma_H", lo, hi);
        }
        sigma_hi = sigma_at(hi);
    }

    for (int iter = 0; iter < 60; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double sigma_mid = sigma_at(mid);
        if (std::abs(sigma_mid - target_sigma_h) <= tol) return mid;
        if (sigma_mid > target_sigma_h) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    throw convergence_error("alpha bisection hit the 60 iteration cap", lo, hi);
}

double tune_alpha_clamped(std::uint64_t seed, std::optional<int> x_target,
                          double target_sigma_h, std::shared_ptr<const LadderHamiltonian> h,
                          const SpectralBounds& bounds, double e0) {
    try {
        return tune_alpha(seed, x_target, target_sigma_h, std::move(h), bounds, e0);
    } catch (const unreachable_target_error&) {
        return 0.0;
    }
}

} // namespace ladder
