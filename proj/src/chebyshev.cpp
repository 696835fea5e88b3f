#include "ladder/chebyshev.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace ladder {

namespace {

// first index M with |c_M|, |c_M+1|, |c_M+2| all below tol, or -1
int sustained_below(const std::vector<double>& mags, double tol) {
    for (std::size_t k = 0; k + 2 < mags.size(); ++k) {
        if (mags[k] < tol && mags[k + 1] < tol && mags[k + 2] < tol) {
            return static_cast<int>(k);
        }
    }
    return -1;
}

} // namespace

std::vector<double> bessel_j_sequence(double z, int k_max) {
    std::vector<double> out(static_cast<std::size_t>(k_max) + 1, 0.0);
    if (z == 0.0) {
        out[0] = 1.0;
        return out;
    }
    // start far enough above both k_max and the turning point k ~ z
    const double top = std::max(static_cast<double>(k_max), z);
    int start = static_cast<int>(top + 2.0 * std::sqrt(40.0 * (top + 1.0))) + 20;
    start += start % 2; // even start keeps the parity sum aligned

    double f_hi = 0.0;      // J_{k+1} (unnormalized)
    double f_lo = 1e-280;   // J_k
    double even_sum = 0.0;  // accumulates J_0 + 2 sum_{k even >= 2} J_k
    constexpr double rescale_at = 1e250;
    for (int k = start; k >= 1; --k) {
        const double f_prev = (2.0 * k / z) * f_lo - f_hi;
        f_hi = f_lo;
        f_lo = f_prev;
        if (k - 1 <= k_max) out[static_cast<std::size_t>(k - 1)] = f_lo;
        if ((k - 1) % 2 == 0) even_sum += (k - 1 == 0) ? f_lo : 2.0 * f_lo;
        if (std::abs(f_lo) > rescale_at) {
            f_lo *= 1e-250;
            f_hi *= 1e-250;
            even_sum *= 1e-250;
            for (double& v : out) v *= 1e-250;
        }
    }
    const double inv = 1.0 / even_sum;
    for (double& v : out) v *= inv;
    return out;
}

ChebyshevPlan plan_propagator(std::shared_ptr<const LadderHamiltonian> h,
                              const SpectralBounds& bounds, double t, double tol) {
    if (tol <= 0.0) throw invalid_argument_error("truncation tolerance must be positive");
    if (t < 0.0) throw invalid_argument_error("propagation time must be non-negative");

    ChebyshevPlan plan;
    plan.hamiltonian = std::move(h);
    plan.bounds = bounds;
    plan.scale_a = bounds.half_width();
    plan.shift_b = bounds.center();
    plan.kind = PlanKind::propagator;
    plan.time = t;
    plan.truncation_tol = tol;

    const double z = plan.scale_a * t;
    const cplx phase = std::exp(cplx{0.0, -plan.shift_b * t});
    if (z == 0.0) {
        plan.coeffs = {phase, cplx{0.0, 0.0}};
        return plan;
    }

    int k_max = static_cast<int>(z + 15.0 * std::cbrt(z + 1.0)) + 40;
    for (;;) {
        const std::vector<double> bessel = bessel_j_sequence(z, k_max);
        std::vector<double> mags(bessel.size());
        mags[0] = std::abs(bessel[0]);
        for (std::size_t k = 1; k < bessel.size(); ++k) mags[k] = 2.0 * std::abs(bessel[k]);
        const int m = sustained_below(mags, tol);
        if (m >= 0) {
            plan.coeffs.resize(static_cast<std::size_t>(m) + 1);
            // (-i)^k cycles 1, -i, -1, i
            static constexpr cplx unit_pow[4] = {
                cplx{1.0, 0.0}, cplx{0.0, -1.0}, cplx{-1.0, 0.0}, cplx{0.0, 1.0}};
            for (int k = 0; k <= m; ++k) {
                const double base = (k == 0 ? 1.0 : 2.0) * bessel[static_cast<std::size_t>(k)];
                plan.coeffs[static_cast<std::size_t>(k)] = base * unit_pow[k % 4] * phase;
            }
            return plan;
        }
        k_max *= 2;
        if (k_max > 50'000'000) {
            throw numeric_error("propagator coefficients never fell below tolerance");
        }
    }
}

ChebyshevPlan plan_gaussian(std::shared_ptr<const LadderHamiltonian> h,
                            const SpectralBounds& bounds, double alpha, double e0,
                            double tol) {
    if (tol <= 0.0) throw invalid_argument_error("truncation tolerance must be positive");
    if (alpha < 0.0) throw invalid_argument_error("gaussian filter requires alpha >= 0");

    ChebyshevPlan plan;
    plan.hamiltonian = std::move(h);
    plan.bounds = bounds;
    plan.scale_a = bounds.half_width();
    plan.shift_b = bounds.center();
    plan.kind = PlanKind::gaussian;
    plan.alpha = alpha;
    plan.e0 = e0;
    plan.truncation_tol = tol;

    if (alpha == 0.0) {
        plan.coeffs = {cplx{1.0, 0.0}, cplx{0.0, 0.0}};
        return plan;
    }

    const double a = plan.scale_a;
    const double b = plan.shift_b;
    const double p = alpha * a * a;
    const double log_inv_tol = std::log(1.0 / tol);
    int trial_order =
        32 + static_cast<int>(2.1 * std::sqrt(std::max(p, 0.0) * log_inv_tol));

    for (int attempt = 0; attempt < 2; ++attempt) {
        const int quad_order = 4 * trial_order;
        std::vector<double> coeff(static_cast<std::size_t>(trial_order) + 1, 0.0);
        for (int j = 0; j < quad_order; ++j) {
            const double theta = std::numbers::pi * (j + 0.5) / quad_order;
            const double u = std::cos(theta);
            const double e = a * u + b - e0;
            const double f = std::exp(-alpha * e * e);
            for (int k = 0; k <= trial_order; ++k) {
                coeff[static_cast<std::size_t>(k)] += f * std::cos(k * theta);
            }
        }
        std::vector<double> mags(coeff.size());
        for (int k = 0; k <= trial_order; ++k) {
            coeff[static_cast<std::size_t>(k)] *= (k == 0 ? 1.0 : 2.0) / quad_order;
            mags[static_cast<std::size_t>(k)] = std::abs(coeff[static_cast<std::size_t>(k)]);
        }
        const int m = sustained_below(mags, tol);
        if (m >= 0) {
            plan.coeffs.assign(coeff.begin(), coeff.begin() + m + 1);
            return plan;
        }
        trial_order *= 2;
    }
    throw numeric_error("gaussian filter coefficients never fell below tolerance");
}

StateVector apply_plan(const ChebyshevPlan& plan, const StateVector& state) {
    if (!plan.hamiltonian || plan.hamiltonian->basis_ptr() != state.basis_ptr()) {
        throw dimension_error("plan and state were built over different bases");
    }
    const LadderHamiltonian& h = *plan.hamiltonian;
    const std::size_t dim = state.dimension();
    const double inv_a = 1.0 / plan.scale_a;
    const double b = plan.shift_b;

    // w = (H - b) v / a
    auto apply_rescaled = [&](const std::vector<cplx>& v, std::vector<cplx>& w) {
        h.apply(v, w);
        for (std::size_t k = 0; k < dim; ++k) w[k] = (w[k] - b * v[k]) * inv_a;
    };

    const auto in = state.amplitudes();
    std::vector<cplx> t_prev(in.begin(), in.end()); // T_0 |psi>
    std::vector<cplx> acc(dim);
    const cplx c0 = plan.coeffs[0];
    for (std::size_t k = 0; k < dim; ++k) acc[k] = c0 * t_prev[k];
    if (plan.coeffs.size() == 1) {
        return StateVector(state.basis_ptr(), std::move(acc));
    }

    std::vector<cplx> t_cur(dim);
    apply_rescaled(t_prev, t_cur); // T_1 |psi>
    const cplx c1 = plan.coeffs[1];
    for (std::size_t k = 0; k < dim; ++k) acc[k] += c1 * t_cur[k];

    std::vector<cplx> t_next(dim);
    for (std::size_t order = 2; order < plan.coeffs.size(); ++order) {
        apply_rescaled(t_cur, t_next);
        const cplx c = plan.coeffs[order];
        for (std::size_t k = 0; k < dim; ++k) {
            t_next[k] = 2.0 * t_next[k] - t_prev[k];
            acc[k] += c * t_next[k];
        }
        std::swap(t_prev, t_cur);
        std::swap(t_cur, t_next);
    }
    return StateVector(state.basis_ptr(), std::move(acc));
}

} // namespace ladder
