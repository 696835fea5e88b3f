#include "ladder/hamiltonian.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <string>

namespace ladder {

LadderHamiltonian::LadderHamiltonian(std::shared_ptr<const SectorBasis> basis,
                                     Couplings couplings)
    : basis_(std::move(basis)), couplings_(couplings) {
    const LadderGeometry& g = basis_->geometry();
    const int half = g.rungs();
    for (int i = 0; i + 1 < half; ++i) {
        bonds_.push_back({g.bit_left(i), g.bit_left(i + 1), couplings_.beam});
        bonds_.push_back({g.bit_right(i), g.bit_right(i + 1), couplings_.beam});
    }
    for (int i = 0; i < half; ++i) {
        bonds_.push_back({g.bit_left(i), g.bit_right(i), couplings_.rung});
    }

    // diagonal: sum over bonds of anisotropy * w * s_a * s_b, s = +-1/2
    diag_.resize(basis_->dimension());
    for (std::size_t k = 0; k < diag_.size(); ++k) {
        const std::uint64_t word = basis_->config_at(k);
        double acc = 0.0;
        for (const Bond& bond : bonds_) {
            const bool ua = (word >> bond.a) & 1;
            const bool ub = (word >> bond.b) & 1;
            acc += couplings_.anisotropy * bond.w * (ua == ub ? 0.25 : -0.25);
        }
        diag_[k] = acc;
    }
}

void LadderHamiltonian::apply(std::span<const cplx> in, std::span<cplx> out) const {
    const std::size_t dim = basis_->dimension();
    if (in.size() != dim || out.size() != dim) {
        throw dimension_error("state dimension does not match the Hamiltonian basis");
    }
    const std::size_t n_bonds = bonds_.size();
    for (std::size_t k = 0; k < dim; ++k) {
        const std::uint64_t word = basis_->config_at(k);
        cplx acc = diag_[k] * in[k];
        for (std::size_t j = 0; j < n_bonds; ++j) {
            const Bond& bond = bonds_[j];
            const std::uint64_t pair = ((word >> bond.a) ^ (word >> bond.b)) & 1;
            if (pair) {
                const std::uint64_t flipped =
                    word ^ ((std::uint64_t{1} << bond.a) | (std::uint64_t{1} << bond.b));
                acc += (0.5 * bond.w) * in[basis_->index_unchecked(flipped)];
            }
        }
        out[k] = acc;
    }
}

StateVector LadderHamiltonian::apply(const StateVector& state) const {
    if (state.basis_ptr() != basis_) {
        throw dimension_error("state basis does not match the Hamiltonian basis");
    }
    StateVector out(basis_);
    apply(state.amplitudes(), out.amplitudes());
    return out;
}

double LadderHamiltonian::expectation(const StateVector& state) const {
    StateVector h_state = apply(state);
    return state.inner(h_state).real();
}

std::pair<double, double> LadderHamiltonian::energy_moments(const StateVector& state) const {
    StateVector h_state = apply(state);
    const double mean = state.inner(h_state).real();
    const double second = h_state.norm_sq(); // <psi|H^2|psi> = ||H psi||^2
    return {mean, second};
}

namespace {

std::pair<double, double> tridiagonal_extremes(const std::vector<double>& alpha,
                                               const std::vector<double>& beta) {
    const Eigen::Index m = static_cast<Eigen::Index>(alpha.size());
    Eigen::VectorXd diag(m);
    Eigen::VectorXd sub(m > 1 ? m - 1 : 0);
    for (Eigen::Index i = 0; i < m; ++i) diag[i] = alpha[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 0; i + 1 < m; ++i) sub[i] = beta[static_cast<std::size_t>(i)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    return {solver.eigenvalues()(0), solver.eigenvalues()(m - 1)};
}

} // namespace

SpectralBounds spectral_bounds(const LadderHamiltonian& h, double tol) {
    const std::size_t dim = h.basis().dimension();
    if (dim < 2) throw invalid_argument_error("spectral bounds need dimension >= 2");
    if (tol <= 0.0) throw invalid_argument_error("tolerance must be positive");

    constexpr int iteration_cap = 500;
    constexpr int check_every = 10;

    // fixed internal seed: bounds must not depend on the experiment seed
    std::mt19937_64 rng(0x5eb07d5full);
    std::vector<cplx> v(dim);
    {
        double nrm = 0.0;
        for (cplx& a : v) {
            const double u = 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
            a = cplx{u, 0.0};
            nrm += u * u;
        }
        const double inv = 1.0 / std::sqrt(nrm);
        for (cplx& a : v) a *= inv;
    }

    std::vector<cplx> v_prev(dim, cplx{0.0, 0.0});
    std::vector<cplx> w(dim);
    std::vector<double> alpha;
    std::vector<double> beta; // beta[j] couples step j and j+1

    const int max_steps = static_cast<int>(std::min<std::size_t>(dim, iteration_cap));
    double lo = 0.0, hi = 0.0;
    bool have_estimate = false;
    double prev_lo = 0.0, prev_hi = 0.0;

    for (int j = 0; j < max_steps; ++j) {
        h.apply(v, w);
        if (j > 0) {
            const double b = beta.back();
            for (std::size_t k = 0; k < dim; ++k) w[k] -= b * v_prev[k];
        }
        double a = 0.0;
        for (std::size_t k = 0; k < dim; ++k) a += (std::conj(v[k]) * w[k]).real();
        alpha.push_back(a);
        for (std::size_t k = 0; k < dim; ++k) w[k] -= a * v[k];

        double b_next = 0.0;
        for (const cplx& c : w) b_next += std::norm(c);
        b_next = std::sqrt(b_next);

        const bool last_step = (j + 1 == max_steps) || b_next < 1e-12;
        if (last_step || (j + 1) % check_every == 0) {
            std::tie(lo, hi) = tridiagonal_extremes(alpha, beta);
            const double width = std::max(hi - lo, 1e-300);
            if (have_estimate &&
                std::abs(lo - prev_lo) < tol * width && std::abs(hi - prev_hi) < tol * width) {
                const double margin = 0.01 * (hi - lo);
                return SpectralBounds{lo, hi, margin};
            }
            prev_lo = lo;
            prev_hi = hi;
            have_estimate = true;
        }
        if (b_next < 1e-12) {
            // Krylov space exhausted: Ritz values are exact for the reachable subspace
            const double margin = 0.01 * (hi - lo);
            return SpectralBounds{lo, hi, margin};
        }
        beta.push_back(b_next);
        const double inv = 1.0 / b_next;
        std::swap(v_prev, v);
        for (std::size_t k = 0; k < dim; ++k) v[k] = w[k] * inv;
    }

    if (static_cast<std::size_t>(max_steps) == dim) {
        // ran the full space: exact up to rounding
        const double margin = 0.01 * (hi - lo);
        return SpectralBounds{lo, hi, margin};
    }
    throw convergence_error("spectral bounds did not settle within 500 Lanczos steps", lo, hi);
}

} // namespace ladder
