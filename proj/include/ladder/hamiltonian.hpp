#pragma once

#include <memory>
#include <span>
#include <vector>

#include "ladder/state_vector.hpp"

namespace ladder {

struct Bond {
    int a = 0; // bit positions
    int b = 0;
    double w = 0.0; // J for intra-beam bonds, kappa for rungs
};

struct Couplings {
    double beam = 1.0;       // J
    double rung = 0.2;       // kappa
    double anisotropy = 0.6; // z factor on every bond
};

struct SpectralBounds {
    double e_min = 0.0;
    double e_max = 0.0;
    double margin = 0.0; // widening applied on each side

    double half_width() const { return 0.5 * (e_max - e_min) + margin; }
    double center() const { return 0.5 * (e_max + e_min); }
};

// Anisotropic Heisenberg ladder, two open chains of N/2 spins coupled by
// rungs. Acts matrix-free on sector state vectors: per bond (a,b) with weight
// w the diagonal part is anisotropy*w*s_a*s_b and anti-aligned bit pairs are
// swapped with amplitude w/2.
class LadderHamiltonian {
  public:
    LadderHamiltonian(std::shared_ptr<const SectorBasis> basis, Couplings couplings = {});

    const SectorBasis& basis() const { return *basis_; }
    const std::shared_ptr<const SectorBasis>& basis_ptr() const { return basis_; }
    const Couplings& couplings() const { return couplings_; }
    const std::vector<Bond>& bonds() const { return bonds_; }

    // out = H in; both spans must have the sector dimension.
    void apply(std::span<const cplx> in, std::span<cplx> out) const;

    StateVector apply(const StateVector& state) const;

    // <state|H|state>, real part (imaginary part is a rounding residual)
    double expectation(const StateVector& state) const;
    // (<H>, <H^2>) in one pass over H|state>
    std::pair<double, double> energy_moments(const StateVector& state) const;

  private:
    std::shared_ptr<const SectorBasis> basis_;
    Couplings couplings_;
    std::vector<Bond> bonds_;
    std::vector<double> diag_; // precomputed diagonal over the sector
};

// Extremal eigenvalue estimates via Lanczos on apply(), widened by 1% of the
// spectral width on each side. tol is the relative movement of the extremal
// Ritz values between sweeps; iteration cap 500.
SpectralBounds spectral_bounds(const LadderHamiltonian& h, double tol = 1e-8);

} // namespace ladder
