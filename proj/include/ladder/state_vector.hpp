#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

#include "ladder/sector_basis.hpp"

namespace ladder {

using cplx = std::complex<double>;

// Complex amplitudes over a shared SectorBasis. Preparation and evolution
// steps leave the norm at 1; nothing here renormalizes implicitly.
class StateVector {
  public:
    explicit StateVector(std::shared_ptr<const SectorBasis> basis)
        : basis_(std::move(basis)), amp_(basis_->dimension(), cplx{0.0, 0.0}) {}

    StateVector(std::shared_ptr<const SectorBasis> basis, std::vector<cplx> amplitudes)
        : basis_(std::move(basis)), amp_(std::move(amplitudes)) {
        if (amp_.size() != basis_->dimension()) {
            throw dimension_error("amplitude count does not match basis dimension");
        }
    }

    const SectorBasis& basis() const { return *basis_; }
    const std::shared_ptr<const SectorBasis>& basis_ptr() const { return basis_; }
    std::size_t dimension() const { return amp_.size(); }

    std::span<const cplx> amplitudes() const { return amp_; }
    std::span<cplx> amplitudes() { return amp_; }
    const cplx& operator[](std::size_t k) const { return amp_[k]; }
    cplx& operator[](std::size_t k) { return amp_[k]; }

    double norm_sq() const {
        double acc = 0.0;
        for (const cplx& a : amp_) acc += std::norm(a);
        return acc;
    }
    double norm() const { return std::sqrt(norm_sq()); }

    void normalize() {
        const double n = norm();
        if (n == 0.0) throw projection_error("cannot normalize a zero state");
        const double inv = 1.0 / n;
        for (cplx& a : amp_) a *= inv;
    }

    // <this|other>
    cplx inner(const StateVector& other) const {
        require_same_basis(other);
        cplx acc{0.0, 0.0};
        for (std::size_t k = 0; k < amp_.size(); ++k) {
            acc += std::conj(amp_[k]) * other.amp_[k];
        }
        return acc;
    }

    void require_same_basis(const StateVector& other) const {
        if (basis_ != other.basis_) {
            throw dimension_error("states live on different bases (basis objects are not shared)");
        }
    }

  private:
    std::shared_ptr<const SectorBasis> basis_;
    std::vector<cplx> amp_;
};

} // namespace ladder
