#include <doctest.h>

#include <memory>
#include <random>

#include "ladder/hamiltonian.hpp"
#include "ladder/state_prep.hpp"
#include "oracles.hpp"

using namespace ladder;

namespace {

std::shared_ptr<const SectorBasis> make_basis(int n) {
    return std::make_shared<const SectorBasis>(SectorBasis::build(n));
}

// sector matrix assembled column by column from the matrix-free apply
Eigen::MatrixXcd matrix_from_apply(const LadderHamiltonian& h) {
    const std::size_t dim = h.basis().dimension();
    Eigen::MatrixXcd m(dim, dim);
    std::vector<cplx> unit(dim), out(dim);
    for (std::size_t c = 0; c < dim; ++c) {
        std::fill(unit.begin(), unit.end(), cplx{0.0, 0.0});
        unit[c] = 1.0;
        h.apply(unit, out);
        for (std::size_t r = 0; r < dim; ++r) m(static_cast<Eigen::Index>(r),
                                                static_cast<Eigen::Index>(c)) = out[r];
    }
    return m;
}

} // namespace

TEST_CASE("bond list covers both beams and all rungs") {
    const auto basis = make_basis(8);
    const LadderHamiltonian h(basis);
    CHECK(h.bonds().size() == 2 * 3 + 4);
    int rungs = 0;
    for (const Bond& b : h.bonds()) {
        if (b.w == h.couplings().rung) ++rungs;
    }
    CHECK(rungs == 4);
}

TEST_CASE("diagonal element of the fully polarized difference state") {
    const auto basis = make_basis(4);
    const LadderHamiltonian h(basis);
    // L both up, R both down
    const std::size_t k = basis->index_of(0b0011);
    StateVector unit(basis);
    unit[k] = 1.0;
    const StateVector out = h.apply(unit);
    CHECK(out[k].real() == doctest::Approx(0.24).epsilon(1e-14));
    CHECK(out[k].imag() == 0.0);
}

TEST_CASE("matrix-free apply matches the dense kronecker construction") {
    for (int n : {4, 6, 8}) {
        const auto basis = make_basis(n);
        const LadderHamiltonian h(basis);
        const Eigen::MatrixXcd dense = oracle::dense_sector_hamiltonian(*basis, h.couplings());
        const Eigen::MatrixXcd from_apply = matrix_from_apply(h);
        CHECK((dense - from_apply).cwiseAbs().maxCoeff() < 1e-13);
    }
}

TEST_CASE("hermiticity on random states") {
    const auto basis = make_basis(8);
    const LadderHamiltonian h(basis);
    const StateVector phi = random_sector_state(11, basis);
    const StateVector psi = random_sector_state(22, basis);
    const cplx lhs = phi.inner(h.apply(psi));
    const cplx rhs = std::conj(psi.inner(h.apply(phi)));
    CHECK(std::abs(lhs - rhs) < 1e-13);
    CHECK(std::abs(h.expectation(psi) - h.apply(psi).inner(psi).real()) < 1e-13);
}

TEST_CASE("sector ground state matches dense diagonalization") {
    const auto basis = make_basis(8);
    const LadderHamiltonian h(basis);
    const oracle::DenseEig oracle_eig =
        oracle::dense_eig(oracle::dense_sector_hamiltonian(*basis, h.couplings()));
    const oracle::DenseEig apply_eig = oracle::dense_eig(matrix_from_apply(h));
    CHECK(std::abs(oracle_eig.values(0) - apply_eig.values(0)) < 1e-10);
}

TEST_CASE("energy expectation is real") {
    const auto basis = make_basis(8);
    const LadderHamiltonian h(basis);
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        const StateVector psi = random_sector_state(seed, basis);
        const cplx e = psi.inner(h.apply(psi));
        CHECK(std::abs(e.imag()) < 1e-13 * std::max(1.0, std::abs(e.real())));
    }
}

TEST_CASE("apply rejects mismatched dimensions") {
    const auto basis = make_basis(4);
    const LadderHamiltonian h(basis);
    std::vector<cplx> wrong(5), out(6);
    CHECK_THROWS_AS(h.apply(wrong, out), dimension_error);
    const auto other = make_basis(6);
    CHECK_THROWS_AS((void)h.apply(StateVector(other)), dimension_error);
}

TEST_CASE("spectral bounds contain the dense spectrum") {
    for (int n : {4, 8}) {
        const auto basis = make_basis(n);
        const LadderHamiltonian h(basis);
        const SpectralBounds bounds = spectral_bounds(h);
        const oracle::DenseEig eig =
            oracle::dense_eig(oracle::dense_sector_hamiltonian(*basis, h.couplings()));
        CHECK(bounds.e_min - bounds.margin <= eig.values(0) + 1e-12);
        CHECK(bounds.e_max + bounds.margin >= eig.values(eig.values.size() - 1) - 1e-12);
        CHECK(bounds.e_max > bounds.e_min);
        CHECK(bounds.margin == doctest::Approx(0.01 * (bounds.e_max - bounds.e_min)));
    }
}

TEST_CASE("rayleigh quotients stay inside the padded bounds") {
    const auto basis = make_basis(10);
    const LadderHamiltonian h(basis);
    const SpectralBounds bounds = spectral_bounds(h);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const StateVector psi = random_sector_state(seed, basis);
        const double e = h.expectation(psi);
        CHECK(e >= bounds.e_min - bounds.margin);
        CHECK(e <= bounds.e_max + bounds.margin);
    }
}

TEST_CASE("bounds are linear in the couplings") {
    const auto basis = make_basis(8);
    const LadderHamiltonian h1(basis, Couplings{1.0, 0.2, 0.6});
    const LadderHamiltonian h2(basis, Couplings{2.0, 0.4, 0.6});
    const SpectralBounds b1 = spectral_bounds(h1);
    const SpectralBounds b2 = spectral_bounds(h2);
    CHECK(b2.e_min == doctest::Approx(2.0 * b1.e_min).epsilon(1e-6));
    CHECK(b2.e_max == doctest::Approx(2.0 * b1.e_max).epsilon(1e-6));
}
