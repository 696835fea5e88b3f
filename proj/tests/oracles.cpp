#include "oracles.hpp"

#include <complex>

namespace oracle {

using ladder::cplx;

Eigen::MatrixXcd op_on_site(int site, const Eigen::Matrix2cd& a, int n_spins) {
    const Eigen::Index dim = Eigen::Index{1} << n_spins;
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    for (Eigen::Index col = 0; col < dim; ++col) {
        const int old_state = static_cast<int>((col >> site) & 1);
        for (int new_state = 0; new_state < 2; ++new_state) {
            const cplx amp = a(new_state, old_state);
            if (amp == cplx{0.0, 0.0}) continue;
            const Eigen::Index row =
                (col & ~(Eigen::Index{1} << site)) | (Eigen::Index{new_state} << site);
            m(row, col) += amp;
        }
    }
    return m;
}

Eigen::MatrixXcd dense_full_hamiltonian(int n_spins, const ladder::Couplings& couplings) {
    Eigen::Matrix2cd sz = Eigen::Matrix2cd::Zero();
    sz(0, 0) = -0.5;
    sz(1, 1) = 0.5;
    Eigen::Matrix2cd sp = Eigen::Matrix2cd::Zero();
    sp(1, 0) = 1.0; // |up><down|
    const Eigen::Matrix2cd sm = sp.adjoint();
    const Eigen::Matrix2cd sx = 0.5 * (sp + sm);
    const Eigen::Matrix2cd sy = cplx{0.0, -0.5} * (sp - sm);

    const int half = n_spins / 2;
    const Eigen::Index dim = Eigen::Index{1} << n_spins;
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);

    auto add_bond = [&](int site_a, int site_b, double w) {
        h += w * (op_on_site(site_a, sx, n_spins) * op_on_site(site_b, sx, n_spins) +
                  op_on_site(site_a, sy, n_spins) * op_on_site(site_b, sy, n_spins) +
                  couplings.anisotropy * op_on_site(site_a, sz, n_spins) *
                      op_on_site(site_b, sz, n_spins));
    };
    // beam L occupies sites 0..half-1, beam R sites half..n-1
    for (int i = 0; i + 1 < half; ++i) {
        add_bond(i, i + 1, couplings.beam);
        add_bond(half + i, half + i + 1, couplings.beam);
    }
    for (int i = 0; i < half; ++i) {
        add_bond(i, half + i, couplings.rung);
    }
    return h;
}

Eigen::MatrixXcd dense_sector_hamiltonian(const ladder::SectorBasis& basis,
                                          const ladder::Couplings& couplings) {
    const Eigen::MatrixXcd full =
        dense_full_hamiltonian(basis.geometry().n_spins, couplings);
    const Eigen::Index dim = static_cast<Eigen::Index>(basis.dimension());
    Eigen::MatrixXcd sector(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r) {
        for (Eigen::Index c = 0; c < dim; ++c) {
            sector(r, c) = full(static_cast<Eigen::Index>(basis.config_at(r)),
                                static_cast<Eigen::Index>(basis.config_at(c)));
        }
    }
    return sector;
}

DenseEig dense_eig(const Eigen::MatrixXcd& h_sector) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h_sector);
    return DenseEig{solver.eigenvalues(), solver.eigenvectors()};
}

Eigen::VectorXcd dense_propagate(const DenseEig& eig, const Eigen::VectorXcd& psi, double t) {
    const Eigen::VectorXcd coeffs = eig.vectors.adjoint() * psi;
    Eigen::VectorXcd scaled(coeffs.size());
    for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
        scaled(i) = coeffs(i) * std::exp(cplx{0.0, -eig.values(i) * t});
    }
    return eig.vectors * scaled;
}

Eigen::VectorXcd dense_gaussian(const DenseEig& eig, const Eigen::VectorXcd& psi, double alpha,
                                double e0) {
    const Eigen::VectorXcd coeffs = eig.vectors.adjoint() * psi;
    Eigen::VectorXcd scaled(coeffs.size());
    for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
        const double d = eig.values(i) - e0;
        scaled(i) = coeffs(i) * std::exp(-alpha * d * d);
    }
    return eig.vectors * scaled;
}

Eigen::VectorXcd to_eigen(const ladder::StateVector& state) {
    Eigen::VectorXcd v(static_cast<Eigen::Index>(state.dimension()));
    for (std::size_t k = 0; k < state.dimension(); ++k) {
        v(static_cast<Eigen::Index>(k)) = state[k];
    }
    return v;
}

ladder::StateVector from_eigen(std::shared_ptr<const ladder::SectorBasis> basis,
                               const Eigen::VectorXcd& v) {
    std::vector<cplx> amps(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) amps[static_cast<std::size_t>(i)] = v(i);
    return ladder::StateVector(std::move(basis), std::move(amps));
}

} // namespace oracle
