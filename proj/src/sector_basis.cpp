#include "ladder/sector_basis.hpp"

#include <limits>
#include <string>

namespace ladder {

LadderGeometry LadderGeometry::of(int n_spins) {
    if (n_spins < 4 || n_spins % 2 != 0) {
        throw invalid_argument_error("ladder size must be even and >= 4, got " +
                                     std::to_string(n_spins));
    }
    return LadderGeometry{n_spins};
}

int x_eigenvalue(std::uint64_t config, const LadderGeometry& geometry) {
    const int half = geometry.rungs();
    const int up_left = std::popcount(config & geometry.left_mask());
    const int up_right = std::popcount(config >> half);
    if (up_left + up_right != half) {
        throw sector_error("configuration has " + std::to_string(up_left + up_right) +
                           " up spins, sector requires " + std::to_string(half));
    }
    return up_left - up_right;
}

std::uint64_t binomial(unsigned n, unsigned k) {
    if (k > n) return 0;
    if (k > n - k) k = n - k;
    unsigned __int128 acc = 1;
    for (unsigned i = 1; i <= k; ++i) {
        acc = acc * (n - k + i) / i;
        if (acc > std::numeric_limits<std::uint64_t>::max()) {
            throw capacity_error("binomial(" + std::to_string(n) + "," + std::to_string(k) +
                                 ") overflows uint64");
        }
    }
    return static_cast<std::uint64_t>(acc);
}

SectorBasis SectorBasis::build(int n_spins) {
    SectorBasis basis;
    basis.geom_ = LadderGeometry::of(n_spins);
    const int half = basis.geom_.rungs();
    const std::uint64_t dim = binomial(static_cast<unsigned>(n_spins),
                                       static_cast<unsigned>(half));
    if (dim > std::numeric_limits<std::uint32_t>::max()) {
        throw capacity_error("sector dimension " + std::to_string(dim) +
                             " overflows the 32-bit index type");
    }

    const std::uint64_t half_words = std::uint64_t{1} << half;

    // rank of each half-word within its popcount class, ascending word order
    basis.rank_l_.assign(half_words, 0);
    {
        std::vector<std::uint32_t> seen(half + 1, 0);
        for (std::uint64_t w = 0; w < half_words; ++w) {
            basis.rank_l_[w] = seen[std::popcount(w)]++;
        }
    }

    // sector configs with high half strictly below R: running sum of the
    // matching-popcount class sizes of the low half
    basis.offset_r_.assign(half_words, 0);
    {
        std::uint64_t acc = 0;
        for (std::uint64_t r = 0; r < half_words; ++r) {
            basis.offset_r_[r] = static_cast<std::uint32_t>(acc);
            acc += binomial(static_cast<unsigned>(half),
                            static_cast<unsigned>(half - std::popcount(r)));
        }
    }

    basis.x_values_.resize(half + 1);
    for (int slot = 0; slot <= half; ++slot) {
        basis.x_values_[slot] = 2 * slot - half;
    }

    // ascending word order = (R half ascending, then L half ascending)
    basis.configs_.reserve(dim);
    basis.xval_.reserve(dim);
    basis.blocks_.assign(half + 1, {});
    for (std::uint64_t r = 0; r < half_words; ++r) {
        const int up_left = half - std::popcount(r);
        if (up_left < 0) continue;
        for (std::uint64_t l = 0; l < half_words; ++l) {
            if (std::popcount(l) != up_left) continue;
            const std::uint32_t index = static_cast<std::uint32_t>(basis.configs_.size());
            basis.configs_.push_back((r << half) | l);
            const int x = 2 * up_left - half;
            basis.xval_.push_back(static_cast<std::int8_t>(x));
            basis.blocks_[(x + half) / 2].push_back(index);
        }
    }
    return basis;
}

std::size_t SectorBasis::index_of(std::uint64_t config) const {
    if (std::popcount(config) != geom_.rungs() || (config >> geom_.n_spins) != 0) {
        throw sector_error("word outside the S_z=0 sector");
    }
    return index_unchecked(config);
}

bool SectorBasis::x_admissible(int x) const {
    const int half = geom_.rungs();
    return x >= -half && x <= half && (x + half) % 2 == 0;
}

std::size_t SectorBasis::x_slot(int x) const {
    if (!x_admissible(x)) {
        throw invalid_argument_error("inadmissible x eigenvalue " + std::to_string(x) +
                                     " for N = " + std::to_string(geom_.n_spins));
    }
    return static_cast<std::size_t>((x + geom_.rungs()) / 2);
}

} // namespace ladder
