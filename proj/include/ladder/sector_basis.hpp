#pragma once

#include <bit>
#include <cstdint>
#include <vector>

#include "ladder/errors.hpp"

namespace ladder {

// Two coupled chains ("beams" L and R) of N/2 spins each, joined by rungs.
// Bit layout of a configuration word: bits 0..N/2-1 are beam L, rungs 1..N/2;
// bits N/2..N-1 are beam R. Bit set means spin up (s_z = +1/2).
struct LadderGeometry {
    int n_spins = 0;

    int rungs() const { return n_spins / 2; }
    int bit_left(int rung) const { return rung; }
    int bit_right(int rung) const { return rungs() + rung; }
    std::uint64_t left_mask() const { return (std::uint64_t{1} << rungs()) - 1; }

    // Validates N even, >= 4.
    static LadderGeometry of(int n_spins);
};

// Eigenvalue of the magnetization difference x = sum_i S_z^{L,i} - S_z^{R,i}
// for a basis configuration. Requires popcount N/2 (the S_z^total = 0 sector).
int x_eigenvalue(std::uint64_t config, const LadderGeometry& geometry);

// The S_z^total = 0 sector of the ladder: all N-bit words with exactly N/2 set
// bits, sorted ascending as unsigned words. Provides O(1) config <-> index
// maps through two half-word tables and partitions the basis by the
// eigenvalue X of the magnetization difference.
class SectorBasis {
  public:
    static SectorBasis build(int n_spins);

    const LadderGeometry& geometry() const { return geom_; }
    std::size_t dimension() const { return configs_.size(); }

    std::uint64_t config_at(std::size_t k) const { return configs_[k]; }

    // Ordinal of a sector configuration; throws sector_error on wrong popcount.
    std::size_t index_of(std::uint64_t config) const;

    // As index_of but without the popcount check (hot path).
    std::size_t index_unchecked(std::uint64_t config) const {
        const std::uint64_t left = config & geom_.left_mask();
        const std::uint64_t right = config >> geom_.rungs();
        return offset_r_[right] + rank_l_[left];
    }

    int x_of_index(std::size_t k) const { return xval_[k]; }

    // Admissible X eigenvalues, ascending: -N/2, -N/2+2, ..., N/2.
    const std::vector<int>& x_values() const { return x_values_; }
    bool x_admissible(int x) const;
    // Position of X within x_values(); throws invalid_argument_error.
    std::size_t x_slot(int x) const;

    std::size_t block_size(int x) const { return blocks_[x_slot(x)].size(); }
    const std::vector<std::uint32_t>& block_indices(int x) const { return blocks_[x_slot(x)]; }

    // Beam-exchange (L <-> R) image of a configuration.
    std::uint64_t mirror_config(std::uint64_t config) const {
        const std::uint64_t left = config & geom_.left_mask();
        const std::uint64_t right = config >> geom_.rungs();
        return (left << geom_.rungs()) | right;
    }

  private:
    LadderGeometry geom_;
    std::vector<std::uint64_t> configs_;
    std::vector<std::int8_t> xval_;
    std::vector<std::uint32_t> offset_r_; // sector configs with high half < R
    std::vector<std::uint32_t> rank_l_;   // rank of L within its popcount class
    std::vector<int> x_values_;
    std::vector<std::vector<std::uint32_t>> blocks_;
};

// Exact binomial coefficient; throws capacity_error on uint64 overflow.
std::uint64_t binomial(unsigned n, unsigned k);

} // namespace ladder
