#ifndef HETVAR_RNG_HPP
#define HETVAR_RNG_HPP

#include <cstdint>
#include <utility>

namespace hetvar {

/// Counter-based generator (Philox 4x32-10). A generator is a pure function
/// of (key, counter), so independent streams come from distinct stream ids
/// and replication results do not depend on draw order across workers.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    /// Derives the generator for one replication of a study: same master
    /// seed, distinct stream.
    static Rng split(std::uint64_t master_seed, std::uint64_t stream) {
        return Rng(master_seed, stream);
    }

    std::uint64_t next_u64();
    /// Uniform on (0, 1), never exactly 0 or 1.
    double uniform();
    /// Standard normal via Box-Muller on uniform pairs (no libstdc++
    /// distribution objects, so sequences are reproducible everywhere).
    double normal();

private:
    void advance_block();
    std::uint32_t key_[2];
    std::uint32_t counter_[4];
    std::uint32_t block_[4];
    int block_pos_;
    bool have_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

}  // namespace hetvar

#endif
