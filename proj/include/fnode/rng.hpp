#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fnode {

/// SplitMix64 finalizer; used to derive independent stream seeds from a base
/// seed plus a salt so that per-sample work can run in any order.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

/// Deterministic random stream. mt19937_64 is fully pinned by the standard and
/// the uniform/normal mappings below are spelled out here rather than taken
/// from <random> distributions (whose algorithms are implementation-defined),
/// so identical seeds give identical streams on every platform.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (pairs cached).
    double gaussian();

  private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace fnode
