#pragma once

#include <cstdint>
#include <random>

namespace cpo {

using Rng = std::mt19937_64;

// splitmix64 step; also used as the seed-mixing primitive everywhere.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seed derivation scheme: every random stream in the project is identified by
// (master seed, purpose code, index). Adding a new purpose never perturbs
// streams of existing purposes.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t purpose, std::uint64_t index = 0) {
    std::uint64_t s = master;
    std::uint64_t a = splitmix64(s);
    s = a ^ (purpose * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
    std::uint64_t b = splitmix64(s);
    s = b ^ (index * 0x9e3779b97f4a7c15ULL + 1ULL);
    return splitmix64(s);
}

inline Rng make_rng(std::uint64_t master, std::uint64_t purpose, std::uint64_t index = 0) {
    return Rng(derive_seed(master, purpose, index));
}

// Purpose codes (documented in README). Per-replicate streams use the code as
// `purpose` and the replicate number as `index`.
namespace seeds {
inline constexpr std::uint64_t kPopulationWeights = 0;
inline constexpr std::uint64_t kSimulate = 1;
inline constexpr std::uint64_t kConfound = 2;
inline constexpr std::uint64_t kOutcomeFitData = 3;
inline constexpr std::uint64_t kDensityFitData = 4;
inline constexpr std::uint64_t kAssignmentInit = 5;
inline constexpr std::uint64_t kTrainFT = 10;
inline constexpr std::uint64_t kTrainCPO = 11;
inline constexpr std::uint64_t kTrainDRCPO = 12;
inline constexpr std::uint64_t kTrainOORLHF = 13;
inline constexpr std::uint64_t kTrainVariant = 14;  // + variant offset
inline constexpr std::uint64_t kWinRate = 20;
inline constexpr std::uint64_t kRewardTable = 21;
inline constexpr std::uint64_t kConfoundingImpact = 22;
inline constexpr std::uint64_t kBiasVariance = 30;  // index = scenario * 2^20 + replicate
inline constexpr std::uint64_t kAcceptance = 40;    // + criterion offset
}  // namespace seeds

}  // namespace cpo
