#pragma once

#include <cstdint>
#include <random>

namespace naxray
{
//! SplitMix64 finaliser, used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/*!
 * Seeded random stream.
 *
 * Streams are derived from a global seed and a stream id so that every
 * consumer (direction sampling, noise, prior draws, chain proposals) gets its
 * own reproducible sequence: seed_for(seed, id) = splitmix64(seed ^ splitmix64(id)).
 */
class Rng
{
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static std::uint64_t seed_for(std::uint64_t seed, std::uint64_t stream)
    {
        return splitmix64(seed ^ splitmix64(stream));
    }
    static Rng derive(std::uint64_t seed, std::uint64_t stream) { return Rng(seed_for(seed, stream)); }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    std::uint64_t next() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

//! Stream ids used by the experiment drivers.
namespace stream
{
inline constexpr std::uint64_t directions = 1;
inline constexpr std::uint64_t noise = 2;
inline constexpr std::uint64_t prior = 3;
inline constexpr std::uint64_t chain = 4;
inline constexpr std::uint64_t fields = 5;
inline constexpr std::uint64_t audit = 6;
}  // namespace stream
}  // namespace naxray
