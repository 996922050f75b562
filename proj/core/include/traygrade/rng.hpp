#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace traygrade {

// splitmix64; used to mix seeds and decorrelate derived streams.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Deterministic uniform generator. std::uniform_*_distribution is not
// portable across standard libraries, so all draws are derived from raw
// mt19937_64 output; identical seeds give identical streams everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

    // Independent stream derived from this generator's seed, e.g.
    // rng.fork(scene_index). Does not consume state.
    Rng fork(std::uint64_t stream) const { return Rng(mix64(seed_ ^ mix64(stream))); }

    std::uint64_t bits() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n); unbiased via rejection.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = n * (UINT64_MAX / n);
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    int uniform_int(int lo, int hi) { // inclusive bounds
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    bool chance(double p) { return uniform() < p; }

    std::uint8_t byte() { return static_cast<std::uint8_t>(gen_() >> 56); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

} // namespace traygrade
