#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace vitscape {

// Deterministic splitmix64 stream. Self-contained so that results never
// depend on the standard library's distribution implementations, which are
// not pinned by the standard.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1), 53-bit resolution
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // standard normal via Box-Muller (cosine branch)
    double normal() {
        const double u1 = 1.0 - uniform(); // (0, 1], keeps log finite
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // uniform in [0, n), unbiased via rejection
    std::uint32_t below(std::uint32_t n) {
        const std::uint64_t span = 0x100000000ULL;
        const std::uint64_t bound = span - span % n;
        for (;;) {
            const std::uint64_t r = next_u64() >> 32;
            if (r < bound) {
                return static_cast<std::uint32_t>(r % n);
            }
        }
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = below(static_cast<std::uint32_t>(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derives an independent stream for a named purpose, so e.g. toggling
    // mask draws cannot perturb the init stream.
    static Rng stream(std::uint64_t seed, std::string_view purpose) {
        std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a 64
        for (char c : purpose) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        Rng r(seed ^ h);
        r.next_u64(); // decouple from raw seed value
        return r;
    }

private:
    std::uint64_t state_;
};

} // namespace vitscape
