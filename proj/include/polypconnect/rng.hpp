#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace polyp {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char ch : s) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Seed fan-out: one global seed derives independent per-phase / per-item
// streams. derive_seed(s, tag) == splitmix64(s ^ splitmix64(hash(tag))).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    return splitmix64(base ^ splitmix64(salt));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    return derive_seed(base, fnv1a64(tag));
}

std::string hex64(std::uint64_t v);

// mt19937 output is standardized, distributions are not; the transforms
// below are written out so streams reproduce byte-for-byte.
class Rng {
public:
    explicit Rng(std::uint64_t seed)
        : gen_(static_cast<std::mt19937::result_type>(splitmix64(seed) >> 16)) {}

    std::uint32_t u32() { return gen_(); }

    double uniform() { return u32() * (1.0 / 4294967296.0); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = (u32() + 0.5) * (1.0 / 4294967296.0);
        double u2 = (u32() + 0.5) * (1.0 / 4294967296.0);
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = 6.283185307179586 * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    // uniform over [0, n); n must be positive
    int uniform_int(int n) { return static_cast<int>(u32() % static_cast<std::uint32_t>(n)); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            int j = uniform_int(i + 1);
            std::swap(v[i], v[static_cast<size_t>(j)]);
        }
    }

private:
    std::mt19937 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace polyp
