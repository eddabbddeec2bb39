#pragma once

// Portable seeded randomness. std::mt19937_64 has a fully specified output
// sequence, but the standard distributions do not, so every draw here is
// derived from raw 64-bit outputs with a fixed recipe.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace leakguard {

class Rng {
public:
    /// Recorded in generated artifacts; bump when any recipe below changes.
    static constexpr std::string_view algorithm = "mt19937_64/lemire-bounded/u53-real/box-muller;v1";

    __extension__ typedef unsigned __int128 u128;

    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, bound), unbiased (Lemire's multiply-and-reject).
    std::uint64_t below(std::uint64_t bound) {
        if (bound == 0) return 0;
        u128 m = static_cast<u128>(next()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<u128>(next()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller; the spare value is discarded so each
    /// call consumes exactly two engine outputs.
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    template <class T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    /// Moves a uniform sample of `k` elements (without replacement) to the
    /// front of `items` via a partial Fisher-Yates pass.
    template <class T>
    void choose_front(std::span<T> items, std::size_t k) {
        for (std::size_t i = 0; i < k && i < items.size(); ++i) {
            std::size_t j = i + static_cast<std::size_t>(below(items.size() - i));
            std::swap(items[i], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace leakguard
