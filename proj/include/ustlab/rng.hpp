#pragma once

#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <utility>

namespace ustlab {

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace detail

/// Counter-based random stream. Output i of stream (seed, id) is a fixed
/// function of (seed, id, i), so replicas can run on any thread in any order
/// and still draw identical numbers.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
        : key_(derive_key(master_seed, stream_id)), stream_id_(stream_id)
    {
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return next(); }

    std::uint64_t next()
    {
        return detail::mix64(key_ + (++counter_) * detail::kGolden);
    }

    /// Uniform integer in [0, bound). bound must be positive.
    std::uint64_t below(std::uint64_t bound)
    {
        // Lemire's nearly-divisionless rejection.
        unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(next()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Geometric variable on {1, 2, ...} with the given mean (> 1).
    std::uint64_t geometric(double mean)
    {
        const double q = 1.0 / mean;
        if (q >= 1.0) return 1;
        // Inversion; 1 - uniform() lies in (0, 1].
        const double u = 1.0 - uniform();
        const double k = std::floor(std::log(u) / std::log1p(-q));
        if (k >= 9.0e18) return std::numeric_limits<std::uint64_t>::max();
        return static_cast<std::uint64_t>(k) + 1;
    }

    /// Standard normal via Box-Muller (one value per call).
    double normal()
    {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    /// Gamma(shape, 1) for shape > 0 (Marsaglia-Tsang; shape < 1 via the U^(1/shape) transform).
    double gamma(double shape)
    {
        if (shape < 1.0) {
            const double u = 1.0 - uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x;
            double v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = 1.0 - uniform();
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
        }
    }

    /// Independent child stream, e.g. for a sub-task of a replica.
    RngStream split(std::uint64_t child) const
    {
        return RngStream(key_, detail::mix64(child + 0x5851F42D4C957F2DULL));
    }

    std::uint64_t stream_id() const { return stream_id_; }

private:
    static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t id)
    {
        return detail::mix64(detail::mix64(seed ^ 0x6A09E667F3BCC909ULL) + detail::mix64(id + detail::kGolden));
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::uint64_t stream_id_;
};

/// Fisher-Yates shuffle driven by an RngStream (std::shuffle is not portable
/// across standard library implementations).
template <class Range>
void shuffle(Range& r, RngStream& rng)
{
    using std::size;
    const auto n = static_cast<std::uint64_t>(size(r));
    for (std::uint64_t i = n; i > 1; --i) {
        const auto j = rng.below(i);
        using std::swap;
        swap(r[i - 1], r[j]);
    }
}

} // namespace ustlab
