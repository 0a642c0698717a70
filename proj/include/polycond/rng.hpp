#pragma once

// Counter-based random streams. A stream is keyed by (seed, stream_id); the
// i-th draw of a stream depends only on (seed, stream_id, i), so replicate
// results never depend on scheduling. Gaussians come from the inverse normal
// CDF (Wichura's AS241) applied to open-interval uniforms.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace polycond {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

/// Inverse of the standard normal CDF, Wichura (1988) AS241 PPND16,
/// relative accuracy about 1e-16. p must lie in (0, 1).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        return std::numeric_limits<double>::quiet_NaN();
    }
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r + 6.7265770927008700853e+4) * r +
                    4.5921953931549871457e+4) * r + 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
                 1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
               (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r + 3.9307895800092710610e+4) * r +
                    2.1213794301586595867e+4) * r + 5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
                 4.2313330701600911252e+1) * r + 1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val = 0.0;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
                   1.27045825245236838258e+0) * r + 3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
                4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
                   1.48103976427480074590e-1) * r + 6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
                2.05319162663775882187e+0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
                   2.65321895265761230930e-2) * r + 2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
                5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
                   7.86869131145613259100e-4) * r + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -val : val;
}

/// Names the deterministic transforms; echoed into run manifests.
inline constexpr std::string_view kRngDescription =
    "philox4x32-10 keyed by seed, counter=(draw index, stream_id); "
    "uniform=(top 53 bits + 0.5) * 2^-53; normal=AS241 inverse CDF";

class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream() = default;
    RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }
    std::uint64_t position() const { return index_; }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    /// The index-th 64-bit word of the stream; two words per Philox block.
    std::uint64_t word_at(std::uint64_t index) const {
        const std::uint64_t block = index >> 1;
        const std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                                               static_cast<std::uint32_t>(stream_id_),
                                               static_cast<std::uint32_t>(stream_id_ >> 32)};
        const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
        const auto out = philox4x32_10(ctr, key);
        const std::size_t h = (index & 1u) ? 2 : 0;
        return (static_cast<std::uint64_t>(out[h + 1]) << 32) | out[h];
    }

    result_type operator()() { return word_at(index_++); }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    double normal() { return normal_quantile(uniform()); }

    /// A fresh stream sharing this seed.
    RngStream substream(std::uint64_t stream_id) const { return RngStream(seed_, stream_id); }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_id_ = 0;
    std::uint64_t index_ = 0;
};

/// Stream-id namespaces so that distinct uses of one seed never share draws.
enum class StreamTag : std::uint64_t {
    system = 1,
    optimizer_starts = 2,
    verification = 3,
    matrix = 4,
};

inline std::uint64_t make_stream_id(StreamTag tag, std::uint64_t index) {
    return (static_cast<std::uint64_t>(tag) << 56) ^ (index & 0x00FFFFFFFFFFFFFFull);
}

}  // namespace polycond
