#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace fkforge {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrt2 = 1.41421356237309504880;

// Base of every error the library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define FKFORGE_ERROR(Name)                      \
    struct Name : Error {                        \
        using Error::Error;                      \
    }

FKFORGE_ERROR(ConfigError);
FKFORGE_ERROR(TooLarge);
FKFORGE_ERROR(BottleneckRoot);
FKFORGE_ERROR(NotInterior);
FKFORGE_ERROR(InvalidRoot);
FKFORGE_ERROR(InvalidTarget);
FKFORGE_ERROR(MalformedTree);
FKFORGE_ERROR(NoLatticePoint);
FKFORGE_ERROR(SolveFailure);
FKFORGE_ERROR(NotClosed);
FKFORGE_ERROR(NoSamples);
FKFORGE_ERROR(BadArc);
FKFORGE_ERROR(VerificationFailed);
FKFORGE_ERROR(Singular);
FKFORGE_ERROR(StepFailure);
FKFORGE_ERROR(NonSimple);
FKFORGE_ERROR(NoCapacityParam);
FKFORGE_ERROR(BadParams);
FKFORGE_ERROR(InsufficientData);

#undef FKFORGE_ERROR

// Philox4x32-10 (Salmon et al., SC'11). Counter based: the stream is the key,
// so any (seed, stream) pair gives an independent sequence regardless of how
// work is scheduled.
class Philox {
public:
    using result_type = std::uint64_t;

    Philox(std::uint64_t seed, std::uint64_t stream = 0) {
        key_ = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
        ctr_ = {0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (pos_ >= 2) refill();
        auto r = (static_cast<std::uint64_t>(out_[2 * pos_ + 1]) << 32) | out_[2 * pos_];
        ++pos_;
        return r;
    }

    // uniform in (0,1), never exactly 0
    double uniform() { return ((*this)() >> 11) * 0x1.0p-53 + 0x1.0p-54; }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2 * kPi * u2);
        have_spare_ = true;
        return r * std::cos(2 * kPi * u2);
    }

    std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * n) % n; }

private:
    void refill() {
        auto c = ctr_;
        auto k = key_;
        for (int round = 0; round < 10; ++round) {
            std::uint64_t p0 = std::uint64_t{0xD2511F53} * c[0];
            std::uint64_t p1 = std::uint64_t{0xCD9E8D57} * c[2];
            c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
                 static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
            k[0] += 0x9E3779B9;
            k[1] += 0xBB67AE85;
        }
        out_ = c;
        pos_ = 0;
        if (++ctr_[0] == 0) ++ctr_[1];
    }

    std::array<std::uint32_t, 2> key_{};
    std::array<std::uint32_t, 4> ctr_{};
    std::array<std::uint32_t, 4> out_{};
    int pos_ = 2;
    bool have_spare_ = false;
    double spare_ = 0;
};

// FNV-1a, used for domain/ensemble/config hashes in file headers.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
    auto p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

int worker_count();  // FKFORGE_WORKERS, default 1

}  // namespace fkforge
