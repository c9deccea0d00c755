#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace erdmd {

inline std::uint64_t splitmix64(std::uint64_t &state)
{
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-based stream: the state for (seed, index) is a pure function of
// both, so parallel and serial consumers draw identical values.
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t stream_index)
    {
        std::uint64_t s = seed;
        std::uint64_t a = splitmix64(s);
        s = stream_index ^ 0x6a09e667f3bcc909ULL;
        std::uint64_t b = splitmix64(s);
        state_ = a ^ (b + 0x9e3779b97f4a7c15ULL);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, n) via the 128-bit multiply trick.
    std::uint64_t next_below(std::uint64_t n)
    {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller.
    double next_gaussian()
    {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = next_double();
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(6.283185307179586 * u2);
        have_spare_ = true;
        return r * std::cos(6.283185307179586 * u2);
    }

    std::vector<int> permutation(int n)
    {
        std::vector<int> p(static_cast<size_t>(n));
        std::iota(p.begin(), p.end(), 0);
        for (int i = n - 1; i > 0; --i) {
            int j = static_cast<int>(next_below(static_cast<std::uint64_t>(i) + 1));
            std::swap(p[static_cast<size_t>(i)], p[static_cast<size_t>(j)]);
        }
        return p;
    }

  private:
    std::uint64_t state_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace erdmd
