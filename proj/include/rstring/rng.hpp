#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace rstring {

namespace detail {

// SplitMix64 output function (Steele/Lea/Flood). The stream below is the
// counter sequence state = key + i*gamma pushed through this finalizer, so
// any draw is recomputable from (key, i) alone.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t z) {
  std::uint64_t s = z;
  return splitmix64(s);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// One deterministic stream per (master_seed, replica_id, purpose) triple.
// Distinct purposes (noise, initial condition, proposals, ...) never share
// draws, which keeps paired estimators independent by construction.
class SeedStream {
 public:
  SeedStream(std::uint64_t master_seed, std::uint64_t replica_id,
             std::string_view purpose)
      : master_(master_seed),
        replica_(replica_id),
        purpose_(purpose),
        spare_valid_(false) {
    std::uint64_t key = detail::mix64(master_seed);
    key = detail::mix64(key ^ detail::mix64(replica_id));
    key = detail::mix64(key ^ detail::fnv1a64(purpose));
    state_ = key;
  }

  std::uint64_t next_u64() { return detail::splitmix64(state_); }

  // uniform on [0,1), 53 random bits
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Marsaglia polar method; avoids cos/sin so replay depends only on
  // sqrt/log, which are stable for a fixed libm.
  double next_gaussian() {
    if (spare_valid_) {
      spare_valid_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_uniform() - 1.0;
      v = 2.0 * next_uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    spare_valid_ = true;
    return u * f;
  }

  std::uint64_t master_seed() const { return master_; }
  std::uint64_t replica_id() const { return replica_; }
  const std::string& purpose() const { return purpose_; }

  // "master:replica:purpose", used by the verification layer to assert that
  // paired estimates draw from disjoint streams.
  std::string label() const {
    return std::to_string(master_) + ":" + std::to_string(replica_) + ":" +
           purpose_;
  }

 private:
  std::uint64_t master_;
  std::uint64_t replica_;
  std::string purpose_;
  std::uint64_t state_;
  double spare_ = 0.0;
  bool spare_valid_;
};

}  // namespace rstring
