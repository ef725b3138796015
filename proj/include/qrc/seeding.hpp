#pragma once

// Counter-based seed derivation. Every random stream in a run is keyed by a
// domain label plus integer indices mixed into the master seed, so streams
// for couplings, inputs and measurement noise never share state.

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace qrc {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view domain,
                                    std::initializer_list<std::uint64_t> indices = {}) {
  std::uint64_t state = splitmix64(master ^ splitmix64(fnv1a(domain)));
  for (auto i : indices) state = splitmix64(state ^ splitmix64(i + 0x632be59bd9b4e019ULL));
  return state;
}

}  // namespace qrc
