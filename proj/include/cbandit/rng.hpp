#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace cbandit {

using Rng = std::mt19937_64;

// Stream purposes, mixed into derived seeds so that model generation and
// reward noise never share a stream.
enum class StreamKind : std::uint32_t { model = 1, rewards = 2, users = 3, monte_carlo = 4 };

/// Seeds an engine from a root seed and a path of indices. The result depends
/// only on the arguments, never on scheduling order.
inline Rng derive_rng(std::uint64_t root, StreamKind kind, std::initializer_list<std::uint64_t> path) {
    std::vector<std::uint32_t> words;
    words.reserve(3 + 2 * path.size());
    words.push_back(static_cast<std::uint32_t>(root));
    words.push_back(static_cast<std::uint32_t>(root >> 32));
    words.push_back(static_cast<std::uint32_t>(kind));
    for (std::uint64_t p : path) {
        words.push_back(static_cast<std::uint32_t>(p));
        words.push_back(static_cast<std::uint32_t>(p >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

}  // namespace cbandit
