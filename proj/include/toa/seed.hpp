// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>

namespace toa
{

// Stable hashing for seed derivation.

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c: s)
    {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept
{
    return splitmix64(seed ^ splitmix64(value + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::string_view value) noexcept
{
    return hash_combine(seed, fnv1a64(value));
}

/// Seed for one generation call: hash(master_seed, prompt_id, sample_index, attempt).
constexpr std::uint64_t derive_call_seed(std::uint64_t master_seed, std::string_view prompt_id,
                                         std::uint64_t sample_index, std::uint64_t attempt) noexcept
{
    return hash_combine(hash_combine(hash_combine(master_seed, prompt_id), sample_index), attempt);
}

/// Seed for a sequential-refinement chain's agent permutation.
constexpr std::uint64_t derive_chain_seed(std::uint64_t master_seed, std::string_view prompt_id,
                                          std::uint64_t chain_index) noexcept
{
    return hash_combine(hash_combine(hash_combine(master_seed, std::string_view { "chain" }), prompt_id),
                        chain_index);
}

} // namespace toa
