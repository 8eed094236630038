#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace wideseek {

// 64-bit FNV-1a. Used for state hashes, config hashes and script keys; not
// a cryptographic digest.
[[nodiscard]] std::uint64_t fnv1a64(std::string_view data) noexcept;

// fnv1a64 rendered as 16 lowercase hex digits.
[[nodiscard]] std::string hash_hex(std::string_view data);

[[nodiscard]] std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Deterministic seed derivation for nested work items (rollout, agent, turn).
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                        std::uint64_t b = 0, std::uint64_t c = 0) noexcept;

}  // namespace wideseek
