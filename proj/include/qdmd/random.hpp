#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace qdmd {

/// Derives an independent engine for the substream (seed, name, index).
///
/// Every random consumer in the library draws from its own named substream so
/// results never depend on evaluation order or thread count.
std::mt19937_64 substream(std::uint64_t seed, std::string_view name,
                          std::uint64_t index = 0);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace qdmd
