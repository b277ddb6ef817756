#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace sideband {

using Engine = std::mt19937_64;

/// Shots per independently seeded chunk. Fixed so that output never depends
/// on the worker count.
inline constexpr std::size_t kChunkShots = 4096;

std::uint64_t splitmix64(std::uint64_t x);

/// Seed of chunk `chunk` derived from the master seed.
std::uint64_t chunk_seed(std::uint64_t master, std::uint64_t chunk);

/// Fills `out` chunk by chunk; `draw(engine, span)` fills one chunk from an
/// engine seeded with chunk_seed(master, chunk). OpenMP over chunks.
template <class Draw>
void fill_chunked(std::span<double> out, std::uint64_t master, Draw&& draw) {
  const std::ptrdiff_t chunks = static_cast<std::ptrdiff_t>((out.size() + kChunkShots - 1) / kChunkShots);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kChunkShots;
    const std::size_t len = std::min(kChunkShots, out.size() - begin);
    Engine engine(chunk_seed(master, static_cast<std::uint64_t>(c)));
    draw(engine, out.subspan(begin, len));
  }
}

/// Serial reference for fill_chunked().
template <class Draw>
void fill_chunked_serial(std::span<double> out, std::uint64_t master, Draw&& draw) {
  const std::size_t chunks = (out.size() + kChunkShots - 1) / kChunkShots;
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = c * kChunkShots;
    const std::size_t len = std::min(kChunkShots, out.size() - begin);
    Engine engine(chunk_seed(master, c));
    draw(engine, out.subspan(begin, len));
  }
}

}  // namespace sideband
