#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>

#include "fedrep/numerics.hpp"

namespace fedrep {

/// Reproducible random stream keyed by (seed, stream_id).
///
/// The generator is xoshiro256** seeded through splitmix64, and the
/// uniform/normal transforms are implemented here rather than taken from
/// <random>, so draws are identical across standard libraries.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// Independent child stream; the parent is not advanced.
  RngStream split(std::uint64_t sub_id) const;
  /// Child keyed by a path of ids, e.g. {client, round, purpose}.
  RngStream split(std::initializer_list<std::uint64_t> path) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  /// Gamma(shape, 1) via Marsaglia-Tsang.
  double gamma(double shape);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// n i.i.d. standard normal draws.
Vec gaussian(RngStream& rng, std::size_t n);

/// rows x cols standard normal matrix, filled row-major.
Mat gaussian_matrix(RngStream& rng, std::size_t rows, std::size_t cols);

/// Fisher-Yates shuffle driven by the stream.
template <typename T>
void shuffle(std::span<T> items, RngStream& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace fedrep
