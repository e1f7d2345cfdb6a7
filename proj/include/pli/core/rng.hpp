#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace pli {

/// Counter-based splittable random stream.
///
/// A stream is identified by a master seed and a path of branch labels. The
/// draw sequence depends only on that identity, so children created with
/// `split` are the same no matter how many draws the parent has made or in
/// which order siblings are created. Satisfies UniformRandomBitGenerator.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t master_seed = 0);

  /// Child stream keyed by (path ++ label).
  [[nodiscard]] RngStream split(std::uint64_t label) const;

  result_type operator()();

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  /// Uniform draw on [0, 1).
  double uniform();
  /// Standard normal draw.
  double normal();
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);

  [[nodiscard]] std::uint64_t master_seed() const { return master_seed_; }
  [[nodiscard]] const std::vector<std::uint64_t>& path() const { return path_; }
  [[nodiscard]] std::uint64_t key() const { return key_; }

 private:
  std::uint64_t master_seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::vector<std::uint64_t> path_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

inline RngStream split_rng(const RngStream& parent, std::uint64_t label) { return parent.split(label); }

}  // namespace pli
