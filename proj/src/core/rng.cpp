#include "pli/core/rng.hpp"

#include <cmath>
#include <numbers>

namespace pli {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Moremur-style second finalizer so that draw outputs use different constants
// than key derivation.
constexpr std::uint64_t mix64b(std::uint64_t z) {
  z = (z ^ (z >> 27)) * 0x3C79AC492BA7B653ULL;
  z = (z ^ (z >> 33)) * 0x1C69B3F74AC4AE35ULL;
  return z ^ (z >> 27);
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed)
    : master_seed_(master_seed), key_(mix64(master_seed + kGolden)) {}

RngStream RngStream::split(std::uint64_t label) const {
  RngStream child(*this);
  child.counter_ = 0;
  child.has_spare_ = false;
  child.spare_normal_ = 0.0;
  child.path_.push_back(label);
  child.key_ = mix64(mix64b(key_) ^ (label * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
  return child;
}

RngStream::result_type RngStream::operator()() {
  ++counter_;
  return mix64b(key_ ^ mix64(counter_ * kGolden));
}

double RngStream::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(angle);
  has_spare_ = true;
  return r * std::cos(angle);
}

__extension__ using u128 = unsigned __int128;

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n <= 1) return 0;
  // Lemire's nearly divisionless method.
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t x = (*this)();
    const u128 m = static_cast<u128>(x) * n;
    if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::uint64_t>(m >> 64);
  }
}

}  // namespace pli
