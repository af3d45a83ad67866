#include "gandetect/rng.hpp"

#include <cmath>
#include <numbers>

namespace gandetect {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(splitmix64(seed ^ splitmix64(stream_id))) {}

RngStream RngStream::child(std::string_view label) const {
  return RngStream(seed_, splitmix64(stream_id_ ^ fnv1a64(label)));
}

RngStream RngStream::child(std::uint64_t index) const {
  return RngStream(seed_, splitmix64(stream_id_ + splitmix64(index + 0x632BE59BD9B4E019ULL)));
}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi <= lo) return lo;
  const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
  const std::uint64_t limit = range == 0 ? 0 : (~std::uint64_t{0} / range) * range;
  std::uint64_t draw = engine_();
  while (limit != 0 && draw >= limit) draw = engine_();
  return lo + static_cast<std::int64_t>(range == 0 ? draw : draw % range);
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

}  // namespace gandetect
