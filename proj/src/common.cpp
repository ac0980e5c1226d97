#include "rift/common.hpp"

#include <cmath>

namespace rift {

const char* to_string(Domain d) noexcept { return d == Domain::A ? "A" : "B"; }

const char* to_string(Direction d) noexcept { return d == Direction::A2B ? "A2B" : "B2A"; }

Domain parse_domain(const std::string& s) {
  if (s == "A") return Domain::A;
  if (s == "B") return Domain::B;
  throw ConfigError("unknown domain tag '" + s + "' (expected A or B)");
}

Direction parse_direction(const std::string& s) {
  if (s == "A2B") return Direction::A2B;
  if (s == "B2A") return Direction::B2A;
  throw ConfigError("unknown direction '" + s + "' (expected A2B or B2A)");
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}
}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) noexcept {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t id : ids) h = splitmix64(h ^ splitmix64(id + 0x632BE59BD9B4E019ULL));
  return h;
}

int round_half_up(double value) noexcept {
  // Inputs are percentages derived from fractions; absorb binary representation error.
  return static_cast<int>(std::floor(value + 0.5 + 1e-9));
}

}  // namespace rift
