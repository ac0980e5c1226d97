#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace rift {

/// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind { usage, config, runtime };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class RuntimeFailure : public Error {
 public:
  explicit RuntimeFailure(const std::string& what) : Error(ErrorKind::runtime, what) {}
};

enum class Domain { A, B };
enum class Direction { A2B, B2A };

[[nodiscard]] const char* to_string(Domain d) noexcept;
[[nodiscard]] const char* to_string(Direction d) noexcept;
[[nodiscard]] Domain parse_domain(const std::string& s);
[[nodiscard]] Direction parse_direction(const std::string& s);

/// Domain the translation reads its source from / writes its output into.
[[nodiscard]] constexpr Domain source_domain(Direction d) noexcept {
  return d == Direction::A2B ? Domain::A : Domain::B;
}
[[nodiscard]] constexpr Domain target_domain(Direction d) noexcept {
  return d == Direction::A2B ? Domain::B : Domain::A;
}

/// splitmix64 finalizer; used to derive independent seeded streams from (seed, ids...).
[[nodiscard]] std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) noexcept;

/// Round a percentage half-up to an integer (tables report whole percents).
[[nodiscard]] int round_half_up(double value) noexcept;

}  // namespace rift
