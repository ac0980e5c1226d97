#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"

namespace rift::capacity {

using json = nlohmann::json;

/// Bound on the information carried by a power-limited embedding through an additive Gaussian channel.
struct CapacityBound {
  int dim = 1;         // embedding element count
  double power = 0.0;  // E ||s(a)||^2
  double sigma = 1.0;  // per-element noise standard deviation
  double bits = 0.0;

  [[nodiscard]] json to_json() const;
};

/// dim * log2(1 + power / sigma^2). Rejects dim < 1, power < 0 and sigma <= 0.
[[nodiscard]] double capacity_bound(int dim, double power, double sigma);
[[nodiscard]] CapacityBound make_bound(int dim, double power, double sigma);

/// Row-major samples: one inner vector per sample, all of the same dimension.
using Samples = std::vector<std::vector<double>>;

inline constexpr int kNeighbours = 4;
inline constexpr std::size_t kMinSamples = 1000;
inline constexpr std::size_t kMaxDim = 8;

/// Kraskov-Stoegbauer-Grassberger estimator (first variant, k = 4, max-norm) in bits, clipped at 0.
///
/// Each coordinate is standardised, then a 1e-10 seeded jitter breaks ties so discrete variables
/// are handled. Measured bias on Gaussian pairs at N = 5000, d <= 4 stays below 0.1 bits; the
/// estimate underestimates as the true value grows.
///
/// Requires >= 1000 paired samples and at most 8 dimensions per side.
[[nodiscard]] double estimate_mi(const Samples& x, const Samples& y, std::uint64_t seed = 0);

/// Convenience for scalar variables.
[[nodiscard]] double estimate_mi(const std::vector<double>& x, const std::vector<double>& y, std::uint64_t seed = 0);

}  // namespace rift::capacity
