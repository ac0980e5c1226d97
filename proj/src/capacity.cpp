#include "rift/capacity.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "rift/common.hpp"

namespace rift::capacity {

json CapacityBound::to_json() const { return {{"dim", dim}, {"power", power}, {"sigma", sigma}, {"bits", bits}}; }

double capacity_bound(int dim, double power, double sigma) {
  if (dim < 1) throw ConfigError("capacity_bound: dim must be >= 1");
  if (!(power >= 0.0) || !std::isfinite(power)) throw ConfigError("capacity_bound: power must be finite and >= 0");
  if (!(sigma > 0.0)) throw ConfigError("capacity_bound: sigma must be > 0 (zero noise has unbounded capacity)");
  return dim * std::log2(1.0 + power / (sigma * sigma));
}

CapacityBound make_bound(int dim, double power, double sigma) {
  return {dim, power, sigma, capacity_bound(dim, power, sigma)};
}

namespace {

std::size_t check_samples(const Samples& s, std::size_t n, const char* what) {
  if (s.size() != n) throw ConfigError(std::string("estimate_mi: ") + what + " has a different sample count");
  const std::size_t d = s.front().size();
  if (d == 0) throw ConfigError(std::string("estimate_mi: ") + what + " has zero dimensions");
  if (d > kMaxDim)
    throw ConfigError(std::string("estimate_mi: ") + what + " has " + std::to_string(d) + " dimensions, limit is " +
                      std::to_string(kMaxDim));
  for (const auto& row : s) {
    if (row.size() != d) throw ConfigError(std::string("estimate_mi: ragged samples in ") + what);
    for (double v : row)
      if (!std::isfinite(v)) throw ConfigError(std::string("estimate_mi: non-finite sample in ") + what);
  }
  return d;
}

// Column-major, standardised, jittered copy.
std::vector<std::vector<double>> prepare(const Samples& s, std::size_t d, std::mt19937_64& rng) {
  const std::size_t n = s.size();
  std::normal_distribution<double> jitter(0.0, 1e-10);
  std::vector<std::vector<double>> cols(d, std::vector<double>(n));
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += s[i][j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (s[i][j] - mean) * (s[i][j] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    const double scale = sd > 0.0 ? 1.0 / sd : 1.0;
    for (std::size_t i = 0; i < n; ++i) cols[j][i] = (s[i][j] - mean) * scale + jitter(rng);
  }
  return cols;
}

double cheb(const std::vector<std::vector<double>>& cols, std::size_t i, std::size_t k) {
  double m = 0.0;
  for (const auto& c : cols) m = std::max(m, std::abs(c[i] - c[k]));
  return m;
}

}  // namespace

double estimate_mi(const Samples& x, const Samples& y, std::uint64_t seed) {
  const std::size_t n = x.size();
  if (n < kMinSamples)
    throw ConfigError("estimate_mi: " + std::to_string(n) + " samples, need at least " + std::to_string(kMinSamples));
  const std::size_t dx = check_samples(x, n, "x");
  const std::size_t dy = check_samples(y, n, "y");
  std::mt19937_64 rng(mix_seed(seed, {0x4D49}));
  const auto cx = prepare(x, dx, rng);
  const auto cy = prepare(y, dy, rng);

  using boost::math::digamma;
  std::vector<double> dxs(n), dys(n), joint(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      dxs[j] = cheb(cx, i, j);
      dys[j] = cheb(cy, i, j);
      joint[j] = std::max(dxs[j], dys[j]);
    }
    joint[i] = std::numeric_limits<double>::infinity();
    auto kth = joint;
    std::nth_element(kth.begin(), kth.begin() + (kNeighbours - 1), kth.end());
    const double eps = kth[kNeighbours - 1];
    std::size_t nx = 0, ny = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (dxs[j] < eps) ++nx;
      if (dys[j] < eps) ++ny;
    }
    acc += digamma(static_cast<double>(nx + 1)) + digamma(static_cast<double>(ny + 1));
  }
  const double nats = digamma(static_cast<double>(kNeighbours)) + digamma(static_cast<double>(n)) -
                      acc / static_cast<double>(n);
  return std::max(0.0, nats / std::log(2.0));
}

double estimate_mi(const std::vector<double>& x, const std::vector<double>& y, std::uint64_t seed) {
  Samples sx, sy;
  sx.reserve(x.size());
  sy.reserve(y.size());
  for (double v : x) sx.push_back({v});
  for (double v : y) sy.push_back({v});
  return estimate_mi(sx, sy, seed);
}

}  // namespace rift::capacity
