#include "rift/measured_capacity.hpp"

#include <algorithm>
#include <random>

namespace rift::capacity {

torch::Tensor embeddings(model::ModelBundle& bundle, Domain domain, const torch::Tensor& images) {
  torch::NoGradGuard no_grad;
  const bool was_training = bundle->is_training();
  bundle->eval();
  std::vector<torch::Tensor> parts;
  for (std::int64_t start = 0; start < images.size(0); start += 128) {
    const auto end = std::min<std::int64_t>(images.size(0), start + 128);
    parts.push_back(bundle->encode(domain, images.slice(0, start, end)).flatten(1));
  }
  if (was_training) bundle->train();
  return torch::cat(parts).to(torch::kFloat64);
}

CapacityBound measured_capacity(model::ModelBundle& bundle, Domain domain, const torch::Tensor& images,
                                double sigma_g) {
  if (images.size(0) == 0) throw ConfigError("measured_capacity: no images");
  const auto e = embeddings(bundle, domain, images);
  const double power = e.pow(2).sum(1).mean().item<double>();
  return make_bound(static_cast<int>(bundle->arch.embedding_dim()), power, sigma_g);
}

double channel_mi(model::ModelBundle& bundle, Domain domain, const torch::Tensor& images, const std::vector<int>& codes,
                  double sigma_g, int samples, std::uint64_t seed) {
  if (static_cast<std::int64_t>(codes.size()) != images.size(0))
    throw ConfigError("channel_mi: one code per image required");
  if (images.size(0) == 0) throw ConfigError("channel_mi: no images");
  if (!(sigma_g > 0.0)) throw ConfigError("channel_mi: sigma_g must be > 0");
  const auto e = embeddings(bundle, domain, images);
  const auto centred = e - e.mean(0, true);
  const auto cov = centred.t().mm(centred) / static_cast<double>(e.size(0));
  const auto [evals, evecs] = torch::linalg_eigh(cov, "L");
  const auto pc = evecs.select(1, evecs.size(1) - 1);  // eigenvalues ascend

  std::mt19937_64 rng(mix_seed(seed, {0xC4A2}));
  std::normal_distribution<double> noise(0.0, sigma_g);
  const auto proj = e.contiguous();
  std::vector<double> x, y;
  x.reserve(static_cast<std::size_t>(samples));
  y.reserve(static_cast<std::size_t>(samples));
  const auto pcv = pc.contiguous();
  const double* w = pcv.data_ptr<double>();
  const double* rows = proj.data_ptr<double>();
  const auto dim = e.size(1);
  for (int s = 0; s < samples; ++s) {
    const auto i = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(e.size(0)));
    double v = 0.0;
    for (std::int64_t j = 0; j < dim; ++j) v += (rows[i * dim + j] + noise(rng)) * w[j];
    x.push_back(static_cast<double>(codes[static_cast<std::size_t>(i)]));
    y.push_back(v);
  }
  return estimate_mi(x, y, seed);
}

}  // namespace rift::capacity
