#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

#include "rift/capacity.hpp"
#include "rift/model.hpp"

namespace rift::capacity {

/// Power = mean squared embedding norm of `domain`'s encoder over `images`; bound for the model's
/// embedding size and `sigma_g`.
[[nodiscard]] CapacityBound measured_capacity(model::ModelBundle& bundle, Domain domain, const torch::Tensor& images,
                                              double sigma_g);

/// Clean embeddings (N, dim) of `images`, computed in inference mode.
[[nodiscard]] torch::Tensor embeddings(model::ModelBundle& bundle, Domain domain, const torch::Tensor& images);

/// Estimated MI (bits) between a categorical code and the first principal component of the noisy
/// embedding s(x) + N(0, sigma_g^2). Samples images uniformly with replacement, `samples` >= 1000.
[[nodiscard]] double channel_mi(model::ModelBundle& bundle, Domain domain, const torch::Tensor& images,
                                const std::vector<int>& codes, double sigma_g, int samples = 2000,
                                std::uint64_t seed = 0);

}  // namespace rift::capacity
