#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"
#include "rift/datagen.hpp"
#include "rift/losses.hpp"
#include "rift/model.hpp"

namespace rift::trainer {

using json = nlohmann::json;

struct TrainConfig {
  std::string data;  // dataset directory written by `datagen`
  model::ArchConfig arch;
  losses::LossWeights weights;
  losses::NoiseConfig noise;  // rng_seed is derived per step from `seed`
  int batch_size = 8;
  int steps = 4000;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int checkpoint_every = 1000;
  std::uint64_t seed = 0;
  bool disable_norm = false;
  bool disable_guess = false;

  void validate() const;
  /// Weights after applying the ablation flags.
  [[nodiscard]] losses::LossWeights effective_weights() const;
  [[nodiscard]] json to_json() const;
  /// Unknown keys are rejected.
  [[nodiscard]] static TrainConfig from_json(const json& j);
  [[nodiscard]] static TrainConfig load(const std::filesystem::path& path);
};

/// Images of one domain as an (N, C, H, W) float tensor.
[[nodiscard]] torch::Tensor to_tensor(const std::vector<datagen::ImageGrid>& images);
[[nodiscard]] datagen::ImageGrid to_image(const torch::Tensor& chw);

/// Model, optimizers and step counter. All randomness is derived from (seed, step), so the
/// checkpointed step fully determines the remaining trajectory.
class TrainState {
 public:
  TrainState(TrainConfig cfg, torch::Tensor data_a, torch::Tensor data_b);

  /// One discriminator update followed by one generator update on the given batches.
  losses::LossReport train_step(const torch::Tensor& a, const torch::Tensor& b);
  /// Samples the step's batches and calls train_step.
  losses::LossReport step();

  /// Indices drawn for `step` (independent uniform draws per domain).
  [[nodiscard]] std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>> batch_indices(std::uint64_t step) const;
  [[nodiscard]] losses::NoiseConfig step_noise(std::uint64_t step) const;

  void save_checkpoint(const std::filesystem::path& blob) const;
  void load_checkpoint(const std::filesystem::path& blob);

  [[nodiscard]] std::uint64_t current_step() const noexcept { return step_; }
  [[nodiscard]] model::ModelBundle& bundle() noexcept { return bundle_; }
  [[nodiscard]] const TrainConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] torch::optim::Adam& generator_optimizer() noexcept { return *opt_g_; }
  [[nodiscard]] torch::optim::Adam& discriminator_optimizer() noexcept { return *opt_d_; }

 private:
  TrainConfig cfg_;
  torch::Tensor data_a_, data_b_;
  model::ModelBundle bundle_;
  std::unique_ptr<torch::optim::Adam> opt_g_, opt_d_;
  std::uint64_t step_ = 0;
};

/// Checkpoint sidecar: architecture, seed, step, loss weights and the full training config.
[[nodiscard]] json checkpoint_metadata(const TrainConfig& cfg, std::uint64_t step);
[[nodiscard]] std::filesystem::path sidecar_path(const std::filesystem::path& blob);

/// Rebuilds the bundle stored in a checkpoint (model parameters only).
[[nodiscard]] model::ModelBundle load_bundle(const std::filesystem::path& blob);
[[nodiscard]] TrainConfig load_checkpoint_config(const std::filesystem::path& blob);

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::filesystem::path metrics;
  std::vector<std::filesystem::path> checkpoints;
};

/// Runs the training loop into `out`: OUT/checkpoints/step_XXXXXXXX.pt (+ .json sidecar),
/// OUT/metrics.jsonl (one LossReport per step) and OUT/config.json (effective config).
/// With `resume`, continues from that checkpoint up to cfg.steps.
TrainResult train(const TrainConfig& cfg, const std::filesystem::path& out,
                  const std::optional<std::filesystem::path>& resume = std::nullopt);

}  // namespace rift::trainer
