#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rift/common.hpp"

namespace rift::model {

using json = nlohmann::json;

/// Architecture hyperparameters; everything needed to rebuild a bundle from a checkpoint.
struct ArchConfig {
  std::int64_t image_channels = 3;
  std::int64_t height = 32;
  std::int64_t width = 32;
  std::int64_t base_channels = 16;  // generator trunk width at full resolution
  std::int64_t n_down = 2;          // stride-2 stages; the bottleneck is (H, W) / 2^n_down
  std::int64_t n_res = 2;
  std::int64_t embed_height = 8;  // single-channel domain embedding
  std::int64_t embed_width = 8;
  std::int64_t disc_channels = 16;
  std::int64_t disc_down = 2;  // 4x4 stride-2 stages in the discriminators

  void validate() const;
  [[nodiscard]] std::int64_t bottleneck_height() const noexcept { return height >> n_down; }
  [[nodiscard]] std::int64_t bottleneck_width() const noexcept { return width >> n_down; }
  [[nodiscard]] std::int64_t bottleneck_channels() const noexcept { return base_channels << n_down; }
  [[nodiscard]] std::int64_t embedding_dim() const noexcept { return embed_height * embed_width; }
  /// Patch-map size of the discriminators: disc_down 4x4/stride-2/pad-1 convs then a 3x3/stride-1/pad-1 conv.
  [[nodiscard]] std::pair<std::int64_t, std::int64_t> patch_size() const noexcept;

  [[nodiscard]] json to_json() const;
  [[nodiscard]] static ArchConfig from_json(const json& j);
  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

// ----------------------------------------------------------------------
// Building blocks
// ----------------------------------------------------------------------

struct ResidualBlockImpl : torch::nn::Module {
  explicit ResidualBlockImpl(std::int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Shared per-domain trunk: stem, stride-2 downsampling, residual blocks.
struct TrunkImpl : torch::nn::Module {
  explicit TrunkImpl(const ArchConfig& arch);
  torch::Tensor forward(const torch::Tensor& x);
  torch::nn::Conv2d stem{nullptr};
  torch::nn::ModuleList down;
  torch::nn::ModuleList res;
};
TORCH_MODULE(Trunk);

/// Final layer of the domain-specific encoder: bottleneck features -> 1-channel embedding.
struct EncoderHeadImpl : torch::nn::Module {
  explicit EncoderHeadImpl(const ArchConfig& arch);
  torch::Tensor forward(const torch::Tensor& features);
  torch::nn::Conv2d proj{nullptr};
  std::int64_t embed_h, embed_w;
};
TORCH_MODULE(EncoderHead);

/// Generator-specific layers: fuse the embedding at the bottleneck, upsample, tanh.
struct GeneratorHeadImpl : torch::nn::Module {
  explicit GeneratorHeadImpl(const ArchConfig& arch);
  torch::Tensor forward(const torch::Tensor& features, const torch::Tensor& embedding);
  torch::nn::Conv2d fuse{nullptr};
  torch::nn::ModuleList up;
  torch::nn::Conv2d out{nullptr};
};
TORCH_MODULE(GeneratorHead);

/// LS-GAN patch discriminator.
struct PatchDiscriminatorImpl : torch::nn::Module {
  PatchDiscriminatorImpl(std::int64_t in_channels, std::int64_t width, std::int64_t n_down = 2);
  torch::Tensor forward(const torch::Tensor& x);
  torch::nn::Conv2d c1{nullptr}, c2{nullptr}, c3{nullptr};
  torch::nn::ModuleList extra{nullptr};  // stride-2 stages beyond the second
};
TORCH_MODULE(PatchDiscriminator);

// ----------------------------------------------------------------------
// Bundle
// ----------------------------------------------------------------------

/// All network roles. Encoder s_X and generator G_X2Y read images of domain X through the same
/// trunk_X and differ only in their heads.
struct ModelBundleImpl : torch::nn::Module {
  explicit ModelBundleImpl(const ArchConfig& arch);

  /// Shared trunk applied to an image batch (N, C, H, W).
  torch::Tensor features(Domain domain, const torch::Tensor& images);
  torch::Tensor encode_features(Domain domain, const torch::Tensor& features);
  torch::Tensor translate_features(Direction direction, const torch::Tensor& features, const torch::Tensor& embedding);

  /// s_X(images): (N, 1, He, We).
  torch::Tensor encode(Domain domain, const torch::Tensor& images);
  /// G_X2Y(source, embedding): (N, C, H, W) in [-1, 1].
  torch::Tensor translate(Direction direction, const torch::Tensor& source, const torch::Tensor& guide_embedding);
  /// F_X2Y(source, guide) = G_X2Y(source, s_Y(guide)).
  torch::Tensor guided_translate(Direction direction, const torch::Tensor& source, const torch::Tensor& guide);
  /// D_X(images): (N, 1, Ph, Pw) unbounded scores.
  torch::Tensor discriminate(Domain domain, const torch::Tensor& images);
  /// D^gs_X(x, y): ordered pair, channel-concatenated.
  torch::Tensor guess(Domain domain, const torch::Tensor& x, const torch::Tensor& y);

  /// Trunks, encoder heads and generator heads.
  std::vector<torch::Tensor> generator_parameters() const;
  /// Image and guess discriminators.
  std::vector<torch::Tensor> discriminator_parameters() const;

  /// Parameters seen through s_X / G_X2Y (shared trunk tensors appear in both).
  std::vector<torch::Tensor> encoder_parameters(Domain domain) const;
  std::vector<torch::Tensor> translator_parameters(Direction direction) const;

  void check_images(const torch::Tensor& images, const char* what) const;
  void check_embedding(const torch::Tensor& embedding) const;

  ArchConfig arch;
  Trunk trunk_a{nullptr}, trunk_b{nullptr};
  EncoderHead enc_head_a{nullptr}, enc_head_b{nullptr};
  GeneratorHead gen_head_a2b{nullptr}, gen_head_b2a{nullptr};
  PatchDiscriminator disc_a{nullptr}, disc_b{nullptr};
  PatchDiscriminator guess_a{nullptr}, guess_b{nullptr};
};
TORCH_MODULE(ModelBundle);

/// He-normal std for layers followed by a rectifier, sqrt(1 / fan_in) for the final layer of
/// each network (generator output, encoder projection, discriminator score).
[[nodiscard]] double init_std(const std::string& parameter_name, std::int64_t fan_in);

/// Builds a bundle with zero-mean normal conv weights (std from init_std) and zero biases drawn from `seed`.
[[nodiscard]] ModelBundle make_bundle(const ArchConfig& arch, std::uint64_t seed);

/// Zero the final encoder layer of `domain` (embedding becomes identically zero).
void zero_encoder_head(ModelBundle& bundle, Domain domain);
/// Multiply the final encoder layer of `domain` by `factor` (embedding scales by `factor`).
void scale_encoder_head(ModelBundle& bundle, Domain domain, double factor);

/// Named parameter snapshot, used for checkpoints and exact-equality checks.
[[nodiscard]] std::vector<std::pair<std::string, torch::Tensor>> named_parameter_copies(const ModelBundle& bundle);

/// RAII: disables requires_grad on a parameter set and restores it on scope exit.
class FrozenParameters {
 public:
  explicit FrozenParameters(std::vector<torch::Tensor> params);
  ~FrozenParameters();
  FrozenParameters(const FrozenParameters&) = delete;
  FrozenParameters& operator=(const FrozenParameters&) = delete;

 private:
  std::vector<torch::Tensor> params_;
  std::vector<bool> previous_;
};

}  // namespace rift::model
