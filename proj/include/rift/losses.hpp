#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rift/model.hpp"

namespace rift::losses {

using json = nlohmann::json;
using torch::Tensor;

/// Gaussian noise channels: sigma_s on translated images, sigma_g on embeddings.
struct NoiseConfig {
  double sigma_s = 0.3;
  double sigma_g = 0.1;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct LossWeights {
  double cyc = 10.0;
  double guess = 1.0;
  double norm = 0.0003;
  double gan = 1.0;
  double idt = 5.0;

  void validate() const;
  [[nodiscard]] json to_json() const;
  [[nodiscard]] static LossWeights from_json(const json& j);
};

/// Scalar values of every term for one step. gan_* and guess_* are generator-side values;
/// the discriminator-side ones are kept under gan_D_* / guess_D_*.
struct LossReport {
  double cyc_A = 0, cyc_B = 0, guess_A = 0, guess_B = 0, norm_A = 0, norm_B = 0;
  double gan_A = 0, gan_B = 0, idt_A = 0, idt_B = 0;
  double gan_D_A = 0, gan_D_B = 0, guess_D_A = 0, guess_D_B = 0;
  double total_G = 0, total_D = 0;

  [[nodiscard]] std::vector<std::pair<std::string, double>> items() const;
  [[nodiscard]] json to_json() const;
  /// Throws RuntimeFailure naming the first non-finite term.
  void check_finite() const;
};

/// Independent noise streams; each term draws its own epsilon.
enum class NoiseTerm : std::uint64_t {
  cyc_a_translate = 1,
  cyc_a_image,
  cyc_a_reconstruct,
  cyc_b_translate,
  cyc_b_image,
  cyc_b_reconstruct,
  gan_a,
  gan_b,
  idt_a,
  idt_b,
};

/// sigma * N(0, 1) shaped like `like`, drawn from the (seed, term) stream; zeros when sigma == 0.
[[nodiscard]] Tensor gaussian_noise(const Tensor& like, double sigma, std::uint64_t seed, NoiseTerm term);

/// Mean absolute error over all elements.
[[nodiscard]] Tensor l1(const Tensor& x, const Tensor& target);

// --- LS-GAN objectives on raw score maps (means over batch and patch map) ---

/// Discriminator: real -> 1, fake -> 0.
[[nodiscard]] Tensor ls_discriminator(const Tensor& real_scores, const Tensor& fake_scores);
/// Generator: fake -> 1.
[[nodiscard]] Tensor ls_generator(const Tensor& fake_scores);
/// Guess discriminator: (original, cycle) -> 1, (cycle, original) -> 0.
[[nodiscard]] Tensor ls_guess_discriminator(const Tensor& orig_cyc_scores, const Tensor& cyc_orig_scores);
/// Generator-side guess objective [D(x, x_cyc)]^2 + [1 - D(x_cyc, x)]^2.
[[nodiscard]] Tensor ls_guess_generator(const Tensor& orig_cyc_scores, const Tensor& cyc_orig_scores);

// --- Individual terms ---

/// Cycle images are tied to the step that produced them.
struct CycleCache {
  std::uint64_t step = 0;
  Tensor a_cyc, b_cyc;
};

struct CycleLoss {
  Tensor cyc_A, cyc_B;
  CycleCache cache;
};

/// a_cyc = G_B2A(G_A2B(a, s_B(b) + e_g) + e_s, s_A(a) + e_g), symmetrically for b.
[[nodiscard]] CycleLoss noisy_cycle_loss(model::ModelBundle& bundle, const Tensor& a, const Tensor& b,
                                         const NoiseConfig& noise, std::uint64_t step = 0);

/// Gradients reach generators/encoders only; the guess discriminators are frozen.
[[nodiscard]] std::pair<Tensor, Tensor> guess_loss_generator(model::ModelBundle& bundle, const Tensor& a,
                                                             const Tensor& b, const CycleCache& cache,
                                                             std::uint64_t step = 0);
/// Cycle images are detached; gradients reach the guess discriminators only.
[[nodiscard]] std::pair<Tensor, Tensor> guess_loss_discriminator(model::ModelBundle& bundle, const Tensor& a,
                                                                 const Tensor& b, const CycleCache& cache,
                                                                 std::uint64_t step = 0);

/// Mean over the batch of the squared L2 norm of each flattened embedding.
[[nodiscard]] Tensor capacity_loss(const Tensor& embeddings);

struct GanLoss {
  Tensor gen_A, gen_B;    // generator side, D frozen
  Tensor disc_A, disc_B;  // discriminator side, fakes detached
};

/// Fakes: G_B2A(b, s_A(a) + e_g) judged by D_A and G_A2B(a, s_B(b) + e_g) judged by D_B.
[[nodiscard]] GanLoss gan_losses(model::ModelBundle& bundle, const Tensor& a, const Tensor& b,
                                 const NoiseConfig& noise);

/// L1 between G_B2A(a, s_A(a) + e_g) and a, symmetrically for b.
[[nodiscard]] std::pair<Tensor, Tensor> identity_loss(model::ModelBundle& bundle, const Tensor& a, const Tensor& b,
                                                      const NoiseConfig& noise);

// --- Full objective, sharing trunk evaluations across terms ---

/// Every generator output needed by one step.
struct GeneratorPass {
  Tensor emb_a, emb_b;              // s_A(a), s_B(b)
  Tensor a_cyc, b_cyc;              // noisy cycle reconstructions
  Tensor fake_a, fake_b;            // realism-loss translations G_B2A(b, .), G_A2B(a, .)
  Tensor idt_a, idt_b;              // same-domain self translations
};

[[nodiscard]] GeneratorPass generator_forward(model::ModelBundle& bundle, const Tensor& a, const Tensor& b,
                                             const NoiseConfig& noise);

struct GeneratorTerms {
  Tensor cyc_A, cyc_B, guess_A, guess_B, norm_A, norm_B, gan_A, gan_B, idt_A, idt_B;
  Tensor total;
};

struct DiscriminatorTerms {
  Tensor gan_A, gan_B, guess_A, guess_B;
  Tensor total;
};

/// Weighted generator objective; D and D^gs are frozen while it is built.
[[nodiscard]] GeneratorTerms generator_terms(model::ModelBundle& bundle, const Tensor& a, const Tensor& b,
                                             const GeneratorPass& pass, const LossWeights& weights);
/// Discriminator objective on detached generator outputs. Guess terms are skipped when `with_guess` is false.
[[nodiscard]] DiscriminatorTerms discriminator_terms(model::ModelBundle& bundle, const Tensor& a, const Tensor& b,
                                                     const GeneratorPass& pass, bool with_guess = true);

[[nodiscard]] LossReport make_report(const GeneratorTerms& g, const DiscriminatorTerms& d);

/// All terms at the current parameters, without updating anything.
[[nodiscard]] LossReport total_losses(model::ModelBundle& bundle, const Tensor& a, const Tensor& b,
                                      const LossWeights& weights, const NoiseConfig& noise);

}  // namespace rift::losses
