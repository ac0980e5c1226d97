#include "rift/losses.hpp"

#include <cmath>

namespace rift::losses {

using model::FrozenParameters;
using model::ModelBundle;

void NoiseConfig::validate() const {
  if (!(sigma_s >= 0.0) || !(sigma_g >= 0.0) || !std::isfinite(sigma_s) || !std::isfinite(sigma_g))
    throw ConfigError("noise amplitudes must be finite and >= 0");
}

void LossWeights::validate() const {
  for (double w : {cyc, guess, norm, gan, idt})
    if (!std::isfinite(w) || w < 0.0) throw ConfigError("loss weights must be finite and >= 0");
}

json LossWeights::to_json() const {
  return {{"cyc", cyc}, {"guess", guess}, {"norm", norm}, {"gan", gan}, {"idt", idt}};
}

LossWeights LossWeights::from_json(const json& j) {
  LossWeights w;
  for (const auto& [k, v] : j.items()) {
    if (k == "cyc") w.cyc = v.get<double>();
    else if (k == "guess") w.guess = v.get<double>();
    else if (k == "norm") w.norm = v.get<double>();
    else if (k == "gan") w.gan = v.get<double>();
    else if (k == "idt") w.idt = v.get<double>();
    else throw ConfigError("loss weights: unknown key '" + k + "'");
  }
  w.validate();
  return w;
}

std::vector<std::pair<std::string, double>> LossReport::items() const {
  return {{"cyc_A", cyc_A},         {"cyc_B", cyc_B},         {"guess_A", guess_A},     {"guess_B", guess_B},
          {"norm_A", norm_A},       {"norm_B", norm_B},       {"gan_A", gan_A},         {"gan_B", gan_B},
          {"idt_A", idt_A},         {"idt_B", idt_B},         {"gan_D_A", gan_D_A},     {"gan_D_B", gan_D_B},
          {"guess_D_A", guess_D_A}, {"guess_D_B", guess_D_B}, {"total_G", total_G},     {"total_D", total_D}};
}

json LossReport::to_json() const {
  json j = json::object();
  for (const auto& [k, v] : items()) j[k] = v;
  return j;
}

void LossReport::check_finite() const {
  for (const auto& [k, v] : items())
    if (!std::isfinite(v)) throw RuntimeFailure("non-finite loss term '" + k + "'");
}

Tensor gaussian_noise(const Tensor& like, double sigma, std::uint64_t seed, NoiseTerm term) {
  if (sigma == 0.0) return torch::zeros_like(like);
  auto gen = at::detail::createCPUGenerator(mix_seed(seed, {static_cast<std::uint64_t>(term)}));
  return torch::randn(like.sizes(), gen, like.options().requires_grad(false)) * sigma;
}

Tensor l1(const Tensor& x, const Tensor& target) { return (x - target).abs().mean(); }

Tensor ls_discriminator(const Tensor& real_scores, const Tensor& fake_scores) {
  return (1.0 - real_scores).pow(2).mean() + fake_scores.pow(2).mean();
}

Tensor ls_generator(const Tensor& fake_scores) { return (1.0 - fake_scores).pow(2).mean(); }

Tensor ls_guess_discriminator(const Tensor& orig_cyc_scores, const Tensor& cyc_orig_scores) {
  return (1.0 - orig_cyc_scores).pow(2).mean() + cyc_orig_scores.pow(2).mean();
}

Tensor ls_guess_generator(const Tensor& orig_cyc_scores, const Tensor& cyc_orig_scores) {
  return orig_cyc_scores.pow(2).mean() + (1.0 - cyc_orig_scores).pow(2).mean();
}

namespace {

void check_batches(const Tensor& a, const Tensor& b) {
  if (!a.defined() || !b.defined() || a.dim() != 4 || b.dim() != 4 || a.size(0) == 0 || b.size(0) == 0)
    throw RuntimeFailure("losses: empty or malformed batch");
  if (a.size(0) != b.size(0)) throw RuntimeFailure("losses: domain batches must have equal size");
}

void check_cache(const CycleCache& cache, std::uint64_t step) {
  if (!cache.a_cyc.defined() || !cache.b_cyc.defined()) throw RuntimeFailure("guess loss: empty cycle cache");
  if (cache.step != step)
    throw RuntimeFailure("guess loss: stale cycle cache (cached step " + std::to_string(cache.step) +
                         ", current step " + std::to_string(step) + ")");
}

Tensor noisy(const Tensor& x, double sigma, std::uint64_t seed, NoiseTerm term) {
  return x + gaussian_noise(x, sigma, seed, term);
}

}  // namespace

CycleLoss noisy_cycle_loss(ModelBundle& bundle, const Tensor& a, const Tensor& b, const NoiseConfig& noise,
                           std::uint64_t step) {
  check_batches(a, b);
  noise.validate();
  const auto seed = noise.rng_seed;
  const auto emb_a = bundle->encode(Domain::A, a);
  const auto emb_b = bundle->encode(Domain::B, b);

  const auto b_prime = bundle->translate(Direction::A2B, a, noisy(emb_b, noise.sigma_g, seed, NoiseTerm::cyc_a_translate));
  const auto a_cyc = bundle->translate(Direction::B2A, noisy(b_prime, noise.sigma_s, seed, NoiseTerm::cyc_a_image),
                                       noisy(emb_a, noise.sigma_g, seed, NoiseTerm::cyc_a_reconstruct));

  const auto a_prime = bundle->translate(Direction::B2A, b, noisy(emb_a, noise.sigma_g, seed, NoiseTerm::cyc_b_translate));
  const auto b_cyc = bundle->translate(Direction::A2B, noisy(a_prime, noise.sigma_s, seed, NoiseTerm::cyc_b_image),
                                       noisy(emb_b, noise.sigma_g, seed, NoiseTerm::cyc_b_reconstruct));

  return {l1(a_cyc, a), l1(b_cyc, b), CycleCache{step, a_cyc, b_cyc}};
}

std::pair<Tensor, Tensor> guess_loss_generator(ModelBundle& bundle, const Tensor& a, const Tensor& b,
                                               const CycleCache& cache, std::uint64_t step) {
  check_batches(a, b);
  check_cache(cache, step);
  FrozenParameters frozen(bundle->discriminator_parameters());
  auto la = ls_guess_generator(bundle->guess(Domain::A, a, cache.a_cyc), bundle->guess(Domain::A, cache.a_cyc, a));
  auto lb = ls_guess_generator(bundle->guess(Domain::B, b, cache.b_cyc), bundle->guess(Domain::B, cache.b_cyc, b));
  return {la, lb};
}

std::pair<Tensor, Tensor> guess_loss_discriminator(ModelBundle& bundle, const Tensor& a, const Tensor& b,
                                                   const CycleCache& cache, std::uint64_t step) {
  check_batches(a, b);
  check_cache(cache, step);
  const auto a_cyc = cache.a_cyc.detach();
  const auto b_cyc = cache.b_cyc.detach();
  auto la = ls_guess_discriminator(bundle->guess(Domain::A, a, a_cyc), bundle->guess(Domain::A, a_cyc, a));
  auto lb = ls_guess_discriminator(bundle->guess(Domain::B, b, b_cyc), bundle->guess(Domain::B, b_cyc, b));
  return {la, lb};
}

Tensor capacity_loss(const Tensor& embeddings) {
  if (!embeddings.defined() || embeddings.dim() < 1 || embeddings.size(0) == 0)
    throw RuntimeFailure("capacity_loss: empty batch");
  return embeddings.reshape({embeddings.size(0), -1}).pow(2).sum(1).mean();
}

GanLoss gan_losses(ModelBundle& bundle, const Tensor& a, const Tensor& b, const NoiseConfig& noise) {
  check_batches(a, b);
  noise.validate();
  const auto fake_a = bundle->translate(
      Direction::B2A, b, noisy(bundle->encode(Domain::A, a), noise.sigma_g, noise.rng_seed, NoiseTerm::gan_a));
  const auto fake_b = bundle->translate(
      Direction::A2B, a, noisy(bundle->encode(Domain::B, b), noise.sigma_g, noise.rng_seed, NoiseTerm::gan_b));
  GanLoss out;
  out.disc_A = ls_discriminator(bundle->discriminate(Domain::A, a), bundle->discriminate(Domain::A, fake_a.detach()));
  out.disc_B = ls_discriminator(bundle->discriminate(Domain::B, b), bundle->discriminate(Domain::B, fake_b.detach()));
  FrozenParameters frozen(bundle->discriminator_parameters());
  out.gen_A = ls_generator(bundle->discriminate(Domain::A, fake_a));
  out.gen_B = ls_generator(bundle->discriminate(Domain::B, fake_b));
  return out;
}

std::pair<Tensor, Tensor> identity_loss(ModelBundle& bundle, const Tensor& a, const Tensor& b,
                                        const NoiseConfig& noise) {
  check_batches(a, b);
  noise.validate();
  const auto idt_a = bundle->translate(
      Direction::B2A, a, noisy(bundle->encode(Domain::A, a), noise.sigma_g, noise.rng_seed, NoiseTerm::idt_a));
  const auto idt_b = bundle->translate(
      Direction::A2B, b, noisy(bundle->encode(Domain::B, b), noise.sigma_g, noise.rng_seed, NoiseTerm::idt_b));
  return {l1(idt_a, a), l1(idt_b, b)};
}

GeneratorPass generator_forward(ModelBundle& bundle, const Tensor& a, const Tensor& b, const NoiseConfig& noise) {
  check_batches(a, b);
  noise.validate();
  const auto seed = noise.rng_seed;
  const double sg = noise.sigma_g, ss = noise.sigma_s;

  // Trunk outputs are shared between s_X and G_X2Y on the same inputs.
  const auto fa_A = bundle->features(Domain::A, a);  // trunk_A(a): s_A(a), G_A2B(a, .)
  const auto fb_B = bundle->features(Domain::B, b);  // trunk_B(b): s_B(b), G_B2A(b, .)

  GeneratorPass p;
  p.emb_a = bundle->encode_features(Domain::A, fa_A);
  p.emb_b = bundle->encode_features(Domain::B, fb_B);

  const auto b_prime = bundle->translate_features(Direction::A2B, fa_A, noisy(p.emb_b, sg, seed, NoiseTerm::cyc_a_translate));
  p.a_cyc = bundle->translate(Direction::B2A, noisy(b_prime, ss, seed, NoiseTerm::cyc_a_image),
                              noisy(p.emb_a, sg, seed, NoiseTerm::cyc_a_reconstruct));
  const auto a_prime = bundle->translate_features(Direction::B2A, fb_B, noisy(p.emb_a, sg, seed, NoiseTerm::cyc_b_translate));
  p.b_cyc = bundle->translate(Direction::A2B, noisy(a_prime, ss, seed, NoiseTerm::cyc_b_image),
                              noisy(p.emb_b, sg, seed, NoiseTerm::cyc_b_reconstruct));

  p.fake_a = bundle->translate_features(Direction::B2A, fb_B, noisy(p.emb_a, sg, seed, NoiseTerm::gan_a));
  p.fake_b = bundle->translate_features(Direction::A2B, fa_A, noisy(p.emb_b, sg, seed, NoiseTerm::gan_b));

  p.idt_a = bundle->translate(Direction::B2A, a, noisy(p.emb_a, sg, seed, NoiseTerm::idt_a));
  p.idt_b = bundle->translate(Direction::A2B, b, noisy(p.emb_b, sg, seed, NoiseTerm::idt_b));
  return p;
}

GeneratorTerms generator_terms(ModelBundle& bundle, const Tensor& a, const Tensor& b, const GeneratorPass& p,
                               const LossWeights& w) {
  GeneratorTerms t;
  t.cyc_A = l1(p.a_cyc, a);
  t.cyc_B = l1(p.b_cyc, b);
  t.norm_A = capacity_loss(p.emb_a);
  t.norm_B = capacity_loss(p.emb_b);
  t.idt_A = l1(p.idt_a, a);
  t.idt_B = l1(p.idt_b, b);
  {
    FrozenParameters frozen(bundle->discriminator_parameters());
    t.gan_A = ls_generator(bundle->discriminate(Domain::A, p.fake_a));
    t.gan_B = ls_generator(bundle->discriminate(Domain::B, p.fake_b));
    t.guess_A = ls_guess_generator(bundle->guess(Domain::A, a, p.a_cyc), bundle->guess(Domain::A, p.a_cyc, a));
    t.guess_B = ls_guess_generator(bundle->guess(Domain::B, b, p.b_cyc), bundle->guess(Domain::B, p.b_cyc, b));
  }
  t.total = w.cyc * (t.cyc_A + t.cyc_B) + w.guess * (t.guess_A + t.guess_B) + w.norm * (t.norm_A + t.norm_B) +
            w.gan * (t.gan_A + t.gan_B) + w.idt * (t.idt_A + t.idt_B);
  return t;
}

DiscriminatorTerms discriminator_terms(ModelBundle& bundle, const Tensor& a, const Tensor& b,
                                       const GeneratorPass& p, bool with_guess) {
  DiscriminatorTerms t;
  t.gan_A = ls_discriminator(bundle->discriminate(Domain::A, a), bundle->discriminate(Domain::A, p.fake_a.detach()));
  t.gan_B = ls_discriminator(bundle->discriminate(Domain::B, b), bundle->discriminate(Domain::B, p.fake_b.detach()));
  t.total = t.gan_A + t.gan_B;
  if (with_guess) {
    const auto a_cyc = p.a_cyc.detach(), b_cyc = p.b_cyc.detach();
    t.guess_A = ls_guess_discriminator(bundle->guess(Domain::A, a, a_cyc), bundle->guess(Domain::A, a_cyc, a));
    t.guess_B = ls_guess_discriminator(bundle->guess(Domain::B, b, b_cyc), bundle->guess(Domain::B, b_cyc, b));
    t.total = t.total + t.guess_A + t.guess_B;
  } else {
    t.guess_A = torch::zeros({}, a.options());
    t.guess_B = torch::zeros({}, a.options());
  }
  return t;
}

LossReport make_report(const GeneratorTerms& g, const DiscriminatorTerms& d) {
  auto v = [](const Tensor& t) { return t.defined() ? t.detach().to(torch::kFloat64).item<double>() : 0.0; };
  LossReport r;
  r.cyc_A = v(g.cyc_A);
  r.cyc_B = v(g.cyc_B);
  r.guess_A = v(g.guess_A);
  r.guess_B = v(g.guess_B);
  r.norm_A = v(g.norm_A);
  r.norm_B = v(g.norm_B);
  r.gan_A = v(g.gan_A);
  r.gan_B = v(g.gan_B);
  r.idt_A = v(g.idt_A);
  r.idt_B = v(g.idt_B);
  r.gan_D_A = v(d.gan_A);
  r.gan_D_B = v(d.gan_B);
  r.guess_D_A = v(d.guess_A);
  r.guess_D_B = v(d.guess_B);
  r.total_G = v(g.total);
  r.total_D = v(d.total);
  return r;
}

LossReport total_losses(ModelBundle& bundle, const Tensor& a, const Tensor& b, const LossWeights& weights,
                        const NoiseConfig& noise) {
  weights.validate();
  torch::NoGradGuard no_grad;
  const auto pass = generator_forward(bundle, a, b, noise);
  auto report = make_report(generator_terms(bundle, a, b, pass, weights), discriminator_terms(bundle, a, b, pass));
  report.check_finite();
  return report;
}

}  // namespace rift::losses
