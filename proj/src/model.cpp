#include "rift/model.hpp"

#include <cmath>
#include <sstream>

namespace rift::model {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

// ----------------------------------------------------------------------
// ArchConfig
// ----------------------------------------------------------------------

void ArchConfig::validate() const {
  if (image_channels < 1) throw ConfigError("model: image_channels must be >= 1");
  if (base_channels < 1 || disc_channels < 1) throw ConfigError("model: channel widths must be >= 1");
  if (n_down < 0 || n_res < 0) throw ConfigError("model: n_down and n_res must be >= 0");
  const std::int64_t f = std::int64_t{1} << n_down;
  if (height < 4 || width < 4 || height % f != 0 || width % f != 0)
    throw ConfigError("model: resolution must be >= 4 and divisible by 2^n_down");
  if (embed_height < 1 || embed_width < 1) throw ConfigError("model: embedding size must be >= 1");
  if (disc_down < 2 || disc_down > 4) throw ConfigError("model: disc_down must be in [2, 4]");
}

std::pair<std::int64_t, std::int64_t> ArchConfig::patch_size() const noexcept {
  auto out = [](std::int64_t in, std::int64_t k, std::int64_t s, std::int64_t p) { return (in + 2 * p - k) / s + 1; };
  auto chain = [&](std::int64_t n) {
    for (std::int64_t i = 0; i < disc_down; ++i) n = out(n, 4, 2, 1);
    return out(n, 3, 1, 1);
  };
  return {chain(height), chain(width)};
}

json ArchConfig::to_json() const {
  return {{"image_channels", image_channels}, {"height", height},       {"width", width},
          {"base_channels", base_channels},   {"n_down", n_down},       {"n_res", n_res},
          {"embed_height", embed_height},     {"embed_width", embed_width}, {"disc_channels", disc_channels},
          {"disc_down", disc_down}};
}

ArchConfig ArchConfig::from_json(const json& j) {
  ArchConfig a;
  for (const auto& [k, v] : j.items()) {
    if (k == "image_channels") a.image_channels = v.get<std::int64_t>();
    else if (k == "height") a.height = v.get<std::int64_t>();
    else if (k == "width") a.width = v.get<std::int64_t>();
    else if (k == "base_channels") a.base_channels = v.get<std::int64_t>();
    else if (k == "n_down") a.n_down = v.get<std::int64_t>();
    else if (k == "n_res") a.n_res = v.get<std::int64_t>();
    else if (k == "embed_height") a.embed_height = v.get<std::int64_t>();
    else if (k == "embed_width") a.embed_width = v.get<std::int64_t>();
    else if (k == "disc_channels") a.disc_channels = v.get<std::int64_t>();
    else if (k == "disc_down") a.disc_down = v.get<std::int64_t>();
    else throw ConfigError("model config: unknown key '" + k + "'");
  }
  a.validate();
  return a;
}

// ----------------------------------------------------------------------
// Blocks
// ----------------------------------------------------------------------

namespace {
nn::Conv2d conv(std::int64_t in, std::int64_t out, std::int64_t k, std::int64_t stride, std::int64_t pad) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, k).stride(stride).padding(pad).bias(true));
}
}  // namespace

ResidualBlockImpl::ResidualBlockImpl(std::int64_t channels) {
  conv1 = register_module("conv1", conv(channels, channels, 3, 1, 1));
  conv2 = register_module("conv2", conv(channels, channels, 3, 1, 1));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) { return x + conv2(torch::relu(conv1(x))); }

TrunkImpl::TrunkImpl(const ArchConfig& arch) {
  stem = register_module("stem", conv(arch.image_channels, arch.base_channels, 3, 1, 1));
  std::int64_t ch = arch.base_channels;
  for (std::int64_t i = 0; i < arch.n_down; ++i, ch *= 2) down->push_back(conv(ch, ch * 2, 3, 2, 1));
  for (std::int64_t i = 0; i < arch.n_res; ++i) res->push_back(ResidualBlock(ch));
  register_module("down", down);
  register_module("res", res);
}

torch::Tensor TrunkImpl::forward(const torch::Tensor& x) {
  auto h = torch::relu(stem(x));
  for (auto& m : *down) h = torch::relu(m->as<nn::Conv2d>()->forward(h));
  for (auto& m : *res) h = m->as<ResidualBlock>()->forward(h);
  return h;
}

EncoderHeadImpl::EncoderHeadImpl(const ArchConfig& arch) : embed_h(arch.embed_height), embed_w(arch.embed_width) {
  proj = register_module("proj", conv(arch.bottleneck_channels(), 1, 3, 1, 1));
}

torch::Tensor EncoderHeadImpl::forward(const torch::Tensor& features) {
  auto e = proj(features);
  if (e.size(2) != embed_h || e.size(3) != embed_w)
    e = F::adaptive_avg_pool2d(e, F::AdaptiveAvgPool2dFuncOptions({embed_h, embed_w}));
  return e;
}

GeneratorHeadImpl::GeneratorHeadImpl(const ArchConfig& arch) {
  std::int64_t ch = arch.bottleneck_channels();
  fuse = register_module("fuse", conv(ch + 1, ch, 3, 1, 1));
  for (std::int64_t i = 0; i < arch.n_down; ++i, ch /= 2) up->push_back(conv(ch, ch / 2, 3, 1, 1));
  register_module("up", up);
  out = register_module("out", conv(ch, arch.image_channels, 3, 1, 1));
}

torch::Tensor GeneratorHeadImpl::forward(const torch::Tensor& features, const torch::Tensor& embedding) {
  auto e = embedding;
  if (e.size(2) != features.size(2) || e.size(3) != features.size(3))
    e = F::interpolate(e, F::InterpolateFuncOptions()
                              .size(std::vector<std::int64_t>{features.size(2), features.size(3)})
                              .mode(torch::kNearest));
  auto h = torch::relu(fuse(torch::cat({features, e}, 1)));
  for (auto& m : *up) {
    h = F::interpolate(h, F::InterpolateFuncOptions()
                              .scale_factor(std::vector<double>{2.0, 2.0})
                              .mode(torch::kNearest));
    h = torch::relu(m->as<nn::Conv2d>()->forward(h));
  }
  return torch::tanh(out(h));
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(std::int64_t in_channels, std::int64_t width, std::int64_t n_down) {
  c1 = register_module("c1", conv(in_channels, width, 4, 2, 1));
  c2 = register_module("c2", conv(width, width * 2, 4, 2, 1));
  extra = register_module("extra", nn::ModuleList());
  std::int64_t w = width * 2;
  for (std::int64_t i = 2; i < n_down; ++i, w *= 2) extra->push_back(conv(w, w * 2, 4, 2, 1));
  c3 = register_module("c3", conv(w, 1, 3, 1, 1));
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& x) {
  auto h = torch::leaky_relu(c1(x), 0.2);
  h = torch::leaky_relu(c2(h), 0.2);
  for (const auto& m : *extra) h = torch::leaky_relu(m->as<nn::Conv2d>()->forward(h), 0.2);
  return c3(h);
}

// ----------------------------------------------------------------------
// Bundle
// ----------------------------------------------------------------------

ModelBundleImpl::ModelBundleImpl(const ArchConfig& a) : arch(a) {
  arch.validate();
  trunk_a = register_module("trunk_a", Trunk(arch));
  trunk_b = register_module("trunk_b", Trunk(arch));
  enc_head_a = register_module("enc_head_a", EncoderHead(arch));
  enc_head_b = register_module("enc_head_b", EncoderHead(arch));
  gen_head_a2b = register_module("gen_head_a2b", GeneratorHead(arch));
  gen_head_b2a = register_module("gen_head_b2a", GeneratorHead(arch));
  disc_a = register_module("disc_a", PatchDiscriminator(arch.image_channels, arch.disc_channels, arch.disc_down));
  disc_b = register_module("disc_b", PatchDiscriminator(arch.image_channels, arch.disc_channels, arch.disc_down));
  guess_a = register_module("guess_a", PatchDiscriminator(2 * arch.image_channels, arch.disc_channels, arch.disc_down));
  guess_b = register_module("guess_b", PatchDiscriminator(2 * arch.image_channels, arch.disc_channels, arch.disc_down));
}

void ModelBundleImpl::check_images(const torch::Tensor& images, const char* what) const {
  if (images.dim() != 4 || images.size(1) != arch.image_channels || images.size(2) != arch.height ||
      images.size(3) != arch.width) {
    std::ostringstream os;
    os << what << ": expected images of shape (N, " << arch.image_channels << ", " << arch.height << ", "
       << arch.width << "), got " << images.sizes();
    throw RuntimeFailure(os.str());
  }
}

void ModelBundleImpl::check_embedding(const torch::Tensor& embedding) const {
  if (embedding.dim() != 4 || embedding.size(1) != 1 || embedding.size(2) != arch.embed_height ||
      embedding.size(3) != arch.embed_width) {
    std::ostringstream os;
    os << "embedding: expected shape (N, 1, " << arch.embed_height << ", " << arch.embed_width << "), got "
       << embedding.sizes();
    throw RuntimeFailure(os.str());
  }
}

torch::Tensor ModelBundleImpl::features(Domain domain, const torch::Tensor& images) {
  check_images(images, "features");
  return domain == Domain::A ? trunk_a(images) : trunk_b(images);
}

torch::Tensor ModelBundleImpl::encode_features(Domain domain, const torch::Tensor& f) {
  return domain == Domain::A ? enc_head_a(f) : enc_head_b(f);
}

torch::Tensor ModelBundleImpl::translate_features(Direction direction, const torch::Tensor& f,
                                                  const torch::Tensor& embedding) {
  check_embedding(embedding);
  if (embedding.size(0) != f.size(0)) throw RuntimeFailure("translate: batch sizes of source and embedding differ");
  return direction == Direction::A2B ? gen_head_a2b(f, embedding) : gen_head_b2a(f, embedding);
}

torch::Tensor ModelBundleImpl::encode(Domain domain, const torch::Tensor& images) {
  return encode_features(domain, features(domain, images));
}

torch::Tensor ModelBundleImpl::translate(Direction direction, const torch::Tensor& source,
                                         const torch::Tensor& guide_embedding) {
  check_images(source, "translate");
  return translate_features(direction, features(source_domain(direction), source), guide_embedding);
}

torch::Tensor ModelBundleImpl::guided_translate(Direction direction, const torch::Tensor& source,
                                                const torch::Tensor& guide) {
  check_images(guide, "guided_translate guide");
  if (guide.size(0) != source.size(0)) throw RuntimeFailure("guided_translate: source and guide batch sizes differ");
  return translate(direction, source, encode(target_domain(direction), guide));
}

torch::Tensor ModelBundleImpl::discriminate(Domain domain, const torch::Tensor& images) {
  check_images(images, "discriminate");
  return domain == Domain::A ? disc_a(images) : disc_b(images);
}

torch::Tensor ModelBundleImpl::guess(Domain domain, const torch::Tensor& x, const torch::Tensor& y) {
  check_images(x, "guess (first input)");
  check_images(y, "guess (second input)");
  if (x.size(0) != y.size(0)) throw RuntimeFailure("guess: input batch sizes differ");
  const auto pair = torch::cat({x, y}, 1);
  return domain == Domain::A ? guess_a(pair) : guess_b(pair);
}

namespace {
void append(std::vector<torch::Tensor>& out, const nn::Module& m) {
  for (const auto& p : m.parameters()) out.push_back(p);
}
}  // namespace

std::vector<torch::Tensor> ModelBundleImpl::generator_parameters() const {
  std::vector<torch::Tensor> out;
  for (const nn::Module* m : std::initializer_list<const nn::Module*>{
           trunk_a.get(), trunk_b.get(), enc_head_a.get(), enc_head_b.get(), gen_head_a2b.get(), gen_head_b2a.get()})
    append(out, *m);
  return out;
}

std::vector<torch::Tensor> ModelBundleImpl::discriminator_parameters() const {
  std::vector<torch::Tensor> out;
  for (const nn::Module* m :
       std::initializer_list<const nn::Module*>{disc_a.get(), disc_b.get(), guess_a.get(), guess_b.get()})
    append(out, *m);
  return out;
}

std::vector<torch::Tensor> ModelBundleImpl::encoder_parameters(Domain domain) const {
  std::vector<torch::Tensor> out;
  append(out, domain == Domain::A ? *trunk_a : *trunk_b);
  append(out, domain == Domain::A ? *enc_head_a : *enc_head_b);
  return out;
}

std::vector<torch::Tensor> ModelBundleImpl::translator_parameters(Direction direction) const {
  std::vector<torch::Tensor> out;
  append(out, direction == Direction::A2B ? *trunk_a : *trunk_b);
  append(out, direction == Direction::A2B ? *gen_head_a2b : *gen_head_b2a);
  return out;
}

namespace {
bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}
}  // namespace

double init_std(const std::string& name, std::int64_t fan_in) {
  const bool linear_out = ends_with(name, ".out.weight") || ends_with(name, ".proj.weight") || ends_with(name, ".c3.weight");
  return std::sqrt((linear_out ? 1.0 : 2.0) / static_cast<double>(fan_in));
}

ModelBundle make_bundle(const ArchConfig& arch, std::uint64_t seed) {
  ModelBundle bundle(arch);
  auto gen = at::detail::createCPUGenerator(mix_seed(seed, {0x1417}));
  torch::NoGradGuard no_grad;
  for (auto& item : bundle->named_parameters()) {
    const auto& name = item.key();
    auto& p = item.value();
    if (ends_with(name, "weight"))
      p.normal_(0.0, init_std(name, p.size(1) * p.size(2) * p.size(3)), gen);
    else
      p.zero_();
  }
  return bundle;
}

void zero_encoder_head(ModelBundle& bundle, Domain domain) { scale_encoder_head(bundle, domain, 0.0); }

void scale_encoder_head(ModelBundle& bundle, Domain domain, double factor) {
  torch::NoGradGuard no_grad;
  auto& head = domain == Domain::A ? bundle->enc_head_a : bundle->enc_head_b;
  head->proj->weight.mul_(factor);
  head->proj->bias.mul_(factor);
}

std::vector<std::pair<std::string, torch::Tensor>> named_parameter_copies(const ModelBundle& bundle) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& item : bundle->named_parameters()) out.emplace_back(item.key(), item.value().detach().clone());
  return out;
}

FrozenParameters::FrozenParameters(std::vector<torch::Tensor> params) : params_(std::move(params)) {
  previous_.reserve(params_.size());
  for (auto& p : params_) {
    previous_.push_back(p.requires_grad());
    p.requires_grad_(false);
  }
}

FrozenParameters::~FrozenParameters() {
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i].requires_grad_(previous_[i]);
}

}  // namespace rift::model
