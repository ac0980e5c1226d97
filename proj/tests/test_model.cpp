#include "doctest_torch.hpp"

#include <cmath>
#include <functional>

#include "rift/model.hpp"

using namespace rift;
using namespace rift::model;

namespace {

// Plain-loop reference ops on (C, H, W) double tensors; no torch arithmetic involved.
using Vol = std::vector<std::vector<std::vector<double>>>;

Vol to_vol(const torch::Tensor& chw) {
  const auto t = chw.to(torch::kFloat64).contiguous();
  const auto C = t.size(0), H = t.size(1), W = t.size(2);
  Vol v(C, std::vector<std::vector<double>>(H, std::vector<double>(W)));
  auto acc = t.accessor<double, 3>();
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) v[c][y][x] = acc[c][y][x];
  return v;
}

Vol conv(const Vol& in, const torch::nn::Conv2d& m) {
  const auto w = m->weight.detach().to(torch::kFloat64).contiguous();
  const auto b = m->bias.detach().to(torch::kFloat64).contiguous();
  auto wa = w.accessor<double, 4>();
  auto ba = b.accessor<double, 1>();
  const int O = static_cast<int>(w.size(0)), I = static_cast<int>(w.size(1)), K = static_cast<int>(w.size(2));
  const int s = static_cast<int>(m->options.stride()->at(0));
  const int p = static_cast<int>(std::get<torch::ExpandingArray<2>>(m->options.padding())->at(0));
  const int H = static_cast<int>(in[0].size()), W = static_cast<int>(in[0][0].size());
  const int Ho = (H + 2 * p - K) / s + 1, Wo = (W + 2 * p - K) / s + 1;
  Vol out(O, std::vector<std::vector<double>>(Ho, std::vector<double>(Wo)));
  for (int o = 0; o < O; ++o)
    for (int y = 0; y < Ho; ++y)
      for (int x = 0; x < Wo; ++x) {
        double acc = ba[o];
        for (int i = 0; i < I; ++i)
          for (int ky = 0; ky < K; ++ky)
            for (int kx = 0; kx < K; ++kx) {
              const int yy = y * s - p + ky, xx = x * s - p + kx;
              if (yy < 0 || xx < 0 || yy >= H || xx >= W) continue;
              acc += wa[o][i][ky][kx] * in[i][yy][xx];
            }
        out[o][y][x] = acc;
      }
  return out;
}

Vol map(Vol v, const std::function<double(double)>& f) {
  for (auto& c : v)
    for (auto& r : c)
      for (auto& x : r) x = f(x);
  return v;
}
Vol relu(const Vol& v) { return map(v, [](double x) { return x > 0 ? x : 0.0; }); }
Vol leaky(const Vol& v) { return map(v, [](double x) { return x > 0 ? x : 0.2 * x; }); }

Vol add(Vol a, const Vol& b) {
  for (std::size_t c = 0; c < a.size(); ++c)
    for (std::size_t y = 0; y < a[c].size(); ++y)
      for (std::size_t x = 0; x < a[c][y].size(); ++x) a[c][y][x] += b[c][y][x];
  return a;
}

Vol concat(Vol a, const Vol& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

Vol resize_nearest(const Vol& v, std::size_t H, std::size_t W) {
  Vol out(v.size(), std::vector<std::vector<double>>(H, std::vector<double>(W)));
  const std::size_t h = v[0].size(), w = v[0][0].size();
  for (std::size_t c = 0; c < v.size(); ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) out[c][y][x] = v[c][y * h / H][x * w / W];
  return out;
}

Vol avg_pool_to(const Vol& v, std::size_t H, std::size_t W) {
  const std::size_t h = v[0].size(), w = v[0][0].size(), fy = h / H, fx = w / W;
  Vol out(v.size(), std::vector<std::vector<double>>(H, std::vector<double>(W, 0.0)));
  for (std::size_t c = 0; c < v.size(); ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        for (std::size_t dy = 0; dy < fy; ++dy)
          for (std::size_t dx = 0; dx < fx; ++dx) out[c][y][x] += v[c][y * fy + dy][x * fx + dx];
        out[c][y][x] /= static_cast<double>(fy * fx);
      }
  return out;
}

Vol ref_trunk(const Trunk& t, const Vol& x) {
  auto h = relu(conv(x, t->stem));
  for (auto& m : *t->down) h = relu(conv(h, torch::nn::Conv2d(std::dynamic_pointer_cast<torch::nn::Conv2dImpl>(m))));
  for (auto& m : *t->res) {
    auto rb = std::dynamic_pointer_cast<ResidualBlockImpl>(m);
    h = add(h, conv(relu(conv(h, rb->conv1)), rb->conv2));
  }
  return h;
}

Vol ref_encode(ModelBundle& b, Domain d, const Vol& x) {
  const auto& trunk = d == Domain::A ? b->trunk_a : b->trunk_b;
  const auto& head = d == Domain::A ? b->enc_head_a : b->enc_head_b;
  auto e = conv(ref_trunk(trunk, x), head->proj);
  if (static_cast<std::int64_t>(e[0].size()) != b->arch.embed_height)
    e = avg_pool_to(e, static_cast<std::size_t>(b->arch.embed_height), static_cast<std::size_t>(b->arch.embed_width));
  return e;
}

Vol ref_translate(ModelBundle& b, Direction dir, const Vol& x, const Vol& emb) {
  const auto& trunk = dir == Direction::A2B ? b->trunk_a : b->trunk_b;
  const auto& head = dir == Direction::A2B ? b->gen_head_a2b : b->gen_head_b2a;
  const auto f = ref_trunk(trunk, x);
  auto h = relu(conv(concat(f, resize_nearest(emb, f[0].size(), f[0][0].size())), head->fuse));
  for (auto& m : *head->up) {
    h = resize_nearest(h, h[0].size() * 2, h[0][0].size() * 2);
    h = relu(conv(h, torch::nn::Conv2d(std::dynamic_pointer_cast<torch::nn::Conv2dImpl>(m))));
  }
  return map(conv(h, head->out), [](double v) { return std::tanh(v); });
}

Vol ref_disc(const PatchDiscriminator& d, const Vol& x) {
  return conv(leaky(conv(leaky(conv(x, d->c1)), d->c2)), d->c3);
}

double max_diff(const Vol& a, const torch::Tensor& chw) {
  const auto b = to_vol(chw);
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    REQUIRE(a[c].size() == b[c].size());
    for (std::size_t y = 0; y < a[c].size(); ++y)
      for (std::size_t x = 0; x < a[c][y].size(); ++x) m = std::max(m, std::abs(a[c][y][x] - b[c][y][x]));
  }
  return m;
}

ArchConfig tiny(std::int64_t channels = 2, std::int64_t size = 4) {
  ArchConfig a;
  a.image_channels = channels;
  a.height = a.width = size;
  a.base_channels = 2;
  a.n_down = 1;
  a.n_res = 1;
  a.embed_height = a.embed_width = 1;
  a.disc_channels = 2;
  return a;
}

ArchConfig small() {
  ArchConfig a;
  a.height = a.width = 16;
  a.base_channels = 4;
  a.n_res = 1;
  a.embed_height = a.embed_width = 4;
  a.disc_channels = 4;
  return a;
}

// Deterministic, irregular hand-set weights: w_i = 0.3 * sin(1.7 i + offset).
void hand_set(ModelBundle& b) {
  torch::NoGradGuard g;
  double offset = 0.0;
  for (auto& item : b->named_parameters()) {
    auto flat = item.value().view({-1});
    for (std::int64_t i = 0; i < flat.numel(); ++i) flat[i] = 0.3 * std::sin(1.7 * static_cast<double>(i) + offset);
    offset += 0.61;
  }
}

torch::Tensor images(std::int64_t n, const ArchConfig& a, std::uint64_t seed) {
  auto gen = at::detail::createCPUGenerator(seed);
  return torch::rand({n, a.image_channels, a.height, a.width}, gen) * 2 - 1;
}

}  // namespace

TEST_CASE("architecture config validation and JSON") {
  ArchConfig a;
  CHECK_NOTHROW(a.validate());
  a.height = 30;
  CHECK_THROWS_AS(a.validate(), ConfigError);
  a = ArchConfig{};
  a.embed_width = 0;
  CHECK_THROWS_AS(a.validate(), ConfigError);
  const ArchConfig d;
  CHECK(ArchConfig::from_json(d.to_json()) == d);
  auto j = d.to_json();
  j["extra"] = 1;
  CHECK_THROWS_AS((void)ArchConfig::from_json(j), ConfigError);
}

TEST_CASE("hand-weighted tiny network matches the reference forward pass") {
  for (const auto emb : {std::int64_t{1}, std::int64_t{2}}) {
    auto arch = tiny();
    arch.embed_height = arch.embed_width = emb;
    ModelBundle b(arch);
    hand_set(b);
    const auto x = images(2, arch, 1), y = images(2, arch, 2);
    torch::NoGradGuard g;
    for (const Domain d : {Domain::A, Domain::B}) {
      const auto e = b->encode(d, x);
      for (int i = 0; i < 2; ++i) CHECK(max_diff(ref_encode(b, d, to_vol(x[i])), e[i]) < 1e-5);
      const auto s = b->discriminate(d, x);
      auto& disc = d == Domain::A ? b->disc_a : b->disc_b;
      for (int i = 0; i < 2; ++i) CHECK(max_diff(ref_disc(disc, to_vol(x[i])), s[i]) < 1e-5);
      const auto q = b->guess(d, x, y);
      auto& gs = d == Domain::A ? b->guess_a : b->guess_b;
      for (int i = 0; i < 2; ++i) CHECK(max_diff(ref_disc(gs, concat(to_vol(x[i]), to_vol(y[i]))), q[i]) < 1e-5);
    }
    for (const Direction dir : {Direction::A2B, Direction::B2A}) {
      const auto emb_t = b->encode(target_domain(dir), y);
      const auto out = b->translate(dir, x, emb_t);
      for (int i = 0; i < 2; ++i) CHECK(max_diff(ref_translate(b, dir, to_vol(x[i]), to_vol(emb_t[i])), out[i]) < 1e-5);
    }
  }
}

TEST_CASE("default-size network matches the reference forward pass") {
  auto b = make_bundle(small(), 4);
  const auto x = images(1, b->arch, 3), y = images(1, b->arch, 4);
  torch::NoGradGuard g;
  const auto emb = b->encode(Domain::B, y);
  CHECK(max_diff(ref_encode(b, Domain::B, to_vol(y[0])), emb[0]) < 1e-4);
  CHECK(max_diff(ref_translate(b, Direction::A2B, to_vol(x[0]), to_vol(emb[0])), b->translate(Direction::A2B, x, emb)[0]) <
        1e-4);
}

TEST_CASE("zeroed encoder head gives a zero embedding and guide-independent translations") {
  auto b = make_bundle(small(), 1);
  zero_encoder_head(b, Domain::B);
  torch::NoGradGuard g;
  CHECK(b->encode(Domain::B, images(5, b->arch, 7)).abs().max().item<double>() == 0.0);
  const auto src = images(3, b->arch, 8);
  const auto o1 = b->guided_translate(Direction::A2B, src, images(3, b->arch, 9));
  const auto o2 = b->guided_translate(Direction::A2B, src, images(3, b->arch, 10));
  CHECK(torch::equal(o1, o2));
  // The other domain is untouched.
  CHECK(b->encode(Domain::A, images(2, b->arch, 7)).abs().max().item<double>() > 0.0);
}

TEST_CASE("perturbing one pixel changes the embedding") {
  auto b = make_bundle(ArchConfig{}, 2);
  torch::NoGradGuard g;
  const auto x = images(1, b->arch, 11);
  for (const auto& [py, px] : std::vector<std::pair<int, int>>{{0, 0}, {16, 16}, {31, 5}}) {
    auto x2 = x.clone();
    x2[0][1][py][px] += 1e-2;
    for (const Domain d : {Domain::A, Domain::B}) CHECK((b->encode(d, x2) - b->encode(d, x)).abs().max().item<double>() > 0.0);
  }
}

TEST_CASE("guided translation is the composition of encoder and generator") {
  auto b = make_bundle(ArchConfig{}, 5);
  torch::NoGradGuard g;
  const auto src = images(4, b->arch, 12), guide = images(4, b->arch, 13);
  for (const Direction dir : {Direction::A2B, Direction::B2A})
    CHECK(torch::equal(b->guided_translate(dir, src, guide), b->translate(dir, src, b->encode(target_domain(dir), guide))));
}

TEST_CASE("batches are processed element-wise and in order") {
  auto b = make_bundle(small(), 6);
  torch::NoGradGuard g;
  const auto src = images(5, b->arch, 14), guide = images(5, b->arch, 15);
  const auto full = b->guided_translate(Direction::B2A, src, guide);
  REQUIRE(full.size(0) == 5);
  for (int i = 0; i < 5; ++i) {
    const auto one = b->guided_translate(Direction::B2A, src.slice(0, i, i + 1), guide.slice(0, i, i + 1));
    CHECK(torch::allclose(one[0], full[i], 1e-5, 1e-6));
  }
  const auto perm = torch::tensor({3, 0, 4, 1, 2}, torch::kInt64);
  const auto permuted = b->guided_translate(Direction::B2A, src.index_select(0, perm), guide.index_select(0, perm));
  CHECK(torch::allclose(permuted, full.index_select(0, perm), 1e-5, 1e-6));
}

TEST_CASE("translations stay in [-1, 1] for huge parameters") {
  auto b = make_bundle(small(), 7);
  {
    torch::NoGradGuard g;
    for (auto& p : b->parameters()) p.mul_(1e4);
  }
  torch::NoGradGuard g;
  const auto out = b->guided_translate(Direction::A2B, images(4, b->arch, 16) * 100, images(4, b->arch, 17));
  CHECK(out.min().item<double>() >= -1.0);
  CHECK(out.max().item<double>() <= 1.0);
  CHECK(torch::isfinite(out).all().item<bool>());
}

TEST_CASE("shape mismatches are rejected") {
  auto b = make_bundle(small(), 8);
  torch::NoGradGuard g;
  const auto wrong = torch::zeros({2, 3, 8, 8});
  const auto ok = images(2, b->arch, 1);
  CHECK_THROWS_AS((void)b->encode(Domain::A, wrong), RuntimeFailure);
  CHECK_THROWS_AS((void)b->translate(Direction::A2B, ok, torch::zeros({2, 1, 3, 3})), RuntimeFailure);
  CHECK_THROWS_AS((void)b->translate(Direction::A2B, ok, torch::zeros({3, 1, 4, 4})), RuntimeFailure);
  CHECK_THROWS_AS((void)b->guided_translate(Direction::A2B, ok, images(3, b->arch, 2)), RuntimeFailure);
  CHECK_THROWS_AS((void)b->discriminate(Domain::B, wrong), RuntimeFailure);
  CHECK_THROWS_AS((void)b->guess(Domain::B, ok, wrong), RuntimeFailure);
}

TEST_CASE("guess discriminator is order-sensitive") {
  auto b = make_bundle(ArchConfig{}, 9);
  torch::NoGradGuard g;
  const auto x = images(3, b->arch, 18), y = images(3, b->arch, 19);
  for (const Domain d : {Domain::A, Domain::B}) CHECK_FALSE(torch::allclose(b->guess(d, x, y), b->guess(d, y, x)));
}

TEST_CASE("zero-weight discriminator outputs its final bias") {
  auto b = make_bundle(ArchConfig{}, 10);
  torch::NoGradGuard g;
  for (auto& p : b->disc_a->parameters()) p.zero_();
  b->disc_a->c3->bias.fill_(0.37);
  const auto s = b->discriminate(Domain::A, images(2, b->arch, 20));
  CHECK(torch::allclose(s, torch::full_like(s, 0.37)));
}

TEST_CASE("patch map size follows the downsampling arithmetic") {
  auto b = make_bundle(ArchConfig{}, 11);
  torch::NoGradGuard g;
  const auto s = b->discriminate(Domain::B, images(2, b->arch, 21));
  // 32 -> (32 + 2 - 4) / 2 + 1 = 16 -> 8 -> (8 + 2 - 3) / 1 + 1 = 8
  CHECK(s.sizes() == torch::IntArrayRef({2, 1, 8, 8}));
  CHECK((b->arch.patch_size() == std::pair<std::int64_t, std::int64_t>{8, 8}));
  ArchConfig wide;
  wide.height = 24;
  wide.width = 40;
  CHECK((wide.patch_size() == std::pair<std::int64_t, std::int64_t>{6, 10}));
  CHECK(b->guess(Domain::A, images(1, b->arch, 1), images(1, b->arch, 2)).sizes() == torch::IntArrayRef({1, 1, 8, 8}));

  // A third stride-2 stage: 32 -> 16 -> 8 -> 4 -> 4
  ArchConfig deep;
  deep.disc_down = 3;
  CHECK((deep.patch_size() == std::pair<std::int64_t, std::int64_t>{4, 4}));
  auto d = make_bundle(deep, 11);
  CHECK(d->discriminate(Domain::A, images(2, deep, 22)).sizes() == torch::IntArrayRef({2, 1, 4, 4}));
  CHECK(d->guess(Domain::B, images(1, deep, 1), images(1, deep, 2)).sizes() == torch::IntArrayRef({1, 1, 4, 4}));
  deep.disc_down = 1;
  CHECK_THROWS_AS(deep.validate(), ConfigError);
}

TEST_CASE("encoder and generator of one source domain share the trunk storage") {
  auto b = make_bundle(small(), 12);
  auto enc = b->encoder_parameters(Domain::A);
  auto gen = b->translator_parameters(Direction::A2B);
  const auto stem = b->trunk_a->stem->weight;
  auto holds = [&](const std::vector<torch::Tensor>& v) {
    for (const auto& p : v)
      if (p.is_same(stem)) return true;
    return false;
  };
  CHECK(holds(enc));
  CHECK(holds(gen));
  CHECK_FALSE(holds(b->translator_parameters(Direction::B2A)));

  torch::NoGradGuard g;
  const auto x = images(2, b->arch, 22), emb = b->encode(Domain::B, images(2, b->arch, 23));
  const auto e0 = b->encode(Domain::A, x), t0 = b->translate(Direction::A2B, x, emb);
  const auto tb0 = b->translate(Direction::B2A, x, e0);
  for (auto& p : enc)
    if (p.is_same(stem)) p.add_(0.05);
  CHECK_FALSE(torch::equal(b->encode(Domain::A, x), e0));
  CHECK_FALSE(torch::equal(b->translate(Direction::A2B, x, emb), t0));
  CHECK(torch::equal(b->translate(Direction::B2A, x, e0), tb0));
}

TEST_CASE("parameter groups partition the bundle") {
  auto b = make_bundle(small(), 13);
  const auto g = b->generator_parameters(), d = b->discriminator_parameters();
  CHECK(g.size() + d.size() == b->parameters().size());
  for (const auto& p : g)
    for (const auto& q : d) CHECK_FALSE(p.is_same(q));
}

TEST_CASE("initialisation is seed-deterministic with zero biases") {
  auto x = make_bundle(small(), 14), y = make_bundle(small(), 14), z = make_bundle(small(), 15);
  const auto px = named_parameter_copies(x), py = named_parameter_copies(y), pz = named_parameter_copies(z);
  bool any_diff = false;
  for (std::size_t i = 0; i < px.size(); ++i) {
    CHECK(torch::equal(px[i].second, py[i].second));
    any_diff |= !torch::equal(px[i].second, pz[i].second);
    if (px[i].first.ends_with("bias")) CHECK(px[i].second.abs().max().item<double>() == 0.0);
  }
  CHECK(any_diff);
  CHECK(init_std("trunk_a.stem.weight", 27) == doctest::Approx(std::sqrt(2.0 / 27)));
  CHECK(init_std("gen_head_a2b.out.weight", 144) == doctest::Approx(std::sqrt(1.0 / 144)));
}

TEST_CASE("scaling the encoder head scales the embedding") {
  auto b = make_bundle(small(), 16);
  torch::NoGradGuard g;
  const auto x = images(3, b->arch, 24);
  const auto e = b->encode(Domain::A, x);
  scale_encoder_head(b, Domain::A, 2.0);
  CHECK(torch::allclose(b->encode(Domain::A, x), 2 * e, 1e-5, 1e-6));
}

TEST_CASE("frozen parameters are restored on scope exit") {
  auto b = make_bundle(small(), 17);
  {
    FrozenParameters f(b->discriminator_parameters());
    for (const auto& p : b->discriminator_parameters()) CHECK_FALSE(p.requires_grad());
    for (const auto& p : b->generator_parameters()) CHECK(p.requires_grad());
  }
  for (const auto& p : b->parameters()) CHECK(p.requires_grad());
}

// ----------------------------------------------------------------------
// Gradient checks (float64, central differences)
// ----------------------------------------------------------------------

namespace {

/// Max relative error between the autograd gradient and central differences over a sample of
/// coordinates of each parameter in `params`.
double gradient_error(const std::vector<torch::Tensor>& params, const std::function<torch::Tensor()>& loss) {
  for (auto p : params)
    if (p.grad().defined()) p.mutable_grad().zero_();
  loss().backward();
  double worst = 0.0;
  const double h = 1e-6;
  for (auto p : params) {
    const auto grad = p.grad().defined() ? p.grad().clone() : torch::zeros_like(p);
    auto flat = p.data().view({-1});
    const auto gflat = grad.view({-1});
    const std::int64_t n = flat.numel();
    for (std::int64_t k = 0; k < std::min<std::int64_t>(n, 3); ++k) {
      const std::int64_t i = (k * 7919) % n;
      const double orig = flat[i].item<double>();
      double lp, lm;
      {
        torch::NoGradGuard g;
        flat[i] = orig + h;
        lp = loss().item<double>();
        flat[i] = orig - h;
        lm = loss().item<double>();
        flat[i] = orig;
      }
      const double fd = (lp - lm) / (2 * h);
      const double an = gflat[i].item<double>();
      worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("analytic gradients match finite differences for every network role") {
  auto arch = tiny(3, 8);
  arch.embed_height = arch.embed_width = 2;
  auto b = make_bundle(arch, 18);
  b->to(torch::kFloat64);
  auto gen = at::detail::createCPUGenerator(27);
  {
    // Zero biases put some pre-activations exactly on the ReLU kink.
    torch::NoGradGuard g;
    for (auto& item : b->named_parameters())
      if (item.key().ends_with("bias")) item.value().copy_(0.1 * torch::randn(item.value().sizes(), gen, torch::kFloat64));
  }
  const auto x = images(2, arch, 25).to(torch::kFloat64), y = images(2, arch, 26).to(torch::kFloat64);
  const auto w = torch::randn({2, 3, 8, 8}, gen, torch::kFloat64);

  SUBCASE("encoder") {
    for (const Domain d : {Domain::A, Domain::B})
      CHECK(gradient_error(b->encoder_parameters(d), [&] { return (b->encode(d, x) * b->encode(d, x)).sum(); }) <= 1e-3);
  }
  SUBCASE("generator") {
    for (const Direction dir : {Direction::A2B, Direction::B2A}) {
      auto params = b->translator_parameters(dir);
      const auto& head = target_domain(dir) == Domain::A ? b->enc_head_a : b->enc_head_b;
      for (const auto& p : head->parameters()) params.push_back(p);
      CHECK(gradient_error(params, [&] { return (b->guided_translate(dir, x, y) * w).sum(); }) <= 1e-3);
    }
  }
  SUBCASE("discriminators") {
    for (const Domain d : {Domain::A, Domain::B}) {
      auto& disc = d == Domain::A ? b->disc_a : b->disc_b;
      auto& gs = d == Domain::A ? b->guess_a : b->guess_b;
      CHECK(gradient_error(disc->parameters(), [&] { return b->discriminate(d, x).pow(2).sum(); }) <= 1e-3);
      CHECK(gradient_error(gs->parameters(), [&] { return b->guess(d, x, y).pow(2).sum(); }) <= 1e-3);
    }
  }
}
