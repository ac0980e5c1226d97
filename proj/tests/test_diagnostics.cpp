#include "doctest_torch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rift/diagnostics.hpp"
#include "test_util.hpp"

using namespace rift;
using namespace rift::diagnostics;
using evaluate::DomainData;
namespace fs = std::filesystem;

namespace {

datagen::DatasetManifest small_manifest(int n = 24, std::uint64_t seed = 3) {
  auto cfg = datagen::stock_split("A");
  cfg.n_a = cfg.n_b = n;
  cfg.height = cfg.width = 32;
  cfg.seed = seed;
  return datagen::build_split(cfg);
}

/// Decodes the source's attributes and re-renders them: information lives only in large-scale structure.
class RerenderModel final : public evaluate::GuidedModel {
 public:
  torch::Tensor encode(Domain, const torch::Tensor& images) override { return torch::zeros({images.size(0), 1, 1, 1}); }
  torch::Tensor translate(Direction, const torch::Tensor& source, const torch::Tensor&) override {
    std::vector<datagen::ImageGrid> out;
    for (std::int64_t i = 0; i < source.size(0); ++i) {
      const auto img = trainer::to_image(source[i]);
      out.push_back(datagen::render(datagen::attribute_oracle(img), img.height, img.width));
    }
    return trainer::to_tensor(out);
  }
};

/// A2B shrinks the image into a faint copy, B2A blows it back up: the round trip A -> B -> A relies
/// entirely on a low-amplitude signal.
class FaintCopyModel final : public evaluate::GuidedModel {
 public:
  torch::Tensor encode(Domain, const torch::Tensor& images) override { return torch::zeros({images.size(0), 1, 1, 1}); }
  torch::Tensor translate(Direction d, const torch::Tensor& source, const torch::Tensor&) override {
    return d == Direction::A2B ? 0.05 * source : (20.0 * source).clamp(-1.0, 1.0);
  }
};

model::ArchConfig tiny_arch() {
  model::ArchConfig a;
  a.height = a.width = 32;
  a.base_channels = 2;
  a.n_down = 1;
  a.n_res = 1;
  a.embed_height = a.embed_width = 2;
  a.disc_channels = 2;
  return a;
}

DomainData permuted(const DomainData& d, std::uint64_t seed) {
  std::vector<std::int64_t> idx(d.attributes.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), std::mt19937_64(seed));
  DomainData out;
  out.images = d.images.index_select(0, torch::tensor(idx, torch::kInt64));
  for (auto i : idx) out.attributes.push_back(d.attributes[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

TEST_CASE("hiding score is the normalised slope between the two smallest positive amplitudes") {
  CHECK(hiding_score({0.0, 0.02, 0.05}, {0.1, 0.2, 0.5}) == doctest::Approx(0.3 / 0.03 / (0.1 + kHidingEps)));
  CHECK(hiding_score({0.0, 0.02, 0.05, 0.1}, {0.1, 0.1, 0.1, 5.0}) == 0.0);
  CHECK(hiding_score({0.0, 0.1, 0.3}, {0.0, 0.0, 0.0}) == 0.0);
  CHECK(hiding_score({0.0, 0.1, 0.2}, {0.0, 0.1, 0.2}) == doctest::Approx(1.0 / kHidingEps));
  CHECK_THROWS_AS((void)hiding_score({0.0, 0.1}, {0.0, 0.1}), ConfigError);
  CHECK_THROWS_AS((void)hiding_score({0.0, 0.1, 0.2}, {0.0, 0.1}), ConfigError);
}

TEST_CASE("probe rejects malformed amplitude lists") {
  const auto m = small_manifest(4);
  const auto a = evaluate::render_domain(m, Domain::A), b = evaluate::render_domain(m, Domain::B);
  evaluate::SourceCopyModel model;
  auto run = [&](std::vector<double> amps) {
    ProbeOptions o;
    o.amplitudes = std::move(amps);
    o.pairs = 4;
    return hidden_signal_probe(model, a, b, o);
  };
  CHECK_THROWS_AS((void)run({}), ConfigError);
  CHECK_THROWS_AS((void)run({0.02, 0.05}), ConfigError);
  CHECK_THROWS_AS((void)run({0.0, 0.05, 0.05}), ConfigError);
  CHECK_THROWS_AS((void)run({0.0, 0.1, 0.05}), ConfigError);
  CHECK_NOTHROW((void)run({0.0}));
  ProbeOptions o;
  o.pairs = 0;
  CHECK_THROWS_AS((void)hidden_signal_probe(model, a, b, o), ConfigError);
  CHECK_THROWS_AS((void)dependence_probe(model, a, b, 0), ConfigError);
}

TEST_CASE("a re-rendering translator has a flat error curve at small amplitudes") {
  const auto m = small_manifest();
  const auto a = evaluate::render_domain(m, Domain::A), b = evaluate::render_domain(m, Domain::B);
  RerenderModel model;
  ProbeOptions o;
  o.pairs = 24;
  o.repeats = 2;
  o.amplitudes = {0.0, 0.02, 0.05};
  const auto r = hidden_signal_probe(model, a, b, o);
  for (double e : r.mean_error) CHECK(std::abs(e) <= 1e-6);
  CHECK(std::abs(r.hiding_score) < 1.0);

  FaintCopyModel faint;
  const auto f = hidden_signal_probe(faint, a, b, o);
  CHECK(f.hiding_score > 5.0);
  CHECK(f.hiding_score > r.hiding_score);
}

TEST_CASE("amplitude 0 equals the unperturbed cycle error") {
  auto bundle = model::make_bundle(tiny_arch(), 4);
  evaluate::BundleModel model(bundle);
  auto gen = at::detail::createCPUGenerator(8);
  // One image per domain fixes every (source, guide) pair.
  DomainData a{torch::rand({1, 3, 32, 32}, gen) * 2 - 1, {datagen::AttributeVector{}}};
  DomainData b{torch::rand({1, 3, 32, 32}, gen) * 2 - 1, {datagen::AttributeVector{}}};
  ProbeOptions o;
  o.pairs = 3;
  const auto r = hidden_signal_probe(model, a, b, o);

  torch::NoGradGuard g;
  const auto a_cyc = bundle->translate(Direction::B2A, bundle->guided_translate(Direction::A2B, a.images, b.images),
                                       bundle->encode(Domain::A, a.images));
  const auto b_cyc = bundle->translate(Direction::A2B, bundle->guided_translate(Direction::B2A, b.images, a.images),
                                       bundle->encode(Domain::B, b.images));
  const double ea = (a_cyc - a.images).abs().mean().item<double>();
  const double eb = (b_cyc - b.images).abs().mean().item<double>();
  CHECK(r.cycle_error.at(Direction::A2B)[0] == doctest::Approx(ea).epsilon(1e-6));
  CHECK(r.cycle_error.at(Direction::B2A)[0] == doctest::Approx(eb).epsilon(1e-6));
  CHECK(r.mean_error[0] == doctest::Approx(0.5 * (ea + eb)).epsilon(1e-6));
  CHECK(r.cycle_error_se.at(Direction::A2B)[0] == 0.0);
}

TEST_CASE("cycle error is nondecreasing in the perturbation amplitude") {
  const auto m = small_manifest();
  const auto a = evaluate::render_domain(m, Domain::A), b = evaluate::render_domain(m, Domain::B);
  ProbeOptions o;
  o.amplitudes = {0.0, 0.01, 0.02, 0.05, 0.1, 0.2};
  o.pairs = 64;
  o.repeats = 6;
  auto check_curve = [&](evaluate::GuidedModel& model) {
    const auto r = hidden_signal_probe(model, a, b, o);
    for (const auto& [dir, curve] : r.cycle_error) {
      const auto& se = r.cycle_error_se.at(dir);
      for (std::size_t k = 1; k < curve.size(); ++k) {
        CAPTURE(k);
        CHECK(curve[k] >= 0.0);
        // Flat stretches are compared against a floor, since a handful of repeats can give a zero SE.
        CHECK(curve[k] + std::max(se[k] + se[k - 1], 1e-4) >= curve[k - 1]);
      }
    }
  };
  FaintCopyModel faint;
  evaluate::SourceCopyModel copy;
  check_curve(faint);
  check_curve(copy);
}

TEST_CASE("dependence probe on copy translators") {
  const auto m = small_manifest();
  const auto a = evaluate::render_domain(m, Domain::A), b = evaluate::render_domain(m, Domain::B);
  evaluate::GuideCopyModel guide_copy;
  const auto g = dependence_probe(guide_copy, a, b, 64);
  CHECK(g.source == 0.0);
  CHECK(g.guide == doctest::Approx(1.0));
  evaluate::SourceCopyModel source_copy;
  const auto s = dependence_probe(source_copy, a, b, 64);
  CHECK(s.guide == 0.0);
  CHECK(s.source > 0.0);
  CHECK(s.source <= 1.0);
}

TEST_CASE("dependence scores ignore the dataset order") {
  const auto m = small_manifest();
  const auto a = evaluate::render_domain(m, Domain::A), b = evaluate::render_domain(m, Domain::B);
  evaluate::BundleModel net(model::make_bundle(tiny_arch(), 6));
  const auto d0 = dependence_probe(net, a, b, 32, 2);
  const auto d1 = dependence_probe(net, permuted(a, 1), permuted(b, 2), 32, 2);
  CHECK(d0.source == doctest::Approx(d1.source).epsilon(1e-12));
  CHECK(d0.guide == doctest::Approx(d1.guide).epsilon(1e-12));
  CHECK(d0.source >= 0.0);
  CHECK(d0.guide <= 1.0);

  ProbeOptions o;
  o.pairs = 16;
  const auto p0 = hidden_signal_probe(net, a, b, o);
  const auto p1 = hidden_signal_probe(net, permuted(a, 3), permuted(b, 4), o);
  CHECK(p0.mean_error[2] == doctest::Approx(p1.mean_error[2]).epsilon(1e-12));
}

TEST_CASE("capacity numbers follow the embedding scale") {
  const auto m = small_manifest(8);
  const auto a = evaluate::render_domain(m, Domain::A), b = evaluate::render_domain(m, Domain::B);
  auto bundle = model::make_bundle(tiny_arch(), 7);
  ProbeReport r;
  fill_capacity(r, bundle, a, b, 0.5);
  CHECK(r.embedding_power.at(Domain::A) > 0.0);
  CHECK(r.capacity_bits.at(Domain::A) == doctest::Approx(capacity::capacity_bound(4, r.embedding_power.at(Domain::A), 0.5)));
  model::zero_encoder_head(bundle, Domain::B);
  fill_capacity(r, bundle, a, b, 0.5);
  CHECK(r.embedding_power.at(Domain::B) == 0.0);
  CHECK(r.capacity_bits.at(Domain::B) == 0.0);
  fill_capacity(r, bundle, a, b, 0.0);
  CHECK(std::isinf(r.capacity_bits.at(Domain::A)));
  const auto j = r.to_json();
  CHECK(j.contains("capacity_bits"));
}

TEST_CASE("ablation suite runs all three variants and reuses finished checkpoints") {
  test::TempDir dir("ablation");
  const auto data = dir.path() / "data";
  datagen::write_dataset(small_manifest(8), data);
  trainer::TrainConfig cfg;
  cfg.data = data.string();
  cfg.arch = tiny_arch();
  cfg.batch_size = 2;
  cfg.steps = 2;
  cfg.seed = 3;
  AblationOptions opt;
  opt.eval.rand_trials = 50;
  opt.eval.guides_per_source = 1;
  opt.probe.pairs = 4;
  opt.probe.repeats = 1;

  const auto out = dir.path() / "ablate";
  const auto r = ablation_suite(cfg, out, opt);
  REQUIRE(r.variants.size() == 3);
  CHECK(trainer::load_checkpoint_config(r.variant("no_norm").checkpoint).disable_norm);
  CHECK(trainer::load_checkpoint_config(r.variant("no_guess").checkpoint).disable_guess);
  CHECK_FALSE(trainer::load_checkpoint_config(r.variant("full").checkpoint).disable_norm);
  CHECK_THROWS_AS((void)r.variant("other"), RuntimeFailure);
  for (const char* f : {"ablation.json", "ablation.txt", "probe_curves.svg", "grid_full_A2B.png", "grid_no_guess_B2A.png",
                        "config.json"})
    CHECK(fs::exists(out / f));
  CHECK(r.table().find("no_norm") != std::string::npos);

  const auto stamp = fs::last_write_time(r.variant("full").checkpoint);
  opt.reuse_checkpoints = true;
  const auto again = ablation_suite(cfg, out, opt);
  CHECK(fs::last_write_time(again.variant("full").checkpoint) == stamp);
  CHECK(again.variant("full").probe.to_json() == r.variant("full").probe.to_json());
}
