// Acceptance run: one PASS/FAIL line per criterion. Training artefacts are cached under --work.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "rift/capacity.hpp"
#include "rift/datagen.hpp"
#include "rift/diagnostics.hpp"
#include "rift/evalkit.hpp"
#include "rift/losses.hpp"
#include "rift/trainer.hpp"

using namespace rift;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int pct(double fraction) { return static_cast<int>(std::floor(fraction * 100.0 + 0.5)); }
int half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read " + p.string());
  return json::parse(in);
}

// ----------------------------------------------------------------------
// 1: metric arithmetic on the reference per-split accuracies
// ----------------------------------------------------------------------

Outcome metric_arithmetic() {
  auto load = [](const std::string& method) {
    std::vector<evalkit::AccuracyTable> tables;
    for (const char* s : {"a", "b", "c"})
      tables.push_back(evalkit::AccuracyTable::from_json(
          read_json(fs::path(RIFT_FIXTURES) / (method + "_split_" + s + ".json")).at("table")));
    return evalkit::aggregate(tables);
  };
  const auto rift_row = load("rift"), munit_row = load("munit");
  const auto& fc = rift_row.per_attribute.at("floor_color");
  const auto& sz = rift_row.per_attribute.at("size");
  const int fc_c = pct(*fc.shared), fc_s = pct(*fc.specific), sz_c = pct(*sz.shared), sz_s = pct(*sz.specific);
  const int ac = pct(*rift_row.ac), rd = half_up(*rift_row.rd);
  const int m_ac = pct(*munit_row.ac), m_rd = half_up(*munit_row.rd);
  const bool ok = fc_c == 99 && fc_s == 45 && sz_c == 50 && sz_s == 23 && ac == 66 && rd == 33 && m_ac == 58 &&
                  m_rd == 56;
  return {ok, fmt("RIFT FC %d/%d SZ %d/%d AC %d RD %d; MUNIT AC %d RD %d", fc_c, fc_s, sz_c, sz_s, ac, rd, m_ac, m_rd)};
}

// ----------------------------------------------------------------------
// 2: KSG estimate against the channel bound
// ----------------------------------------------------------------------

Outcome capacity_theorem() {
  std::mt19937_64 rng(2024);
  double worst_excess = -1e9, one_d_err = 0.0;
  for (int d : {1, 2, 4}) {
    for (double snr : {0.5, 1.0, 4.0}) {
      const double sigma = 1.0, power = snr * sigma * sigma;
      std::normal_distribution<double> signal(0.0, std::sqrt(power / d)), noise(0.0, sigma);
      capacity::Samples x(5000, std::vector<double>(d)), y = x;
      for (std::size_t i = 0; i < x.size(); ++i)
        for (int k = 0; k < d; ++k) {
          x[i][k] = signal(rng);
          y[i][k] = x[i][k] + noise(rng);
        }
      const double mi = capacity::estimate_mi(x, y, 7);
      const double bound = capacity::capacity_bound(d, power, sigma);
      worst_excess = std::max(worst_excess, mi - bound);
      if (d == 1) one_d_err = std::max(one_d_err, std::abs(mi - 0.5 * std::log2(1.0 + snr)));
    }
  }
  return {worst_excess <= 0.2 && one_d_err <= 0.15,
          fmt("max(estimate - bound) = %.3f bits, max 1-D error = %.3f bits", worst_excess, one_d_err)};
}

// ----------------------------------------------------------------------
// 3: loss correctness
// ----------------------------------------------------------------------

model::ArchConfig tiny_arch() {
  model::ArchConfig a;
  a.height = a.width = 8;
  a.base_channels = 2;
  a.n_down = 1;
  a.n_res = 1;
  a.embed_height = a.embed_width = 2;
  a.disc_channels = 2;
  return a;
}

torch::Tensor random_images(std::int64_t n, const model::ArchConfig& a, std::uint64_t seed, torch::Dtype dtype) {
  auto gen = at::detail::createCPUGenerator(seed);
  return (torch::rand({n, a.image_channels, a.height, a.width}, gen) * 2 - 1).to(dtype);
}

double fd_rel_error(const std::vector<torch::Tensor>& params, const std::function<torch::Tensor()>& loss) {
  for (auto p : params)
    if (p.grad().defined()) p.mutable_grad().zero_();
  loss().backward();
  const double h = 1e-6;
  double worst = 0.0;
  for (auto p : params) {
    const auto grad = p.grad().defined() ? p.grad().clone() : torch::zeros_like(p);
    auto flat = p.data().view({-1});
    const auto gflat = grad.view({-1});
    const std::int64_t n = flat.numel();
    for (std::int64_t k = 0; k < std::min<std::int64_t>(n, 2); ++k) {
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
      const double fd = (lp - lm) / (2 * h), an = gflat[i].item<double>();
      worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
    }
  }
  return worst;
}

Outcome loss_correctness() {
  using namespace losses;
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  const auto arch = tiny_arch();

  // Closed forms.
  auto k = [](double v) { return torch::full({2, 1, 8, 8}, v, torch::kFloat64); };
  expect(ls_guess_generator(k(0), k(0)).item<double>() == 1.0, "guess gen at 0");
  expect(ls_guess_generator(k(0.5), k(0.5)).item<double>() == 0.5, "guess gen at 0.5");
  expect(ls_guess_generator(k(1), k(1)).item<double>() == 1.0, "guess gen at 1");
  expect(ls_guess_discriminator(k(1), k(0)).item<double>() == 0.0, "perfect guesser");
  expect(ls_guess_discriminator(k(0.5), k(0.5)).item<double>() == 0.5, "guess disc at 0.5");
  expect(capacity_loss(torch::zeros({3, 1, 8, 8})).item<double>() == 0.0, "capacity of zeros");
  expect(capacity_loss(torch::ones({1, 1, 8, 8})).item<double>() == 64.0, "capacity of ones");
  const auto x = random_images(3, arch, 1, torch::kFloat64);
  expect(l1(x, x).item<double>() == 0.0, "L1 of equal inputs");
  expect(std::abs(l1(x + 0.25, x).item<double>() - 0.25) < 1e-12, "L1 of constant offset");

  // Perfect reconstructions give zero cycle loss; a constant offset gives its magnitude.
  {
    auto b = model::make_bundle(arch, 7);
    const auto a = random_images(2, arch, 1, torch::kFloat32), bb = random_images(2, arch, 2, torch::kFloat32);
    auto pass = generator_forward(b, a, bb, {0.1, 0.5, 1});
    pass.a_cyc = a.clone();
    pass.b_cyc = bb + 0.125;
    const auto t = generator_terms(b, a, bb, pass, LossWeights{});
    expect(t.cyc_A.item<double>() == 0.0, "zero cycle loss");
    expect(std::abs(t.cyc_B.item<double>() - 0.125) < 1e-6, "cycle loss of a constant offset");
  }

  // Gradients against central differences on a float64 bundle.
  auto b = model::make_bundle(arch, 10);
  b->to(torch::kFloat64);
  {
    auto gen = at::detail::createCPUGenerator(110);
    torch::NoGradGuard g;
    for (auto& item : b->named_parameters())
      if (item.key().ends_with("bias"))
        item.value().copy_(0.1 * torch::randn(item.value().sizes(), gen, torch::kFloat64));
  }
  const auto a = random_images(2, arch, 1, torch::kFloat64), bb = random_images(2, arch, 2, torch::kFloat64);
  const NoiseConfig noise{0.1, 0.3, 5};
  const auto gp = b->generator_parameters(), dp = b->discriminator_parameters();
  auto term = [&](std::function<torch::Tensor(const GeneratorTerms&)> pick) {
    return [&, pick] {
      const auto pass = generator_forward(b, a, bb, noise);
      return pick(generator_terms(b, a, bb, pass, LossWeights{}));
    };
  };
  double worst = 0.0;
  for (const auto& [name, pick] : std::vector<std::pair<std::string, std::function<torch::Tensor(const GeneratorTerms&)>>>{
           {"cyc", [](const GeneratorTerms& t) { return t.cyc_A + t.cyc_B; }},
           {"guess", [](const GeneratorTerms& t) { return t.guess_A + t.guess_B; }},
           {"norm", [](const GeneratorTerms& t) { return t.norm_A + t.norm_B; }},
           {"gan", [](const GeneratorTerms& t) { return t.gan_A + t.gan_B; }},
           {"idt", [](const GeneratorTerms& t) { return t.idt_A + t.idt_B; }},
           {"total_G", [](const GeneratorTerms& t) { return t.total; }}}) {
    const double e = fd_rel_error(gp, term(pick));
    worst = std::max(worst, e);
    expect(e <= 1e-3, name + " gradient");
  }
  const double ed = fd_rel_error(dp, [&] {
    const auto pass = generator_forward(b, a, bb, noise);
    return discriminator_terms(b, a, bb, pass).total;
  });
  worst = std::max(worst, ed);
  expect(ed <= 1e-3, "total_D gradient");

  std::string detail = fmt("worst relative gradient error %.2e", worst);
  for (const auto& f : failures) detail += "; failed: " + f;
  return {failures.empty(), detail};
}

// ----------------------------------------------------------------------
// 4 and 5: Toy-A training and the ablation suite
// ----------------------------------------------------------------------

fs::path toy_a_data(const fs::path& work) {
  const auto dir = work / "toy_a";
  if (!fs::exists(dir / "manifest.jsonl")) {
    const auto cfg = datagen::SplitConfig::from_json(read_json(fs::path(RIFT_CONFIGS) / "split_a.json"));
    datagen::write_dataset(datagen::build_split(cfg), dir);
  }
  return dir;
}

/// Mean categorical accuracy of one attribute over the cells where it has the requested role kind.
std::optional<double> attribute_mean(const evalkit::AccuracyTable& t, const std::string& attr, bool shared) {
  double sum = 0.0;
  int n = 0;
  for (const auto& [key, cell] : t.cells) {
    if (key.attribute != attr || (t.role(attr) == datagen::Role::shared) != shared) continue;
    sum += cell.accuracy;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

Outcome training_efficacy(const diagnostics::AblationReport& rep) {
  const auto& eval = rep.variant("full").eval;
  std::string best_shared, best_specific;
  double ratio_shared = 0.0, ratio_specific = 0.0;
  std::ostringstream detail;
  for (const auto& spec : eval.table.attributes) {
    if (spec.kind != datagen::AttributeKind::categorical) continue;
    const bool shared = spec.role == datagen::Role::shared;
    const auto m = attribute_mean(eval.table, spec.name, shared);
    const auto r = attribute_mean(eval.rand_table, spec.name, shared);
    if (!m || !r || *r <= 0.0) continue;
    const double ratio = *m / *r;
    detail << spec.name << " " << pct(*m) << "/" << pct(*r) << " ";
    auto& best = shared ? ratio_shared : ratio_specific;
    if (ratio > best) {
      best = ratio;
      (shared ? best_shared : best_specific) = spec.name;
    }
  }
  detail << fmt("(model/RAND %%); best shared %s x%.2f, best specific %s x%.2f", best_shared.c_str(), ratio_shared,
                best_specific.c_str(), ratio_specific);
  return {ratio_shared >= 2.0 && ratio_specific >= 2.0, detail.str()};
}

Outcome ablation_directionality(const diagnostics::AblationReport& rep) {
  const auto& full = rep.variant("full");
  const auto& no_norm = rep.variant("no_norm");
  const auto& no_guess = rep.variant("no_guess");
  const double full_shared = evalkit::mean_accuracy(full.eval.table, true).value_or(NAN);
  const double nn_shared = evalkit::mean_accuracy(no_norm.eval.table, true).value_or(NAN);
  const double ng_specific = evalkit::mean_accuracy(no_guess.eval.table, false).value_or(NAN);
  const double rand_specific = evalkit::mean_accuracy(no_guess.eval.rand_table, false).value_or(NAN);
  const bool a_dep = no_norm.probe.guide_dependence > no_norm.probe.source_dependence;
  const bool a_acc = nn_shared < full_shared;
  const bool b_hide = no_guess.probe.hiding_score > full.probe.hiding_score;
  const bool b_rand = std::abs(ng_specific - rand_specific) <= 0.05;
  const std::string detail = fmt(
      "(a) no_norm guide/source dependence %.3f/%.3f [%s], shared acc %.3f vs full %.3f [%s]; "
      "(b) hiding no_guess %.3f vs full %.3f [%s], no_guess specific %.3f vs RAND %.3f [%s]",
      no_norm.probe.guide_dependence, no_norm.probe.source_dependence, a_dep ? "ok" : "no", nn_shared, full_shared,
      a_acc ? "ok" : "no", no_guess.probe.hiding_score, full.probe.hiding_score, b_hide ? "ok" : "no", ng_specific,
      rand_specific, b_rand ? "ok" : "no");
  return {a_dep && a_acc && b_hide && b_rand, detail};
}

// ----------------------------------------------------------------------
// 6: determinism and resume
// ----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism(const fs::path& work) {
  const auto root = work / "determinism";
  fs::remove_all(root);
  auto split = datagen::stock_split("A");
  split.n_a = split.n_b = 16;
  split.seed = 3;
  datagen::write_dataset(datagen::build_split(split), root / "data");

  trainer::TrainConfig cfg;
  cfg.data = (root / "data").string();
  cfg.arch.base_channels = 4;
  cfg.arch.disc_channels = 4;
  cfg.arch.embed_height = cfg.arch.embed_width = 4;
  cfg.batch_size = 4;
  cfg.steps = 40;
  cfg.checkpoint_every = 10;
  cfg.seed = 9;

  const auto r1 = trainer::train(cfg, root / "run1");
  const auto r2 = trainer::train(cfg, root / "run2");
  bool identical = r1.checkpoints.size() == r2.checkpoints.size() && slurp(r1.metrics) == slurp(r2.metrics);
  for (std::size_t i = 0; identical && i < r1.checkpoints.size(); ++i)
    identical = slurp(r1.checkpoints[i]) == slurp(r2.checkpoints[i]);

  auto half = cfg;
  half.steps = 20;
  const auto first = trainer::train(half, root / "resume");
  const auto resumed = trainer::train(cfg, root / "resume", first.final_checkpoint);
  auto p_full = trainer::load_bundle(r1.final_checkpoint)->named_parameters();
  auto p_res = trainer::load_bundle(resumed.final_checkpoint)->named_parameters();
  bool same_params = p_full.size() == p_res.size();
  for (const auto& item : p_full) same_params = same_params && torch::equal(item.value(), p_res[item.key()]);
  const bool same_blob = slurp(resumed.final_checkpoint) == slurp(r1.final_checkpoint);
  return {identical && same_params && same_blob,
          fmt("%zu checkpoints bit-identical: %s; 20+20 vs 40 steps: parameters %s, checkpoint %s", r1.checkpoints.size(),
              identical ? "yes" : "no", same_params ? "equal" : "differ", same_blob ? "identical" : "differs")};
}

// ----------------------------------------------------------------------
// 7: oracle round trip
// ----------------------------------------------------------------------

Outcome oracle_round_trip() {
  const auto grid = datagen::canonical::enumerate_grid();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<float> u(-0.05f, 0.05f);
  std::size_t clean = 0, noisy = 0, signed_noise = 0;
  for (const auto& attrs : grid) {
    const auto img = datagen::render(attrs, datagen::canonical::kDefaultResolution, datagen::canonical::kDefaultResolution);
    if (datagen::attribute_oracle(img) == attrs) ++clean;
    auto n1 = img;
    for (auto& v : n1.data) v += u(rng);
    if (datagen::attribute_oracle(n1) == attrs) ++noisy;
    // Full-amplitude noise of alternating sign.
    auto n2 = img;
    for (std::size_t i = 0; i < n2.data.size(); ++i) n2.data[i] += (i / 3 + i / (3 * n2.width)) % 2 ? 0.05f : -0.05f;
    if (datagen::attribute_oracle(n2) == attrs) ++signed_noise;
  }
  const auto n = grid.size();
  return {n == 3840 && clean == n && noisy == n && signed_noise == n,
          fmt("%zu combinations; exact %zu, uniform noise %zu, +-0.05 checkerboard %zu", n, clean, noisy, signed_noise)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string work = "acceptance_work";
  std::vector<int> only;
  app.add_option("--work", work, "cache directory for datasets and checkpoints");
  app.add_option("--only", only, "run a subset of the criteria");
  CLI11_PARSE(app, argc, argv);
  at::set_num_threads(1);
  fs::create_directories(work);
  work = fs::absolute(work).lexically_normal().string();  // cached checkpoints record the data path

  std::optional<diagnostics::AblationReport> ablation;
  auto run_ablation = [&]() -> const diagnostics::AblationReport& {
    if (!ablation) {
      auto cfg = trainer::TrainConfig::from_json(read_json(fs::path(RIFT_CONFIGS) / "train_toy_a.json"));
      cfg.data = toy_a_data(work).string();
      diagnostics::AblationOptions opt;
      opt.eval.seed = cfg.seed;
      opt.probe.seed = cfg.seed;
      opt.reuse_checkpoints = true;
      ablation = diagnostics::ablation_suite(cfg, fs::path(work) / "ablation", opt);
    }
    return *ablation;
  };

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric arithmetic", metric_arithmetic},
      {"capacity theorem", capacity_theorem},
      {"loss correctness", loss_correctness},
      {"toy training efficacy", [&] { return training_efficacy(run_ablation()); }},
      {"ablation directionality", [&] { return ablation_directionality(run_ablation()); }},
      {"determinism and resume", [&] { return determinism(work); }},
      {"data/oracle round trip", oracle_round_trip},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << ", " << fmt("%.1fs", secs)
              << "): " << o.detail << std::endl;
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
