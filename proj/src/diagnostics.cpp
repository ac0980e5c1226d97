#include "rift/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "rift/image_io.hpp"
#include "rift/measured_capacity.hpp"
#include "rift/report.hpp"

namespace rift::diagnostics {

namespace fs = std::filesystem;
using evaluate::DomainData;
using evaluate::GuidedModel;

namespace {

json per_direction(const std::map<Direction, std::vector<double>>& m) {
  json j = json::object();
  for (const auto& [d, v] : m) j[rift::to_string(d)] = v;
  return j;
}

json per_domain(const std::map<Domain, double>& m) {
  json j = json::object();
  for (const auto& [d, v] : m) j[rift::to_string(d)] = v;
  return j;
}

void check_amplitudes(const std::vector<double>& amplitudes) {
  if (amplitudes.empty()) throw ConfigError("probe: empty amplitude list");
  if (amplitudes.front() != 0.0) throw ConfigError("probe: amplitudes must start at 0");
  for (std::size_t i = 1; i < amplitudes.size(); ++i)
    if (!(amplitudes[i] > amplitudes[i - 1])) throw ConfigError("probe: amplitudes must be strictly increasing");
}

torch::Generator generator(std::uint64_t seed) { return at::detail::createCPUGenerator(seed); }

Tensor gather(const Tensor& images, const std::vector<std::int64_t>& idx) {
  return images.index_select(0, torch::tensor(idx, torch::kInt64));
}

// Indices of a domain ordered by attribute vector.
std::vector<std::int64_t> canonical_order(const DomainData& d) {
  std::vector<std::int64_t> idx(d.attributes.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::int64_t x, std::int64_t y) {
    return d.attributes[static_cast<std::size_t>(x)] < d.attributes[static_cast<std::size_t>(y)];
  });
  return idx;
}

double mean_abs(const Tensor& x, const Tensor& y) { return (x - y).abs().mean().item<double>(); }

}  // namespace

json ProbeReport::to_json() const {
  return {{"amplitudes", amplitudes},
          {"cycle_error", per_direction(cycle_error)},
          {"cycle_error_se", per_direction(cycle_error_se)},
          {"mean_error", mean_error},
          {"hiding_score", hiding_score},
          {"embedding_power", per_domain(embedding_power)},
          {"capacity_bits", per_domain(capacity_bits)},
          {"source_dependence", source_dependence},
          {"guide_dependence", guide_dependence}};
}

double hiding_score(const std::vector<double>& amplitudes, const std::vector<double>& errors) {
  check_amplitudes(amplitudes);
  if (errors.size() != amplitudes.size()) throw ConfigError("hiding_score: one error per amplitude required");
  if (amplitudes.size() < 3) throw ConfigError("hiding_score: need 0 and two positive amplitudes");
  const double s1 = amplitudes[1], s2 = amplitudes[2];
  return (errors[2] - errors[1]) / (s2 - s1) / (errors[0] + kHidingEps);
}

ProbeReport hidden_signal_probe(GuidedModel& model, const DomainData& a, const DomainData& b,
                                const ProbeOptions& options) {
  check_amplitudes(options.amplitudes);
  if (options.pairs < 1 || options.repeats < 1) throw ConfigError("probe: pairs and repeats must be >= 1");
  torch::NoGradGuard no_grad;
  ProbeReport report;
  report.amplitudes = options.amplitudes;
  report.mean_error.assign(options.amplitudes.size(), 0.0);
  for (const Direction dir : {Direction::A2B, Direction::B2A}) {
    const auto& src = dir == Direction::A2B ? a : b;
    const auto& tgt = dir == Direction::A2B ? b : a;
    const auto s_order = canonical_order(src);
    const auto t_order = canonical_order(tgt);
    std::mt19937_64 rng(mix_seed(options.seed, {0x9B0E, static_cast<std::uint64_t>(dir)}));
    std::vector<std::int64_t> si, gi;
    for (int i = 0; i < options.pairs; ++i) {
      si.push_back(s_order[rng() % s_order.size()]);
      gi.push_back(t_order[rng() % t_order.size()]);
    }
    const auto source = gather(src.images, si);
    const auto guide = gather(tgt.images, gi);
    const auto translated = model.translate(dir, source, model.encode(target_domain(dir), guide));
    const auto own = model.encode(source_domain(dir), source);
    const Direction back = dir == Direction::A2B ? Direction::B2A : Direction::A2B;

    auto& curve = report.cycle_error[dir];
    auto& se = report.cycle_error_se[dir];
    for (std::size_t k = 0; k < options.amplitudes.size(); ++k) {
      const double sigma = options.amplitudes[k];
      const int reps = sigma == 0.0 ? 1 : options.repeats;
      std::vector<double> errs;
      for (int r = 0; r < reps; ++r) {
        auto gen = generator(mix_seed(options.seed, {0x9B0F, static_cast<std::uint64_t>(dir), k, static_cast<std::uint64_t>(r)}));
        auto perturbed = translated;
        if (sigma > 0.0) perturbed = translated + sigma * torch::randn(translated.sizes(), gen, translated.options());
        errs.push_back(mean_abs(model.translate(back, perturbed, own), source));
      }
      const double m = std::accumulate(errs.begin(), errs.end(), 0.0) / static_cast<double>(errs.size());
      double var = 0.0;
      for (double e : errs) var += (e - m) * (e - m);
      const double sd = errs.size() > 1 ? std::sqrt(var / static_cast<double>(errs.size() - 1)) : 0.0;
      curve.push_back(m);
      se.push_back(sd / std::sqrt(static_cast<double>(errs.size())));
      report.mean_error[k] += 0.5 * m;
    }
  }
  if (options.amplitudes.size() >= 3) report.hiding_score = hiding_score(options.amplitudes, report.mean_error);
  return report;
}

Dependence dependence_probe(GuidedModel& model, const DomainData& a, const DomainData& b, int pairs,
                            std::uint64_t seed) {
  if (pairs < 1) throw ConfigError("dependence_probe: pairs must be >= 1");
  torch::NoGradGuard no_grad;
  double src_change = 0.0, guide_change = 0.0, spread = 0.0;
  for (const Direction dir : {Direction::A2B, Direction::B2A}) {
    const auto& src = dir == Direction::A2B ? a : b;
    const auto& tgt = dir == Direction::A2B ? b : a;
    const auto s_order = canonical_order(src);
    const auto t_order = canonical_order(tgt);
    if (s_order.size() < 2 || t_order.size() < 2) throw ConfigError("dependence_probe: need two images per domain");
    std::mt19937_64 rng(mix_seed(seed, {0xDE9E, static_cast<std::uint64_t>(dir)}));
    auto other = [&](std::size_t n, std::size_t i) {
      const auto j = rng() % (n - 1);
      return j >= i ? j + 1 : j;
    };
    std::vector<std::int64_t> s0, s1, g0, g1;
    for (int i = 0; i < pairs; ++i) {
      const auto si = rng() % s_order.size();
      const auto gi = rng() % t_order.size();
      s0.push_back(s_order[si]);
      s1.push_back(s_order[other(s_order.size(), si)]);
      g0.push_back(t_order[gi]);
      g1.push_back(t_order[other(t_order.size(), gi)]);
    }
    const auto S0 = gather(src.images, s0), S1 = gather(src.images, s1);
    const auto G0 = gather(tgt.images, g0), G1 = gather(tgt.images, g1);
    const auto base = model.guided_translate(dir, S0, G0);
    src_change += mean_abs(model.guided_translate(dir, S1, G0), base);
    guide_change += mean_abs(model.guided_translate(dir, S0, G1), base);
    spread += mean_abs(G0, G1);
  }
  auto clip = [](double v) { return std::clamp(v, 0.0, 1.0); };
  if (spread <= 0.0) return {0.0, 0.0};
  return {clip(src_change / spread), clip(guide_change / spread)};
}

void fill_capacity(ProbeReport& report, model::ModelBundle& bundle, const DomainData& a, const DomainData& b,
                   double sigma_g) {
  for (const Domain d : {Domain::A, Domain::B}) {
    const auto bound = capacity::measured_capacity(bundle, d, d == Domain::A ? a.images : b.images,
                                                   sigma_g > 0.0 ? sigma_g : 1.0);
    report.embedding_power[d] = bound.power;
    report.capacity_bits[d] = sigma_g > 0.0 ? bound.bits : std::numeric_limits<double>::infinity();
  }
}

ProbeReport probe_bundle(model::ModelBundle bundle, const DomainData& a, const DomainData& b, double sigma_g,
                         const ProbeOptions& options) {
  evaluate::BundleModel model(bundle);
  auto report = hidden_signal_probe(model, a, b, options);
  const auto dep = dependence_probe(model, a, b, options.pairs, options.seed);
  report.source_dependence = dep.source;
  report.guide_dependence = dep.guide;
  fill_capacity(report, bundle, a, b, sigma_g);
  return report;
}

// ----------------------------------------------------------------------
// Ablation suite
// ----------------------------------------------------------------------

datagen::ImageGrid translation_grid(GuidedModel& model, Direction direction, const Tensor& sources,
                                    const Tensor& guides) {
  torch::NoGradGuard no_grad;
  const auto ns = sources.size(0), ng = guides.size(0);
  std::vector<datagen::ImageGrid> cells;
  cells.emplace_back(static_cast<int>(sources.size(2)), static_cast<int>(sources.size(3)),
                     static_cast<int>(sources.size(1)), 1.0f);
  for (std::int64_t g = 0; g < ng; ++g) cells.push_back(trainer::to_image(guides[g]));
  for (std::int64_t s = 0; s < ns; ++s) {
    cells.push_back(trainer::to_image(sources[s]));
    const auto row = model.guided_translate(direction, sources[s].unsqueeze(0).expand({ng, -1, -1, -1}).contiguous(), guides);
    for (std::int64_t g = 0; g < ng; ++g) cells.push_back(trainer::to_image(row[g]));
  }
  return io::tile(cells, static_cast<int>(ng + 1));
}

const VariantResult& AblationReport::variant(const std::string& name) const {
  for (const auto& v : variants)
    if (v.name == name) return v;
  throw RuntimeFailure("ablation report: no variant '" + name + "'");
}

json AblationReport::to_json() const {
  json out = json::object();
  for (const auto& v : variants)
    out[v.name] = {{"checkpoint", v.checkpoint.string()}, {"eval", v.eval.to_json()}, {"probe", v.probe.to_json()}};
  return out;
}

std::string AblationReport::table() const {
  std::vector<report::AblationRow> rows;
  for (const auto& v : variants) {
    report::AblationRow r;
    r.name = v.name;
    r.shared = evalkit::mean_accuracy(v.eval.table, true);
    r.specific = evalkit::mean_accuracy(v.eval.table, false);
    r.rand_shared = evalkit::mean_accuracy(v.eval.rand_table, true);
    r.rand_specific = evalkit::mean_accuracy(v.eval.rand_table, false);
    r.ac = v.eval.aggregate.ac;
    r.rd = v.eval.aggregate.rd;
    r.source_dependence = v.probe.source_dependence;
    r.guide_dependence = v.probe.guide_dependence;
    r.hiding_score = v.probe.hiding_score;
    r.power_a = v.probe.embedding_power.at(Domain::A);
    r.power_b = v.probe.embedding_power.at(Domain::B);
    rows.push_back(r);
  }
  return report::ablation_table(rows);
}

AblationReport ablation_suite(const trainer::TrainConfig& base, const fs::path& out, const AblationOptions& options) {
  base.validate();
  fs::create_directories(out);
  const fs::path data_dir(base.data);
  const auto manifest = datagen::read_dataset(data_dir);
  const auto a = evaluate::load_domain(manifest, data_dir, Domain::A);
  const auto b = evaluate::load_domain(manifest, data_dir, Domain::B);
  {
    std::ofstream cf(out / "config.json", std::ios::trunc);
    cf << json{{"train", base.to_json()},
               {"eval", {{"guides_per_source", options.eval.guides_per_source}, {"seed", options.eval.seed}}},
               {"probe", {{"amplitudes", options.probe.amplitudes}, {"pairs", options.probe.pairs},
                          {"repeats", options.probe.repeats}, {"seed", options.probe.seed}}}}
              .dump(2)
       << '\n';
  }

  AblationReport report;
  const std::vector<std::pair<std::string, std::pair<bool, bool>>> variants = {
      {"full", {false, false}}, {"no_norm", {true, false}}, {"no_guess", {false, true}}};
  for (const auto& [name, flags] : variants) {
    auto cfg = base;
    cfg.disable_norm = flags.first;
    cfg.disable_guess = flags.second;
    const auto dir = out / name;
    char buf[48];
    std::snprintf(buf, sizeof buf, "step_%08d.pt", cfg.steps);
    const auto final_ckpt = dir / "checkpoints" / buf;
    VariantResult v;
    v.name = name;
    if (options.reuse_checkpoints && fs::exists(final_ckpt) &&
        trainer::load_checkpoint_config(final_ckpt).to_json() == cfg.to_json()) {
      v.checkpoint = final_ckpt;
    } else {
      v.checkpoint = trainer::train(cfg, dir).final_checkpoint;
    }
    auto bundle = trainer::load_bundle(v.checkpoint);
    evaluate::BundleModel model(bundle);
    v.eval = evaluate::evaluate(model, manifest, a, b, options.eval);
    v.probe = probe_bundle(bundle, a, b, cfg.noise.sigma_g, options.probe);

    std::mt19937_64 rng(mix_seed(options.eval.seed, {0x6B1D}));
    std::vector<std::int64_t> sa, gb;
    for (int i = 0; i < 6; ++i) {
      sa.push_back(static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(a.images.size(0))));
      gb.push_back(static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(b.images.size(0))));
    }
    const auto grid_ab = translation_grid(model, Direction::A2B, gather(a.images, sa), gather(b.images, gb));
    const auto grid_ba = translation_grid(model, Direction::B2A, gather(b.images, gb), gather(a.images, sa));
    io::write_png(out / ("grid_" + name + "_A2B.png"), grid_ab);
    io::write_png(out / ("grid_" + name + "_B2A.png"), grid_ba);
    report.variants.push_back(std::move(v));
  }

  {
    std::ofstream j(out / "ablation.json", std::ios::trunc);
    j << report.to_json().dump(2) << '\n';
    std::ofstream t(out / "ablation.txt", std::ios::trunc);
    t << report.table();
    std::vector<report::Series> series;
    for (const auto& v : report.variants) series.push_back({v.name, v.probe.amplitudes, v.probe.mean_error});
    std::ofstream s(out / "probe_curves.svg", std::ios::trunc);
    s << report::svg_plot("cycle error under translation noise", "noise amplitude", "mean L1 cycle error", series);
  }
  return report;
}

}  // namespace rift::diagnostics
