#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rift/capacity.hpp"
#include "rift/datagen.hpp"
#include "rift/diagnostics.hpp"
#include "rift/evaluate.hpp"
#include "rift/measured_capacity.hpp"
#include "rift/report.hpp"
#include "rift/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace rift;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitRuntime = 4;

void emit_error(const char* kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << text;
}

void require_exists(const fs::path& path, const char* what) {
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " not found: " + path.string());
}

/// Seed precedence: command-line flag, then the config file, then RIFT_SEED, then 0.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const std::optional<std::uint64_t>& from_config) {
  if (flag) return *flag;
  if (from_config) return *from_config;
  if (const char* env = std::getenv("RIFT_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(std::string("RIFT_SEED is not an unsigned integer: '") + env + "'");
    }
  }
  return 0;
}

// ----------------------------------------------------------------------
// datagen
// ----------------------------------------------------------------------

struct DatagenArgs {
  std::string split;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_a, n_b, resolution;
};

void run_datagen(const DatagenArgs& args) {
  datagen::SplitConfig cfg;
  std::optional<std::uint64_t> config_seed;
  if (args.split == "A" || args.split == "B" || args.split == "C") {
    cfg = datagen::stock_split(args.split);
  } else {
    require_exists(args.split, "split config");
    const auto j = read_json(args.split);
    cfg = datagen::SplitConfig::from_json(j);
    if (j.contains("seed")) config_seed = cfg.seed;
  }
  cfg.seed = resolve_seed(args.seed, config_seed);
  if (args.resolution) cfg.height = cfg.width = *args.resolution;
  if (args.n_a) cfg.n_a = *args.n_a;
  if (args.n_b) cfg.n_b = *args.n_b;
  cfg.validate();
  const auto manifest = datagen::build_split(cfg);
  datagen::write_dataset(manifest, args.out);
  std::cout << json{{"out", args.out},
                    {"split_id", cfg.split_id},
                    {"n_a", cfg.n_a},
                    {"n_b", cfg.n_b},
                    {"seed", cfg.seed}}
                   .dump()
            << std::endl;
}

// ----------------------------------------------------------------------
// train
// ----------------------------------------------------------------------

struct TrainArgs {
  std::string config, out, resume, data;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  bool disable_norm = false, disable_guess = false;
};

trainer::TrainConfig load_train_config(const std::string& path, const std::optional<std::uint64_t>& seed_flag,
                                       const std::string& data_override, const std::optional<int>& steps) {
  require_exists(path, "config");
  const auto j = read_json(path);
  auto cfg = trainer::TrainConfig::from_json(j);
  std::optional<std::uint64_t> config_seed;
  if (j.contains("seed")) config_seed = cfg.seed;
  cfg.seed = resolve_seed(seed_flag, config_seed);
  if (!data_override.empty()) cfg.data = data_override;
  if (steps) cfg.steps = *steps;
  if (cfg.data.empty()) throw ConfigError("train config: 'data' is not set");
  require_exists(cfg.data, "dataset");
  cfg.validate();
  return cfg;
}

void run_train(const TrainArgs& args) {
  auto cfg = load_train_config(args.config, args.seed, args.data, args.steps);
  cfg.disable_norm = cfg.disable_norm || args.disable_norm;
  cfg.disable_guess = cfg.disable_guess || args.disable_guess;
  std::optional<fs::path> resume;
  if (!args.resume.empty()) {
    require_exists(args.resume, "checkpoint");
    resume = args.resume;
  }
  const auto result = trainer::train(cfg, args.out, resume);
  std::cout << json{{"final_checkpoint", result.final_checkpoint.string()},
                    {"metrics", result.metrics.string()},
                    {"checkpoints", result.checkpoints.size()}}
                   .dump()
            << std::endl;
}

// ----------------------------------------------------------------------
// evaluate
// ----------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, data, out;
  int guides = 2;
  std::optional<std::uint64_t> seed;
};

void run_evaluate(const EvalArgs& args) {
  require_exists(args.checkpoint, "checkpoint");
  require_exists(args.data, "dataset");
  evaluate::EvalOptions opt;
  opt.guides_per_source = args.guides;
  opt.seed = resolve_seed(args.seed, std::nullopt);
  const auto result = evaluate::evaluate_checkpoint(args.checkpoint, args.data, opt);
  auto j = result.to_json();
  j["config"] = {{"checkpoint", args.checkpoint}, {"data", args.data}, {"guides_per_source", opt.guides_per_source},
                 {"seed", opt.seed}};
  const auto table = report::results_table({{"model", result.aggregate}, {"RAND", result.rand_aggregate}});
  if (!args.out.empty()) {
    write_text(args.out, j.dump(2) + "\n");
    fs::path txt(args.out);
    txt.replace_extension(".txt");
    write_text(txt, table);
  }
  std::cout << table;
}

// ----------------------------------------------------------------------
// ablate
// ----------------------------------------------------------------------

struct AblateArgs {
  std::string config, out, data;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  bool reuse = false;
};

void run_ablate(const AblateArgs& args) {
  const auto cfg = load_train_config(args.config, args.seed, args.data, args.steps);
  diagnostics::AblationOptions opt;
  opt.eval.seed = cfg.seed;
  opt.probe.seed = cfg.seed;
  opt.reuse_checkpoints = args.reuse;
  const auto rep = diagnostics::ablation_suite(cfg, args.out, opt);
  std::cout << rep.table();
}

// ----------------------------------------------------------------------
// capacity-report
// ----------------------------------------------------------------------

struct CapacityArgs {
  std::vector<std::string> checkpoints;
  std::string data, out;
  std::optional<double> sigma;
  std::optional<std::uint64_t> seed;
};

void run_capacity(const CapacityArgs& args) {
  require_exists(args.data, "dataset");
  const auto manifest = datagen::read_dataset(args.data);
  const auto a = evaluate::load_domain(manifest, args.data, Domain::A);
  const auto b = evaluate::load_domain(manifest, args.data, Domain::B);
  const auto seed = resolve_seed(args.seed, std::nullopt);
  json rows = json::array();
  std::ostringstream text;
  text << "checkpoint                                 step  domain    power   sigma  bound bits  MI(specific attr; emb)\n";
  for (const auto& ck : args.checkpoints) {
    require_exists(ck, "checkpoint");
    const auto cfg = trainer::load_checkpoint_config(ck);
    const auto meta = read_json(trainer::sidecar_path(ck));
    auto bundle = trainer::load_bundle(ck);
    const double sigma = args.sigma.value_or(cfg.noise.sigma_g);
    for (const Domain d : {Domain::A, Domain::B}) {
      const auto& data = d == Domain::A ? a : b;
      const auto bound = capacity::measured_capacity(bundle, d, data.images, sigma);
      json mi = json::object();
      for (const auto& spec : manifest.split.attributes) {
        if (spec.role == datagen::Role::shared || !datagen::varies_in(spec.role, d)) continue;
        std::vector<int> codes;
        for (const auto& attrs : data.attributes) codes.push_back(attrs.category(spec.name));
        mi[spec.name] = capacity::channel_mi(bundle, d, data.images, codes, sigma, 2000, seed);
      }
      rows.push_back({{"checkpoint", ck},
                      {"step", meta.value("step", 0)},
                      {"domain", rift::to_string(d)},
                      {"bound", bound.to_json()},
                      {"channel_mi_bits", mi}});
      char line[256];
      std::snprintf(line, sizeof line, "%-40s %6d  %-6s %8.4f %7.3f %11.3f  %s\n", ck.c_str(), meta.value("step", 0),
                    rift::to_string(d), bound.power, sigma, bound.bits, mi.dump().c_str());
      text << line;
    }
  }
  if (!args.out.empty()) {
    write_text(args.out, json{{"rows", rows}, {"config", {{"data", args.data}, {"seed", seed}}}}.dump(2) + "\n");
    fs::path txt(args.out);
    txt.replace_extension(".txt");
    write_text(txt, text.str());
  }
  std::cout << text.str();
}

// ----------------------------------------------------------------------
// report
// ----------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> metrics, evals;
  std::string ablation, out, label = "RIFT";
};

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open metrics file " + path.string());
  std::vector<json> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw ConfigError("metrics file " + path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  if (rows.empty()) throw ConfigError("metrics file is empty: " + path.string());
  return rows;
}

std::vector<double> moving_average(const std::vector<double>& v, std::size_t window) {
  std::vector<double> out(v.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    acc += v[i];
    if (i >= window) acc -= v[i - window];
    out[i] = acc / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

void run_report(const ReportArgs& args) {
  if (args.metrics.empty() && args.evals.empty() && args.ablation.empty())
    throw UsageError("report needs at least one of --metrics, --eval, --ablation");
  fs::create_directories(args.out);
  json produced = json::array();

  if (!args.evals.empty()) {
    std::vector<evalkit::AccuracyTable> tables, rand_tables;
    for (const auto& e : args.evals) {
      require_exists(e, "eval file");
      const auto j = read_json(e);
      if (!j.contains("table")) throw ConfigError("eval file has no 'table': " + e);
      tables.push_back(evalkit::AccuracyTable::from_json(j.at("table")));
      if (j.contains("rand")) rand_tables.push_back(evalkit::AccuracyTable::from_json(j.at("rand").at("table")));
    }
    std::vector<report::TableRow> rows = {{args.label, evalkit::aggregate(tables)}};
    if (rand_tables.size() == tables.size()) rows.push_back({"RAND", evalkit::aggregate(rand_tables)});
    const auto table = report::results_table(rows);
    write_text(fs::path(args.out) / "results_table.txt", table);
    json agg = json::object();
    for (const auto& r : rows) agg[r.method] = r.aggregate.to_json();
    write_text(fs::path(args.out) / "results_table.json", agg.dump(2) + "\n");
    produced.push_back("results_table.txt");
    std::cout << table;
  }

  if (!args.metrics.empty()) {
    const char* keys[][3] = {{"total_G", "total_G", nullptr}, {"total_D", "total_D", nullptr},
                             {"cyc", "cyc_A", "cyc_B"},       {"guess", "guess_A", "guess_B"},
                             {"norm", "norm_A", "norm_B"},    {"gan", "gan_A", "gan_B"},
                             {"idt", "idt_A", "idt_B"}};
    std::vector<report::Series> series;
    for (const auto& m : args.metrics) {
      const auto rows = read_jsonl(m);
      const std::size_t window = std::max<std::size_t>(1, rows.size() / 100);
      for (const auto& k : keys) {
        report::Series s;
        s.label = (args.metrics.size() > 1 ? fs::path(m).parent_path().filename().string() + ":" : std::string()) + k[0];
        std::vector<double> y;
        for (std::size_t i = 0; i < rows.size(); ++i) {
          const auto& r = rows[i];
          double v = r.value(k[1], 0.0);
          if (k[2]) v += r.value(k[2], 0.0);
          s.x.push_back(r.value("step", static_cast<double>(i + 1)));
          y.push_back(v);
        }
        s.y = moving_average(y, window);
        series.push_back(std::move(s));
      }
    }
    write_text(fs::path(args.out) / "loss_curves.svg",
               report::svg_plot("training losses (moving average)", "step", "loss", series, true));
    produced.push_back("loss_curves.svg");
  }

  if (!args.ablation.empty()) {
    require_exists(args.ablation, "ablation file");
    const auto j = read_json(args.ablation);
    std::vector<report::Series> series;
    for (const auto& [name, v] : j.items()) {
      const auto& p = v.at("probe");
      series.push_back({name, p.at("amplitudes").get<std::vector<double>>(), p.at("mean_error").get<std::vector<double>>()});
    }
    write_text(fs::path(args.out) / "probe_curves.svg",
               report::svg_plot("cycle error under translation noise", "noise amplitude", "mean L1 cycle error", series));
    produced.push_back("probe_curves.svg");
  }
  write_text(fs::path(args.out) / "config.json",
             json{{"metrics", args.metrics}, {"eval", args.evals}, {"ablation", args.ablation}, {"label", args.label}}
                     .dump(2) +
                 "\n");
}

template <class T>
void opt_flag(CLI::App* app, const std::string& name, std::optional<T>& target, const std::string& help) {
  app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rift: guided image translation with restricted information flow"};
  app.require_subcommand(1);

  DatagenArgs dg;
  auto* c_datagen = app.add_subcommand("datagen", "render a toy split into a dataset directory");
  c_datagen->add_option("--split", dg.split, "stock split A|B|C or path to a split config")->required();
  c_datagen->add_option("--out", dg.out, "output directory")->required();
  opt_flag(c_datagen, "--seed", dg.seed, "sampling seed");
  opt_flag(c_datagen, "--n-a", dg.n_a, "images in domain A");
  opt_flag(c_datagen, "--n-b", dg.n_b, "images in domain B");
  opt_flag(c_datagen, "--resolution", dg.resolution, "square image size");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train a model");
  c_train->add_option("--config", tr.config, "training config")->required();
  c_train->add_option("--out", tr.out, "run directory")->required();
  c_train->add_option("--resume", tr.resume, "checkpoint to resume from");
  c_train->add_option("--data", tr.data, "dataset directory (overrides the config)");
  c_train->add_flag("--disable-norm", tr.disable_norm, "drop the capacity loss");
  c_train->add_flag("--disable-guess", tr.disable_guess, "drop the guess losses");
  opt_flag(c_train, "--seed", tr.seed, "training seed");
  opt_flag(c_train, "--steps", tr.steps, "number of steps (overrides the config)");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "manipulation accuracy of a checkpoint");
  c_eval->add_option("--checkpoint", ev.checkpoint, "checkpoint blob")->required();
  c_eval->add_option("--data", ev.data, "dataset directory")->required();
  c_eval->add_option("--guides-per-source", ev.guides, "guides per source image")->check(CLI::PositiveNumber);
  c_eval->add_option("--out", ev.out, "JSON report path (a .txt table is written next to it)");
  opt_flag(c_eval, "--seed", ev.seed, "guide sampling seed");

  AblateArgs ab;
  auto* c_ablate = app.add_subcommand("ablate", "train and probe full / no_norm / no_guess variants");
  c_ablate->add_option("--config", ab.config, "base training config")->required();
  c_ablate->add_option("--out", ab.out, "output directory")->required();
  c_ablate->add_option("--data", ab.data, "dataset directory (overrides the config)");
  c_ablate->add_flag("--reuse", ab.reuse, "reuse finished variant runs with an identical config");
  opt_flag(c_ablate, "--seed", ab.seed, "seed for all variants");
  opt_flag(c_ablate, "--steps", ab.steps, "number of steps (overrides the config)");

  CapacityArgs cp;
  auto* c_cap = app.add_subcommand("capacity-report", "capacity bound and empirical embedding power per checkpoint");
  c_cap->add_option("--checkpoint", cp.checkpoints, "checkpoint blob(s)")->required();
  c_cap->add_option("--data", cp.data, "dataset directory")->required();
  c_cap->add_option("--out", cp.out, "JSON report path");
  opt_flag(c_cap, "--sigma", cp.sigma, "embedding noise (defaults to the checkpoint's sigma_g)");
  opt_flag(c_cap, "--seed", cp.seed, "sampling seed for the MI estimate");

  ReportArgs rp;
  auto* c_report = app.add_subcommand("report", "results table and curves from metrics / eval / ablation files");
  c_report->add_option("--metrics", rp.metrics, "metrics.jsonl file(s)");
  c_report->add_option("--eval", rp.evals, "evaluate output(s), one per split");
  c_report->add_option("--ablation", rp.ablation, "ablation.json");
  c_report->add_option("--label", rp.label, "row label for the eval files");
  c_report->add_option("--out", rp.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("usage", e.what());
    return kExitUsage;
  }

  try {
    if (c_datagen->parsed()) run_datagen(dg);
    else if (c_train->parsed()) run_train(tr);
    else if (c_eval->parsed()) run_evaluate(ev);
    else if (c_ablate->parsed()) run_ablate(ab);
    else if (c_cap->parsed()) run_capacity(cp);
    else if (c_report->parsed()) run_report(rp);
    return 0;
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::usage: emit_error("usage", e.what()); return kExitUsage;
      case ErrorKind::config: emit_error("config", e.what()); return kExitConfig;
      case ErrorKind::runtime: emit_error("runtime", e.what()); return kExitRuntime;
    }
  } catch (const std::exception& e) {
    emit_error("runtime", e.what());
    return kExitRuntime;
  }
  return kExitRuntime;
}
