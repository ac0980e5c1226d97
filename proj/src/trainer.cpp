#include "rift/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <algorithm>
#include <fstream>
#include <map>
#include <random>

namespace rift::trainer {

namespace fs = std::filesystem;
using losses::LossReport;
using torch::Tensor;

// ----------------------------------------------------------------------
// Config
// ----------------------------------------------------------------------

void TrainConfig::validate() const {
  arch.validate();
  weights.validate();
  noise.validate();
  if (steps < 1) throw ConfigError("train config: steps must be >= 1");
  if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
  if (checkpoint_every < 1) throw ConfigError("train config: checkpoint_every must be >= 1");
  if (!(lr_g > 0.0) || !(lr_d > 0.0)) throw ConfigError("train config: learning rates must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("train config: moment coefficients must lie in [0, 1)");
}

losses::LossWeights TrainConfig::effective_weights() const {
  auto w = weights;
  if (disable_norm) w.norm = 0.0;
  if (disable_guess) w.guess = 0.0;
  return w;
}

json TrainConfig::to_json() const {
  return {{"data", data},
          {"model", arch.to_json()},
          {"weights", weights.to_json()},
          {"noise", {{"sigma_s", noise.sigma_s}, {"sigma_g", noise.sigma_g}}},
          {"batch_size", batch_size},
          {"steps", steps},
          {"lr_g", lr_g},
          {"lr_d", lr_d},
          {"beta1", beta1},
          {"beta2", beta2},
          {"checkpoint_every", checkpoint_every},
          {"seed", seed},
          {"disable_norm", disable_norm},
          {"disable_guess", disable_guess}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  TrainConfig c;
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "data") c.data = v.get<std::string>();
      else if (k == "model") c.arch = model::ArchConfig::from_json(v);
      else if (k == "weights") c.weights = losses::LossWeights::from_json(v);
      else if (k == "noise") {
        for (const auto& [nk, nv] : v.items()) {
          if (nk == "sigma_s") c.noise.sigma_s = nv.get<double>();
          else if (nk == "sigma_g") c.noise.sigma_g = nv.get<double>();
          else throw ConfigError("train config noise: unknown key '" + nk + "'");
        }
      } else if (k == "batch_size") c.batch_size = v.get<int>();
      else if (k == "steps") c.steps = v.get<int>();
      else if (k == "lr_g") c.lr_g = v.get<double>();
      else if (k == "lr_d") c.lr_d = v.get<double>();
      else if (k == "beta1") c.beta1 = v.get<double>();
      else if (k == "beta2") c.beta2 = v.get<double>();
      else if (k == "checkpoint_every") c.checkpoint_every = v.get<int>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "disable_norm") c.disable_norm = v.get<bool>();
      else if (k == "disable_guess") c.disable_guess = v.get<bool>();
      else throw ConfigError("train config: unknown key '" + k + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open train config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

// ----------------------------------------------------------------------
// Tensors <-> images
// ----------------------------------------------------------------------

Tensor to_tensor(const std::vector<datagen::ImageGrid>& images) {
  if (images.empty()) throw RuntimeFailure("to_tensor: no images");
  const auto& f = images.front();
  auto out = torch::empty({static_cast<std::int64_t>(images.size()), f.channels, f.height, f.width}, torch::kFloat32);
  auto acc = out.accessor<float, 4>();
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& im = images[n];
    if (im.height != f.height || im.width != f.width || im.channels != f.channels)
      throw RuntimeFailure("to_tensor: images differ in shape");
    for (int y = 0; y < im.height; ++y)
      for (int x = 0; x < im.width; ++x)
        for (int c = 0; c < im.channels; ++c) acc[static_cast<std::int64_t>(n)][c][y][x] = im.at(y, x, c);
  }
  return out;
}

datagen::ImageGrid to_image(const Tensor& chw) {
  const auto t = chw.detach().to(torch::kFloat32).contiguous();
  if (t.dim() != 3) throw RuntimeFailure("to_image: expected a (C, H, W) tensor");
  datagen::ImageGrid img(static_cast<int>(t.size(1)), static_cast<int>(t.size(2)), static_cast<int>(t.size(0)));
  auto acc = t.accessor<float, 3>();
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) img.at(y, x, c) = acc[c][y][x];
  return img;
}

// ----------------------------------------------------------------------
// TrainState
// ----------------------------------------------------------------------

TrainState::TrainState(TrainConfig cfg, Tensor data_a, Tensor data_b)
    : cfg_(std::move(cfg)), data_a_(std::move(data_a)), data_b_(std::move(data_b)), bundle_(nullptr) {
  cfg_.validate();
  if (!data_a_.defined() || !data_b_.defined() || data_a_.size(0) == 0 || data_b_.size(0) == 0)
    throw RuntimeFailure("training data is empty");
  bundle_ = model::make_bundle(cfg_.arch, cfg_.seed);
  bundle_->check_images(data_a_, "training data A");
  bundle_->check_images(data_b_, "training data B");
  auto opts = [&](double lr) { return torch::optim::AdamOptions(lr).betas({cfg_.beta1, cfg_.beta2}); };
  opt_g_ = std::make_unique<torch::optim::Adam>(bundle_->generator_parameters(), opts(cfg_.lr_g));
  opt_d_ = std::make_unique<torch::optim::Adam>(bundle_->discriminator_parameters(), opts(cfg_.lr_d));
}

std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>> TrainState::batch_indices(std::uint64_t step) const {
  auto draw = [&](std::int64_t n, std::uint64_t stream) {
    std::mt19937_64 rng(mix_seed(cfg_.seed, {step, stream}));
    std::vector<std::int64_t> idx(static_cast<std::size_t>(cfg_.batch_size));
    for (auto& i : idx) i = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(n));
    return idx;
  };
  return {draw(data_a_.size(0), 0xA), draw(data_b_.size(0), 0xB)};
}

losses::NoiseConfig TrainState::step_noise(std::uint64_t step) const {
  auto n = cfg_.noise;
  n.rng_seed = mix_seed(cfg_.seed, {step, 0x5EED});
  return n;
}

namespace {
void require_finite(std::initializer_list<std::pair<const char*, const Tensor*>> terms) {
  for (const auto& [name, t] : terms) {
    if (!t->defined()) continue;
    const double v = t->detach().to(torch::kFloat64).item<double>();
    if (!std::isfinite(v)) throw RuntimeFailure(std::string("non-finite loss term '") + name + "'");
  }
}
}  // namespace

LossReport TrainState::train_step(const Tensor& a, const Tensor& b) {
  const auto noise = step_noise(step_);
  const auto weights = cfg_.effective_weights();
  const auto pass = losses::generator_forward(bundle_, a, b, noise);

  opt_d_->zero_grad();
  auto d = losses::discriminator_terms(bundle_, a, b, pass, !cfg_.disable_guess);
  require_finite({{"gan_D_A", &d.gan_A}, {"gan_D_B", &d.gan_B}, {"guess_D_A", &d.guess_A}, {"guess_D_B", &d.guess_B}});
  d.total.backward();
  opt_d_->step();

  opt_g_->zero_grad();
  auto g = losses::generator_terms(bundle_, a, b, pass, weights);
  require_finite({{"cyc_A", &g.cyc_A},
                  {"cyc_B", &g.cyc_B},
                  {"guess_A", &g.guess_A},
                  {"guess_B", &g.guess_B},
                  {"norm_A", &g.norm_A},
                  {"norm_B", &g.norm_B},
                  {"gan_A", &g.gan_A},
                  {"gan_B", &g.gan_B},
                  {"idt_A", &g.idt_A},
                  {"idt_B", &g.idt_B},
                  {"total_G", &g.total}});
  g.total.backward();
  opt_g_->step();

  ++step_;
  return losses::make_report(g, d);
}

LossReport TrainState::step() {
  const auto [ia, ib] = batch_indices(step_);
  const auto a = data_a_.index_select(0, torch::tensor(ia, torch::kInt64));
  const auto b = data_b_.index_select(0, torch::tensor(ib, torch::kInt64));
  return train_step(a, b);
}

namespace {

// Checkpoint blob: a flat list of named tensors written in a fixed order, so that equal states
// give byte-equal files (torch archives embed per-process ids and hash-ordered optimizer state).
constexpr char kMagic[8] = {'R', 'I', 'F', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kBlobVersion = 1;

using Entries = std::vector<std::pair<std::string, Tensor>>;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const fs::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw ConfigError("truncated checkpoint " + path.string());
  return v;
}

void write_blob(const fs::path& path, const Entries& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kBlobVersion);
  put<std::uint64_t>(out, entries.size());
  for (const auto& [name, tensor] : entries) {
    const auto t = tensor.detach().contiguous();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::int32_t>(out, static_cast<std::int32_t>(t.scalar_type()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim()));
    for (auto d : t.sizes()) put<std::int64_t>(out, d);
    const auto nbytes = static_cast<std::uint64_t>(t.numel() * t.element_size());
    put<std::uint64_t>(out, nbytes);
    out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(nbytes));
  }
  if (!out) throw RuntimeFailure("cannot write " + path.string());
}

std::map<std::string, Tensor> read_blob(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("checkpoint not found: " + path.string());
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kMagic))
    throw ConfigError("not a checkpoint: " + path.string());
  if (get<std::uint32_t>(in, path) != kBlobVersion) throw ConfigError("unsupported checkpoint version: " + path.string());
  const auto n = get<std::uint64_t>(in, path);
  std::map<std::string, Tensor> out;
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string name(get<std::uint32_t>(in, path), '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name.size()))) throw ConfigError("truncated checkpoint " + path.string());
    const auto type = static_cast<torch::ScalarType>(get<std::int32_t>(in, path));
    std::vector<std::int64_t> sizes(get<std::uint32_t>(in, path));
    for (auto& d : sizes) d = get<std::int64_t>(in, path);
    const auto nbytes = get<std::uint64_t>(in, path);
    auto t = torch::empty(sizes, torch::TensorOptions().dtype(type));
    if (static_cast<std::uint64_t>(t.numel() * t.element_size()) != nbytes)
      throw ConfigError("corrupt checkpoint entry '" + name + "' in " + path.string());
    if (!in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(nbytes)))
      throw ConfigError("truncated checkpoint " + path.string());
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

const Tensor& entry(const std::map<std::string, Tensor>& blob, const std::string& name) {
  const auto it = blob.find(name);
  if (it == blob.end()) throw ConfigError("checkpoint is missing '" + name + "'");
  return it->second;
}

void add_model(Entries& out, const model::ModelBundle& bundle) {
  for (const auto& p : bundle->named_parameters()) out.emplace_back("model/" + p.key(), p.value());
  for (const auto& b : bundle->named_buffers()) out.emplace_back("buffer/" + b.key(), b.value());
}

void load_model(model::ModelBundle& bundle, const std::map<std::string, Tensor>& blob) {
  torch::NoGradGuard g;
  auto assign = [&](const std::string& name, Tensor& dst) {
    const auto& src = entry(blob, name);
    if (src.sizes() != dst.sizes() || src.scalar_type() != dst.scalar_type())
      throw ConfigError("checkpoint entry '" + name + "' has the wrong shape");
    dst.copy_(src);
  };
  for (auto& p : bundle->named_parameters()) assign("model/" + p.key(), p.value());
  for (auto& b : bundle->named_buffers()) assign("buffer/" + b.key(), b.value());
}

std::vector<Tensor> optimizer_params(const torch::optim::Adam& opt) {
  std::vector<Tensor> out;
  for (const auto& group : opt.param_groups())
    for (const auto& p : group.params()) out.push_back(p);
  return out;
}

void add_adam(Entries& out, const torch::optim::Adam& opt, const std::string& prefix) {
  const auto params = optimizer_params(opt);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto it = opt.state().find(params[i].unsafeGetTensorImpl());
    if (it == opt.state().end()) continue;
    const auto& st = static_cast<const torch::optim::AdamParamState&>(*it->second);
    const auto key = prefix + "/" + std::to_string(i) + "/";
    out.emplace_back(key + "step", torch::tensor(st.step(), torch::kInt64));
    out.emplace_back(key + "exp_avg", st.exp_avg());
    out.emplace_back(key + "exp_avg_sq", st.exp_avg_sq());
  }
}

void load_adam(torch::optim::Adam& opt, const std::map<std::string, Tensor>& blob, const std::string& prefix) {
  const auto params = optimizer_params(opt);
  opt.state().clear();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto key = prefix + "/" + std::to_string(i) + "/";
    if (!blob.contains(key + "step")) continue;
    auto st = std::make_unique<torch::optim::AdamParamState>();
    st->step(entry(blob, key + "step").item<std::int64_t>());
    st->exp_avg(entry(blob, key + "exp_avg").clone());
    st->exp_avg_sq(entry(blob, key + "exp_avg_sq").clone());
    if (st->exp_avg().sizes() != params[i].sizes() || st->exp_avg_sq().sizes() != params[i].sizes())
      throw ConfigError("optimizer state '" + key + "' has the wrong shape");
    opt.state()[params[i].unsafeGetTensorImpl()] = std::move(st);
  }
}

}  // namespace

void TrainState::save_checkpoint(const fs::path& blob) const {
  Entries entries;
  entries.emplace_back("step", torch::tensor(static_cast<std::int64_t>(step_), torch::kInt64));
  add_model(entries, bundle_);
  add_adam(entries, *opt_g_, "opt_g");
  add_adam(entries, *opt_d_, "opt_d");
  fs::create_directories(blob.parent_path().empty() ? fs::path(".") : blob.parent_path());
  write_blob(blob, entries);
  std::ofstream side(sidecar_path(blob), std::ios::trunc);
  side << checkpoint_metadata(cfg_, step_).dump(2) << '\n';
}

void TrainState::load_checkpoint(const fs::path& blob) {
  if (!fs::exists(blob)) throw ConfigError("checkpoint not found: " + blob.string());
  const auto saved = load_checkpoint_config(blob);
  if (!(saved.arch == cfg_.arch)) throw ConfigError("checkpoint architecture differs from the training config");
  const auto entries = read_blob(blob);
  load_model(bundle_, entries);
  load_adam(*opt_g_, entries, "opt_g");
  load_adam(*opt_d_, entries, "opt_d");
  step_ = static_cast<std::uint64_t>(entry(entries, "step").item<std::int64_t>());
}

json checkpoint_metadata(const TrainConfig& cfg, std::uint64_t step) {
  return {{"format", "rift-checkpoint-v1"},
          {"step", step},
          {"seed", cfg.seed},
          {"arch", cfg.arch.to_json()},
          {"weights", cfg.effective_weights().to_json()},
          {"train_config", cfg.to_json()}};
}

fs::path sidecar_path(const fs::path& blob) {
  auto p = blob;
  p.replace_extension(".json");
  return p;
}

TrainConfig load_checkpoint_config(const fs::path& blob) {
  const auto side = sidecar_path(blob);
  std::ifstream in(side);
  if (!in) throw ConfigError("checkpoint metadata not found: " + side.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + side.string() + ": " + e.what());
  }
  return TrainConfig::from_json(j.at("train_config"));
}

model::ModelBundle load_bundle(const fs::path& blob) {
  if (!fs::exists(blob)) throw ConfigError("checkpoint not found: " + blob.string());
  const auto cfg = load_checkpoint_config(blob);
  model::ModelBundle bundle(cfg.arch);
  load_model(bundle, read_blob(blob));
  bundle->eval();
  return bundle;
}

// ----------------------------------------------------------------------
// Loop
// ----------------------------------------------------------------------

namespace {
fs::path checkpoint_name(const fs::path& out, std::uint64_t step) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "step_%08llu.pt", static_cast<unsigned long long>(step));
  return out / "checkpoints" / buf;
}
}  // namespace

TrainResult train(const TrainConfig& cfg, const fs::path& out, const std::optional<fs::path>& resume) {
  cfg.validate();
  const fs::path data_dir(cfg.data);
  const auto manifest = datagen::read_dataset(data_dir);
  auto data_a = to_tensor(datagen::load_images(manifest, data_dir, Domain::A));
  auto data_b = to_tensor(datagen::load_images(manifest, data_dir, Domain::B));

  TrainState state(cfg, std::move(data_a), std::move(data_b));
  if (resume) state.load_checkpoint(*resume);

  fs::create_directories(out / "checkpoints");
  {
    std::ofstream cf(out / "config.json", std::ios::trunc);
    cf << cfg.to_json().dump(2) << '\n';
  }
  TrainResult result;
  result.metrics = out / "metrics.jsonl";
  std::ofstream metrics(result.metrics, resume ? std::ios::app : std::ios::trunc);
  if (!metrics) throw RuntimeFailure("cannot write " + result.metrics.string());

  const auto total = static_cast<std::uint64_t>(cfg.steps);
  while (state.current_step() < total) {
    const auto report = state.step();
    const auto step = state.current_step();
    json line = report.to_json();
    line["step"] = step;
    metrics << line.dump() << '\n';
    if (step % static_cast<std::uint64_t>(cfg.checkpoint_every) == 0 || step == total) {
      metrics.flush();
      const auto path = checkpoint_name(out, step);
      state.save_checkpoint(path);
      result.checkpoints.push_back(path);
    }
  }
  if (result.checkpoints.empty()) {
    // Resumed at or beyond the requested step count: the resume point is the final state.
    const auto path = checkpoint_name(out, state.current_step());
    state.save_checkpoint(path);
    result.checkpoints.push_back(path);
  }
  result.final_checkpoint = result.checkpoints.back();
  return result;
}

}  // namespace rift::trainer
