#include "rift/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <set>

#include "rift/image_io.hpp"

namespace rift::datagen {

namespace fs = std::filesystem;

double mean_l1(const ImageGrid& x, const ImageGrid& y) {
  if (x.height != y.height || x.width != y.width || x.channels != y.channels)
    throw RuntimeFailure("mean_l1: image shapes differ");
  if (x.data.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) acc += std::abs(static_cast<double>(x.data[i]) - y.data[i]);
  return acc / static_cast<double>(x.data.size());
}

// ----------------------------------------------------------------------
// Attributes
// ----------------------------------------------------------------------

const char* to_string(Role r) noexcept {
  switch (r) {
    case Role::shared: return "shared";
    case Role::specific_A: return "specific_A";
    case Role::specific_B: return "specific_B";
  }
  return "?";
}

Role parse_role(const std::string& s) {
  if (s == "shared") return Role::shared;
  if (s == "specific_A") return Role::specific_A;
  if (s == "specific_B") return Role::specific_B;
  throw ConfigError("unknown attribute role '" + s + "'");
}

void AttributeSpec::validate() const {
  if (name.empty()) throw ConfigError("attribute with empty name");
  if (kind == AttributeKind::categorical && arity < 2)
    throw ConfigError("attribute '" + name + "': categorical arity must be >= 2");
  if (kind == AttributeKind::real && dim < 1) throw ConfigError("attribute '" + name + "': real dim must be >= 1");
}

const AttributeValue& AttributeVector::get(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw ConfigError("attribute '" + name + "' missing from attribute vector");
  return it->second;
}

int AttributeVector::category(const std::string& name) const {
  const auto& v = get(name);
  if (!std::holds_alternative<int>(v)) throw ConfigError("attribute '" + name + "' is not categorical");
  return std::get<int>(v);
}

const std::vector<double>& AttributeVector::real(const std::string& name) const {
  const auto& v = get(name);
  if (!std::holds_alternative<std::vector<double>>(v)) throw ConfigError("attribute '" + name + "' is not real-valued");
  return std::get<std::vector<double>>(v);
}

json AttributeVector::to_json() const {
  json j = json::object();
  for (const auto& [k, v] : values_) {
    if (std::holds_alternative<int>(v))
      j[k] = std::get<int>(v);
    else
      j[k] = std::get<std::vector<double>>(v);
  }
  return j;
}

namespace {
AttributeValue value_from_json(const std::string& key, const json& v) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_array()) return v.get<std::vector<double>>();
  throw ConfigError("attribute '" + key + "': value must be an integer index or an array of reals");
}

json value_to_json(const AttributeValue& v) {
  if (std::holds_alternative<int>(v)) return std::get<int>(v);
  return std::get<std::vector<double>>(v);
}
}  // namespace

AttributeVector AttributeVector::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("attribute vector must be a JSON object");
  AttributeVector out;
  for (const auto& [k, v] : j.items()) out.set(k, value_from_json(k, v));
  return out;
}

namespace {
void check_value(const AttributeSpec& spec, const AttributeValue& v) {
  if (spec.kind == AttributeKind::categorical) {
    if (!std::holds_alternative<int>(v)) throw ConfigError("attribute '" + spec.name + "' must be a categorical index");
    const int idx = std::get<int>(v);
    if (idx < 0 || idx >= spec.arity)
      throw ConfigError("attribute '" + spec.name + "': index " + std::to_string(idx) + " outside [0, " +
                        std::to_string(spec.arity) + ")");
  } else {
    if (!std::holds_alternative<std::vector<double>>(v))
      throw ConfigError("attribute '" + spec.name + "' must be a real vector");
    if (static_cast<int>(std::get<std::vector<double>>(v).size()) != spec.dim)
      throw ConfigError("attribute '" + spec.name + "': expected dim " + std::to_string(spec.dim));
  }
}
}  // namespace

void check_against(const AttributeVector& v, const std::vector<AttributeSpec>& specs) {
  for (const auto& [k, _] : v.values()) {
    const bool known = std::any_of(specs.begin(), specs.end(), [&](const AttributeSpec& s) { return s.name == k; });
    if (!known) throw ConfigError("unknown attribute '" + k + "'");
  }
  for (const auto& s : specs) check_value(s, v.get(s.name));
}

// ----------------------------------------------------------------------
// Canonical set and renderer
// ----------------------------------------------------------------------

namespace canonical {

namespace {
constexpr std::array<std::array<std::uint8_t, 3>, kNumColors> cube(std::uint8_t lo, std::uint8_t hi) {
  std::array<std::array<std::uint8_t, 3>, kNumColors> out{};
  for (int i = 0; i < kNumColors; ++i) {
    out[i] = {(i & 4) ? hi : lo, (i & 2) ? hi : lo, (i & 1) ? hi : lo};
  }
  return out;
}
}  // namespace

const std::array<std::array<std::uint8_t, 3>, kNumColors> kBackgroundPalette = cube(0, 90);
const std::array<std::array<std::uint8_t, 3>, kNumColors> kObjectPalette = cube(165, 255);

std::vector<AttributeSpec> attributes() {
  return {
      {kBackground, AttributeKind::categorical, kNumColors, 0, Role::shared},
      {kObjectColor, AttributeKind::categorical, kNumColors, 0, Role::shared},
      {kShape, AttributeKind::categorical, kNumShapes, 0, Role::shared},
      {kSize, AttributeKind::categorical, kNumSizes, 0, Role::shared},
      {kPosition, AttributeKind::categorical, kNumPositions, 0, Role::shared},
  };
}

AttributeVector make(int bg, int object_color, int shape, int size, int position) {
  return AttributeVector{{kBackground, bg},
                         {kObjectColor, object_color},
                         {kShape, shape},
                         {kSize, size},
                         {kPosition, position}};
}

std::vector<AttributeVector> enumerate_grid() {
  std::vector<AttributeVector> out;
  out.reserve(kGridSize);
  for (int bg = 0; bg < kNumColors; ++bg)
    for (int oc = 0; oc < kNumColors; ++oc)
      for (int sh = 0; sh < kNumShapes; ++sh)
        for (int sz = 0; sz < kNumSizes; ++sz)
          for (int p = 0; p < kNumPositions; ++p) out.push_back(make(bg, oc, sh, sz, p));
  return out;
}

}  // namespace canonical

namespace {

// Geometry is laid out on a 32x32 reference canvas and scaled to the target resolution.
constexpr std::array<double, canonical::kNumSizes> kHalfExtent = {3.0, 4.5, 6.0, 7.5};
constexpr double kPositionStep = 3.5;

bool covers(int shape, double dx, double dy, double r) {
  switch (shape) {
    case 0: return std::abs(dx) <= r && std::abs(dy) <= r;  // square
    case 1: return dx * dx + dy * dy <= r * r;                // circle
    default: return dy >= -r && dy <= r && std::abs(dx) <= (dy + r) / 2.0;  // triangle, apex up
  }
}

float to_unit(std::uint8_t u) { return io::dequantize(u); }

}  // namespace

std::vector<bool> object_mask(int shape, int size, int position, int height, int width) {
  const double sx = width / 32.0, sy = height / 32.0, s = std::min(sx, sy);
  const double cx = width / 2.0 + (position - 2) * kPositionStep * sx;
  const double cy = height / 2.0;
  const double r = kHalfExtent[static_cast<std::size_t>(size)] * s;
  std::vector<bool> mask(static_cast<std::size_t>(height) * width, false);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      mask[static_cast<std::size_t>(y) * width + x] = covers(shape, x + 0.5 - cx, y + 0.5 - cy, r);
  return mask;
}

void check_resolution(int height, int width) {
  if (height < 8 || width < 8) throw ConfigError("resolution must be at least 8x8");
  std::map<std::vector<bool>, std::array<int, 3>> seen;
  for (int sh = 0; sh < canonical::kNumShapes; ++sh)
    for (int sz = 0; sz < canonical::kNumSizes; ++sz)
      for (int p = 0; p < canonical::kNumPositions; ++p) {
        const auto [it, fresh] = seen.emplace(object_mask(sh, sz, p, height, width), std::array<int, 3>{sh, sz, p});
        if (!fresh) {
          const auto& o = it->second;
          throw ConfigError("resolution " + std::to_string(height) + "x" + std::to_string(width) +
                            " cannot separate object geometries (shape/size/position " + std::to_string(o[0]) + "/" +
                            std::to_string(o[1]) + "/" + std::to_string(o[2]) + " and " + std::to_string(sh) + "/" +
                            std::to_string(sz) + "/" + std::to_string(p) + " render identically)");
        }
      }
}

ImageGrid render(const AttributeVector& attrs, int height, int width) {
  if (height < 8 || width < 8) throw ConfigError("render: resolution must be at least 8x8");
  check_against(attrs, canonical::attributes());
  const auto& bg = canonical::kBackgroundPalette[static_cast<std::size_t>(attrs.category(canonical::kBackground))];
  const auto& fg = canonical::kObjectPalette[static_cast<std::size_t>(attrs.category(canonical::kObjectColor))];
  const auto mask = object_mask(attrs.category(canonical::kShape), attrs.category(canonical::kSize),
                                attrs.category(canonical::kPosition), height, width);
  ImageGrid img(height, width, 3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const auto& col = mask[static_cast<std::size_t>(y) * width + x] ? fg : bg;
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = to_unit(col[static_cast<std::size_t>(c)]);
    }
  return img;
}

// ----------------------------------------------------------------------
// Oracle
// ----------------------------------------------------------------------

AttributeOracle::AttributeOracle(int height, int width) : height_(height), width_(width) {
  check_resolution(height, width);
  for (int sh = 0; sh < canonical::kNumShapes; ++sh)
    for (int sz = 0; sz < canonical::kNumSizes; ++sz)
      for (int p = 0; p < canonical::kNumPositions; ++p) {
        Geometry g{sh, sz, p, {}};
        const auto mask = object_mask(sh, sz, p, height, width);
        for (std::size_t i = 0; i < mask.size(); ++i)
          if (mask[i]) g.inside.push_back(static_cast<std::uint32_t>(i));
        geometries_.push_back(std::move(g));
      }
}

AttributeVector AttributeOracle::decode(const ImageGrid& img) const {
  if (img.height != height_ || img.width != width_ || img.channels != 3)
    throw RuntimeFailure("oracle: image shape does not match oracle resolution");
  constexpr int K = canonical::kNumColors;
  const std::size_t n = img.pixels();
  // Per-pixel L1 distance to every palette color; the L1 cost of a full prototype then splits
  // into an object part (pixels inside the mask) and a background part (the rest).
  std::vector<double> d_bg(K * n), d_obj(K * n);
  std::array<double, K> total_bg{};
  for (int k = 0; k < K; ++k) {
    const auto& bg = canonical::kBackgroundPalette[static_cast<std::size_t>(k)];
    const auto& fg = canonical::kObjectPalette[static_cast<std::size_t>(k)];
    for (std::size_t p = 0; p < n; ++p) {
      double db = 0.0, dobj = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double v = img.data[p * 3 + static_cast<std::size_t>(c)];
        db += std::abs(v - to_unit(bg[static_cast<std::size_t>(c)]));
        dobj += std::abs(v - to_unit(fg[static_cast<std::size_t>(c)]));
      }
      d_bg[k * n + p] = db;
      d_obj[k * n + p] = dobj;
      total_bg[k] += db;
    }
  }

  double best = std::numeric_limits<double>::infinity();
  AttributeVector result;
  for (const auto& g : geometries_) {
    std::array<double, K> in_bg{}, in_obj{};
    for (int k = 0; k < K; ++k) {
      double sb = 0.0, so = 0.0;
      for (auto p : g.inside) {
        sb += d_bg[k * n + p];
        so += d_obj[k * n + p];
      }
      in_bg[k] = sb;
      in_obj[k] = so;
    }
    int best_bg = 0, best_obj = 0;
    for (int k = 1; k < K; ++k) {
      if (total_bg[k] - in_bg[k] < total_bg[best_bg] - in_bg[best_bg]) best_bg = k;
      if (in_obj[k] < in_obj[best_obj]) best_obj = k;
    }
    const double cost = (total_bg[best_bg] - in_bg[best_bg]) + in_obj[best_obj];
    if (cost < best) {
      best = cost;
      result = canonical::make(best_bg, best_obj, g.shape, g.size, g.position);
    }
  }
  return result;
}

AttributeVector attribute_oracle(const ImageGrid& img) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::unique_ptr<AttributeOracle>> cache;
  const AttributeOracle* oracle = nullptr;
  {
    std::lock_guard lock(mu);
    auto& slot = cache[{img.height, img.width}];
    if (!slot) slot = std::make_unique<AttributeOracle>(img.height, img.width);
    oracle = slot.get();
  }
  return oracle->decode(img);
}

// ----------------------------------------------------------------------
// Splits
// ----------------------------------------------------------------------

void SplitConfig::validate() const {
  if (split_id.empty()) throw ConfigError("split config: split_id is empty");
  if (attributes.empty()) throw ConfigError("split config: no attributes");
  std::set<std::string> names;
  for (const auto& a : attributes) {
    a.validate();
    if (!names.insert(a.name).second) throw ConfigError("split config: duplicate attribute '" + a.name + "'");
    const bool needs_fixed = a.role != Role::shared;
    const auto it = fixed_values.find(a.name);
    if (needs_fixed && it == fixed_values.end())
      throw ConfigError("split config: attribute '" + a.name + "' is " + to_string(a.role) +
                        " but has no fixed value for the other domain");
    if (!needs_fixed && it != fixed_values.end())
      throw ConfigError("split config: shared attribute '" + a.name + "' must not have a fixed value");
    if (it != fixed_values.end()) check_value(a, it->second);
  }
  for (const auto& [k, _] : fixed_values)
    if (!names.count(k)) throw ConfigError("split config: fixed value for unknown attribute '" + k + "'");
  if (n_a < 1 || n_b < 1) throw ConfigError("split config: domain sizes must be >= 1");
  check_resolution(height, width);
}

const AttributeSpec& SplitConfig::attribute(const std::string& name) const {
  for (const auto& a : attributes)
    if (a.name == name) return a;
  throw ConfigError("split config: unknown attribute '" + name + "'");
}

json SplitConfig::to_json() const {
  json attrs = json::array();
  for (const auto& a : attributes) attrs.push_back(spec_to_json(a));
  json fixed = json::object();
  for (const auto& [k, v] : fixed_values) fixed[k] = value_to_json(v);
  return {{"split_id", split_id},   {"attributes", attrs},           {"fixed_values", fixed},
          {"domain_sizes", {n_a, n_b}}, {"resolution", {height, width}}, {"seed", seed}};
}

namespace {
void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [k, _] : j.items()) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; });
    if (!ok) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}
}  // namespace

json spec_to_json(const AttributeSpec& a) {
  json ja = {{"name", a.name}, {"role", to_string(a.role)}};
  if (a.kind == AttributeKind::categorical) {
    ja["kind"] = "categorical";
    ja["arity"] = a.arity;
  } else {
    ja["kind"] = "real";
    ja["dim"] = a.dim;
  }
  return ja;
}

AttributeSpec spec_from_json(const json& ja) {
  reject_unknown_keys(ja, {"name", "kind", "arity", "dim", "role"}, "attribute");
  AttributeSpec a;
  try {
    a.name = ja.at("name").get<std::string>();
    const auto kind = ja.at("kind").get<std::string>();
    if (kind == "categorical") {
      a.kind = AttributeKind::categorical;
      a.arity = ja.at("arity").get<int>();
    } else if (kind == "real") {
      a.kind = AttributeKind::real;
      a.dim = ja.at("dim").get<int>();
    } else {
      throw ConfigError("attribute '" + a.name + "': unknown kind '" + kind + "'");
    }
    a.role = parse_role(ja.at("role").get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("attribute: ") + e.what());
  }
  return a;
}

SplitConfig SplitConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("split config must be a JSON object");
  reject_unknown_keys(j, {"split_id", "attributes", "fixed_values", "domain_sizes", "resolution", "seed"},
                      "split config");
  SplitConfig cfg;
  try {
    cfg.split_id = j.at("split_id").get<std::string>();
    for (const auto& ja : j.at("attributes")) cfg.attributes.push_back(spec_from_json(ja));
    if (j.contains("fixed_values"))
      for (const auto& [k, v] : j.at("fixed_values").items()) cfg.fixed_values[k] = value_from_json(k, v);
    const auto sizes = j.at("domain_sizes").get<std::vector<int>>();
    const auto res = j.at("resolution").get<std::vector<int>>();
    if (sizes.size() != 2 || res.size() != 2) throw ConfigError("domain_sizes and resolution need two entries");
    cfg.n_a = sizes[0];
    cfg.n_b = sizes[1];
    cfg.height = res[0];
    cfg.width = res[1];
    cfg.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("split config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

SplitConfig stock_split(const std::string& id) {
  using namespace canonical;
  SplitConfig cfg;
  cfg.split_id = id;
  cfg.attributes = attributes();
  auto set_role = [&](const char* name, Role r) {
    for (auto& a : cfg.attributes)
      if (a.name == name) a.role = r;
  };
  if (id == "A") {
    set_role(kBackground, Role::specific_A);
    set_role(kPosition, Role::specific_B);
    cfg.fixed_values = {{kBackground, 0}, {kPosition, 2}};
  } else if (id == "B") {
    set_role(kObjectColor, Role::specific_A);
    set_role(kShape, Role::specific_B);
    cfg.fixed_values = {{kObjectColor, 0}, {kShape, 0}};
  } else if (id == "C") {
    set_role(kBackground, Role::specific_B);
    set_role(kSize, Role::specific_A);
    cfg.fixed_values = {{kBackground, 0}, {kSize, 1}};
  } else {
    throw ConfigError("unknown stock split '" + id + "' (expected A, B or C)");
  }
  cfg.n_a = static_cast<int>(allowed_combinations(cfg, Domain::A));
  cfg.n_b = static_cast<int>(allowed_combinations(cfg, Domain::B));
  cfg.validate();
  return cfg;
}

namespace {

std::vector<AttributeVector> enumerate_domain(const SplitConfig& cfg, Domain domain) {
  std::vector<AttributeVector> out{AttributeVector{}};
  for (const auto& a : cfg.attributes) {
    if (a.kind != AttributeKind::categorical)
      throw ConfigError("attribute '" + a.name + "': only categorical attributes can be enumerated for rendering");
    std::vector<AttributeVector> next;
    if (varies_in(a.role, domain)) {
      next.reserve(out.size() * static_cast<std::size_t>(a.arity));
      for (const auto& base : out)
        for (int v = 0; v < a.arity; ++v) {
          auto x = base;
          x.set(a.name, v);
          next.push_back(std::move(x));
        }
    } else {
      next = out;
      for (auto& x : next) x.set(a.name, cfg.fixed_values.at(a.name));
    }
    out = std::move(next);
  }
  return out;
}

// Fisher-Yates with a plain modulo draw so the permutation is identical across standard libraries.
template <class T>
void seeded_shuffle(std::vector<T>& v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

std::string image_name(Domain d, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "images/%s_%05zu.png", to_string(d), i);
  return buf;
}

}  // namespace

std::size_t allowed_combinations(const SplitConfig& cfg, Domain domain) {
  std::size_t n = 1;
  for (const auto& a : cfg.attributes) {
    if (a.kind != AttributeKind::categorical)
      throw ConfigError("attribute '" + a.name + "': only categorical attributes can be enumerated for rendering");
    if (varies_in(a.role, domain)) n *= static_cast<std::size_t>(a.arity);
  }
  return n;
}

std::vector<const ManifestRecord*> DatasetManifest::domain_records(Domain d) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records)
    if (r.domain == d) out.push_back(&r);
  return out;
}

DatasetManifest build_split(const SplitConfig& cfg) {
  cfg.validate();
  // Rendering requires exactly the canonical attribute set.
  {
    AttributeVector probe;
    for (const auto& a : cfg.attributes) probe.set(a.name, 0);
    check_against(probe, canonical::attributes());
    if (cfg.attributes.size() != canonical::attributes().size())
      throw ConfigError("split config must declare every canonical attribute");
    for (const auto& a : cfg.attributes) {
      const auto canon = canonical::attributes();
      const auto it = std::find_if(canon.begin(), canon.end(), [&](const AttributeSpec& c) { return c.name == a.name; });
      if (a.kind != it->kind || a.arity != it->arity)
        throw ConfigError("attribute '" + a.name + "' must keep its canonical arity " + std::to_string(it->arity));
    }
  }
  DatasetManifest m;
  m.split = cfg;
  for (Domain d : {Domain::A, Domain::B}) {
    const std::size_t want = static_cast<std::size_t>(d == Domain::A ? cfg.n_a : cfg.n_b);
    auto combos = enumerate_domain(cfg, d);
    if (want > combos.size())
      throw ConfigError(std::string("domain ") + to_string(d) + ": requested " + std::to_string(want) +
                        " images but only " + std::to_string(combos.size()) + " distinct attribute combinations exist");
    seeded_shuffle(combos, mix_seed(cfg.seed, {static_cast<std::uint64_t>(d == Domain::A ? 0 : 1)}));
    for (std::size_t i = 0; i < want; ++i) m.records.push_back({image_name(d, i), d, std::move(combos[i])});
  }
  return m;
}

json ManifestRecord::to_json() const {
  return {{"path", image_path}, {"domain", rift::to_string(domain)}, {"attributes", attributes.to_json()}};
}

ManifestRecord ManifestRecord::from_json(const json& j) {
  try {
    return {j.at("path").get<std::string>(), parse_domain(j.at("domain").get<std::string>()),
            AttributeVector::from_json(j.at("attributes"))};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest record: ") + e.what());
  }
}

void write_dataset(const DatasetManifest& manifest, const fs::path& out) {
  fs::create_directories(out / "images");
  // Drop stale renders from earlier runs with larger domains so reruns are idempotent.
  for (const auto& e : fs::directory_iterator(out / "images")) {
    const auto name = e.path().filename().string();
    if (e.path().extension() == ".png" && name.size() > 2 && (name[0] == 'A' || name[0] == 'B') && name[1] == '_')
      fs::remove(e.path());
  }
  std::ofstream mf(out / "manifest.jsonl", std::ios::trunc);
  if (!mf) throw RuntimeFailure("cannot write " + (out / "manifest.jsonl").string());
  for (const auto& r : manifest.records) {
    io::write_png(out / r.image_path, render(r.attributes, manifest.split.height, manifest.split.width));
    mf << r.to_json().dump() << '\n';
  }
  std::ofstream cf(out / "split_config.json", std::ios::trunc);
  cf << manifest.split.to_json().dump(2) << '\n';
}

DatasetManifest read_dataset(const fs::path& dir) {
  const auto cfg_path = dir / "split_config.json";
  const auto man_path = dir / "manifest.jsonl";
  if (!fs::exists(cfg_path) || !fs::exists(man_path))
    throw ConfigError("dataset missing: expected " + cfg_path.string() + " and " + man_path.string());
  DatasetManifest m;
  {
    std::ifstream in(cfg_path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ConfigError("cannot parse " + cfg_path.string() + ": " + e.what());
    }
    m.split = SplitConfig::from_json(j);
  }
  std::ifstream in(man_path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError(man_path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    auto rec = ManifestRecord::from_json(j);
    check_against(rec.attributes, m.split.attributes);
    m.records.push_back(std::move(rec));
  }
  return m;
}

std::vector<ImageGrid> load_images(const DatasetManifest& manifest, const fs::path& dir, Domain domain) {
  std::vector<ImageGrid> out;
  for (const auto* r : manifest.domain_records(domain)) {
    auto img = io::read_png(dir / r->image_path);
    if (img.height != manifest.split.height || img.width != manifest.split.width || img.channels != 3)
      throw RuntimeFailure("image " + r->image_path + " does not match the declared resolution");
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace rift::datagen
