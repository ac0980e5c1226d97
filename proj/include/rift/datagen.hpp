#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "rift/common.hpp"

namespace rift::datagen {

using json = nlohmann::json;

// ----------------------------------------------------------------------
// Images
// ----------------------------------------------------------------------

/// H x W x C image, row-major with interleaved channels, values in [-1, 1].
struct ImageGrid {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  ImageGrid() = default;
  ImageGrid(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

  [[nodiscard]] float& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  [[nodiscard]] float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  [[nodiscard]] std::size_t pixels() const noexcept { return static_cast<std::size_t>(height) * width; }
  friend bool operator==(const ImageGrid&, const ImageGrid&) = default;
};

/// Mean absolute difference over all elements. Shapes must agree.
[[nodiscard]] double mean_l1(const ImageGrid& x, const ImageGrid& y);

// ----------------------------------------------------------------------
// Attributes
// ----------------------------------------------------------------------

enum class AttributeKind { categorical, real };
enum class Role { shared, specific_A, specific_B };

[[nodiscard]] const char* to_string(Role r) noexcept;
[[nodiscard]] Role parse_role(const std::string& s);

/// Does the attribute vary inside `domain` under this role?
[[nodiscard]] constexpr bool varies_in(Role r, Domain d) noexcept {
  return r == Role::shared || (r == Role::specific_A && d == Domain::A) ||
         (r == Role::specific_B && d == Domain::B);
}

struct AttributeSpec {
  std::string name;
  AttributeKind kind = AttributeKind::categorical;
  int arity = 0;  // categorical only
  int dim = 0;    // real only
  Role role = Role::shared;

  void validate() const;
  friend bool operator==(const AttributeSpec&, const AttributeSpec&) = default;
};

using AttributeValue = std::variant<int, std::vector<double>>;

/// Concrete assignment of attribute values, keyed by attribute name.
class AttributeVector {
 public:
  AttributeVector() = default;
  AttributeVector(std::initializer_list<std::pair<const std::string, AttributeValue>> init) : values_(init) {}

  void set(const std::string& name, AttributeValue v) { values_[name] = std::move(v); }
  [[nodiscard]] bool contains(const std::string& name) const { return values_.count(name) != 0; }
  [[nodiscard]] const AttributeValue& get(const std::string& name) const;
  [[nodiscard]] int category(const std::string& name) const;
  [[nodiscard]] const std::vector<double>& real(const std::string& name) const;
  [[nodiscard]] const std::map<std::string, AttributeValue>& values() const noexcept { return values_; }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

  [[nodiscard]] json to_json() const;
  [[nodiscard]] static AttributeVector from_json(const json& j);

  friend bool operator==(const AttributeVector&, const AttributeVector&) = default;
  friend bool operator<(const AttributeVector& a, const AttributeVector& b) { return a.values_ < b.values_; }

 private:
  std::map<std::string, AttributeValue> values_;
};

/// {"name", "kind", "arity" | "dim", "role"}; unknown keys are rejected.
[[nodiscard]] json spec_to_json(const AttributeSpec& a);
[[nodiscard]] AttributeSpec spec_from_json(const json& j);

/// Throws ConfigError if `v` does not match `specs` exactly (keys, arity, dims).
void check_against(const AttributeVector& v, const std::vector<AttributeSpec>& specs);

// ----------------------------------------------------------------------
// Canonical toy attribute set and renderer
// ----------------------------------------------------------------------

namespace canonical {
inline constexpr const char* kBackground = "bg_color";
inline constexpr const char* kObjectColor = "object_color";
inline constexpr const char* kShape = "shape";
inline constexpr const char* kSize = "size";
inline constexpr const char* kPosition = "position";

inline constexpr int kNumColors = 8;
inline constexpr int kNumShapes = 3;  // square, circle, triangle
inline constexpr int kNumSizes = 4;
inline constexpr int kNumPositions = 5;
inline constexpr int kGridSize = kNumColors * kNumColors * kNumShapes * kNumSizes * kNumPositions;  // 3840
inline constexpr int kDefaultResolution = 32;

/// 8-bit palettes. Background levels {0, 90} and object levels {165, 255} per channel,
/// so any two distinct palette entries differ by >= 0.58 in some channel after mapping to [-1, 1].
extern const std::array<std::array<std::uint8_t, 3>, kNumColors> kBackgroundPalette;
extern const std::array<std::array<std::uint8_t, 3>, kNumColors> kObjectPalette;

/// Canonical attribute declarations (roles default to shared).
[[nodiscard]] std::vector<AttributeSpec> attributes();

/// Enumerates the full canonical grid in lexicographic order of
/// (bg_color, object_color, shape, size, position).
[[nodiscard]] std::vector<AttributeVector> enumerate_grid();

[[nodiscard]] AttributeVector make(int bg, int object_color, int shape, int size, int position);
}  // namespace canonical

/// Deterministic procedural render of a canonical attribute vector.
[[nodiscard]] ImageGrid render(const AttributeVector& attrs, int height, int width);

/// Per-pixel object coverage used by `render`; exposed for tests.
[[nodiscard]] std::vector<bool> object_mask(int shape, int size, int position, int height, int width);

/// Rejects resolutions below 8x8 and those at which two object geometries produce the same mask,
/// since the oracle could not tell them apart. Every resolution with both sides >= 32 passes.
void check_resolution(int height, int width);

/// Nearest-prototype decoder over the canonical grid. Exact on clean renders.
class AttributeOracle {
 public:
  AttributeOracle(int height, int width);
  [[nodiscard]] AttributeVector decode(const ImageGrid& img) const;
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] int width() const noexcept { return width_; }

 private:
  struct Geometry {
    int shape, size, position;
    std::vector<std::uint32_t> inside;  // pixel indices covered by the object
  };
  int height_;
  int width_;
  std::vector<Geometry> geometries_;
};

/// Convenience wrapper around a cached AttributeOracle for the image's resolution.
[[nodiscard]] AttributeVector attribute_oracle(const ImageGrid& img);

// ----------------------------------------------------------------------
// Splits and manifests
// ----------------------------------------------------------------------

struct SplitConfig {
  std::string split_id;
  std::vector<AttributeSpec> attributes;
  std::map<std::string, AttributeValue> fixed_values;  // value frozen in the domain where it does not vary
  int n_a = 1;
  int n_b = 1;
  int height = canonical::kDefaultResolution;
  int width = canonical::kDefaultResolution;
  std::uint64_t seed = 0;

  void validate() const;
  [[nodiscard]] const AttributeSpec& attribute(const std::string& name) const;
  [[nodiscard]] json to_json() const;
  [[nodiscard]] static SplitConfig from_json(const json& j);
  friend bool operator==(const SplitConfig&, const SplitConfig&) = default;
};

/// Stock toy splits "A", "B", "C" with every combination of each domain included.
[[nodiscard]] SplitConfig stock_split(const std::string& id);

/// Number of distinct attribute combinations allowed in `domain` under `cfg`.
[[nodiscard]] std::size_t allowed_combinations(const SplitConfig& cfg, Domain domain);

struct ManifestRecord {
  std::string image_path;  // relative to the dataset directory
  Domain domain = Domain::A;
  AttributeVector attributes;

  [[nodiscard]] json to_json() const;
  [[nodiscard]] static ManifestRecord from_json(const json& j);
  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct DatasetManifest {
  SplitConfig split;
  std::vector<ManifestRecord> records;

  [[nodiscard]] std::vector<const ManifestRecord*> domain_records(Domain d) const;
};

/// Samples each domain uniformly without replacement over its allowed combinations.
[[nodiscard]] DatasetManifest build_split(const SplitConfig& cfg);

/// Writes OUT/images/*.png, OUT/manifest.jsonl and OUT/split_config.json.
void write_dataset(const DatasetManifest& manifest, const std::filesystem::path& out);

/// Reads manifest.jsonl + split_config.json (images are loaded separately).
[[nodiscard]] DatasetManifest read_dataset(const std::filesystem::path& dir);

/// Loads every image of `domain` in manifest order; checks the declared resolution.
[[nodiscard]] std::vector<ImageGrid> load_images(const DatasetManifest& manifest, const std::filesystem::path& dir,
                                                 Domain domain);

}  // namespace rift::datagen
