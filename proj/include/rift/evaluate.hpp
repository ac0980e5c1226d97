#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "json.hpp"
#include "rift/datagen.hpp"
#include "rift/evalkit.hpp"
#include "rift/model.hpp"

namespace rift::evaluate {

using json = nlohmann::json;
using torch::Tensor;

/// Guided translator seen as an encoder plus a generator. Embeddings are opaque to callers, which
/// lets hand-written reference translators stand in for a trained bundle.
class GuidedModel {
 public:
  virtual ~GuidedModel() = default;
  /// Embedding of guide images of `domain` (N, C, H, W) -> (N, ...).
  virtual Tensor encode(Domain domain, const Tensor& images) = 0;
  virtual Tensor translate(Direction direction, const Tensor& source, const Tensor& embedding) = 0;

  Tensor guided_translate(Direction direction, const Tensor& source, const Tensor& guide) {
    return translate(direction, source, encode(target_domain(direction), guide));
  }
};

/// Trained networks, evaluated without channel noise.
class BundleModel final : public GuidedModel {
 public:
  explicit BundleModel(model::ModelBundle bundle);
  Tensor encode(Domain domain, const Tensor& images) override;
  Tensor translate(Direction direction, const Tensor& source, const Tensor& embedding) override;
  [[nodiscard]] model::ModelBundle& bundle() noexcept { return bundle_; }

 private:
  model::ModelBundle bundle_;
};

/// Returns the source, snapped to the nearest clean render so small perturbations are removed.
class SourceCopyModel final : public GuidedModel {
 public:
  Tensor encode(Domain domain, const Tensor& images) override;
  Tensor translate(Direction direction, const Tensor& source, const Tensor& embedding) override;
};

/// Returns the guide verbatim (the embedding is the guide image itself).
class GuideCopyModel final : public GuidedModel {
 public:
  Tensor encode(Domain domain, const Tensor& images) override;
  Tensor translate(Direction direction, const Tensor& source, const Tensor& embedding) override;
};

/// render(attribute_oracle(x)) for every image in the batch.
[[nodiscard]] Tensor snap_to_prototypes(const Tensor& images);

/// Images of both domains as tensors, in manifest order, plus their attributes.
struct DomainData {
  Tensor images;
  std::vector<datagen::AttributeVector> attributes;
};

[[nodiscard]] DomainData load_domain(const datagen::DatasetManifest& manifest, const std::filesystem::path& dir,
                                     Domain domain);
/// Renders the manifest's attribute vectors directly (same pixels as the stored files).
[[nodiscard]] DomainData render_domain(const datagen::DatasetManifest& manifest, Domain domain);

struct EvalOptions {
  int guides_per_source = 2;
  std::uint64_t seed = 0;
  int rand_trials = 10000;
  int batch = 64;
};

struct EvalResult {
  std::vector<evalkit::TranslationRecord> records;
  evalkit::AccuracyTable table;
  evalkit::AggregateReport aggregate;
  evalkit::AccuracyTable rand_table;
  evalkit::AggregateReport rand_aggregate;

  [[nodiscard]] json to_json() const;
};

/// Every source of each direction is translated with `guides_per_source` distinct guides drawn
/// uniformly without replacement from the target domain; outputs are decoded by the oracle.
[[nodiscard]] EvalResult evaluate(GuidedModel& model, const datagen::DatasetManifest& manifest, const DomainData& a,
                                  const DomainData& b, const EvalOptions& options);

/// Loads the checkpoint and dataset; rejects resolution mismatches.
[[nodiscard]] EvalResult evaluate_checkpoint(const std::filesystem::path& checkpoint, const std::filesystem::path& data,
                                             const EvalOptions& options);

}  // namespace rift::evaluate
