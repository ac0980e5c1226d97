#include "rift/evaluate.hpp"

#include <algorithm>
#include <random>

#include "rift/trainer.hpp"

namespace rift::evaluate {

namespace fs = std::filesystem;
using datagen::AttributeVector;

BundleModel::BundleModel(model::ModelBundle bundle) : bundle_(std::move(bundle)) { bundle_->eval(); }

Tensor BundleModel::encode(Domain domain, const Tensor& images) {
  torch::NoGradGuard no_grad;
  return bundle_->encode(domain, images);
}

Tensor BundleModel::translate(Direction direction, const Tensor& source, const Tensor& embedding) {
  torch::NoGradGuard no_grad;
  return bundle_->translate(direction, source, embedding);
}

Tensor snap_to_prototypes(const Tensor& images) {
  auto out = torch::empty_like(images);
  for (std::int64_t i = 0; i < images.size(0); ++i) {
    const auto img = trainer::to_image(images[i]);
    const auto proto = datagen::render(datagen::attribute_oracle(img), img.height, img.width);
    out[i].copy_(trainer::to_tensor({proto})[0]);
  }
  return out;
}

Tensor SourceCopyModel::encode(Domain, const Tensor& images) { return images; }
Tensor SourceCopyModel::translate(Direction, const Tensor& source, const Tensor&) { return snap_to_prototypes(source); }

Tensor GuideCopyModel::encode(Domain, const Tensor& images) { return images.clone(); }
Tensor GuideCopyModel::translate(Direction, const Tensor& source, const Tensor& embedding) {
  if (embedding.sizes() != source.sizes()) throw RuntimeFailure("guide-copy model: embedding is not an image batch");
  return embedding.clone();
}

DomainData load_domain(const datagen::DatasetManifest& manifest, const fs::path& dir, Domain domain) {
  DomainData d;
  d.images = trainer::to_tensor(datagen::load_images(manifest, dir, domain));
  for (const auto* r : manifest.domain_records(domain)) d.attributes.push_back(r->attributes);
  return d;
}

DomainData render_domain(const datagen::DatasetManifest& manifest, Domain domain) {
  DomainData d;
  std::vector<datagen::ImageGrid> imgs;
  for (const auto* r : manifest.domain_records(domain)) {
    imgs.push_back(datagen::render(r->attributes, manifest.split.height, manifest.split.width));
    d.attributes.push_back(r->attributes);
  }
  d.images = trainer::to_tensor(imgs);
  return d;
}

json EvalResult::to_json() const {
  auto mean = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"split_id", table.split_id},
          {"n_records", records.size()},
          {"table", table.to_json()},
          {"aggregate", aggregate.to_json()},
          {"rand", {{"table", rand_table.to_json()}, {"aggregate", rand_aggregate.to_json()}}},
          {"summary",
           {{"shared_mean", mean(evalkit::mean_accuracy(table, true))},
            {"specific_mean", mean(evalkit::mean_accuracy(table, false))},
            {"rand_shared_mean", mean(evalkit::mean_accuracy(rand_table, true))},
            {"rand_specific_mean", mean(evalkit::mean_accuracy(rand_table, false))}}}};
}

EvalResult evaluate(GuidedModel& model, const datagen::DatasetManifest& manifest, const DomainData& a,
                    const DomainData& b, const EvalOptions& options) {
  if (options.guides_per_source < 1) throw ConfigError("evaluate: guides per source must be >= 1");
  if (options.batch < 1) throw ConfigError("evaluate: batch must be >= 1");
  EvalResult result;
  for (const Direction dir : {Direction::A2B, Direction::B2A}) {
    const auto& src = dir == Direction::A2B ? a : b;
    const auto& tgt = dir == Direction::A2B ? b : a;
    const auto n_src = src.images.size(0);
    const auto n_tgt = tgt.images.size(0);
    if (n_src == 0 || n_tgt == 0) throw ConfigError("evaluate: manifest has an empty domain");
    const int k = static_cast<int>(std::min<std::int64_t>(options.guides_per_source, n_tgt));

    std::mt19937_64 rng(mix_seed(options.seed, {0xE7A1, static_cast<std::uint64_t>(dir)}));
    std::vector<std::pair<std::int64_t, std::int64_t>> pairs;
    for (std::int64_t s = 0; s < n_src; ++s) {
      std::vector<std::int64_t> chosen;
      while (static_cast<int>(chosen.size()) < k) {
        const auto g = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(n_tgt));
        if (std::find(chosen.begin(), chosen.end(), g) == chosen.end()) chosen.push_back(g);
      }
      for (const auto g : chosen) pairs.emplace_back(s, g);
    }

    for (std::size_t start = 0; start < pairs.size(); start += static_cast<std::size_t>(options.batch)) {
      const auto end = std::min(pairs.size(), start + static_cast<std::size_t>(options.batch));
      std::vector<std::int64_t> si, gi;
      for (std::size_t i = start; i < end; ++i) {
        si.push_back(pairs[i].first);
        gi.push_back(pairs[i].second);
      }
      const auto s_idx = torch::tensor(si, torch::kInt64);
      const auto g_idx = torch::tensor(gi, torch::kInt64);
      const auto out = model.guided_translate(dir, src.images.index_select(0, s_idx), tgt.images.index_select(0, g_idx));
      for (std::size_t i = 0; i < si.size(); ++i) {
        const auto decoded = datagen::attribute_oracle(trainer::to_image(out[static_cast<std::int64_t>(i)]));
        result.records.push_back({src.attributes[static_cast<std::size_t>(si[i])],
                                  tgt.attributes[static_cast<std::size_t>(gi[i])], decoded, dir});
      }
    }
  }
  result.table = evalkit::accuracy_table(result.records, manifest.split.attributes, manifest.split.split_id);
  result.aggregate = evalkit::aggregate({result.table});
  result.rand_table = evalkit::rand_baseline(manifest, options.rand_trials, options.seed);
  result.rand_aggregate = evalkit::aggregate({result.rand_table});
  return result;
}

EvalResult evaluate_checkpoint(const fs::path& checkpoint, const fs::path& data, const EvalOptions& options) {
  auto bundle = trainer::load_bundle(checkpoint);
  const auto manifest = datagen::read_dataset(data);
  if (bundle->arch.height != manifest.split.height || bundle->arch.width != manifest.split.width)
    throw ConfigError("resolution mismatch: checkpoint is " + std::to_string(bundle->arch.height) + "x" +
                      std::to_string(bundle->arch.width) + ", dataset is " + std::to_string(manifest.split.height) +
                      "x" + std::to_string(manifest.split.width));
  BundleModel model(std::move(bundle));
  return evaluate(model, manifest, load_domain(manifest, data, Domain::A), load_domain(manifest, data, Domain::B),
                  options);
}

}  // namespace rift::evaluate
