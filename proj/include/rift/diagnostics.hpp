#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "rift/capacity.hpp"
#include "rift/evaluate.hpp"
#include "rift/trainer.hpp"

namespace rift::diagnostics {

using json = nlohmann::json;
using torch::Tensor;

inline const std::vector<double> kDefaultAmplitudes = {0.0, 0.02, 0.05, 0.1, 0.2};
inline constexpr double kHidingEps = 1e-6;

struct ProbeOptions {
  std::vector<double> amplitudes = kDefaultAmplitudes;
  int pairs = 256;    // (source, guide) pairs per direction
  int repeats = 4;    // Monte-Carlo noise draws per amplitude
  std::uint64_t seed = 0;
};

struct ProbeReport {
  std::vector<double> amplitudes;
  std::map<Direction, std::vector<double>> cycle_error;     // mean L1 per amplitude
  std::map<Direction, std::vector<double>> cycle_error_se;  // standard error over the repeats
  std::vector<double> mean_error;                           // averaged over both directions
  double hiding_score = 0.0;
  std::map<Domain, double> embedding_power;
  std::map<Domain, double> capacity_bits;
  double source_dependence = 0.0;
  double guide_dependence = 0.0;

  [[nodiscard]] json to_json() const;
};

/// (err(s2) - err(s1)) / (s2 - s1) / (err(0) + eps) with s1 < s2 the two smallest positive amplitudes.
[[nodiscard]] double hiding_score(const std::vector<double>& amplitudes, const std::vector<double>& errors);

/// Cycle reconstruction error when translations are perturbed by N(0, sigma^2) before the way back.
/// Amplitudes must be strictly increasing and start at 0. Fills amplitudes, cycle_error*, mean_error,
/// hiding_score.
[[nodiscard]] ProbeReport hidden_signal_probe(evaluate::GuidedModel& model, const evaluate::DomainData& a,
                                              const evaluate::DomainData& b, const ProbeOptions& options);

struct Dependence {
  double source = 0.0;
  double guide = 0.0;
};

/// Mean L1 change of the output when the source (guide) is swapped for another one with the guide
/// (source) fixed, divided by the mean L1 between target-domain images; clipped to [0, 1].
/// Images are ordered by their attributes first, so the result ignores the input order.
[[nodiscard]] Dependence dependence_probe(evaluate::GuidedModel& model, const evaluate::DomainData& a,
                                          const evaluate::DomainData& b, int pairs = 256, std::uint64_t seed = 0);

/// Empirical power and bound of each domain's embedding channel.
void fill_capacity(ProbeReport& report, model::ModelBundle& bundle, const evaluate::DomainData& a,
                   const evaluate::DomainData& b, double sigma_g);

/// Both probes plus capacity numbers for a trained bundle.
[[nodiscard]] ProbeReport probe_bundle(model::ModelBundle bundle, const evaluate::DomainData& a,
                                       const evaluate::DomainData& b, double sigma_g, const ProbeOptions& options);

// ----------------------------------------------------------------------
// Ablation suite
// ----------------------------------------------------------------------

struct VariantResult {
  std::string name;  // full, no_norm, no_guess
  std::filesystem::path checkpoint;
  evaluate::EvalResult eval;
  ProbeReport probe;
};

struct AblationReport {
  std::vector<VariantResult> variants;

  [[nodiscard]] const VariantResult& variant(const std::string& name) const;
  [[nodiscard]] json to_json() const;
  [[nodiscard]] std::string table() const;
};

struct AblationOptions {
  evaluate::EvalOptions eval;
  ProbeOptions probe;
  bool reuse_checkpoints = false;  // skip training when OUT/<variant>/ already holds the final checkpoint
};

/// Trains {full, no_norm, no_guess} with one seed into OUT/<variant>/, evaluates and probes each, and
/// writes OUT/ablation.json, OUT/ablation.txt, OUT/grid_<variant>.png and OUT/probe_curves.svg.
[[nodiscard]] AblationReport ablation_suite(const trainer::TrainConfig& base, const std::filesystem::path& out,
                                            const AblationOptions& options = {});

/// Qualitative grid: first row guides, first column sources, cells F(source, guide).
[[nodiscard]] datagen::ImageGrid translation_grid(evaluate::GuidedModel& model, Direction direction,
                                                  const Tensor& sources, const Tensor& guides);

}  // namespace rift::diagnostics
