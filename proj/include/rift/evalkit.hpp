#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rift/common.hpp"
#include "rift/datagen.hpp"

namespace rift::evalkit {

using datagen::AttributeSpec;
using datagen::AttributeValue;
using datagen::AttributeVector;
using datagen::Role;
using json = nlohmann::json;

struct TranslationRecord {
  AttributeVector source_attrs;
  AttributeVector guide_attrs;
  AttributeVector output_attrs;  // decoded by the attribute oracle
  Direction direction = Direction::A2B;

  [[nodiscard]] json to_json() const;
  [[nodiscard]] static TranslationRecord from_json(const json& j);
};

/// One metric cell. `count` is the number of records that entered the fraction.
struct CellAccuracy {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t count = 0;
};

/// Shared attributes must keep the source value, specific ones must take the guide value.
[[nodiscard]] const AttributeValue& target_value(const TranslationRecord& r, const std::string& attribute, Role role);

/// Fraction of records with output == y*, over records whose source and guide values differ.
/// Returns nullopt when no record survives the conditioning.
[[nodiscard]] std::optional<CellAccuracy> manipulation_accuracy_categorical(const std::vector<TranslationRecord>& records,
                                                                            const std::string& attribute, Role role);

/// Fraction of records whose output is at least as close (Euclidean, ties count) to y* as to the
/// other candidate. No conditioning. nullopt for an empty record set; dim mismatch is rejected.
[[nodiscard]] std::optional<CellAccuracy> manipulation_accuracy_real(const std::vector<TranslationRecord>& records,
                                                                     const std::string& attribute, Role role);

/// A specific_X attribute is measured on translations into X; shared ones in both directions.
[[nodiscard]] bool evaluated_in(Role role, Direction direction) noexcept;

struct CellKey {
  std::string attribute;
  Direction direction = Direction::A2B;
  friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

/// Per-(attribute, direction) accuracies of one split.
struct AccuracyTable {
  std::string split_id;
  std::vector<AttributeSpec> attributes;  // with this split's roles
  std::map<CellKey, CellAccuracy> cells;  // defined cells only
  std::vector<CellKey> undefined;         // evaluated cells where nothing survived conditioning

  [[nodiscard]] Role role(const std::string& attribute) const;
  [[nodiscard]] std::optional<double> accuracy(const std::string& attribute, Direction d) const;
  [[nodiscard]] json to_json() const;
  [[nodiscard]] static AccuracyTable from_json(const json& j);
};

[[nodiscard]] AccuracyTable accuracy_table(const std::vector<TranslationRecord>& records,
                                           const std::vector<AttributeSpec>& attributes, const std::string& split_id);

/// Aggregated accuracies of one attribute (fractions). Undefined when no qualifying cell exists.
struct AttributeAggregate {
  std::optional<double> specific;
  std::optional<double> shared;
};

struct AggregateReport {
  std::vector<std::string> attribute_order;
  std::map<std::string, AttributeAggregate> per_attribute;
  std::optional<double> ac;  // fraction
  std::optional<double> rd;  // percent
  std::vector<std::string> flagged;  // missing or undefined cells skipped during aggregation

  [[nodiscard]] json to_json() const;
  [[nodiscard]] static AggregateReport from_json(const json& j);
};

/// ACC^S / ACC^C: means over the (split, direction) cells where the attribute is specific / shared.
[[nodiscard]] AggregateReport aggregate_accuracy(const std::vector<AccuracyTable>& tables);

/// AC = mean of all defined aggregated values; RD = 100 * sum|S - C| / sum(S + C) over attributes with both.
void overall_scores(AggregateReport& report);

/// aggregate_accuracy followed by overall_scores.
[[nodiscard]] AggregateReport aggregate(const std::vector<AccuracyTable>& tables);

/// RAND: each trial pairs a random source with a random guide and uses a random target-domain image
/// as the output. n_trials per direction; must be >= 1.
[[nodiscard]] std::vector<TranslationRecord> rand_records(const datagen::DatasetManifest& manifest, int n_trials,
                                                          std::uint64_t seed);
[[nodiscard]] AccuracyTable rand_baseline(const datagen::DatasetManifest& manifest, int n_trials, std::uint64_t seed);

/// Mean categorical accuracy over cells of the given role kind (shared or specific), or nullopt.
[[nodiscard]] std::optional<double> mean_accuracy(const AccuracyTable& table, bool shared);

}  // namespace rift::evalkit
