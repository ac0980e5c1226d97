#include "rift/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace rift::evalkit {

using datagen::AttributeKind;

json TranslationRecord::to_json() const {
  return {{"direction", rift::to_string(direction)},
          {"source", source_attrs.to_json()},
          {"guide", guide_attrs.to_json()},
          {"output", output_attrs.to_json()}};
}

TranslationRecord TranslationRecord::from_json(const json& j) {
  try {
    return {AttributeVector::from_json(j.at("source")), AttributeVector::from_json(j.at("guide")),
            AttributeVector::from_json(j.at("output")), parse_direction(j.at("direction").get<std::string>())};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("translation record: ") + e.what());
  }
}

const AttributeValue& target_value(const TranslationRecord& r, const std::string& attribute, Role role) {
  return role == Role::shared ? r.source_attrs.get(attribute) : r.guide_attrs.get(attribute);
}

namespace {

const AttributeValue& other_value(const TranslationRecord& r, const std::string& attribute, Role role) {
  return role == Role::shared ? r.guide_attrs.get(attribute) : r.source_attrs.get(attribute);
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b, const std::string& attribute) {
  if (a.size() != b.size())
    throw ConfigError("attribute '" + attribute + "': dimension mismatch (" + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()) + ")");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

std::optional<CellAccuracy> finish(std::size_t correct, std::size_t count) {
  if (count == 0) return std::nullopt;
  return CellAccuracy{static_cast<double>(correct) / static_cast<double>(count), correct, count};
}

}  // namespace

std::optional<CellAccuracy> manipulation_accuracy_categorical(const std::vector<TranslationRecord>& records,
                                                              const std::string& attribute, Role role) {
  std::size_t correct = 0, count = 0;
  for (const auto& r : records) {
    if (r.source_attrs.category(attribute) == r.guide_attrs.category(attribute)) continue;
    ++count;
    if (r.output_attrs.category(attribute) == std::get<int>(target_value(r, attribute, role))) ++correct;
  }
  return finish(correct, count);
}

std::optional<CellAccuracy> manipulation_accuracy_real(const std::vector<TranslationRecord>& records,
                                                       const std::string& attribute, Role role) {
  std::size_t correct = 0;
  for (const auto& r : records) {
    const auto& out = r.output_attrs.real(attribute);
    const auto& want = std::get<std::vector<double>>(target_value(r, attribute, role));
    const auto& other = std::get<std::vector<double>>(other_value(r, attribute, role));
    if (squared_distance(out, want, attribute) <= squared_distance(out, other, attribute)) ++correct;
  }
  return finish(correct, records.size());
}

bool evaluated_in(Role role, Direction direction) noexcept {
  switch (role) {
    case Role::shared: return true;
    case Role::specific_A: return target_domain(direction) == Domain::A;
    case Role::specific_B: return target_domain(direction) == Domain::B;
  }
  return false;
}

Role AccuracyTable::role(const std::string& attribute) const {
  for (const auto& a : attributes)
    if (a.name == attribute) return a.role;
  throw ConfigError("accuracy table '" + split_id + "': unknown attribute '" + attribute + "'");
}

std::optional<double> AccuracyTable::accuracy(const std::string& attribute, Direction d) const {
  const auto it = cells.find({attribute, d});
  if (it == cells.end()) return std::nullopt;
  return it->second.accuracy;
}

json AccuracyTable::to_json() const {
  json attrs = json::array();
  for (const auto& a : attributes) attrs.push_back(datagen::spec_to_json(a));
  json jc = json::array();
  for (const auto& [k, c] : cells)
    jc.push_back({{"attribute", k.attribute},
                  {"direction", rift::to_string(k.direction)},
                  {"accuracy", c.accuracy},
                  {"correct", c.correct},
                  {"count", c.count}});
  json ju = json::array();
  for (const auto& k : undefined) ju.push_back({{"attribute", k.attribute}, {"direction", rift::to_string(k.direction)}});
  return {{"split_id", split_id}, {"attributes", attrs}, {"cells", jc}, {"undefined", ju}};
}

AccuracyTable AccuracyTable::from_json(const json& j) {
  AccuracyTable t;
  try {
    t.split_id = j.at("split_id").get<std::string>();
    for (const auto& ja : j.at("attributes")) t.attributes.push_back(datagen::spec_from_json(ja));
    for (const auto& jc : j.at("cells")) {
      CellKey k{jc.at("attribute").get<std::string>(), parse_direction(jc.at("direction").get<std::string>())};
      CellAccuracy c;
      c.accuracy = jc.at("accuracy").get<double>();
      c.count = jc.value("count", std::size_t{1});
      c.correct = jc.value("correct", static_cast<std::size_t>(std::llround(c.accuracy * static_cast<double>(c.count))));
      if (!(c.accuracy >= 0.0 && c.accuracy <= 1.0)) throw ConfigError("accuracy outside [0, 1] for '" + k.attribute + "'");
      if (c.count == 0) throw ConfigError("reported cell with zero count for '" + k.attribute + "'");
      (void)t.role(k.attribute);  // rejects unknown attributes
      t.cells[k] = c;
    }
    if (j.contains("undefined"))
      for (const auto& ju : j.at("undefined"))
        t.undefined.push_back({ju.at("attribute").get<std::string>(), parse_direction(ju.at("direction").get<std::string>())});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("accuracy table: ") + e.what());
  }
  return t;
}

AccuracyTable accuracy_table(const std::vector<TranslationRecord>& records, const std::vector<AttributeSpec>& attributes,
                             const std::string& split_id) {
  AccuracyTable t{split_id, attributes, {}, {}};
  for (const Direction d : {Direction::A2B, Direction::B2A}) {
    std::vector<TranslationRecord> subset;
    for (const auto& r : records)
      if (r.direction == d) subset.push_back(r);
    for (const auto& a : attributes) {
      if (!evaluated_in(a.role, d)) continue;
      const auto cell = a.kind == AttributeKind::categorical ? manipulation_accuracy_categorical(subset, a.name, a.role)
                                                             : manipulation_accuracy_real(subset, a.name, a.role);
      if (cell) t.cells[{a.name, d}] = *cell;
      else t.undefined.push_back({a.name, d});
    }
  }
  return t;
}

// ----------------------------------------------------------------------
// Aggregation
// ----------------------------------------------------------------------

namespace {
json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
std::optional<double> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}
}  // namespace

json AggregateReport::to_json() const {
  json attrs = json::object();
  for (const auto& name : attribute_order) {
    const auto& a = per_attribute.at(name);
    attrs[name] = {{"specific", opt(a.specific)}, {"shared", opt(a.shared)}};
  }
  return {{"attribute_order", attribute_order}, {"attributes", attrs}, {"ac", opt(ac)}, {"rd", opt(rd)},
          {"flagged", flagged}};
}

AggregateReport AggregateReport::from_json(const json& j) {
  AggregateReport r;
  try {
    r.attribute_order = j.at("attribute_order").get<std::vector<std::string>>();
    for (const auto& name : r.attribute_order) {
      const auto& ja = j.at("attributes").at(name);
      r.per_attribute[name] = {opt_from(ja, "specific"), opt_from(ja, "shared")};
    }
    r.ac = opt_from(j, "ac");
    r.rd = opt_from(j, "rd");
    if (j.contains("flagged")) r.flagged = j.at("flagged").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("aggregate report: ") + e.what());
  }
  return r;
}

AggregateReport aggregate_accuracy(const std::vector<AccuracyTable>& tables) {
  AggregateReport report;
  std::map<std::string, std::pair<double, int>> spec_sum, shared_sum;
  for (const auto& t : tables) {
    for (const auto& a : t.attributes) {
      if (std::find(report.attribute_order.begin(), report.attribute_order.end(), a.name) == report.attribute_order.end())
        report.attribute_order.push_back(a.name);
      for (const Direction d : {Direction::A2B, Direction::B2A}) {
        if (!evaluated_in(a.role, d)) continue;
        const auto acc = t.accuracy(a.name, d);
        if (!acc) {
          report.flagged.push_back(t.split_id + "/" + a.name + "/" + rift::to_string(d));
          continue;
        }
        auto& slot = a.role == Role::shared ? shared_sum[a.name] : spec_sum[a.name];
        slot.first += *acc;
        slot.second += 1;
      }
    }
  }
  for (const auto& name : report.attribute_order) {
    AttributeAggregate agg;
    if (const auto it = spec_sum.find(name); it != spec_sum.end()) agg.specific = it->second.first / it->second.second;
    if (const auto it = shared_sum.find(name); it != shared_sum.end()) agg.shared = it->second.first / it->second.second;
    report.per_attribute[name] = agg;
  }
  return report;
}

void overall_scores(AggregateReport& report) {
  double sum = 0.0, diff = 0.0, both = 0.0;
  int n = 0;
  bool any_pair = false;
  for (const auto& name : report.attribute_order) {
    const auto& a = report.per_attribute.at(name);
    if (a.specific) sum += *a.specific, ++n;
    if (a.shared) sum += *a.shared, ++n;
    if (a.specific && a.shared) {
      any_pair = true;
      diff += std::abs(*a.specific - *a.shared);
      both += *a.specific + *a.shared;
    }
  }
  report.ac = n > 0 ? std::optional<double>(sum / n) : std::nullopt;
  if (!any_pair) report.rd = std::nullopt;
  else report.rd = both > 0.0 ? 100.0 * diff / both : 0.0;
}

AggregateReport aggregate(const std::vector<AccuracyTable>& tables) {
  auto r = aggregate_accuracy(tables);
  overall_scores(r);
  return r;
}

// ----------------------------------------------------------------------
// RAND
// ----------------------------------------------------------------------

std::vector<TranslationRecord> rand_records(const datagen::DatasetManifest& manifest, int n_trials, std::uint64_t seed) {
  if (n_trials < 1) throw ConfigError("rand_baseline: n_trials must be >= 1");
  std::vector<TranslationRecord> out;
  out.reserve(static_cast<std::size_t>(n_trials) * 2);
  for (const Direction d : {Direction::A2B, Direction::B2A}) {
    const auto src = manifest.domain_records(source_domain(d));
    const auto tgt = manifest.domain_records(target_domain(d));
    if (src.empty() || tgt.empty()) throw ConfigError("rand_baseline: manifest has an empty domain");
    std::mt19937_64 rng(mix_seed(seed, {0x7A4D, static_cast<std::uint64_t>(d)}));
    auto pick = [&](const std::vector<const datagen::ManifestRecord*>& v) { return v[rng() % v.size()]; };
    for (int i = 0; i < n_trials; ++i) {
      const auto* s = pick(src);
      const auto* g = pick(tgt);
      const auto* o = pick(tgt);
      out.push_back({s->attributes, g->attributes, o->attributes, d});
    }
  }
  return out;
}

AccuracyTable rand_baseline(const datagen::DatasetManifest& manifest, int n_trials, std::uint64_t seed) {
  return accuracy_table(rand_records(manifest, n_trials, seed), manifest.split.attributes, manifest.split.split_id);
}

std::optional<double> mean_accuracy(const AccuracyTable& table, bool shared) {
  double sum = 0.0;
  int n = 0;
  for (const auto& [k, c] : table.cells) {
    const auto& spec = [&]() -> const AttributeSpec& {
      for (const auto& a : table.attributes)
        if (a.name == k.attribute) return a;
      throw ConfigError("accuracy table: unknown attribute '" + k.attribute + "'");
    }();
    if (spec.kind != AttributeKind::categorical || (spec.role == Role::shared) != shared) continue;
    sum += c.accuracy;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

}  // namespace rift::evalkit
