#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rift/evalkit.hpp"

namespace rift::report {

/// Whole-percent cell text ("-" when undefined), rounded half-up.
[[nodiscard]] std::string percent(const std::optional<double>& fraction);

struct TableRow {
  std::string method;
  evalkit::AggregateReport aggregate;
};

/// Results table: a C and an S column per attribute, then AC and RD, all in whole percents.
[[nodiscard]] std::string results_table(const std::vector<TableRow>& rows,
                                        const std::vector<std::string>& attribute_order = {});

struct AblationRow {
  std::string name;
  std::optional<double> shared, specific, rand_shared, rand_specific, ac, rd;
  double source_dependence = 0.0, guide_dependence = 0.0, hiding_score = 0.0, power_a = 0.0, power_b = 0.0;
};

[[nodiscard]] std::string ablation_table(const std::vector<AblationRow>& rows);

struct Series {
  std::string label;
  std::vector<double> x, y;
};

/// Minimal SVG line chart with axes, ticks and a legend.
[[nodiscard]] std::string svg_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                                   const std::vector<Series>& series, bool log_y = false);

}  // namespace rift::report
