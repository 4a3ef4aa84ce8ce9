#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "eataudit/captions.hpp"
#include "eataudit/ratings.hpp"

namespace eataudit {

enum class Format { markdown, csv, json };

std::string_view to_string(Format f);
Format parse_format(std::string_view s);

// Conventional effect-size magnitude bands: |d| >= 0.2 small, >= 0.5 medium,
// >= 0.8 large.
enum class EffectBand { negligible, small, medium, large };

std::string_view to_string(EffectBand b);
EffectBand effect_band(double d);

inline constexpr double kSignificance = 0.05;

struct ReportCell {
  double d = 0.0;
  double p = 1.0;
  bool starred = false;  // p < significance threshold
  EffectBand band = EffectBand::negligible;
};

ReportCell make_cell(double d, double p, double alpha = kSignificance);

// d to two decimals, rounded half away from zero on the exact binary value,
// with a trailing "*" when starred. A value rounding to zero prints "0.00".
std::string render_cell(const ReportCell& cell);

// Rounds half away from zero to `decimals` places using the exact decimal
// expansion of v.
std::string format_fixed(double v, int decimals);

// num * scale / den to `decimals` places, rounded half up with integer
// arithmetic (no floating point).
std::string format_ratio(std::uint64_t num, std::uint64_t den,
                         std::uint64_t scale, int decimals);

struct EatTableCell {
  std::string row;
  std::string column;
  ReportCell cell;
};

// Grid of EAT results keyed by row (model) x column (condition). Row and
// column order is the order of first appearance.
class EatTable {
 public:
  explicit EatTable(std::string corner = "model") : corner_(std::move(corner)) {}

  void add_row(const std::string& row);
  void add_column(const std::string& column);
  // Throws ConfigError when (row, column) is already filled.
  void add(const std::string& row, const std::string& column,
           const ReportCell& cell);

  const std::string& corner() const noexcept { return corner_; }
  const std::vector<std::string>& rows() const noexcept { return rows_; }
  const std::vector<std::string>& columns() const noexcept { return columns_; }
  const std::vector<EatTableCell>& cells() const noexcept { return cells_; }
  const ReportCell* find(std::string_view row, std::string_view column) const;

 private:
  std::string corner_;
  std::vector<std::string> rows_;
  std::vector<std::string> columns_;
  std::vector<EatTableCell> cells_;
};

// Absent cells render as "n/a" (markdown), an empty field (csv) or are
// omitted (json).
std::string render_eat_table(const EatTable& table, Format format,
                             double alpha = kSignificance);

// Inverse of the JSON rendering. d and p come back at full precision.
EatTable parse_eat_table_json(std::string_view text,
                              double alpha = kSignificance);

// One row per group: group, n, sexualized, rate_percent (one decimal).
std::string render_rate_series(const GroupRateResult& rates, Format format);

// One row per (group, emotion): group, emotion, rate_per_1000 (one decimal).
std::string render_rate_series(const EmotionRateReport& report, Format format);

}  // namespace eataudit
