#include "eataudit/report.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "eataudit/csv.hpp"
#include "eataudit/error.hpp"

namespace eataudit {

__extension__ using uint128 = unsigned __int128;

std::string_view to_string(Format f) {
  switch (f) {
    case Format::markdown: return "markdown";
    case Format::csv: return "csv";
    case Format::json: return "json";
  }
  return "json";
}

Format parse_format(std::string_view s) {
  if (s == "markdown" || s == "md") return Format::markdown;
  if (s == "csv") return Format::csv;
  if (s == "json") return Format::json;
  throw ConfigError("unknown format '" + std::string(s) +
                    "' (expected markdown, csv or json)");
}

std::string_view to_string(EffectBand b) {
  switch (b) {
    case EffectBand::negligible: return "negligible";
    case EffectBand::small: return "small";
    case EffectBand::medium: return "medium";
    case EffectBand::large: return "large";
  }
  return "negligible";
}

EffectBand effect_band(double d) {
  const double m = std::abs(d);
  if (m >= 0.8) return EffectBand::large;
  if (m >= 0.5) return EffectBand::medium;
  if (m >= 0.2) return EffectBand::small;
  return EffectBand::negligible;
}

ReportCell make_cell(double d, double p, double alpha) {
  return ReportCell{d, p, p < alpha, effect_band(d)};
}

std::string format_fixed(double v, int decimals) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  // %.*f with enough digits prints the exact binary expansion for any
  // double of moderate magnitude; we then round the decimal string.
  const bool neg = std::signbit(v);
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.80f", std::abs(v));
  std::string s(buf);
  const auto dot = s.find('.');
  std::string digits = s.substr(0, dot) + s.substr(dot + 1, decimals);
  const bool round_up = s[dot + 1 + decimals] >= '5';
  if (round_up) {
    int i = static_cast<int>(digits.size()) - 1;
    while (i >= 0 && digits[i] == '9') digits[i--] = '0';
    if (i < 0) {
      digits.insert(digits.begin(), '1');
    } else {
      ++digits[i];
    }
  }
  const std::size_t int_len = digits.size() - decimals;
  std::string out = digits.substr(0, int_len);
  if (decimals > 0) out += "." + digits.substr(int_len);
  const bool zero = digits.find_first_not_of('0') == std::string::npos;
  return (neg && !zero ? "-" : "") + out;
}

std::string format_ratio(std::uint64_t num, std::uint64_t den,
                         std::uint64_t scale, int decimals) {
  if (den == 0) throw DataError("ratio with zero denominator");
  uint128 pow10 = 1;
  for (int i = 0; i < decimals; ++i) pow10 *= 10;
  const uint128 n =
      static_cast<uint128>(num) * scale * pow10;
  const uint128 q = (2 * n + den) / (2 * static_cast<uint128>(den));
  auto to_str = [](uint128 v) {
    std::string s;
    do {
      s.insert(s.begin(), static_cast<char>('0' + static_cast<int>(v % 10)));
      v /= 10;
    } while (v);
    return s;
  };
  std::string out = to_str(q / pow10);
  if (decimals > 0) {
    std::string frac = to_str(q % pow10);
    out += "." + std::string(decimals - frac.size(), '0') + frac;
  }
  return out;
}

std::string render_cell(const ReportCell& cell) {
  return format_fixed(cell.d, 2) + (cell.starred ? "*" : "");
}

void EatTable::add_row(const std::string& row) {
  for (const auto& r : rows_) {
    if (r == row) return;
  }
  rows_.push_back(row);
}

void EatTable::add_column(const std::string& column) {
  for (const auto& c : columns_) {
    if (c == column) return;
  }
  columns_.push_back(column);
}

void EatTable::add(const std::string& row, const std::string& column,
                   const ReportCell& cell) {
  if (find(row, column)) {
    throw ConfigError("duplicate table cell (" + row + ", " + column + ")");
  }
  add_row(row);
  add_column(column);
  cells_.push_back({row, column, cell});
}

const ReportCell* EatTable::find(std::string_view row,
                                 std::string_view column) const {
  for (const auto& c : cells_) {
    if (c.row == row && c.column == column) return &c.cell;
  }
  return nullptr;
}

namespace {

std::string markdown_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out.push_back(c);
  }
  return out;
}

std::string markdown_row(const std::vector<std::string>& fields) {
  std::string out = "|";
  for (const auto& f : fields) out += " " + markdown_escape(f) + " |";
  return out + "\n";
}

std::string markdown_rule(std::size_t left, std::size_t right) {
  std::string out = "|";
  for (std::size_t i = 0; i < left; ++i) out += " --- |";
  for (std::size_t i = 0; i < right; ++i) out += " ---: |";
  return out + "\n";
}

std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& body,
                         std::size_t text_columns, Format format) {
  std::string out;
  if (format == Format::markdown) {
    out += markdown_row(header);
    out += markdown_rule(text_columns, header.size() - text_columns);
    for (const auto& r : body) out += markdown_row(r);
  } else {
    out += csv::format_row(header);
    for (const auto& r : body) out += csv::format_row(r);
  }
  return out;
}

}  // namespace

std::string render_eat_table(const EatTable& table, Format format,
                             double alpha) {
  if (format == Format::json) {
    nlohmann::ordered_json j;
    j["corner"] = table.corner();
    j["rows"] = table.rows();
    j["columns"] = table.columns();
    j["alpha"] = alpha;
    auto cells = nlohmann::ordered_json::array();
    for (const auto& row : table.rows()) {
      for (const auto& col : table.columns()) {
        const ReportCell* c = table.find(row, col);
        if (!c) continue;
        const ReportCell cell = make_cell(c->d, c->p, alpha);
        nlohmann::ordered_json e;
        e["row"] = row;
        e["column"] = col;
        e["d"] = cell.d;
        e["p"] = cell.p;
        e["text"] = render_cell(cell);
        e["starred"] = cell.starred;
        e["band"] = to_string(cell.band);
        cells.push_back(std::move(e));
      }
    }
    j["cells"] = std::move(cells);
    return j.dump(2) + "\n";
  }

  std::vector<std::string> header{table.corner()};
  header.insert(header.end(), table.columns().begin(), table.columns().end());
  std::vector<std::vector<std::string>> body;
  for (const auto& row : table.rows()) {
    std::vector<std::string> fields{row};
    for (const auto& col : table.columns()) {
      const ReportCell* c = table.find(row, col);
      if (c) {
        fields.push_back(render_cell(make_cell(c->d, c->p, alpha)));
      } else {
        fields.push_back(format == Format::markdown ? "n/a" : "");
      }
    }
    body.push_back(std::move(fields));
  }
  return render_table(header, body, 1, format);
}

EatTable parse_eat_table_json(std::string_view text, double alpha) {
  try {
    const auto j = nlohmann::json::parse(text);
    EatTable table(j.value("corner", std::string("model")));
    for (const auto& r : j.at("rows")) table.add_row(r.get<std::string>());
    for (const auto& c : j.at("columns")) {
      table.add_column(c.get<std::string>());
    }
    for (const auto& e : j.at("cells")) {
      table.add(e.at("row").get<std::string>(),
                e.at("column").get<std::string>(),
                make_cell(e.at("d").get<double>(), e.at("p").get<double>(),
                          alpha));
    }
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed table JSON: ") + e.what());
  }
}

std::string render_rate_series(const GroupRateResult& rates, Format format) {
  if (format == Format::json) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& g : rates.groups) {
      nlohmann::ordered_json e;
      e["group"] = g.group;
      e["n"] = g.n;
      e["sexualized"] = g.sexualized;
      e["rate_percent"] = g.percent();
      e["text"] = format_ratio(g.sexualized, g.n, 100, 1);
      arr.push_back(std::move(e));
    }
    return arr.dump(2) + "\n";
  }
  std::vector<std::vector<std::string>> body;
  for (const auto& g : rates.groups) {
    body.push_back({g.group, std::to_string(g.n), std::to_string(g.sexualized),
                    format_ratio(g.sexualized, g.n, 100, 1)});
  }
  return render_table({"group", "n", "sexualized", "rate_percent"}, body, 1,
                      format);
}

std::string render_rate_series(const EmotionRateReport& report,
                               Format format) {
  if (format == Format::json) {
    nlohmann::ordered_json j;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : report.rates) {
      nlohmann::ordered_json e;
      e["group"] = r.group;
      e["emotion"] = r.emotion;
      e["occurrences"] = r.occurrences;
      e["captions"] = r.captions;
      e["rate_per_1000"] = r.rate_per_1000();
      arr.push_back(std::move(e));
    }
    j["rates"] = std::move(arr);
    j["retained_words"] = report.retained_words;
    j["dropped_words"] = report.dropped_words;
    return j.dump(2) + "\n";
  }
  std::vector<std::vector<std::string>> body;
  for (const auto& r : report.rates) {
    body.push_back({r.group, r.emotion,
                    format_ratio(r.occurrences, r.captions, 1000, 1)});
  }
  return render_table({"group", "emotion", "rate_per_1000"}, body, 2, format);
}

}  // namespace eataudit
