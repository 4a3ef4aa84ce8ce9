#include "eataudit/ratings.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "eataudit/csv.hpp"
#include "eataudit/error.hpp"

namespace eataudit {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double variance(const std::vector<double>& v, Variance flavor) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double denom = flavor == Variance::population
                           ? static_cast<double>(v.size())
                           : static_cast<double>(v.size() - 1);
  return ss / denom;
}

}  // namespace

std::string_view to_string(Category c) {
  switch (c) {
    case Category::pornographic: return "pornographic";
    case Category::sexy: return "sexy";
    case Category::neutral: return "neutral";
    case Category::hentai: return "hentai";
    case Category::drawing: return "drawing";
  }
  return "unknown";
}

Category parse_category(std::string_view s) {
  const std::string l = lower(trim(s));
  for (Category c : kAllCategories) {
    if (l == to_string(c)) return c;
  }
  if (l == "drawings") return Category::drawing;
  throw DataError("unknown category label '" + std::string(s) + "'");
}

int parse_sexualized_score(std::string_view s) {
  const std::string l = lower(trim(s));
  if (l == "sexualized" || l == "1" || l == "true") return 1;
  if (l == "non_sexualized" || l == "not_sexualized" || l == "0" ||
      l == "false") {
    return 0;
  }
  return sexualized(parse_category(l)) ? 1 : 0;
}

std::uint64_t GroupRateResult::total_n() const {
  std::uint64_t n = 0;
  for (const auto& g : groups) n += g.n;
  return n;
}

std::uint64_t GroupRateResult::total_sexualized() const {
  std::uint64_t n = 0;
  for (const auto& g : groups) n += g.sexualized;
  return n;
}

GroupRateResult group_rates(const std::vector<GroupLabel>& labels) {
  if (labels.empty()) throw DataError("group_rates: no labels");
  GroupRateResult out;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& l : labels) {
    auto [it, fresh] = index.try_emplace(l.group, out.groups.size());
    if (fresh) out.groups.push_back({l.group, 0, 0});
    auto& g = out.groups[it->second];
    ++g.n;
    if (sexualized(l.category)) ++g.sexualized;
  }
  return out;
}

RatingTable::RatingTable(std::vector<std::string> images,
                         std::vector<std::string> raters,
                         std::vector<std::vector<int>> scores)
    : images_(std::move(images)),
      raters_(std::move(raters)),
      scores_(std::move(scores)) {
  if (scores_.size() != images_.size()) {
    throw DataError("rating table: score rows do not match image count");
  }
  for (std::size_t i = 0; i < scores_.size(); ++i) {
    if (scores_[i].size() != raters_.size()) {
      throw DataError("rating table: image '" + images_[i] +
                      "' is missing ratings");
    }
    for (int v : scores_[i]) {
      if (v != 0 && v != 1) {
        throw DataError("rating table: scores must be 0 or 1");
      }
    }
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& r : raters_) {
    if (!seen.insert(r).second) {
      throw DataError("rating table: duplicate rater '" + r + "'");
    }
  }
  seen.clear();
  for (const auto& im : images_) {
    if (!seen.insert(im).second) {
      throw DataError("rating table: duplicate image '" + im + "'");
    }
  }
}

std::vector<int> RatingTable::rater_scores(std::size_t rater) const {
  std::vector<int> out;
  out.reserve(images_.size());
  for (const auto& row : scores_) out.push_back(row.at(rater));
  return out;
}

RatingTable RatingTable::select_raters(
    const std::vector<std::size_t>& raters) const {
  std::vector<std::string> names;
  for (auto r : raters) names.push_back(raters_.at(r));
  std::vector<std::vector<int>> scores;
  for (const auto& row : scores_) {
    std::vector<int> sub;
    for (auto r : raters) sub.push_back(row[r]);
    scores.push_back(std::move(sub));
  }
  return RatingTable(images_, std::move(names), std::move(scores));
}

double cronbach_alpha(const RatingTable& table, Variance flavor) {
  const std::size_t k = table.raters().size();
  const std::size_t n = table.images().size();
  if (k < 2) throw DataError("Cronbach's alpha needs at least 2 raters");
  if (n < 2) throw DataError("Cronbach's alpha needs at least 2 images");

  double item_var_sum = 0.0;
  std::vector<double> totals(n, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) {
      col[i] = table.score(i, r);
      totals[i] += col[i];
    }
    item_var_sum += variance(col, flavor);
  }
  const double total_var = variance(totals, flavor);
  if (total_var == 0.0) {
    throw DegenerateError(
        "Cronbach's alpha undefined: total scores have zero variance");
  }
  const double kd = static_cast<double>(k);
  return kd / (kd - 1.0) * (1.0 - item_var_sum / total_var);
}

AlphaReport alpha_report(const RatingTable& table) {
  AlphaReport rep;
  rep.k = table.raters().size();
  rep.n_images = table.images().size();
  rep.alpha = cronbach_alpha(table);
  for (std::size_t i = 0; i < rep.k; ++i) {
    for (std::size_t j = i + 1; j < rep.k; ++j) {
      PairwiseAlpha pa{table.raters()[i], table.raters()[j], std::nullopt};
      try {
        pa.alpha = cronbach_alpha(table.select_raters({i, j}));
      } catch (const DegenerateError&) {
      }
      rep.pairwise.push_back(std::move(pa));
    }
  }
  return rep;
}

std::string alpha_report_to_json(const AlphaReport& rep) {
  nlohmann::ordered_json j;
  j["k"] = rep.k;
  j["n_images"] = rep.n_images;
  j["alpha"] = rep.alpha;
  auto pairs = nlohmann::ordered_json::array();
  for (const auto& p : rep.pairwise) {
    nlohmann::ordered_json e;
    e["raters"] = {p.rater_a, p.rater_b};
    e["alpha"] = p.alpha ? nlohmann::ordered_json(*p.alpha)
                         : nlohmann::ordered_json(nullptr);
    pairs.push_back(std::move(e));
  }
  j["pairwise_alphas"] = std::move(pairs);
  return j.dump(2) + "\n";
}

std::vector<LabelRecord> parse_labels_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) throw DataError("labels CSV is empty");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) {
    col[lower(trim(rows[0][i]))] = i;
  }
  for (const char* need : {"image_id", "group", "rater", "category"}) {
    if (!col.contains(need)) {
      throw DataError(std::string("labels CSV header lacks column '") + need +
                      "'");
    }
  }
  std::vector<LabelRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto cell = [&](const char* name) -> std::string {
      const std::size_t c = col[name];
      if (c >= row.size()) {
        throw DataError("labels CSV record " + std::to_string(r + 1) +
                        " is missing column '" + name + "'");
      }
      return trim(row[c]);
    };
    out.push_back({cell("image_id"), cell("group"), cell("rater"),
                   cell("category"), r + 1});
  }
  if (out.empty()) throw DataError("labels CSV has no records");
  return out;
}

std::vector<LabelRecord> load_labels_csv(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return parse_labels_csv(text);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

RatingTable rating_table_from_labels(const std::vector<LabelRecord>& records) {
  std::vector<std::string> images, raters;
  std::unordered_map<std::string, std::size_t> image_ix, rater_ix;
  for (const auto& rec : records) {
    if (image_ix.try_emplace(rec.image_id, images.size()).second) {
      images.push_back(rec.image_id);
    }
    if (rater_ix.try_emplace(rec.rater, raters.size()).second) {
      raters.push_back(rec.rater);
    }
  }
  std::vector<std::vector<int>> scores(images.size(),
                                       std::vector<int>(raters.size(), -1));
  for (const auto& rec : records) {
    int& cell = scores[image_ix[rec.image_id]][rater_ix[rec.rater]];
    if (cell != -1) {
      throw DataError("labels record " + std::to_string(rec.line) +
                      ": image '" + rec.image_id + "' rated twice by '" +
                      rec.rater + "'");
    }
    cell = parse_sexualized_score(rec.category);
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (std::size_t r = 0; r < raters.size(); ++r) {
      if (scores[i][r] == -1) {
        throw DataError("labels: image '" + images[i] +
                        "' has no rating from '" + raters[r] + "'");
      }
    }
  }
  return RatingTable(std::move(images), std::move(raters), std::move(scores));
}

}  // namespace eataudit
