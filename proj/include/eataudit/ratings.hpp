#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eataudit {

// NSFW classifier category scheme, also used for human annotations.
enum class Category { pornographic, sexy, neutral, hentai, drawing };

inline constexpr Category kAllCategories[] = {
    Category::pornographic, Category::sexy, Category::neutral,
    Category::hentai, Category::drawing};

std::string_view to_string(Category c);

// Case-insensitive; accepts the category names plus "drawings". Throws
// DataError on anything else.
Category parse_category(std::string_view s);

// pornographic, sexy and hentai are sexualized; neutral and drawing are not.
constexpr bool sexualized(Category c) {
  switch (c) {
    case Category::pornographic:
    case Category::sexy:
    case Category::hentai:
      return true;
    case Category::neutral:
    case Category::drawing:
      return false;
  }
  return false;
}

// A cell score: the five categories, or a bare binary judgement
// (sexualized / non_sexualized, 1 / 0, true / false).
int parse_sexualized_score(std::string_view s);

struct GroupLabel {
  std::string group;
  Category category;
};

struct GroupRate {
  std::string group;
  std::uint64_t n = 0;
  std::uint64_t sexualized = 0;

  double percent() const {
    return 100.0 * static_cast<double>(sexualized) / static_cast<double>(n);
  }
};

// Groups in first-seen order.
struct GroupRateResult {
  std::vector<GroupRate> groups;

  std::uint64_t total_n() const;
  std::uint64_t total_sexualized() const;
};

// Throws DataError on an empty label list.
GroupRateResult group_rates(const std::vector<GroupLabel>& labels);

// Binary (0/1) scores of every rater for every image.
class RatingTable {
 public:
  // scores[image][rater]. Throws DataError unless the table is rectangular,
  // holds only 0/1 and names are unique.
  RatingTable(std::vector<std::string> images, std::vector<std::string> raters,
              std::vector<std::vector<int>> scores);

  const std::vector<std::string>& images() const noexcept { return images_; }
  const std::vector<std::string>& raters() const noexcept { return raters_; }
  int score(std::size_t image, std::size_t rater) const {
    return scores_[image][rater];
  }
  std::vector<int> rater_scores(std::size_t rater) const;

  // Table restricted to the given rater columns.
  RatingTable select_raters(const std::vector<std::size_t>& raters) const;

 private:
  std::vector<std::string> images_;
  std::vector<std::string> raters_;
  std::vector<std::vector<int>> scores_;
};

enum class Variance { population, sample };

// Cronbach's alpha over raters as items:
//   k / (k - 1) * (1 - sum_i var(rater_i) / var(total per image)).
// Throws DataError for < 2 raters or < 2 images and DegenerateError when the
// total-score variance is zero. The variance flavour cancels in the ratio.
double cronbach_alpha(const RatingTable& table,
                      Variance variance = Variance::population);

struct PairwiseAlpha {
  std::string rater_a;
  std::string rater_b;
  std::optional<double> alpha;  // empty when undefined for the pair
};

struct AlphaReport {
  std::size_t k = 0;
  std::size_t n_images = 0;
  double alpha = 0.0;
  std::vector<PairwiseAlpha> pairwise;
};

AlphaReport alpha_report(const RatingTable& table);
std::string alpha_report_to_json(const AlphaReport& report);

// Labels CSV: header with columns image_id, group, rater, category (any
// order, extra columns ignored).
struct LabelRecord {
  std::string image_id;
  std::string group;
  std::string rater;
  std::string category;  // raw cell text
  std::size_t line = 0;
};

std::vector<LabelRecord> parse_labels_csv(std::string_view text);
std::vector<LabelRecord> load_labels_csv(const std::string& path);

// Builds the image x rater table (images and raters in first-seen order).
// Missing or duplicated cells are errors.
RatingTable rating_table_from_labels(const std::vector<LabelRecord>& records);

}  // namespace eataudit
