#pragma once

// Embedding Association Test.
//
// For a target embedding w and attribute groups A, B the association is
//
//   s(w, A, B) = mean_{a in A} cos(w, a) - mean_{b in B} cos(w, b)
//
// and the effect size over target groups X, Y is
//
//   d = (mean_{x in X} s(x) - mean_{y in Y} s(y)) / std_{w in X u Y} s(w).
//
// Significance comes from a one-sided partition test on the statistic
// sum_X s - sum_Y s: X u Y is re-split into equal halves and p is the share
// of splits whose statistic is >= the observed one (ties count against the
// hypothesis). Since s depends only on w, the scores are computed once and
// every permutation just re-sums them.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eataudit/embedding_io.hpp"
#include "eataudit/stimuli.hpp"

namespace eataudit {

using Vector = std::vector<double>;
using Vectors = std::vector<Vector>;

inline constexpr std::uint64_t kDefaultSeed = 20230601;

struct EatLabels {
  std::string x = "X";
  std::string y = "Y";
  std::string a = "A";
  std::string b = "B";
};

// X, Y, A, B groups. Throws DataError unless every group is non-empty,
// |X| == |Y|, all vectors share one dimension and none is zero.
class EatInput {
 public:
  EatInput(Vectors x, Vectors y, Vectors a, Vectors b, EatLabels labels = {});

  const Vectors& x() const noexcept { return x_; }
  const Vectors& y() const noexcept { return y_; }
  const Vectors& a() const noexcept { return a_; }
  const Vectors& b() const noexcept { return b_; }
  const EatLabels& labels() const noexcept { return labels_; }
  std::size_t dim() const noexcept { return x_.front().size(); }

  // Same targets, X and Y exchanged.
  EatInput swapped_targets() const;
  // Same targets, A and B exchanged.
  EatInput swapped_attributes() const;

 private:
  Vectors x_, y_, a_, b_;
  EatLabels labels_;
};

enum class StdDev { population, sample };
enum class PermutationMode { automatic, exact, monte_carlo };
enum class PermutationMethod { exact, monte_carlo };

std::string_view to_string(StdDev v);
std::string_view to_string(PermutationMode v);
std::string_view to_string(PermutationMethod v);
StdDev parse_std_dev(std::string_view s);
PermutationMode parse_permutation_mode(std::string_view s);
PermutationMethod parse_permutation_method(std::string_view s);

struct PermutationPlan {
  PermutationMode mode = PermutationMode::automatic;
  std::uint64_t samples = 10'000;
  std::uint64_t seed = kDefaultSeed;
  // Largest C(2n, n) that automatic mode still enumerates exactly.
  std::uint64_t exact_threshold = 200'000;

  // Throws ConfigError when samples == 0.
  void validate() const;
};

struct PermutationOutcome {
  double p = 1.0;
  PermutationMethod method = PermutationMethod::exact;
  std::uint64_t n_permutations = 0;  // partitions enumerated or sampled
  std::uint64_t n_at_least = 0;      // of those, statistic >= observed
};

double association(std::span<const double> w, const Vectors& a,
                   const Vectors& b);

// s(w, A, B) for every target, X first then Y.
std::vector<double> target_associations(const EatInput& input);

double effect_size(const EatInput& input, StdDev std_dev = StdDev::population);
double test_statistic(const EatInput& input);
PermutationOutcome permutation_p(const EatInput& input,
                                 const PermutationPlan& plan,
                                 std::size_t workers = 0);

// Score-level forms. `scores` holds X then Y, with |X| == |Y| == scores/2.
// effect_size_from_scores throws DegenerateError when the spread is zero.
double effect_size_from_scores(std::span<const double> scores,
                               StdDev std_dev = StdDev::population);
double statistic_from_scores(std::span<const double> scores);
PermutationOutcome permutation_p_from_scores(std::span<const double> scores,
                                             const PermutationPlan& plan,
                                             std::size_t workers = 0);

// C(n, k), or nullopt when it does not fit in 64 bits.
std::optional<std::uint64_t> binomial(std::uint64_t n, std::uint64_t k);

// Worker count used for requested == 0: hardware concurrency, capped by the
// EAT_AUDIT_THREADS environment variable when it holds a positive integer.
std::size_t default_workers();

struct EatResult {
  double d = 0.0;
  double p = 1.0;
  double statistic = 0.0;
  std::vector<double> per_target_s;    // X then Y
  std::vector<std::string> target_ids;  // parallel to per_target_s
  PermutationMethod method = PermutationMethod::exact;
  std::uint64_t n_permutations = 0;
  std::uint64_t seed = kDefaultSeed;
  StdDev std_dev = StdDev::population;
  EatLabels labels;
  std::size_t n_x = 0, n_y = 0, n_a = 0, n_b = 0;
};

struct EatOptions {
  StdDev std_dev = StdDev::population;
  std::size_t workers = 0;
};

EatResult compute_eat(const EatInput& input, const PermutationPlan& plan,
                      const EatOptions& options = {});

// Group tags binding manifest entries to the four groups. With a catalog,
// A and B resolve to the text entries whose text equals each expanded prompt
// (restricted to the given tag when one is set); otherwise by tag alone.
struct GroupSpec {
  std::string x;
  std::string y;
  std::optional<std::string> a;
  std::optional<std::string> b;
};

struct AttributePrompts {
  PromptGrid a;
  PromptGrid b;
};

EatResult run_eat(std::span<const Dataset> datasets, const GroupSpec& groups,
                  const PermutationPlan& plan, const EatOptions& options = {},
                  const std::optional<AttributePrompts>& prompts = {});

std::string eat_result_to_json(const EatResult& result);
EatResult parse_eat_result_json(std::string_view text);

}  // namespace eataudit
