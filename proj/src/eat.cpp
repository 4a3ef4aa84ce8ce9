#include "eataudit/eat.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include <json.hpp>

#include "eataudit/error.hpp"

namespace eataudit {

__extension__ using uint128 = unsigned __int128;

namespace {

void check_group(const Vectors& g, const std::string& label,
                 std::size_t dim) {
  if (g.empty()) throw DataError("EAT group " + label + " is empty");
  for (const auto& v : g) {
    if (v.size() != dim) {
      throw DataError("EAT group " + label + " has a vector of dimension " +
                      std::to_string(v.size()) + ", expected " +
                      std::to_string(dim));
    }
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) {
      throw DataError("EAT group " + label + " contains a zero vector");
    }
  }
}

// Partitions within this distance below the observed statistic count as ties.
double tie_tolerance(std::span<const double> scores) {
  double mag = 1.0;
  for (double s : scores) mag += std::abs(s);
  return 1e-12 * mag;
}

// Runs fn(i) for i in [0, count) on up to `workers` threads.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
}

// k-subset of [0, m) with lexicographic rank `rank`.
std::vector<std::size_t> unrank_combination(std::uint64_t rank,
                                            std::size_t m, std::size_t k) {
  std::vector<std::size_t> out(k);
  std::size_t x = 0;
  for (std::size_t i = 0; i < k; ++i) {
    while (true) {
      const std::uint64_t c = *binomial(m - x - 1, k - i - 1);
      if (c > rank) break;
      rank -= c;
      ++x;
    }
    out[i] = x++;
  }
  return out;
}

// Advances to the lexicographic successor; false after the last subset.
bool next_combination(std::vector<std::size_t>& c, std::size_t m) {
  const std::size_t k = c.size();
  std::size_t i = k;
  while (i > 0 && c[i - 1] == m - k + i - 1) --i;
  if (i == 0) return false;
  ++c[i - 1];
  for (std::size_t j = i; j < k; ++j) c[j] = c[j - 1] + 1;
  return true;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform integer in [0, bound) by rejection; independent of the standard
// library's distribution implementations so streams are portable.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

constexpr std::uint64_t kSamplesPerChunk = 1024;
constexpr std::size_t kExactChunks = 64;

PermutationOutcome exact_test(std::span<const double> scores,
                              std::uint64_t total_partitions,
                              std::size_t workers) {
  const std::size_t m = scores.size();
  const std::size_t n = m / 2;
  const double total = std::accumulate(scores.begin(), scores.end(), 0.0);
  const double observed =
      2.0 * std::accumulate(scores.begin(), scores.begin() + n, 0.0) - total;
  const double bar = observed - tie_tolerance(scores);

  const std::size_t chunks = static_cast<std::size_t>(
      std::min<std::uint64_t>(total_partitions, kExactChunks));
  std::vector<std::uint64_t> hits(chunks, 0);
  parallel_for(chunks, workers, [&](std::size_t chunk) {
    const std::uint64_t begin = total_partitions * chunk / chunks;
    const std::uint64_t end = total_partitions * (chunk + 1) / chunks;
    auto comb = unrank_combination(begin, m, n);
    std::uint64_t local = 0;
    for (std::uint64_t r = begin; r < end; ++r) {
      double sum = 0.0;
      for (std::size_t idx : comb) sum += scores[idx];
      if (2.0 * sum - total >= bar) ++local;
      next_combination(comb, m);
    }
    hits[chunk] = local;
  });

  PermutationOutcome out;
  out.method = PermutationMethod::exact;
  out.n_permutations = total_partitions;
  out.n_at_least = std::accumulate(hits.begin(), hits.end(), std::uint64_t{0});
  out.p = static_cast<double>(out.n_at_least) /
          static_cast<double>(total_partitions);
  return out;
}

PermutationOutcome monte_carlo_test(std::span<const double> scores,
                                    const PermutationPlan& plan,
                                    std::size_t workers) {
  const std::size_t m = scores.size();
  const std::size_t n = m / 2;
  const double total = std::accumulate(scores.begin(), scores.end(), 0.0);
  const double observed =
      2.0 * std::accumulate(scores.begin(), scores.begin() + n, 0.0) - total;
  const double bar = observed - tie_tolerance(scores);

  const std::uint64_t chunks =
      (plan.samples + kSamplesPerChunk - 1) / kSamplesPerChunk;
  std::vector<std::uint64_t> hits(chunks, 0);
  parallel_for(chunks, workers, [&](std::size_t chunk) {
    std::mt19937_64 rng(splitmix64(plan.seed ^ splitmix64(chunk + 1)));
    const std::uint64_t begin = chunk * kSamplesPerChunk;
    const std::uint64_t end =
        std::min(plan.samples, begin + kSamplesPerChunk);
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::uint64_t local = 0;
    for (std::uint64_t s = begin; s < end; ++s) {
      // Partial Fisher-Yates: the first n slots become a uniform n-subset
      // whatever the current arrangement is.
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + uniform_below(rng, m - i);
        std::swap(order[i], order[j]);
        sum += scores[order[i]];
      }
      if (2.0 * sum - total >= bar) ++local;
    }
    hits[chunk] = local;
  });

  PermutationOutcome out;
  out.method = PermutationMethod::monte_carlo;
  out.n_permutations = plan.samples;
  out.n_at_least = std::accumulate(hits.begin(), hits.end(), std::uint64_t{0});
  out.p = static_cast<double>(1 + out.n_at_least) /
          static_cast<double>(1 + plan.samples);
  return out;
}

void check_scores(std::span<const double> scores) {
  if (scores.size() < 2 || scores.size() % 2 != 0) {
    throw DataError(
        "EAT needs equally sized, non-empty X and Y target groups");
  }
}

}  // namespace

EatInput::EatInput(Vectors x, Vectors y, Vectors a, Vectors b,
                   EatLabels labels)
    : x_(std::move(x)),
      y_(std::move(y)),
      a_(std::move(a)),
      b_(std::move(b)),
      labels_(std::move(labels)) {
  if (x_.empty()) throw DataError("EAT group " + labels_.x + " is empty");
  const std::size_t d = x_.front().size();
  if (d == 0) throw DataError("EAT vectors must have dimension >= 1");
  check_group(x_, labels_.x, d);
  check_group(y_, labels_.y, d);
  check_group(a_, labels_.a, d);
  check_group(b_, labels_.b, d);
  if (x_.size() != y_.size()) {
    throw DataError("EAT target groups must be equally sized: |" + labels_.x +
                    "| = " + std::to_string(x_.size()) + ", |" + labels_.y +
                    "| = " + std::to_string(y_.size()));
  }
}

EatInput EatInput::swapped_targets() const {
  EatLabels l = labels_;
  std::swap(l.x, l.y);
  return EatInput(y_, x_, a_, b_, std::move(l));
}

EatInput EatInput::swapped_attributes() const {
  EatLabels l = labels_;
  std::swap(l.a, l.b);
  return EatInput(x_, y_, b_, a_, std::move(l));
}

std::string_view to_string(StdDev v) {
  return v == StdDev::population ? "population" : "sample";
}

std::string_view to_string(PermutationMode v) {
  switch (v) {
    case PermutationMode::automatic: return "auto";
    case PermutationMode::exact: return "exact";
    case PermutationMode::monte_carlo: return "monte_carlo";
  }
  return "auto";
}

std::string_view to_string(PermutationMethod v) {
  return v == PermutationMethod::exact ? "exact" : "monte_carlo";
}

StdDev parse_std_dev(std::string_view s) {
  if (s == "population") return StdDev::population;
  if (s == "sample") return StdDev::sample;
  throw ConfigError("unknown std_dev '" + std::string(s) +
                    "' (expected population or sample)");
}

PermutationMode parse_permutation_mode(std::string_view s) {
  if (s == "auto") return PermutationMode::automatic;
  if (s == "exact") return PermutationMode::exact;
  if (s == "monte_carlo") return PermutationMode::monte_carlo;
  throw ConfigError("unknown permutation mode '" + std::string(s) +
                    "' (expected auto, exact or monte_carlo)");
}

PermutationMethod parse_permutation_method(std::string_view s) {
  if (s == "exact") return PermutationMethod::exact;
  if (s == "monte_carlo") return PermutationMethod::monte_carlo;
  throw DataError("unknown permutation method '" + std::string(s) + "'");
}

void PermutationPlan::validate() const {
  if (samples == 0) throw ConfigError("permutation samples must be >= 1");
}

double association(std::span<const double> w, const Vectors& a,
                   const Vectors& b) {
  if (a.empty() || b.empty()) {
    throw DataError("association needs non-empty attribute groups");
  }
  double sa = 0.0;
  for (const auto& v : a) sa += cosine(w, v);
  double sb = 0.0;
  for (const auto& v : b) sb += cosine(w, v);
  return sa / static_cast<double>(a.size()) -
         sb / static_cast<double>(b.size());
}

std::vector<double> target_associations(const EatInput& input) {
  std::vector<double> s;
  s.reserve(input.x().size() + input.y().size());
  for (const auto& w : input.x()) s.push_back(association(w, input.a(), input.b()));
  for (const auto& w : input.y()) s.push_back(association(w, input.a(), input.b()));
  return s;
}

double effect_size_from_scores(std::span<const double> scores,
                               StdDev std_dev) {
  check_scores(scores);
  const std::size_t n = scores.size() / 2;
  const double mean_x =
      std::accumulate(scores.begin(), scores.begin() + n, 0.0) / n;
  const double mean_y =
      std::accumulate(scores.begin() + n, scores.end(), 0.0) / n;
  const double mean =
      std::accumulate(scores.begin(), scores.end(), 0.0) / scores.size();
  double ss = 0.0;
  double max_abs = 0.0;
  for (double s : scores) {
    ss += (s - mean) * (s - mean);
    max_abs = std::max(max_abs, std::abs(s));
  }
  const double denom = std_dev == StdDev::population
                           ? static_cast<double>(scores.size())
                           : static_cast<double>(scores.size() - 1);
  const double sd = std::sqrt(ss / denom);
  // Identical scores can leave rounding-level spread; treat it as zero.
  if (sd <= 1e-14 * std::max(1.0, max_abs)) {
    throw DegenerateError(
        "effect size undefined: all target associations are identical "
        "(zero standard deviation)");
  }
  // Balanced groups bound |d| by 2 (population) or 2 sqrt((N-1)/N) (sample);
  // clamp rounding excess at that bound.
  const double bound =
      std_dev == StdDev::population
          ? 2.0
          : 2.0 * std::sqrt(denom / static_cast<double>(scores.size()));
  return std::clamp((mean_x - mean_y) / sd, -bound, bound);
}

double statistic_from_scores(std::span<const double> scores) {
  check_scores(scores);
  const std::size_t n = scores.size() / 2;
  return std::accumulate(scores.begin(), scores.begin() + n, 0.0) -
         std::accumulate(scores.begin() + n, scores.end(), 0.0);
}

double effect_size(const EatInput& input, StdDev std_dev) {
  return effect_size_from_scores(target_associations(input), std_dev);
}

double test_statistic(const EatInput& input) {
  return statistic_from_scores(target_associations(input));
}

std::optional<std::uint64_t> binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  uint128 c = 1;
  for (std::uint64_t i = 0; i < k; ++i) {
    // c * (n - i) / (i + 1) stays integral at every step.
    c = c * (n - i) / (i + 1);
    if (c > std::numeric_limits<std::uint64_t>::max()) return std::nullopt;
  }
  return static_cast<std::uint64_t>(c);
}

std::size_t default_workers() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("EAT_AUDIT_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap > 0) {
      n = std::min(n, static_cast<std::size_t>(cap));
    }
  }
  return n;
}

PermutationOutcome permutation_p_from_scores(std::span<const double> scores,
                                             const PermutationPlan& plan,
                                             std::size_t workers) {
  check_scores(scores);
  plan.validate();
  if (workers == 0) workers = default_workers();
  const auto partitions = binomial(scores.size(), scores.size() / 2);

  bool exact = false;
  switch (plan.mode) {
    case PermutationMode::exact:
      // Counts past 64 bits cannot be enumerated; fall back to sampling.
      exact = partitions.has_value();
      break;
    case PermutationMode::monte_carlo:
      exact = false;
      break;
    case PermutationMode::automatic:
      exact = partitions && *partitions <= plan.exact_threshold;
      break;
  }
  return exact ? exact_test(scores, *partitions, workers)
               : monte_carlo_test(scores, plan, workers);
}

PermutationOutcome permutation_p(const EatInput& input,
                                 const PermutationPlan& plan,
                                 std::size_t workers) {
  return permutation_p_from_scores(target_associations(input), plan, workers);
}

EatResult compute_eat(const EatInput& input, const PermutationPlan& plan,
                      const EatOptions& options) {
  plan.validate();
  EatResult r;
  r.per_target_s = target_associations(input);
  r.d = effect_size_from_scores(r.per_target_s, options.std_dev);
  r.statistic = statistic_from_scores(r.per_target_s);
  const auto perm =
      permutation_p_from_scores(r.per_target_s, plan, options.workers);
  r.p = perm.p;
  r.method = perm.method;
  r.n_permutations = perm.n_permutations;
  r.seed = plan.seed;
  r.std_dev = options.std_dev;
  r.labels = input.labels();
  r.n_x = input.x().size();
  r.n_y = input.y().size();
  r.n_a = input.a().size();
  r.n_b = input.b().size();
  for (std::size_t i = 0; i < r.n_x; ++i) {
    r.target_ids.push_back(r.labels.x + "[" + std::to_string(i) + "]");
  }
  for (std::size_t i = 0; i < r.n_y; ++i) {
    r.target_ids.push_back(r.labels.y + "[" + std::to_string(i) + "]");
  }
  return r;
}

namespace {

struct Resolved {
  Vectors vectors;
  std::vector<std::string> ids;
};

Resolved resolve_tag(std::span<const Dataset> datasets,
                     const std::string& tag) {
  Resolved out;
  for (const auto& ds : datasets) {
    for (const auto& e : ds.manifest.entries()) {
      if (e.group != tag) continue;
      const auto row = ds.matrix.row(e.row);
      out.vectors.emplace_back(row.begin(), row.end());
      out.ids.push_back(e.id);
    }
  }
  if (out.vectors.empty()) {
    throw DataError("no manifest entries carry group tag '" + tag + "'");
  }
  return out;
}

Resolved resolve_prompts(std::span<const Dataset> datasets,
                         const PromptGrid& grid,
                         const std::optional<std::string>& tag,
                         const std::string& which) {
  Resolved out;
  for (const auto& prompt : grid.prompts) {
    const ManifestEntry* found = nullptr;
    const Dataset* found_in = nullptr;
    for (const auto& ds : datasets) {
      for (const auto& e : ds.manifest.entries()) {
        if (e.kind != EntryKind::text || !e.text || *e.text != prompt.text) {
          continue;
        }
        if (tag && e.group != *tag) continue;
        if (found) {
          throw DataError("prompt '" + prompt.text + "' for attribute " +
                          which + " matches both '" + found->id + "' and '" +
                          e.id + "'");
        }
        found = &e;
        found_in = &ds;
      }
    }
    if (!found) {
      throw DataError("prompt '" + prompt.text + "' for attribute " + which +
                      " has no text entry in the manifest" +
                      (tag ? " under group '" + *tag + "'" : std::string()));
    }
    const auto row = found_in->matrix.row(found->row);
    out.vectors.emplace_back(row.begin(), row.end());
    out.ids.push_back(found->id);
  }
  return out;
}

}  // namespace

EatResult run_eat(std::span<const Dataset> datasets, const GroupSpec& groups,
                  const PermutationPlan& plan, const EatOptions& options,
                  const std::optional<AttributePrompts>& prompts) {
  if (datasets.empty()) throw ConfigError("run_eat: no datasets given");
  if (groups.x.empty() || groups.y.empty()) {
    throw ConfigError("EAT group spec needs X and Y group tags");
  }
  if (groups.x == groups.y) {
    throw ConfigError("EAT target groups X and Y must be disjoint (both '" +
                      groups.x + "')");
  }
  auto x = resolve_tag(datasets, groups.x);
  auto y = resolve_tag(datasets, groups.y);
  Resolved a, b;
  if (prompts) {
    a = resolve_prompts(datasets, prompts->a, groups.a, "A");
    b = resolve_prompts(datasets, prompts->b, groups.b, "B");
  } else {
    if (!groups.a || !groups.b) {
      throw ConfigError(
          "EAT group spec needs A and B group tags or a stimulus catalog");
    }
    a = resolve_tag(datasets, *groups.a);
    b = resolve_tag(datasets, *groups.b);
  }

  EatLabels labels{groups.x, groups.y, groups.a.value_or("A"),
                   groups.b.value_or("B")};
  EatInput input(std::move(x.vectors), std::move(y.vectors),
                 std::move(a.vectors), std::move(b.vectors), labels);
  EatResult r = compute_eat(input, plan, options);
  r.target_ids = std::move(x.ids);
  r.target_ids.insert(r.target_ids.end(), y.ids.begin(), y.ids.end());
  return r;
}

std::string eat_result_to_json(const EatResult& r) {
  nlohmann::ordered_json j;
  j["d"] = r.d;
  j["p"] = r.p;
  j["statistic"] = r.statistic;
  j["method"] = to_string(r.method);
  j["n_permutations"] = r.n_permutations;
  j["seed"] = r.seed;
  j["std_dev"] = to_string(r.std_dev);
  j["labels"] = {{"X", r.labels.x}, {"Y", r.labels.y},
                 {"A", r.labels.a}, {"B", r.labels.b}};
  j["sizes"] = {{"X", r.n_x}, {"Y", r.n_y}, {"A", r.n_a}, {"B", r.n_b}};
  auto targets = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.per_target_s.size(); ++i) {
    nlohmann::ordered_json t;
    t["id"] = i < r.target_ids.size() ? r.target_ids[i] : std::string();
    t["group"] = i < r.n_x ? "X" : "Y";
    t["s"] = r.per_target_s[i];
    targets.push_back(std::move(t));
  }
  j["per_target_s"] = std::move(targets);
  return j.dump(2) + "\n";
}

EatResult parse_eat_result_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EatResult r;
    r.d = j.at("d").get<double>();
    r.p = j.at("p").get<double>();
    r.statistic = j.at("statistic").get<double>();
    r.method = parse_permutation_method(j.at("method").get<std::string>());
    r.n_permutations = j.at("n_permutations").get<std::uint64_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.std_dev = parse_std_dev(j.value("std_dev", std::string("population")));
    if (j.contains("labels")) {
      const auto& l = j["labels"];
      r.labels = {l.value("X", "X"), l.value("Y", "Y"), l.value("A", "A"),
                  l.value("B", "B")};
    }
    if (j.contains("sizes")) {
      const auto& s = j["sizes"];
      r.n_x = s.value("X", std::size_t{0});
      r.n_y = s.value("Y", std::size_t{0});
      r.n_a = s.value("A", std::size_t{0});
      r.n_b = s.value("B", std::size_t{0});
    }
    for (const auto& t : j.value("per_target_s", nlohmann::json::array())) {
      r.per_target_s.push_back(t.at("s").get<double>());
      r.target_ids.push_back(t.value("id", std::string()));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed EAT result JSON: ") + e.what());
  }
}

}  // namespace eataudit
