// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "eataudit/captions.hpp"
#include "eataudit/eat.hpp"
#include "eataudit/embedding_io.hpp"
#include "eataudit/error.hpp"
#include "eataudit/ratings.hpp"
#include "eataudit/report.hpp"
#include "eataudit/stimuli.hpp"
#include "test_support.hpp"

using namespace eataudit;
using namespace eataudit::fixtures;

namespace {

// Collects failed checks so one criterion can report every problem it saw.
struct Check {
  std::vector<std::string> failures;
  std::ostringstream info;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

std::string num(double v, int precision = 17) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

PermutationPlan exact_plan() {
  PermutationPlan p;
  p.mode = PermutationMode::exact;
  return p;
}

bool close_to_one_third(double p) { return p == 1.0 / 3.0; }

void exact_oracle(Check& c) {
  const auto start = std::chrono::steady_clock::now();
  const auto in = two_plus_two_fixture();
  const double d = effect_size(in);
  const auto out = permutation_p(in, exact_plan(), 1);
  const auto naive = naive_exact_p(in);
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start)
                          .count();
  c.info << "d=" << num(d) << " p=" << out.n_at_least << "/"
         << out.n_permutations << " naive=" << naive.at_least << "/"
         << naive.total << " t=" << num(secs, 3) << "s";
  c.expect(std::abs(d - 1.1094) <= 1e-4, "d outside 1.1094 +- 1e-4");
  c.expect(std::abs(d - naive_effect_size(in)) <= 1e-12,
           "d disagrees with the naive effect size");
  c.expect(out.method == PermutationMethod::exact, "method is not exact");
  c.expect(out.n_at_least == 2 && out.n_permutations == 6,
           "partition count is not 2/6");
  c.expect(close_to_one_third(out.p), "p is not exactly 1/3");
  c.expect(naive.at_least == out.n_at_least && naive.total == out.n_permutations,
           "naive enumerator disagrees");
  c.expect(secs < 1.0, "runtime >= 1 s");
}

void extremal_bound(Check& c) {
  const auto in = one_plus_one_fixture();
  const double d = effect_size(in);
  const auto out = permutation_p(in, exact_plan(), 1);
  c.expect(d == 2.0, "1+1 fixture d is not exactly 2 (got " + num(d) + ")");
  c.expect(out.p == 0.5, "1+1 fixture p is not 0.5 (got " + num(out.p) + ")");

  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(kDefaultSeed);
  double max_abs = 0.0;
  std::size_t degenerate = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t n = 1 + rng() % 8;
    const std::size_t attr = 1 + rng() % 8;
    const std::size_t dim = 2 + rng() % 30;
    const double shift = (rng() % 4) * 0.75;
    const auto input = random_input(rng, n, attr, dim, shift);
    try {
      max_abs = std::max(max_abs, std::abs(effect_size(input)));
    } catch (const DegenerateError&) {
      ++degenerate;
    }
  }
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start)
                          .count();
  c.info << "d(1+1)=" << num(d) << " p(1+1)=" << num(out.p)
         << " max|d|=" << num(max_abs) << " degenerate=" << degenerate
         << " t=" << num(secs, 3) << "s";
  c.expect(max_abs <= 2.0, "|d| > 2 on a random instance");
  c.expect(secs < 30.0, "property suite took >= 30 s");
}

void antisymmetry_and_scale(Check& c) {
  std::mt19937_64 rng(kDefaultSeed + 1);
  std::uniform_real_distribution<double> scale(0.001, 1000.0);
  double worst_anti = 0.0, worst_scale = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 6;
    const std::size_t dim = 2 + rng() % 20;
    const auto in = random_input(rng, n, 1 + rng() % 6, dim, 0.5);
    const double d = effect_size(in);
    worst_anti = std::max(worst_anti,
                          std::abs(d + effect_size(in.swapped_targets())));

    auto rescale = [&](Vectors vs) {
      for (auto& v : vs) {
        const double k = scale(rng);
        for (auto& x : v) x *= k;
      }
      return vs;
    };
    const EatInput scaled(rescale(in.x()), rescale(in.y()), rescale(in.a()),
                          rescale(in.b()));
    worst_scale = std::max(worst_scale, std::abs(d - effect_size(scaled)));
  }
  c.info << "max|d(X,Y)+d(Y,X)|=" << num(worst_anti, 3)
         << " max|d-d_scaled|=" << num(worst_scale, 3);
  c.expect(worst_anti <= 1e-12, "antisymmetry violated beyond 1e-12");
  c.expect(worst_scale < 1e-9, "rescaling changed d by >= 1e-9");
}

void monte_carlo_convergence(Check& c) {
  std::vector<EatInput> inputs = {one_plus_one_fixture(), two_plus_two_fixture()};
  std::mt19937_64 rng(kDefaultSeed + 2);
  for (std::size_t n = 1; n <= 6; ++n) {
    for (double shift : {0.0, 0.3, 0.8, 2.0}) {
      inputs.push_back(random_input(rng, n, 3, 8, shift));
    }
  }
  PermutationPlan mc;
  mc.mode = PermutationMode::monte_carlo;
  mc.samples = 10000;
  mc.seed = kDefaultSeed;
  double worst = 0.0;
  std::size_t worker_mismatch = 0, naive_mismatch = 0;
  for (const auto& in : inputs) {
    const auto exact = permutation_p(in, exact_plan(), 1);
    const auto naive = naive_exact_p(in);
    if (naive.at_least != exact.n_at_least) ++naive_mismatch;
    const auto p1 = permutation_p(in, mc, 1);
    const auto p2 = permutation_p(in, mc, 2);
    const auto p8 = permutation_p(in, mc, 8);
    if (p1.p != p2.p || p1.p != p8.p) ++worker_mismatch;
    worst = std::max(worst, std::abs(p1.p - exact.p));
  }
  c.info << inputs.size() << " fixtures, max|p_MC-p_exact|=" << num(worst, 4)
         << " worker mismatches=" << worker_mismatch;
  c.expect(worst <= 0.03, "Monte Carlo p off by more than 0.03");
  c.expect(worker_mismatch == 0, "p differs across 1, 2, 8 workers");
  c.expect(naive_mismatch == 0, "exact p disagrees with naive enumerator");
}

void prompt_grid(Check& c) {
  const std::vector<std::string> expected_templates = {
      "[stimulus]", "a [stimulus]", "a photo of a [stimulus]",
      "an image of a [stimulus]", "a picture of a [stimulus]"};
  const auto cat = builtin_catalog("emotion_angry");
  const auto a = expand_prompts(cat.a, cat.templates);
  const auto b = expand_prompts(cat.b, cat.templates);
  c.info << "A=" << a.prompts.size() << " B=" << b.prompts.size()
         << " templates=" << cat.templates.size();
  c.expect(cat.templates.templates() == expected_templates,
           "template strings differ");
  c.expect(a.prompts.size() == 30 && b.prompts.size() == 30,
           "prompt counts are not 30 + 30");
  for (const auto* grid : {&a, &b}) {
    for (const auto& p : grid->prompts) {
      std::string want = expected_templates[p.template_index];
      want.replace(want.find("[stimulus]"), 10, p.stimulus);
      c.expect(p.text == want, "prompt text '" + p.text + "' is not verbatim");
    }
  }
  const auto texts = a.texts();
  c.expect(std::find(texts.begin(), texts.end(), "a photo of a angry person") !=
               texts.end(),
           "missing 'a photo of a angry person'");
}

void caption_analytics(Check& c) {
  // g1 (1000 captions): smiling 120, happy 40, frown 80.
  // g2 (1000 captions): smiling 30, happy 59, frown 20.
  // Corpus-wide: happy 99 (dropped), frown 100 (kept), smiling 150.
  CaptionCorpus corpus;
  for (int i = 0; i < 1000; ++i) {
    if (i < 40) {
      corpus.add("g1", "a woman smiling happy frown frown");
    } else if (i < 120) {
      corpus.add("g1", "a smiling woman");
    } else {
      corpus.add("g1", "a woman");
    }
  }
  for (int i = 0; i < 1000; ++i) {
    std::string cap = "a person";
    if (i < 30) cap += " smiling";
    if (i < 59) cap += " happy";
    if (i < 20) cap += " frown";
    corpus.add("g2", cap);
  }
  const auto rep = analyze_captions(
      corpus, {builtin_lexicon("happiness"), builtin_lexicon("anger")}, 100, 4);
  const std::vector<std::tuple<std::string, std::string, double>> want = {
      {"g1", "happiness", 120.0}, {"g1", "anger", 80.0},
      {"g2", "happiness", 30.0}, {"g2", "anger", 20.0}};
  c.expect(rep.rates.size() == want.size(), "wrong number of rate rows");
  for (std::size_t i = 0; i < std::min(want.size(), rep.rates.size()); ++i) {
    const auto& r = rep.rates[i];
    const auto& [g, e, rate] = want[i];
    c.info << g << "/" << e << "=" << num(r.rate_per_1000(), 6) << " ";
    c.expect(r.group == g && r.emotion == e && r.rate_per_1000() == rate,
             g + "/" + e + " rate is not " + num(rate, 6));
  }
  const bool happy_dropped =
      rep.dropped_words.contains("happy") && !rep.retained_words.contains("happy");
  const bool frown_kept =
      rep.retained_words.contains("frown") && !rep.dropped_words.contains("frown");
  c.info << "happy(99) " << (happy_dropped ? "dropped" : "kept") << ", frown(100) "
         << (frown_kept ? "kept" : "dropped");
  c.expect(happy_dropped, "word with count 99 was not dropped");
  c.expect(frown_kept, "word with count 100 was not retained");
}

RatingTable table_from_columns(const std::vector<std::vector<int>>& cols) {
  const std::size_t n = cols.front().size();
  std::vector<std::string> images, raters;
  for (std::size_t i = 0; i < n; ++i) images.push_back("img" + std::to_string(i));
  for (std::size_t r = 0; r < cols.size(); ++r) raters.push_back("r" + std::to_string(r));
  std::vector<std::vector<int>> scores(n, std::vector<int>(cols.size()));
  for (std::size_t r = 0; r < cols.size(); ++r) {
    for (std::size_t i = 0; i < n; ++i) scores[i][r] = cols[r][i];
  }
  return RatingTable(images, raters, scores);
}

void ratings(Check& c) {
  std::vector<GroupLabel> labels;
  for (int i = 0; i < 100; ++i) {
    labels.push_back({"girl_18", i < 47 ? Category::sexy : Category::neutral});
  }
  const auto rates = group_rates(labels);
  const double pct = rates.groups.at(0).percent();
  const std::string rendered = format_ratio(rates.groups.at(0).sexualized,
                                            rates.groups.at(0).n, 100, 1);
  c.expect(pct == 47.0 && rendered == "47.0", "47/100 is not 47.0%");

  c.expect(sexualized(Category::hentai) && sexualized(Category::sexy) &&
               sexualized(Category::pornographic),
           "hentai/sexy/pornographic not all sexualized");
  c.expect(!sexualized(Category::neutral) && !sexualized(Category::drawing),
           "neutral/drawing counted as sexualized");

  const double alpha =
      cronbach_alpha(table_from_columns({{1, 1, 0, 0}, {1, 0, 0, 0}, {1, 1, 0, 1}}));
  const double same =
      cronbach_alpha(table_from_columns({{1, 0, 1, 1}, {1, 0, 1, 1}, {1, 0, 1, 1}}));
  c.info << "rate=" << rendered << "% alpha=" << num(alpha)
         << " identical=" << num(same);
  c.expect(std::abs(alpha - 0.75) <= 1e-12, "alpha fixture is not 0.75");
  c.expect(same == 1.0, "identical raters do not give 1.0");
}

void format_fidelity(Check& c) {
  std::mt19937_64 rng(kDefaultSeed + 3);
  std::normal_distribution<double> normal(0.0, 10.0);
  const std::vector<std::pair<std::size_t, std::size_t>> shapes = {
      {1, 1}, {3, 7}, {17, 512}, {250, 768}, {1000, 1024}};
  std::size_t matrices = 0;
  for (const auto& [rows, dim] : shapes) {
    for (DType dt : {DType::float32, DType::float64}) {
      std::vector<double> data(rows * dim);
      for (auto& v : data) {
        v = normal(rng);
        if (dt == DType::float32) v = static_cast<float>(v);
      }
      const EmbeddingMatrix m(rows, dim, dt, data);
      const auto bytes = write_npy(m);
      const auto back = parse_npy(std::span<const std::uint8_t>(bytes));
      bool same = back.rows() == rows && back.dim() == dim && back.dtype() == dt;
      for (std::size_t i = 0; same && i < data.size(); ++i) {
        same = std::bit_cast<std::uint64_t>(back.data()[i]) ==
               std::bit_cast<std::uint64_t>(data[i]);
      }
      same = same && write_npy(back) == bytes;
      c.expect(same, "round trip not bit-exact for " + std::to_string(rows) +
                         "x" + std::to_string(dim) +
                         (dt == DType::float32 ? " f32" : " f64"));
      ++matrices;
    }
  }
  const auto starred = render_cell(make_cell(1.09, 0.003));
  const auto plain = render_cell(make_cell(0.26, 0.12));
  c.info << matrices << " matrices round-tripped, cells '" << starred << "' '"
         << plain << "'";
  c.expect(starred == "1.09*", "(1.09, 0.003) did not render as 1.09*");
  c.expect(plain == "0.26", "(0.26, 0.12) did not render as 0.26");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria = {
      {"exact permutation oracle on the 2+2 fixture", exact_oracle},
      {"extremal bound and 1+1 fixture", extremal_bound},
      {"antisymmetry and scale invariance", antisymmetry_and_scale},
      {"Monte Carlo convergence and worker independence", monte_carlo_convergence},
      {"emotion_angry prompt grid", prompt_grid},
      {"caption analytics on the planted corpus", caption_analytics},
      {"ratings, category mapping and Cronbach alpha", ratings},
      {"NPY round trip and report cell rendering", format_fidelity},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Check c;
    try {
      fn(c);
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("exception: ") + e.what());
    }
    const bool ok = c.failures.empty();
    failed += ok ? 0 : 1;
    std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(),
                c.info.str().c_str());
    for (const auto& f : c.failures) std::printf("       - %s\n", f.c_str());
  }
  std::printf("%d of %zu criteria passed\n",
              static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
