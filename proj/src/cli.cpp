#include "eataudit/cli.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "eataudit/captions.hpp"
#include "eataudit/csv.hpp"
#include "eataudit/eat.hpp"
#include "eataudit/error.hpp"
#include "eataudit/ratings.hpp"
#include "eataudit/report.hpp"
#include "eataudit/stimuli.hpp"

namespace eataudit {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Flags shared by every subcommand. Flags override the config document.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> format;
  std::optional<std::string> out;
  std::optional<std::uint64_t> samples;
  std::optional<std::string> mode;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON config document");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--format", f.format, "markdown, csv or json");
  cmd->add_option("--out", f.out, "output path (default: stdout)");
  cmd->add_option("--samples", f.samples, "Monte Carlo permutation samples");
  cmd->add_option("--mode", f.mode, "auto, exact or monte_carlo");
}

// Loaded config plus the directory its relative paths are resolved against.
struct Config {
  json doc = json::object();
  fs::path base = fs::current_path();

  std::string path(const std::string& p) const {
    const fs::path fp(p);
    return fp.is_absolute() ? p : (base / fp).string();
  }

  template <typename T>
  std::optional<T> get(const char* key) const {
    if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
    try {
      return doc[key].get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config field '") + key +
                        "' has the wrong type");
    }
  }
};

Config load_config(const std::string& path) {
  Config cfg;
  if (path.empty()) return cfg;
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
  try {
    cfg.doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + ": malformed JSON (" + e.what() +
                      ")");
  }
  if (!cfg.doc.is_object()) {
    throw ConfigError("config " + path + ": expected a JSON object");
  }
  cfg.base = fs::absolute(path).parent_path();
  return cfg;
}

Format resolve_format(const CommonFlags& f, const Config& cfg,
                      Format fallback) {
  if (f.format) return parse_format(*f.format);
  if (auto s = cfg.get<std::string>("format")) return parse_format(*s);
  return fallback;
}

void emit(const CommonFlags& f, const Config& cfg, const std::string& text,
          std::ostream& out) {
  std::optional<std::string> path = f.out;
  if (!path) {
    if (auto p = cfg.get<std::string>("out")) path = cfg.path(*p);
  }
  if (path) {
    write_file(*path, text);
  } else {
    out << text;
  }
}

Catalog resolve_catalog(const Config& cfg,
                        const std::optional<std::string>& flag_catalog,
                        const std::optional<std::string>& flag_catalog_file,
                        const std::optional<std::string>& flag_templates) {
  std::optional<Catalog> catalog;
  if (flag_catalog_file) {
    catalog = load_catalog_file(*flag_catalog_file);
  } else if (flag_catalog) {
    catalog = builtin_catalog(*flag_catalog);
  } else if (cfg.doc.contains("catalog_file")) {
    catalog = load_catalog_file(cfg.path(*cfg.get<std::string>("catalog_file")));
  } else if (cfg.doc.contains("catalog")) {
    const auto& c = cfg.doc["catalog"];
    if (c.is_string()) {
      catalog = builtin_catalog(c.get<std::string>());
    } else {
      catalog = parse_catalog_json(c.dump());
    }
  }
  if (!catalog) throw ConfigError("no catalog given (--catalog)");

  if (flag_templates) {
    catalog->templates = parse_templates_json(read_file(*flag_templates));
  } else if (cfg.doc.contains("templates")) {
    const auto& t = cfg.doc["templates"];
    catalog->templates =
        t.is_string() ? parse_templates_json(read_file(cfg.path(t.get<std::string>())))
                      : parse_templates_json(t.dump());
  }
  return *catalog;
}

// ---------------------------------------------------------------- prompts

struct PromptsFlags {
  CommonFlags common;
  std::optional<std::string> catalog;
  std::optional<std::string> catalog_file;
  std::optional<std::string> templates;
  bool normalize_articles = false;
};

int cmd_prompts(const PromptsFlags& f, std::ostream& out) {
  const Config cfg = load_config(f.common.config);
  const Catalog catalog =
      resolve_catalog(cfg, f.catalog, f.catalog_file, f.templates);
  ExpandOptions opts;
  opts.normalize_articles =
      f.normalize_articles || cfg.get<bool>("normalize_articles").value_or(false);
  const PromptGrid a = expand_prompts(catalog.a, catalog.templates, opts);
  const PromptGrid b = expand_prompts(catalog.b, catalog.templates, opts);

  const Format format = resolve_format(f.common, cfg, Format::csv);
  std::string text;
  if (format == Format::json) {
    auto grid_json = [](const PromptGrid& g) {
      auto arr = nlohmann::ordered_json::array();
      for (const auto& p : g.prompts) {
        arr.push_back({{"stimulus", p.stimulus},
                       {"template_index", p.template_index},
                       {"text", p.text}});
      }
      return arr;
    };
    nlohmann::ordered_json j;
    j["catalog"] = catalog.name;
    j["templates"] = catalog.templates.templates();
    j["A"] = grid_json(a);
    j["B"] = grid_json(b);
    text = j.dump(2) + "\n";
  } else if (format == Format::csv) {
    text = csv::format_row({"set", "stimulus", "template_index", "text"});
    for (const auto& [name, grid] : {std::pair{"A", &a}, std::pair{"B", &b}}) {
      for (const auto& p : grid->prompts) {
        text += csv::format_row(
            {name, p.stimulus, std::to_string(p.template_index), p.text});
      }
    }
  } else {
    text = "| set | stimulus | template_index | text |\n| --- | --- | ---: | --- |\n";
    for (const auto& [name, grid] : {std::pair{"A", &a}, std::pair{"B", &b}}) {
      for (const auto& p : grid->prompts) {
        text += std::string("| ") + name + " | " + p.stimulus + " | " +
                std::to_string(p.template_index) + " | " + p.text + " |\n";
      }
    }
  }
  emit(f.common, cfg, text, out);
  return kExitOk;
}

// ---------------------------------------------------------------- eat

struct EatFlags {
  CommonFlags common;
  std::optional<std::string> embeddings;
  std::optional<std::string> manifest;
  std::optional<std::string> catalog;
  std::optional<std::string> std_dev;
};

PermutationPlan resolve_plan(const CommonFlags& f, const Config& cfg) {
  PermutationPlan plan;
  if (cfg.doc.contains("plan")) {
    const auto& p = cfg.doc["plan"];
    if (!p.is_object()) throw ConfigError("config 'plan' must be an object");
    try {
      if (p.contains("mode")) {
        plan.mode = parse_permutation_mode(p["mode"].get<std::string>());
      }
      plan.samples = p.value("samples", plan.samples);
      plan.seed = p.value("seed", plan.seed);
      plan.exact_threshold = p.value("exact_threshold", plan.exact_threshold);
    } catch (const json::exception&) {
      throw ConfigError("config 'plan' has a field of the wrong type");
    }
  }
  if (auto s = cfg.get<std::uint64_t>("seed")) plan.seed = *s;
  if (f.seed) plan.seed = *f.seed;
  if (f.samples) plan.samples = *f.samples;
  if (f.mode) plan.mode = parse_permutation_mode(*f.mode);
  plan.validate();
  return plan;
}

std::string render_eat_result(const EatResult& r, Format format) {
  if (format == Format::json) return eat_result_to_json(r);
  const ReportCell cell = make_cell(r.d, r.p);
  std::ostringstream p_text;
  p_text.precision(6);
  p_text << r.p;
  const std::vector<std::pair<std::string, std::string>> rows = {
      {"cell", render_cell(cell)},
      {"d", format_fixed(r.d, 4)},
      {"p", p_text.str()},
      {"band", std::string(to_string(cell.band))},
      {"statistic", format_fixed(r.statistic, 6)},
      {"method", std::string(to_string(r.method))},
      {"n_permutations", std::to_string(r.n_permutations)},
      {"seed", std::to_string(r.seed)},
      {"std_dev", std::string(to_string(r.std_dev))},
  };
  std::string text;
  if (format == Format::csv) {
    text = csv::format_row({"field", "value"});
    for (const auto& [k, v] : rows) text += csv::format_row({k, v});
  } else {
    text = "| field | value |\n| --- | ---: |\n";
    for (const auto& [k, v] : rows) text += "| " + k + " | " + v + " |\n";
  }
  return text;
}

int cmd_eat(const EatFlags& f, std::ostream& out) {
  const Config cfg = load_config(f.common.config);

  std::vector<std::pair<std::string, std::string>> paths;
  if (f.embeddings || f.manifest) {
    if (!f.embeddings || !f.manifest) {
      throw ConfigError("--embeddings and --manifest must be given together");
    }
    paths.emplace_back(*f.embeddings, *f.manifest);
  } else if (cfg.doc.contains("datasets")) {
    for (const auto& d : cfg.doc["datasets"]) {
      if (!d.contains("embeddings") || !d.contains("manifest")) {
        throw ConfigError("each dataset needs 'embeddings' and 'manifest'");
      }
      paths.emplace_back(cfg.path(d["embeddings"].get<std::string>()),
                         cfg.path(d["manifest"].get<std::string>()));
    }
  } else if (cfg.doc.contains("embeddings") && cfg.doc.contains("manifest")) {
    paths.emplace_back(cfg.path(*cfg.get<std::string>("embeddings")),
                       cfg.path(*cfg.get<std::string>("manifest")));
  }
  if (paths.empty()) throw ConfigError("no dataset given");

  GroupSpec groups;
  if (!cfg.doc.contains("groups") || !cfg.doc["groups"].is_object()) {
    throw ConfigError("config needs a 'groups' object with X and Y tags");
  }
  const auto& g = cfg.doc["groups"];
  try {
    groups.x = g.value("X", std::string());
    groups.y = g.value("Y", std::string());
    if (g.contains("A")) groups.a = g["A"].get<std::string>();
    if (g.contains("B")) groups.b = g["B"].get<std::string>();
  } catch (const json::exception&) {
    throw ConfigError("group tags must be strings");
  }

  std::optional<AttributePrompts> prompts;
  if (f.catalog || cfg.doc.contains("catalog") ||
      cfg.doc.contains("catalog_file")) {
    const Catalog catalog = resolve_catalog(cfg, f.catalog, std::nullopt,
                                            std::nullopt);
    ExpandOptions opts;
    opts.normalize_articles = cfg.get<bool>("normalize_articles").value_or(false);
    prompts = AttributePrompts{expand_prompts(catalog.a, catalog.templates, opts),
                               expand_prompts(catalog.b, catalog.templates, opts)};
  }

  const PermutationPlan plan = resolve_plan(f.common, cfg);
  EatOptions options;
  if (f.std_dev) {
    options.std_dev = parse_std_dev(*f.std_dev);
  } else if (auto s = cfg.get<std::string>("std_dev")) {
    options.std_dev = parse_std_dev(*s);
  }
  const Format format = resolve_format(f.common, cfg, Format::json);

  std::vector<Dataset> datasets;
  for (const auto& [emb, man] : paths) {
    datasets.push_back(load_dataset(emb, man));
  }
  const EatResult r = run_eat(datasets, groups, plan, options, prompts);
  emit(f.common, cfg, render_eat_result(r, format), out);
  return kExitOk;
}

// ---------------------------------------------------------------- captions

struct CaptionsFlags {
  CommonFlags common;
  std::optional<std::string> corpus;
  std::vector<std::string> lexicons;
  std::optional<std::uint64_t> min_count;
};

Lexicon resolve_lexicon(const std::string& spec, const Config& cfg) {
  for (const auto& l : builtin_lexicons()) {
    if (l.label == spec) return l;
  }
  const std::string p = cfg.path(spec);
  if (!fs::exists(p)) {
    throw ConfigError("lexicon '" + spec +
                      "' is neither a builtin (anger, sadness, happiness) "
                      "nor an existing file");
  }
  return load_lexicon_file(p);
}

int cmd_captions(const CaptionsFlags& f, std::ostream& out) {
  const Config cfg = load_config(f.common.config);
  std::string corpus_path;
  if (f.corpus) {
    corpus_path = *f.corpus;
  } else if (auto c = cfg.get<std::string>("corpus")) {
    corpus_path = cfg.path(*c);
  } else {
    throw ConfigError("no caption corpus given (--corpus)");
  }

  std::vector<Lexicon> lexicons;
  if (!f.lexicons.empty()) {
    for (const auto& s : f.lexicons) lexicons.push_back(resolve_lexicon(s, Config{}));
  } else if (auto ls = cfg.get<std::vector<std::string>>("lexicons")) {
    for (const auto& s : *ls) lexicons.push_back(resolve_lexicon(s, cfg));
  } else {
    lexicons = builtin_lexicons();
  }
  const std::uint64_t min_count =
      f.min_count ? *f.min_count
                  : cfg.get<std::uint64_t>("min_count").value_or(100);
  const Format format = resolve_format(f.common, cfg, Format::csv);

  const CaptionCorpus corpus = load_caption_corpus(corpus_path);
  const auto report =
      analyze_captions(corpus, lexicons, min_count, default_workers());
  emit(f.common, cfg, render_rate_series(report, format), out);
  return kExitOk;
}

// ---------------------------------------------------------------- rates, alpha

struct LabelsFlags {
  CommonFlags common;
  std::optional<std::string> labels;
  std::optional<std::string> rater;
};

std::vector<LabelRecord> resolve_labels(const LabelsFlags& f,
                                        const Config& cfg) {
  if (f.labels) return load_labels_csv(*f.labels);
  if (auto l = cfg.get<std::string>("labels")) {
    return load_labels_csv(cfg.path(*l));
  }
  throw ConfigError("no labels file given (--labels)");
}

int cmd_rates(const LabelsFlags& f, std::ostream& out) {
  const Config cfg = load_config(f.common.config);
  const Format format = resolve_format(f.common, cfg, Format::csv);
  std::optional<std::string> rater = f.rater;
  if (!rater) rater = cfg.get<std::string>("rater");
  auto records = resolve_labels(f, cfg);

  std::vector<std::string> raters;
  for (const auto& r : records) {
    if (std::find(raters.begin(), raters.end(), r.rater) == raters.end()) {
      raters.push_back(r.rater);
    }
  }
  if (rater && std::find(raters.begin(), raters.end(), *rater) == raters.end()) {
    throw DataError("rater '" + *rater + "' does not appear in the labels");
  }
  const bool prefix = !rater && raters.size() > 1;

  std::vector<GroupLabel> labels;
  for (const auto& r : records) {
    if (rater && r.rater != *rater) continue;
    labels.push_back({prefix ? r.rater + ":" + r.group : r.group,
                      parse_category(r.category)});
  }
  emit(f.common, cfg, render_rate_series(group_rates(labels), format), out);
  return kExitOk;
}

int cmd_alpha(const LabelsFlags& f, std::ostream& out) {
  const Config cfg = load_config(f.common.config);
  const Format format = resolve_format(f.common, cfg, Format::json);
  const RatingTable table = rating_table_from_labels(resolve_labels(f, cfg));
  const AlphaReport rep = alpha_report(table);

  std::string text;
  if (format == Format::json) {
    text = alpha_report_to_json(rep);
  } else {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"all", std::to_string(rep.k), format_fixed(rep.alpha, 4)});
    for (const auto& p : rep.pairwise) {
      rows.push_back({p.rater_a + "+" + p.rater_b, "2",
                      p.alpha ? format_fixed(*p.alpha, 4) : "undefined"});
    }
    if (format == Format::csv) {
      text = csv::format_row({"raters", "k", "alpha"});
      for (const auto& r : rows) text += csv::format_row(r);
    } else {
      text = "| raters | k | alpha |\n| --- | ---: | ---: |\n";
      for (const auto& r : rows) {
        text += "| " + r[0] + " | " + r[1] + " | " + r[2] + " |\n";
      }
    }
  }
  emit(f.common, cfg, text, out);
  return kExitOk;
}

// ---------------------------------------------------------------- report

struct ReportFlags {
  CommonFlags common;
  std::optional<double> alpha;
};

int cmd_report(const ReportFlags& f, std::ostream& out) {
  if (f.common.config.empty()) {
    throw ConfigError("report needs --config with the table layout");
  }
  const Config cfg = load_config(f.common.config);
  const double alpha =
      f.alpha ? *f.alpha : cfg.get<double>("alpha").value_or(kSignificance);
  const Format format = resolve_format(f.common, cfg, Format::markdown);

  EatTable table(cfg.get<std::string>("corner").value_or("model"));
  for (const auto& r : cfg.get<std::vector<std::string>>("rows").value_or(
           std::vector<std::string>{})) {
    table.add_row(r);
  }
  for (const auto& c : cfg.get<std::vector<std::string>>("columns").value_or(
           std::vector<std::string>{})) {
    table.add_column(c);
  }
  if (!cfg.doc.contains("cells") || !cfg.doc["cells"].is_array()) {
    throw ConfigError("report config needs a 'cells' array");
  }
  for (const auto& c : cfg.doc["cells"]) {
    try {
      const auto row = c.at("row").get<std::string>();
      const auto col = c.at("column").get<std::string>();
      if (c.contains("result")) {
        const auto r = parse_eat_result_json(
            read_file(cfg.path(c["result"].get<std::string>())));
        table.add(row, col, make_cell(r.d, r.p, alpha));
      } else {
        table.add(row, col,
                  make_cell(c.at("d").get<double>(), c.at("p").get<double>(),
                            alpha));
      }
    } catch (const json::exception& e) {
      throw ConfigError(std::string("bad report cell: ") + e.what());
    }
  }
  emit(f.common, cfg, render_eat_table(table, format, alpha), out);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Embedding association bias audit toolkit", "eat_audit"};
  app.require_subcommand(1);

  PromptsFlags prompts;
  auto* c_prompts = app.add_subcommand("prompts", "expand a stimulus catalog into prompts");
  add_common(c_prompts, prompts.common);
  c_prompts->add_option("--catalog", prompts.catalog, "builtin catalog name");
  c_prompts->add_option("--catalog-file", prompts.catalog_file,
                        "catalog override JSON");
  c_prompts->add_option("--templates", prompts.templates,
                        "template JSON (array or {templates: [...]})");
  c_prompts->add_flag("--normalize-articles", prompts.normalize_articles,
                      "use 'an' before vowel-initial stimuli");

  EatFlags eat;
  auto* c_eat = app.add_subcommand("eat", "run an embedding association test");
  add_common(c_eat, eat.common);
  c_eat->add_option("--embeddings", eat.embeddings, "NPY embedding matrix");
  c_eat->add_option("--manifest", eat.manifest, "JSONL manifest");
  c_eat->add_option("--catalog", eat.catalog, "builtin catalog name");
  c_eat->add_option("--std-dev", eat.std_dev, "population or sample");

  CaptionsFlags caps;
  auto* c_caps = app.add_subcommand("captions", "emotion word rates per 1,000 captions");
  add_common(c_caps, caps.common);
  c_caps->add_option("--corpus", caps.corpus, "caption JSONL");
  c_caps->add_option("--lexicon", caps.lexicons,
                     "builtin lexicon name or lexicon JSON (repeatable)");
  c_caps->add_option("--min-count", caps.min_count,
                     "corpus-wide minimum word count (default 100)");

  LabelsFlags rates;
  auto* c_rates = app.add_subcommand("rates", "sexualized-label rates per group");
  add_common(c_rates, rates.common);
  c_rates->add_option("--labels", rates.labels, "labels CSV");
  c_rates->add_option("--rater", rates.rater, "only use this rater's labels");

  LabelsFlags alpha;
  auto* c_alpha = app.add_subcommand("alpha", "Cronbach's alpha across raters");
  add_common(c_alpha, alpha.common);
  c_alpha->add_option("--labels", alpha.labels, "labels CSV");

  ReportFlags report;
  auto* c_report = app.add_subcommand("report", "render a model x condition EAT table");
  add_common(c_report, report.common);
  c_report->add_option("--alpha", report.alpha, "significance threshold");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (c_prompts->parsed()) return cmd_prompts(prompts, out);
    if (c_eat->parsed()) return cmd_eat(eat, out);
    if (c_caps->parsed()) return cmd_captions(caps, out);
    if (c_rates->parsed()) return cmd_rates(rates, out);
    if (c_alpha->parsed()) return cmd_alpha(alpha, out);
    if (c_report->parsed()) return cmd_report(report, out);
  } catch (const AuditError& e) {
    err << "eat_audit: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::config: return kExitConfig;
      case ErrorKind::data: return kExitData;
      case ErrorKind::degenerate: return kExitDegenerate;
    }
  } catch (const std::exception& e) {
    err << "eat_audit: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitConfig;
}

}  // namespace eataudit
