#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace eataudit {

enum class StimulusRole { attribute_a, attribute_b, target_x, target_y };

std::string_view to_string(StimulusRole role);

// Named, ordered, duplicate-free group of stimuli. Text attributes hold the
// stimulus phrases; image targets hold manifest ids.
class StimulusSet {
 public:
  StimulusSet(std::string name, StimulusRole role,
              std::vector<std::string> members);

  const std::string& name() const noexcept { return name_; }
  StimulusRole role() const noexcept { return role_; }
  const std::vector<std::string>& members() const noexcept { return members_; }
  std::size_t size() const noexcept { return members_.size(); }
  bool is_attribute() const noexcept {
    return role_ == StimulusRole::attribute_a ||
           role_ == StimulusRole::attribute_b;
  }

 private:
  std::string name_;
  StimulusRole role_;
  std::vector<std::string> members_;
};

inline constexpr std::string_view kPlaceholder = "[stimulus]";

// Templates each containing the "[stimulus]" placeholder exactly once.
class PromptTemplateSet {
 public:
  explicit PromptTemplateSet(std::vector<std::string> templates);

  const std::vector<std::string>& templates() const noexcept {
    return templates_;
  }
  std::size_t size() const noexcept { return templates_.size(); }

 private:
  std::vector<std::string> templates_;
};

// The five prompt formats used for every attribute stimulus.
const PromptTemplateSet& default_templates();

struct Prompt {
  std::string stimulus;
  std::size_t template_index = 0;
  std::string text;

  bool operator==(const Prompt&) const = default;
};

struct PromptGrid {
  std::vector<Prompt> prompts;

  std::vector<std::string> texts() const;
};

struct ExpandOptions {
  // Rewrite an "a" directly before the placeholder to "an" when the stimulus
  // starts with a vowel letter. Off by default: substitution is verbatim.
  bool normalize_articles = false;
};

// Stimulus-major expansion: all templates for stimulus 0, then stimulus 1...
// Throws ConfigError for target sets.
PromptGrid expand_prompts(const StimulusSet& stimuli,
                          const PromptTemplateSet& templates,
                          ExpandOptions options = {});

struct Catalog {
  std::string name;
  StimulusSet a;
  StimulusSet b;
  PromptTemplateSet templates;
};

const std::vector<std::string>& builtin_catalog_names();

// emotion_{angry,sad,happy} and sex_vs_{science,medicine,business}. Throws
// ConfigError for any other name.
Catalog builtin_catalog(std::string_view name);

// Catalog override document: {"name", "A": [...], "B": [...], "templates"}.
// "templates" is optional and defaults to default_templates().
Catalog parse_catalog_json(std::string_view text);
Catalog load_catalog_file(const std::string& path);

// Accepts either a JSON array of strings or {"templates": [...]}.
PromptTemplateSet parse_templates_json(std::string_view text);

}  // namespace eataudit
