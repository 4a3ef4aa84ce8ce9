#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace eataudit {

// Lowercases ASCII letters and splits on every character that is not a letter
// or digit. ASCII punctuation, Latin-1 punctuation/symbols and the Unicode
// punctuation, symbol and space blocks are separators; other non-ASCII code
// points (accented letters, CJK, ...) are kept as word characters.
std::vector<std::string> tokenize(std::string_view caption);

// Captions grouped by key (image id or condition tag). Groups keep the order
// in which they were first seen.
class CaptionCorpus {
 public:
  void add(const std::string& group, std::string caption);

  // Throws DataError if the corpus or any group is empty.
  void validate() const;

  const std::vector<std::string>& group_order() const noexcept {
    return order_;
  }
  const std::vector<std::string>& captions(const std::string& group) const;
  std::size_t caption_count() const noexcept;
  bool empty() const noexcept { return order_.empty(); }

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::vector<std::string>> groups_;
};

// JSONL lines of {"group": ..., "caption": ...}; blank lines are skipped.
CaptionCorpus parse_caption_jsonl(std::string_view text);
CaptionCorpus load_caption_corpus(const std::string& path);

struct Lexicon {
  std::string label;
  std::set<std::string> words;

  // Throws ConfigError unless label and words are non-empty and every word
  // is a single lowercase token.
  void validate() const;
};

// Anger, sadness and happiness word lists used for the caption study.
const std::vector<Lexicon>& builtin_lexicons();
const Lexicon& builtin_lexicon(std::string_view label);

// {"label": ..., "words": [...]}
Lexicon parse_lexicon_json(std::string_view text);
Lexicon load_lexicon_file(const std::string& path);

using WordCounts = std::map<std::string, std::uint64_t>;

// Every token occurrence over every caption in every group.
WordCounts corpus_word_counts(const CaptionCorpus& corpus,
                              std::size_t workers = 1);

// Words whose count is >= min_count.
std::set<std::string> apply_threshold(const WordCounts& counts,
                                      std::uint64_t min_count = 100);

// Occurrences of lexicon words (restricted to `retained`) in the captions.
std::uint64_t lexicon_occurrences(const std::vector<std::string>& captions,
                                  const Lexicon& lexicon,
                                  const std::set<std::string>& retained);

// Lexicon occurrences per 1,000 captions. Throws DataError on an empty group.
double emotion_rate(const std::vector<std::string>& captions,
                    const Lexicon& lexicon,
                    const std::set<std::string>& retained);

struct EmotionRate {
  std::string group;
  std::string emotion;
  std::uint64_t occurrences = 0;
  std::uint64_t captions = 0;

  double rate_per_1000() const {
    return static_cast<double>(occurrences) * 1000.0 /
           static_cast<double>(captions);
  }
};

struct EmotionRateReport {
  std::vector<EmotionRate> rates;  // group-major, lexicon order within group
  std::set<std::string> retained_words;
  std::map<std::string, std::uint64_t> dropped_words;
};

// Counts words corpus-wide, drops lexicon words seen fewer than min_count
// times, then rates every (group, lexicon) pair.
EmotionRateReport analyze_captions(const CaptionCorpus& corpus,
                                   const std::vector<Lexicon>& lexicons,
                                   std::uint64_t min_count = 100,
                                   std::size_t workers = 1);

}  // namespace eataudit
