#include "eataudit/captions.hpp"

#include <algorithm>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "eataudit/error.hpp"

namespace eataudit {

namespace {

// Decodes one UTF-8 sequence starting at s[i]. Invalid bytes decode to
// U+FFFD with length 1.
char32_t decode_utf8(std::string_view s, std::size_t i, std::size_t& len) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) {
    return i + k < s.size() &&
           (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  auto bits = [&](std::size_t k) {
    return static_cast<char32_t>(static_cast<unsigned char>(s[i + k]) & 0x3F);
  };
  if (b0 < 0x80) {
    len = 1;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0 && cont(1)) {
    len = 2;
    return (static_cast<char32_t>(b0 & 0x1F) << 6) | bits(1);
  }
  if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    len = 3;
    return (static_cast<char32_t>(b0 & 0x0F) << 12) | (bits(1) << 6) |
           bits(2);
  }
  if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    len = 4;
    return (static_cast<char32_t>(b0 & 0x07) << 18) | (bits(1) << 12) |
           (bits(2) << 6) | bits(3);
  }
  len = 1;
  return 0xFFFD;
}

bool is_word_char(char32_t c) {
  if (c < 0x80) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           (c >= '0' && c <= '9');
  }
  if (c <= 0xBF) return false;                  // Latin-1 controls/punct
  if (c == 0xD7 || c == 0xF7) return false;     // multiplication, division
  if (c >= 0x2000 && c <= 0x2BFF) return false; // punctuation, symbols
  if (c >= 0x3000 && c <= 0x303F) return false; // CJK punctuation
  if (c >= 0xFE10 && c <= 0xFE6F) return false; // presentation forms
  if (c >= 0xFF01 && c <= 0xFF0F) return false; // fullwidth punctuation
  if (c >= 0xFF1A && c <= 0xFF20) return false;
  if (c >= 0xFF3B && c <= 0xFF40) return false;
  if (c >= 0xFF5B && c <= 0xFF65) return false;
  if (c == 0xFFFD || c == 0xFEFF) return false;
  return true;
}

const std::vector<std::string>& checked_group(
    const std::unordered_map<std::string, std::vector<std::string>>& groups,
    const std::string& key) {
  const auto it = groups.find(key);
  if (it == groups.end()) {
    throw DataError("caption corpus has no group '" + key + "'");
  }
  return it->second;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view caption) {
  std::vector<std::string> tokens;
  std::string current;
  for (std::size_t i = 0; i < caption.size();) {
    std::size_t len = 1;
    const char32_t c = decode_utf8(caption, i, len);
    if (is_word_char(c)) {
      if (c < 0x80) {
        current.push_back(static_cast<char>(
            std::tolower(static_cast<unsigned char>(caption[i]))));
      } else {
        current.append(caption.substr(i, len));
      }
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
    i += len;
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

void CaptionCorpus::add(const std::string& group, std::string caption) {
  auto [it, fresh] = groups_.try_emplace(group);
  if (fresh) order_.push_back(group);
  it->second.push_back(std::move(caption));
}

void CaptionCorpus::validate() const {
  if (order_.empty()) throw DataError("caption corpus is empty");
  for (const auto& g : order_) {
    if (groups_.at(g).empty()) {
      throw DataError("caption group '" + g + "' is empty");
    }
  }
}

const std::vector<std::string>& CaptionCorpus::captions(
    const std::string& group) const {
  return checked_group(groups_, group);
}

std::size_t CaptionCorpus::caption_count() const noexcept {
  std::size_t n = 0;
  for (const auto& [_, caps] : groups_) n += caps.size();
  return n;
}

CaptionCorpus parse_caption_jsonl(std::string_view text) {
  CaptionCorpus corpus;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string at = "captions line " + std::to_string(line_no) + ": ";
    try {
      const auto j = nlohmann::json::parse(line);
      corpus.add(j.at("group").get<std::string>(),
                 j.at("caption").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(at + e.what());
    }
  }
  corpus.validate();
  return corpus;
}

CaptionCorpus load_caption_corpus(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return parse_caption_jsonl(text);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void Lexicon::validate() const {
  if (label.empty()) throw ConfigError("lexicon label is empty");
  if (words.empty()) throw ConfigError("lexicon '" + label + "' has no words");
  for (const auto& w : words) {
    const auto toks = tokenize(w);
    if (toks.size() != 1 || toks.front() != w) {
      throw ConfigError("lexicon '" + label + "' word '" + w +
                        "' is not a single lowercase token");
    }
  }
}

const std::vector<Lexicon>& builtin_lexicons() {
  static const std::vector<Lexicon> lexicons = {
      {"anger",
       {"frowning", "frown", "frowns", "frowny", "serious", "unhappy", "anger",
        "angry", "grimace", "grimacing", "scowl", "scowling"}},
      {"sadness",
       {"frown", "frowning", "frowns", "frowny", "crying", "sad", "sadness",
        "unhappy", "grimace", "grimacing", "serious", "upset"}},
      {"happiness",
       {"happy", "smile", "smiling", "smiles", "smiley", "laughing"}},
  };
  return lexicons;
}

const Lexicon& builtin_lexicon(std::string_view label) {
  for (const auto& l : builtin_lexicons()) {
    if (l.label == label) return l;
  }
  throw ConfigError("unknown builtin lexicon '" + std::string(label) +
                    "' (known: anger, sadness, happiness)");
}

Lexicon parse_lexicon_json(std::string_view text) {
  Lexicon lex;
  try {
    const auto j = nlohmann::json::parse(text);
    lex.label = j.at("label").get<std::string>();
    for (const auto& w : j.at("words")) lex.words.insert(w.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed lexicon JSON: ") + e.what());
  }
  lex.validate();
  return lex;
}

Lexicon load_lexicon_file(const std::string& path) {
  return parse_lexicon_json(read_file(path));
}

WordCounts corpus_word_counts(const CaptionCorpus& corpus,
                              std::size_t workers) {
  const auto& groups = corpus.group_order();
  WordCounts total;
  std::mutex merge_mutex;
  auto count_range = [&](std::size_t begin, std::size_t end) {
    WordCounts local;
    for (std::size_t g = begin; g < end; ++g) {
      for (const auto& cap : corpus.captions(groups[g])) {
        for (auto& tok : tokenize(cap)) ++local[std::move(tok)];
      }
    }
    // Addition is commutative, so merge order does not matter.
    std::lock_guard lock(merge_mutex);
    for (const auto& [w, c] : local) total[w] += c;
  };

  workers = std::max<std::size_t>(1, std::min(workers, groups.size()));
  if (workers == 1) {
    count_range(0, groups.size());
    return total;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back(count_range, groups.size() * w / workers,
                      groups.size() * (w + 1) / workers);
  }
  pool.clear();
  return total;
}

std::set<std::string> apply_threshold(const WordCounts& counts,
                                      std::uint64_t min_count) {
  std::set<std::string> kept;
  for (const auto& [w, c] : counts) {
    if (c >= min_count) kept.insert(w);
  }
  return kept;
}

std::uint64_t lexicon_occurrences(const std::vector<std::string>& captions,
                                  const Lexicon& lexicon,
                                  const std::set<std::string>& retained) {
  std::set<std::string> active;
  std::set_intersection(lexicon.words.begin(), lexicon.words.end(),
                        retained.begin(), retained.end(),
                        std::inserter(active, active.end()));
  if (active.empty()) return 0;
  std::uint64_t hits = 0;
  for (const auto& cap : captions) {
    for (const auto& tok : tokenize(cap)) {
      if (active.contains(tok)) ++hits;
    }
  }
  return hits;
}

double emotion_rate(const std::vector<std::string>& captions,
                    const Lexicon& lexicon,
                    const std::set<std::string>& retained) {
  if (captions.empty()) {
    throw DataError("emotion rate of an empty caption group is undefined");
  }
  return static_cast<double>(lexicon_occurrences(captions, lexicon, retained)) *
         1000.0 / static_cast<double>(captions.size());
}

EmotionRateReport analyze_captions(const CaptionCorpus& corpus,
                                   const std::vector<Lexicon>& lexicons,
                                   std::uint64_t min_count,
                                   std::size_t workers) {
  corpus.validate();
  if (lexicons.empty()) throw ConfigError("no lexicons given");
  for (const auto& l : lexicons) l.validate();

  const WordCounts counts = corpus_word_counts(corpus, workers);
  const auto retained = apply_threshold(counts, min_count);

  EmotionRateReport report;
  for (const auto& lex : lexicons) {
    for (const auto& w : lex.words) {
      if (retained.contains(w)) {
        report.retained_words.insert(w);
      } else {
        const auto it = counts.find(w);
        report.dropped_words[w] = it == counts.end() ? 0 : it->second;
      }
    }
  }
  for (const auto& g : corpus.group_order()) {
    const auto& caps = corpus.captions(g);
    for (const auto& lex : lexicons) {
      report.rates.push_back({g, lex.label,
                              lexicon_occurrences(caps, lex, retained),
                              caps.size()});
    }
  }
  return report;
}

}  // namespace eataudit
