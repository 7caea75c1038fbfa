#pragma once

#include "atvg/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace atvg {

enum class PosTag { Noun, Verb, Other };

const char* pos_tag_name(PosTag tag);
PosTag parse_pos_tag(const std::string& s);  // "noun" | "verb" | "other"

struct SubtitleWord {
  std::string token;  // lowercase, no internal whitespace
  PosTag pos = PosTag::Other;
  std::optional<double> start_s;
  std::optional<double> end_s;
};

// Ordered unique noun/verb candidate lists, first-occurrence order.
struct WordCandidates {
  std::vector<std::string> nouns;
  std::vector<std::string> verbs;
};

struct Lexicon {
  std::unordered_set<std::string> nouns;
  std::unordered_set<std::string> verbs;
};

// Subtitle JSON: array of {"token": string, "pos": "noun"|"verb"|"other",
// "start_s"?: number, "end_s"?: number}.
std::vector<SubtitleWord> parse_subtitles(const std::string& json_text);
std::vector<SubtitleWord> read_subtitles(const std::filesystem::path& path);
std::string serialize_subtitles(const std::vector<SubtitleWord>& words);

// Lexicon file: {"nouns": [string...], "verbs": [string...]}.
Lexicon parse_lexicon(const std::string& json_text);
Lexicon read_lexicon(const std::filesystem::path& path);

// Noun wins when a token sits in both lexicon lists; unknown tokens tag Other.
std::vector<SubtitleWord> tag_pos_fallback(const std::vector<std::string>& tokens,
                                           const Lexicon& lexicon);

WordCandidates extract_candidates(
    const std::vector<SubtitleWord>& words,
    const std::unordered_set<std::string>* stoplist = nullptr);

}  // namespace atvg
