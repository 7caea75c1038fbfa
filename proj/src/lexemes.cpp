#include "atvg/lexemes.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace atvg {

namespace {

using nlohmann::json;

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return s;
}

bool has_whitespace(const std::string& s) {
  return std::any_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

json parse_json(const std::string& text, const std::string& context) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, context + ": " + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoFailure, path.string() + ": cannot open");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

const char* pos_tag_name(PosTag tag) {
  switch (tag) {
    case PosTag::Noun:
      return "noun";
    case PosTag::Verb:
      return "verb";
    case PosTag::Other:
      return "other";
  }
  return "other";
}

PosTag parse_pos_tag(const std::string& s) {
  if (s == "noun") return PosTag::Noun;
  if (s == "verb") return PosTag::Verb;
  if (s == "other") return PosTag::Other;
  throw Error(ErrorCode::BadTag, "unknown pos tag '" + s + "'");
}

std::vector<SubtitleWord> parse_subtitles(const std::string& json_text) {
  const json doc = parse_json(json_text, "subtitles");
  require(doc.is_array(), ErrorCode::SchemaError,
          "subtitles: top level must be an array");

  std::vector<SubtitleWord> words;
  words.reserve(doc.size());
  for (const auto& entry : doc) {
    require(entry.is_object(), ErrorCode::SchemaError,
            "subtitles: entry is not an object");
    require(entry.contains("token") && entry["token"].is_string(),
            ErrorCode::SchemaError, "subtitles: missing string field 'token'");
    require(entry.contains("pos") && entry["pos"].is_string(),
            ErrorCode::SchemaError, "subtitles: missing string field 'pos'");

    SubtitleWord w;
    w.token = lowercase(entry["token"].get<std::string>());
    require(!w.token.empty(), ErrorCode::SchemaError,
            "subtitles: empty token");
    require(!has_whitespace(w.token), ErrorCode::SchemaError,
            "subtitles: token '" + w.token + "' contains whitespace");
    w.pos = parse_pos_tag(entry["pos"].get<std::string>());

    if (entry.contains("start_s")) {
      require(entry["start_s"].is_number(), ErrorCode::SchemaError,
              "subtitles: start_s must be a number");
      w.start_s = entry["start_s"].get<double>();
      require(*w.start_s >= 0.0, ErrorCode::SchemaError,
              "subtitles: start_s must be >= 0");
    }
    if (entry.contains("end_s")) {
      require(entry["end_s"].is_number(), ErrorCode::SchemaError,
              "subtitles: end_s must be a number");
      w.end_s = entry["end_s"].get<double>();
    }
    if (w.start_s && w.end_s) {
      require(*w.start_s <= *w.end_s, ErrorCode::SchemaError,
              "subtitles: start_s > end_s for token '" + w.token + "'");
    }
    words.push_back(std::move(w));
  }
  return words;
}

std::vector<SubtitleWord> read_subtitles(const std::filesystem::path& path) {
  return parse_subtitles(read_file(path));
}

std::string serialize_subtitles(const std::vector<SubtitleWord>& words) {
  json doc = json::array();
  for (const auto& w : words) {
    json entry{{"token", w.token}, {"pos", pos_tag_name(w.pos)}};
    if (w.start_s) entry["start_s"] = *w.start_s;
    if (w.end_s) entry["end_s"] = *w.end_s;
    doc.push_back(std::move(entry));
  }
  return doc.dump();
}

Lexicon parse_lexicon(const std::string& json_text) {
  const json doc = parse_json(json_text, "lexicon");
  require(doc.is_object(), ErrorCode::SchemaError,
          "lexicon: top level must be an object");
  Lexicon lex;
  for (const auto& [field, target] :
       {std::pair{"nouns", &lex.nouns}, std::pair{"verbs", &lex.verbs}}) {
    require(doc.contains(field) && doc[field].is_array(),
            ErrorCode::SchemaError,
            std::string("lexicon: missing array field '") + field + "'");
    for (const auto& t : doc[field]) {
      require(t.is_string(), ErrorCode::SchemaError,
              std::string("lexicon: ") + field + " entries must be strings");
      target->insert(lowercase(t.get<std::string>()));
    }
  }
  return lex;
}

Lexicon read_lexicon(const std::filesystem::path& path) {
  return parse_lexicon(read_file(path));
}

std::vector<SubtitleWord> tag_pos_fallback(const std::vector<std::string>& tokens,
                                           const Lexicon& lexicon) {
  std::vector<SubtitleWord> words;
  words.reserve(tokens.size());
  for (const auto& raw : tokens) {
    SubtitleWord w;
    w.token = lowercase(raw);
    if (lexicon.nouns.count(w.token) > 0) {
      w.pos = PosTag::Noun;  // noun wins over verb
    } else if (lexicon.verbs.count(w.token) > 0) {
      w.pos = PosTag::Verb;
    } else {
      w.pos = PosTag::Other;
    }
    words.push_back(std::move(w));
  }
  return words;
}

WordCandidates extract_candidates(
    const std::vector<SubtitleWord>& words,
    const std::unordered_set<std::string>* stoplist) {
  WordCandidates out;
  std::unordered_set<std::string> seen_nouns, seen_verbs;
  for (const auto& w : words) {
    if (stoplist != nullptr && stoplist->count(w.token) > 0) continue;
    if (w.pos == PosTag::Noun) {
      if (seen_nouns.insert(w.token).second) out.nouns.push_back(w.token);
    } else if (w.pos == PosTag::Verb) {
      if (seen_verbs.insert(w.token).second) out.verbs.push_back(w.token);
    }
  }
  return out;
}

}  // namespace atvg
