// Copyright 2026 The corptype Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Annotated corpus: JSONL I/O, text normalization, mention-context
// extraction and the two corpus rewrites used to train embeddings.

#ifndef CORPTYPE_CORPUS_HPP
#define CORPTYPE_CORPUS_HPP

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "corptype/common.hpp"
#include "corptype/kb.hpp"

namespace corptype {

inline constexpr std::string_view kPad = "<PAD>";
inline constexpr std::string_view kNumberToken = "7";
inline constexpr std::string_view kLinkToken = "HTTP";
inline constexpr std::size_t kMinSentenceChars = 40;

struct Mention {
  std::size_t start = 0;  // first token
  std::size_t end = 0;    // one past the last token
  std::string entity;

  bool operator==(const Mention&) const = default;
};

struct Sentence {
  std::vector<std::string> tokens;
  std::vector<Mention> mentions;  // sorted by start, non-overlapping

  bool operator==(const Sentence&) const = default;
};

using AnnotatedCorpus = std::vector<Sentence>;

// Token stream for embedding training; one inner vector per sentence.
using TokenStream = std::vector<std::vector<std::string>>;

// Sorts mentions and checks bounds and overlap.
inline void validate_sentence(Sentence& s) {
  std::sort(s.mentions.begin(), s.mentions.end(),
            [](const Mention& a, const Mention& b) { return a.start < b.start; });
  std::size_t prev_end = 0;
  for (const auto& m : s.mentions) {
    if (m.entity.empty()) throw ValidationError("mention with empty entity id");
    if (!(m.start < m.end && m.end <= s.tokens.size())) {
      throw ValidationError("mention span out of range");
    }
    if (m.start < prev_end) throw ValidationError("overlapping mention spans");
    prev_end = m.end;
  }
}

inline Sentence parse_sentence_json(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("tokens") || !j["tokens"].is_array()) {
    throw ValidationError("sentence object needs a \"tokens\" array");
  }
  Sentence s;
  for (const auto& t : j["tokens"]) {
    if (!t.is_string()) throw ValidationError("token is not a string");
    s.tokens.push_back(t.get<std::string>());
  }
  if (j.contains("mentions")) {
    if (!j["mentions"].is_array()) throw ValidationError("\"mentions\" is not an array");
    for (const auto& m : j["mentions"]) {
      if (!m.is_object() || !m.contains("start") || !m.contains("end") ||
          !m.contains("entity") || !m["start"].is_number_integer() ||
          !m["end"].is_number_integer() || !m["entity"].is_string()) {
        throw ValidationError("mention needs integer start/end and string entity");
      }
      const auto start = m["start"].get<long long>();
      const auto end = m["end"].get<long long>();
      if (start < 0 || end < 0) throw ValidationError("negative mention offset");
      s.mentions.push_back({static_cast<std::size_t>(start), static_cast<std::size_t>(end),
                            m["entity"].get<std::string>()});
    }
  }
  validate_sentence(s);
  return s;
}

inline std::string sentence_to_json(const Sentence& s) {
  nlohmann::json j;
  j["tokens"] = s.tokens;
  j["mentions"] = nlohmann::json::array();
  for (const auto& m : s.mentions) {
    j["mentions"].push_back({{"start", m.start}, {"end", m.end}, {"entity", m.entity}});
  }
  return j.dump();
}

inline AnnotatedCorpus load_corpus(const std::filesystem::path& path) {
  AnnotatedCorpus corpus;
  const auto lines = detail::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    try {
      corpus.push_back(parse_sentence_json(lines[i]));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return corpus;
}

inline std::string format_corpus(const AnnotatedCorpus& corpus) {
  std::string out;
  for (const auto& s : corpus) {
    out += sentence_to_json(s);
    out += '\n';
  }
  return out;
}

inline void save_corpus(const AnnotatedCorpus& corpus, const std::filesystem::path& path) {
  write_file_atomic(path, format_corpus(corpus));
}

// Mentions per entity id across the corpus.
inline std::unordered_map<std::string, std::size_t> count_mentions(const AnnotatedCorpus& corpus) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& s : corpus) {
    for (const auto& m : s.mentions) ++counts[m.entity];
  }
  return counts;
}

// ---------------------------------------------------------------------------
// Normalization

namespace detail {

inline bool is_ascii_punct(unsigned char c) { return c < 128 && std::ispunct(c); }
inline bool is_ascii_digit(unsigned char c) { return c >= '0' && c <= '9'; }

inline bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
  }
  return true;
}

inline bool looks_like_link(std::string_view s) {
  if (s.find("://") != std::string_view::npos) return true;
  if (starts_with_ci(s, "www.") && s.size() > 4) return true;
  const auto at = s.find('@');
  if (at != std::string_view::npos && at > 0 && at + 1 < s.size()) {
    const auto dot = s.find('.', at + 2);
    if (dot != std::string_view::npos && dot + 1 < s.size() && s.find('@', at + 1) == s.npos) {
      return true;
    }
  }
  return false;
}

// Replaces a link or email (ignoring wrapping punctuation) with HTTP and every
// maximal ASCII digit run with 7.
inline std::string substitute_token(std::string_view raw) {
  constexpr std::string_view kOpen = "([{<\"'";
  constexpr std::string_view kClose = ".,;:!?)]}>\"'";
  std::size_t b = 0;
  std::size_t e = raw.size();
  while (b < e && kOpen.find(raw[b]) != std::string_view::npos) ++b;
  while (e > b && kClose.find(raw[e - 1]) != std::string_view::npos) --e;
  const std::string_view core = raw.substr(b, e - b);
  if (!core.empty() && looks_like_link(core)) {
    std::string out(raw.substr(0, b));
    out += kLinkToken;
    out += raw.substr(e);
    return out;
  }
  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size();) {
    if (is_ascii_digit(static_cast<unsigned char>(raw[i]))) {
      while (i < raw.size() && is_ascii_digit(static_cast<unsigned char>(raw[i]))) ++i;
      out += kNumberToken;
    } else {
      out += raw[i++];
    }
  }
  return out;
}

// Each ASCII punctuation character becomes its own token.
inline void split_punctuation(std::string_view token, std::vector<std::string>& out) {
  std::string word;
  for (char c : token) {
    if (is_ascii_punct(static_cast<unsigned char>(c))) {
      if (!word.empty()) out.push_back(std::move(word));
      word.clear();
      out.emplace_back(1, c);
    } else {
      word += c;
    }
  }
  if (!word.empty()) out.push_back(std::move(word));
}

inline std::vector<std::string> whitespace_tokens(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.emplace_back(line.substr(start, i - start));
  }
  return out;
}

inline bool ends_sentence(std::string_view token) {
  if (token.size() < 2) return false;
  const char last = token.back();
  return last == '.' || last == '!' || last == '?';
}

inline std::size_t joined_length(const std::vector<std::string>& tokens) {
  if (tokens.empty()) return 0;
  std::size_t n = tokens.size() - 1;
  for (const auto& t : tokens) n += t.size();
  return n;
}

}  // namespace detail

// Normalizes one raw text line into sentences. A whitespace token of two or
// more characters ending in . ! or ? closes a sentence. Sentences shorter than
// 40 characters (measured after substitution, single-space joined) are dropped.
inline std::vector<Sentence> preprocess(std::string_view raw_text_line) {
  std::vector<Sentence> out;
  std::vector<std::string> current;
  auto flush = [&] {
    if (!current.empty() && detail::joined_length(current) >= kMinSentenceChars) {
      Sentence s;
      for (const auto& t : current) detail::split_punctuation(t, s.tokens);
      out.push_back(std::move(s));
    }
    current.clear();
  };
  for (const auto& raw : detail::whitespace_tokens(raw_text_line)) {
    current.push_back(detail::substitute_token(raw));
    if (detail::ends_sentence(current.back())) flush();
  }
  flush();
  return out;
}

// Normalizes an already annotated sentence in place of raw text. Tokens
// inside mention spans are left alone; offsets are remapped to the new
// tokenization. Returns nullopt if the sentence falls under the length limit.
inline std::optional<Sentence> preprocess_sentence(const Sentence& in) {
  std::vector<std::string> substituted;
  substituted.reserve(in.tokens.size());
  std::vector<bool> in_mention(in.tokens.size(), false);
  for (const auto& m : in.mentions) {
    for (std::size_t i = m.start; i < m.end; ++i) in_mention[i] = true;
  }
  for (std::size_t i = 0; i < in.tokens.size(); ++i) {
    substituted.push_back(in_mention[i] ? in.tokens[i] : detail::substitute_token(in.tokens[i]));
  }
  if (detail::joined_length(substituted) < kMinSentenceChars) return std::nullopt;

  Sentence out;
  std::vector<std::size_t> new_start(in.tokens.size() + 1, 0);
  for (std::size_t i = 0; i < substituted.size(); ++i) {
    new_start[i] = out.tokens.size();
    if (in_mention[i]) {
      out.tokens.push_back(substituted[i]);
    } else {
      detail::split_punctuation(substituted[i], out.tokens);
    }
  }
  new_start[substituted.size()] = out.tokens.size();
  for (const auto& m : in.mentions) {
    out.mentions.push_back({new_start[m.start], new_start[m.end], m.entity});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mention contexts

// Window around one mention. left[0] is the token immediately before the
// mention, left[1] the one before that, and so on; right likewise outward.
// The mention itself never appears.
struct MentionContext {
  std::string entity;
  std::vector<std::string> left;
  std::vector<std::string> right;

  bool operator==(const MentionContext&) const = default;
};

namespace detail {

struct Position {
  std::string token;
  std::optional<EntityIndex> entity;  // set for kb-resolvable mentions
};

// Collapses every kb-resolvable mention to a single position; unresolvable
// mentions stay as their surface tokens.
inline std::vector<Position> collapse_mentions(const Sentence& s, const KnowledgeBase& kb) {
  std::vector<Position> positions;
  std::size_t next = 0;
  for (const auto& m : s.mentions) {
    for (; next < m.start; ++next) positions.push_back({s.tokens[next], std::nullopt});
    if (auto e = kb.find(m.entity)) {
      positions.push_back({m.entity, e});
    } else {
      for (std::size_t i = m.start; i < m.end; ++i) positions.push_back({s.tokens[i], std::nullopt});
    }
    next = m.end;
  }
  for (; next < s.tokens.size(); ++next) positions.push_back({s.tokens[next], std::nullopt});
  return positions;
}

}  // namespace detail

// One context per kb-resolvable mention, with max(k, l) tokens on each side.
// Other mentions in the window become their notable type; positions past the
// sentence boundary become <PAD>.
inline std::vector<MentionContext> extract_contexts(const Sentence& sentence,
                                                    const KnowledgeBase& kb, std::size_t k,
                                                    std::size_t l) {
  const std::size_t width = std::max(k, l);
  const auto positions = detail::collapse_mentions(sentence, kb);
  auto unit_at = [&](std::ptrdiff_t p) -> std::string {
    if (p < 0 || p >= static_cast<std::ptrdiff_t>(positions.size())) return std::string(kPad);
    const auto& pos = positions[static_cast<std::size_t>(p)];
    if (pos.entity) return kb.types().name(kb.entity(*pos.entity).notable);
    return pos.token;
  };

  std::vector<MentionContext> out;
  for (std::size_t p = 0; p < positions.size(); ++p) {
    if (!positions[p].entity) continue;
    MentionContext ctx;
    ctx.entity = positions[p].token;
    ctx.left.reserve(width);
    ctx.right.reserve(width);
    const auto center = static_cast<std::ptrdiff_t>(p);
    for (std::size_t i = 1; i <= width; ++i) {
      ctx.left.push_back(unit_at(center - static_cast<std::ptrdiff_t>(i)));
      ctx.right.push_back(unit_at(center + static_cast<std::ptrdiff_t>(i)));
    }
    out.push_back(std::move(ctx));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus rewrites

enum class RewriteMode { kEntityId, kNotableType };

// kEntityId: every mention span becomes its entity id (exclusions ignored).
// kNotableType: sentences mentioning an excluded entity are dropped; remaining
// kb-resolvable mentions become their notable type, others keep their surface.
inline TokenStream rewrite_corpus(const AnnotatedCorpus& corpus, const KnowledgeBase& kb,
                                  RewriteMode mode,
                                  const std::unordered_set<std::string>& exclusions = {}) {
  TokenStream out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) {
    if (mode == RewriteMode::kNotableType) {
      const bool excluded = std::any_of(s.mentions.begin(), s.mentions.end(),
                                        [&](const Mention& m) { return exclusions.count(m.entity); });
      if (excluded) continue;
    }
    std::vector<std::string> tokens;
    std::size_t next = 0;
    for (const auto& m : s.mentions) {
      for (; next < m.start; ++next) tokens.push_back(s.tokens[next]);
      if (mode == RewriteMode::kEntityId) {
        tokens.push_back(m.entity);
      } else if (auto e = kb.find(m.entity)) {
        tokens.push_back(kb.types().name(kb.entity(*e).notable));
      } else {
        for (std::size_t i = m.start; i < m.end; ++i) tokens.push_back(s.tokens[i]);
      }
      next = m.end;
    }
    for (; next < s.tokens.size(); ++next) tokens.push_back(s.tokens[next]);
    out.push_back(std::move(tokens));
  }
  return out;
}

inline std::string format_token_stream(const TokenStream& stream) {
  std::string out;
  for (const auto& line : stream) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i) out += ' ';
      out += line[i];
    }
    out += '\n';
  }
  return out;
}

inline TokenStream load_token_stream(const std::filesystem::path& path) {
  TokenStream stream;
  for (const auto& line : detail::read_lines(path)) {
    stream.push_back(detail::whitespace_tokens(line));
  }
  return stream;
}

}  // namespace corptype

#endif  // CORPTYPE_CORPUS_HPP
