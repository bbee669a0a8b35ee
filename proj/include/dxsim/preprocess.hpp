#pragma once

#include <dxsim/corpus.hpp>
#include <dxsim/detail/utf8.hpp>
#include <dxsim/error.hpp>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uscript.h>
#include <unicode/unistr.h>

#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace dxsim {

struct NormalizationConfig {
  bool unicode_form = true;  // NFKC
  bool lowercase = true;
  bool collapse_whitespace = true;
  bool strip_punctuation = true;

  friend bool operator==(const NormalizationConfig&, const NormalizationConfig&) = default;
};

using TokenSequence = std::vector<std::string>;

struct ProcessedText {
  std::string normalized_text;
  TokenSequence tokens;

  friend bool operator==(const ProcessedText&, const ProcessedText&) = default;
};

namespace detail {

inline std::string nfkc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status)) throw Error(ErrorCode::kIo, "ICU NFKC data unavailable");
  auto src = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString dst = norm->normalize(src, status);
  if (U_FAILURE(status)) throw Error(ErrorCode::kInvalidArgument, "NFKC normalization failed");
  std::string out;
  dst.toUTF8String(out);
  return out;
}

inline std::string to_lower(std::string_view text) {
  auto s = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  s.toLower(icu::Locale::getRoot());
  std::string out;
  s.toUTF8String(out);
  return out;
}

inline std::string replace_punctuation(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::int32_t pos = 0;
  while (pos < static_cast<std::int32_t>(text.size())) {
    std::int32_t start = pos;
    UChar32 c = next_code_point(text, pos);
    if (c >= 0 && u_ispunct(c)) {
      out.push_back(' ');
    } else {
      out.append(text.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(pos - start)));
    }
  }
  return out;
}

inline std::string collapse_spaces(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  std::int32_t pos = 0;
  while (pos < static_cast<std::int32_t>(text.size())) {
    std::int32_t start = pos;
    UChar32 c = next_code_point(text, pos);
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.append(text.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(pos - start)));
  }
  return out;
}

inline std::string normalize_once(std::string_view text, const NormalizationConfig& config) {
  std::string s(text);
  if (config.unicode_form) s = nfkc(s);
  if (config.lowercase) {
    s = to_lower(s);
    // Case mapping can produce sequences that NFKC would fold again.
    if (config.unicode_form) s = nfkc(s);
  }
  if (config.strip_punctuation) s = replace_punctuation(s);
  if (config.collapse_whitespace) s = collapse_spaces(s);
  return s;
}

enum class ScriptClass { kJapanese, kAlnum, kNeutral };

inline ScriptClass script_class(UChar32 c) {
  if (uscript_hasScript(c, USCRIPT_HAN) || uscript_hasScript(c, USCRIPT_HIRAGANA) ||
      uscript_hasScript(c, USCRIPT_KATAKANA)) {
    return ScriptClass::kJapanese;
  }
  if (u_isalnum(c)) return ScriptClass::kAlnum;
  return ScriptClass::kNeutral;
}

}  // namespace detail

/// Deterministic and idempotent: normalize_text(normalize_text(t)) == normalize_text(t).
inline std::string normalize_text(std::string_view text, const NormalizationConfig& config = {}) {
  std::string current = detail::normalize_once(text, config);
  for (int i = 0; i < 4; ++i) {
    std::string next = detail::normalize_once(current, config);
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

/// Splits on whitespace, then at transitions between Han/kana runs and
/// other letter/digit runs. Neutral characters (symbols, marks) stay with
/// the run they follow.
inline TokenSequence tokenize(std::string_view text) {
  TokenSequence tokens;
  std::string current;
  auto current_class = detail::ScriptClass::kNeutral;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
    current_class = detail::ScriptClass::kNeutral;
  };
  std::int32_t pos = 0;
  while (pos < static_cast<std::int32_t>(text.size())) {
    std::int32_t start = pos;
    UChar32 c = detail::next_code_point(text, pos);
    if (detail::is_space(c)) {
      flush();
      continue;
    }
    auto cls = c < 0 ? detail::ScriptClass::kNeutral : detail::script_class(c);
    if (cls != detail::ScriptClass::kNeutral) {
      if (current_class != detail::ScriptClass::kNeutral && cls != current_class) {
        auto keep = std::move(current);
        current.clear();
        tokens.push_back(std::move(keep));
      }
      current_class = cls;
    }
    current.append(text.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(pos - start)));
  }
  flush();
  return tokens;
}

/// Set of stopwords stored in normalized form.
class StopwordList {
 public:
  StopwordList() = default;

  StopwordList(const std::vector<std::string>& words, const NormalizationConfig& config,
               std::string source = "inline")
      : source_(std::move(source)) {
    for (const auto& w : words) add(w, config);
  }

  static StopwordList builtin(const NormalizationConfig& config = {}) {
    static const std::vector<std::string> kWords = {
        "a",     "an",    "and",  "are",  "as",    "at",   "be",   "by",    "for",  "from",
        "has",   "have",  "in",   "into", "is",    "it",   "its",  "of",    "on",   "or",
        "that",  "the",   "their", "this", "to",   "was",  "were", "which", "with", "will",
        "また",  "および", "こと", "ため", "など",  "これ", "それ", "もの",
    };
    return StopwordList(kWords, config, "builtin");
  }

  /// One token per line; lines starting with '#' and blank lines are ignored.
  static StopwordList load(const std::string& path, const NormalizationConfig& config = {}) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open stopword file '" + path + "'", path);
    StopwordList list;
    list.source_ = path;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      list.add(line, config);
    }
    return list;
  }

  bool contains(std::string_view token) const { return words_.count(std::string(token)) > 0; }
  std::size_t size() const noexcept { return words_.size(); }
  bool empty() const noexcept { return words_.empty(); }
  const std::unordered_set<std::string>& words() const noexcept { return words_; }
  const std::string& source() const noexcept { return source_; }

 private:
  void add(std::string_view word, const NormalizationConfig& config) {
    auto normalized = normalize_text(word, config);
    if (!detail::is_blank(normalized)) words_.insert(std::move(normalized));
  }

  std::unordered_set<std::string> words_;
  std::string source_ = "inline";
};

/// Order-preserving filter; the output is a subsequence of the input.
inline TokenSequence remove_stopwords(const TokenSequence& tokens, const StopwordList& list) {
  TokenSequence out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (!list.contains(t)) out.push_back(t);
  }
  return out;
}

/// Runs normalize, tokenize and stopword removal on free text. Returns an
/// empty token list rather than throwing; callers decide what that means.
inline ProcessedText preprocess_text(std::string_view text, const NormalizationConfig& config,
                                     const StopwordList& list) {
  ProcessedText out;
  out.normalized_text = normalize_text(text, config);
  out.tokens = remove_stopwords(tokenize(out.normalized_text), list);
  return out;
}

/// Throws kEmptyAfterPreprocessing (subject = doc id) when no token survives.
inline ProcessedText preprocess(const CaseDocument& doc, const NormalizationConfig& config,
                                const StopwordList& list) {
  auto out = preprocess_text(doc.text, config, list);
  if (out.tokens.empty()) {
    throw Error(ErrorCode::kEmptyAfterPreprocessing,
                "document '" + doc.id + "' has no tokens after preprocessing", doc.id);
  }
  return out;
}

}  // namespace dxsim
