#pragma once

#include <dxsim/detail/utf8.hpp>
#include <dxsim/error.hpp>

#include <nlohmann/json.hpp>

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dxsim {

/// One company's DX case.
struct CaseDocument {
  std::string id;
  std::string company;
  std::string industry;      // coarse, e.g. "Manufacturing"
  std::string sub_industry;  // fine, e.g. "pharmaceutical"
  int year = 0;
  std::string text;

  friend bool operator==(const CaseDocument&, const CaseDocument&) = default;
};

struct CaseSummary {
  std::string id;
  std::string company;
  std::string industry;
  std::string sub_industry;
  int year = 0;

  friend bool operator==(const CaseSummary&, const CaseSummary&) = default;
};

enum class CorpusFormat { kJsonLines };

/// A problem found on one input line.
struct RecordDiagnostic {
  std::size_t line = 0;
  ErrorCode code = ErrorCode::kMalformedRecord;
  std::string subject;
  std::string reason;
};

/// Immutable, ingestion-ordered collection of case documents with id lookup.
class Corpus {
 public:
  Corpus() = default;

  /// Throws kDuplicateId if two documents share an id.
  explicit Corpus(std::vector<CaseDocument> documents) : documents_(std::move(documents)) {
    index_.reserve(documents_.size());
    for (std::size_t i = 0; i < documents_.size(); ++i) {
      auto [it, inserted] = index_.emplace(documents_[i].id, i);
      if (!inserted) {
        throw Error(ErrorCode::kDuplicateId, "duplicate id '" + documents_[i].id + "'",
                    documents_[i].id);
      }
    }
  }

  std::size_t size() const noexcept { return documents_.size(); }
  bool empty() const noexcept { return documents_.empty(); }
  const std::vector<CaseDocument>& documents() const noexcept { return documents_; }
  const CaseDocument& operator[](std::size_t i) const { return documents_[i]; }

  bool contains(std::string_view id) const { return find(id).has_value(); }

  std::optional<std::size_t> find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Throws kUnknownId.
  std::size_t position(std::string_view id) const {
    auto pos = find(id);
    if (!pos) throw Error(ErrorCode::kUnknownId, "unknown id '" + std::string(id) + "'", std::string(id));
    return *pos;
  }

  friend bool operator==(const Corpus& a, const Corpus& b) { return a.documents_ == b.documents_; }

 private:
  std::vector<CaseDocument> documents_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline std::optional<std::string> require_string(const nlohmann::json& obj, const char* key,
                                                 bool non_blank, std::string& reason) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    reason = std::string("missing key '") + key + "'";
    return std::nullopt;
  }
  if (!it->is_string()) {
    reason = std::string("key '") + key + "' must be a string";
    return std::nullopt;
  }
  auto value = it->get<std::string>();
  if (non_blank && is_blank(value)) {
    reason = std::string("key '") + key + "' must be non-empty";
    return std::nullopt;
  }
  return value;
}

/// Parses one JSON line into a document, or fills `reason` and returns nullopt.
inline std::optional<CaseDocument> parse_record(std::string_view line, std::string& reason) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    reason = std::string("invalid JSON: ") + e.what();
    return std::nullopt;
  }
  if (!obj.is_object()) {
    reason = "record is not a JSON object";
    return std::nullopt;
  }
  CaseDocument doc;
  auto id = require_string(obj, "id", true, reason);
  if (!id) return std::nullopt;
  doc.id = std::move(*id);
  auto company = require_string(obj, "company", true, reason);
  if (!company) return std::nullopt;
  doc.company = std::move(*company);
  auto industry = require_string(obj, "industry", true, reason);
  if (!industry) return std::nullopt;
  doc.industry = std::move(*industry);
  auto sub = require_string(obj, "sub_industry", true, reason);
  if (!sub) return std::nullopt;
  doc.sub_industry = std::move(*sub);
  auto year = obj.find("year");
  if (year == obj.end() || !year->is_number_integer()) {
    reason = year == obj.end() ? "missing key 'year'" : "key 'year' must be an integer";
    return std::nullopt;
  }
  doc.year = year->get<int>();
  auto text = require_string(obj, "text", true, reason);
  if (!text) return std::nullopt;
  doc.text = std::move(*text);
  return doc;
}

inline bool is_skippable_line(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

}  // namespace detail

/// Checks every record and reports all problems instead of stopping at the
/// first. An empty result means ingest_corpus will succeed.
inline std::vector<RecordDiagnostic> validate_corpus(std::istream& source,
                                                     CorpusFormat = CorpusFormat::kJsonLines) {
  std::vector<RecordDiagnostic> out;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  std::size_t records = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (detail::is_skippable_line(line)) continue;
    std::string reason;
    auto doc = detail::parse_record(line, reason);
    if (!doc) {
      out.push_back({line_no, ErrorCode::kMalformedRecord, {}, reason});
      continue;
    }
    ++records;
    auto [it, inserted] = seen.emplace(doc->id, line_no);
    if (!inserted) {
      out.push_back({line_no, ErrorCode::kDuplicateId, doc->id,
                     "duplicate id '" + doc->id + "' (first seen on line " +
                         std::to_string(it->second) + ")"});
    }
  }
  if (records == 0 && out.empty()) out.push_back({0, ErrorCode::kEmptyCorpus, {}, "no records"});
  return out;
}

/// Reads line-delimited JSON records. Blank lines are skipped. Any malformed
/// record or repeated id rejects the whole ingest.
inline Corpus ingest_corpus(std::istream& source, CorpusFormat = CorpusFormat::kJsonLines) {
  std::vector<CaseDocument> docs;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (detail::is_skippable_line(line)) continue;
    std::string reason;
    auto doc = detail::parse_record(line, reason);
    if (!doc) {
      throw Error(ErrorCode::kMalformedRecord,
                  "line " + std::to_string(line_no) + ": " + reason, {}, line_no);
    }
    auto [it, inserted] = seen.emplace(doc->id, line_no);
    if (!inserted) {
      throw Error(ErrorCode::kDuplicateId,
                  "line " + std::to_string(line_no) + ": duplicate id '" + doc->id +
                      "' (first seen on line " + std::to_string(it->second) + ")",
                  doc->id, line_no);
    }
    docs.push_back(std::move(*doc));
  }
  if (docs.empty()) throw Error(ErrorCode::kEmptyCorpus, "corpus contains no records");
  return Corpus(std::move(docs));
}

/// Throws kUnknownId.
inline const CaseDocument& get_case(const Corpus& corpus, std::string_view id) {
  return corpus[corpus.position(id)];
}

inline std::vector<CaseSummary> list_cases(const Corpus& corpus,
                                           const std::optional<std::string>& industry_filter = {}) {
  std::vector<CaseSummary> out;
  for (const auto& d : corpus.documents()) {
    if (industry_filter && d.industry != *industry_filter) continue;
    out.push_back({d.id, d.company, d.industry, d.sub_industry, d.year});
  }
  return out;
}

}  // namespace dxsim
