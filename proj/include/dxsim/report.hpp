#pragma once

#include <dxsim/analysis.hpp>
#include <dxsim/corpus.hpp>
#include <dxsim/detail/utf8.hpp>
#include <dxsim/error.hpp>
#include <dxsim/similarity.hpp>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <ctime>
#include <string>
#include <string_view>
#include <vector>

namespace dxsim {

struct ReportTarget {
  std::string id;
  std::string company;
  std::string sub_industry;

  friend bool operator==(const ReportTarget&, const ReportTarget&) = default;
};

struct ReportRow {
  std::size_t rank = 0;
  std::string id;
  std::string company;
  std::string industry;
  std::string sub_industry;
  double score = 0.0;
  double jaccard = 0.0;
  std::vector<std::string> common_features;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct AnalysisReport {
  ReportTarget target;
  std::vector<ReportRow> matches;
  /// Terms shared by the target and every match.
  std::vector<std::string> common_to_all;
  std::string generated_at;
  std::string backend_fingerprint;
  SimilarityFilters filters_used;

  friend bool operator==(const AnalysisReport&, const AnalysisReport&) = default;
};

struct ReportContext {
  std::string backend_fingerprint;
  SimilarityFilters filters;
  std::string generated_at;  // empty: stamped with the current UTC time
};

enum class ReportFormat { kText, kJson, kMarkdown };

/// Current UTC time as RFC 3339, second precision.
inline std::string rfc3339_now() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Six decimals, correctly rounded from the binary value.
inline std::string format_score(double score) { return fmt::format("{:.6f}", score); }

/// Rows follow match rank order. Throws kUnknownId, kMisalignedOverlaps.
inline AnalysisReport build_report(const ReportTarget& target, const std::vector<RankedMatch>& matches,
                                   const std::vector<FeatureOverlap>& overlaps, const Corpus& corpus,
                                   const ReportContext& context, std::vector<std::string> common_to_all = {}) {
  if (matches.size() != overlaps.size()) {
    throw Error(ErrorCode::kMisalignedOverlaps, std::to_string(matches.size()) + " matches but " +
                                                    std::to_string(overlaps.size()) + " overlaps");
  }
  AnalysisReport report;
  report.target = target;
  report.backend_fingerprint = context.backend_fingerprint;
  report.filters_used = context.filters;
  report.generated_at = context.generated_at.empty() ? rfc3339_now() : context.generated_at;
  report.common_to_all = std::move(common_to_all);
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const auto& m = matches[i];
    const auto& doc = get_case(corpus, m.doc_id);
    const auto& ov = overlaps[i];
    if (ov.doc_b != m.doc_id && ov.doc_a != m.doc_id) {
      throw Error(ErrorCode::kMisalignedOverlaps, "overlap " + std::to_string(i) + " does not involve '" +
                                                      m.doc_id + "'",
                  m.doc_id);
    }
    ReportRow row{m.rank, doc.id, doc.company, doc.industry, doc.sub_industry, m.score, ov.jaccard, {}};
    for (const auto& t : ov.shared_terms) row.common_features.push_back(t.term);
    report.matches.push_back(std::move(row));
  }
  return report;
}

inline AnalysisReport build_report(const std::string& target_id, const std::vector<RankedMatch>& matches,
                                   const std::vector<FeatureOverlap>& overlaps, const Corpus& corpus,
                                   const ReportContext& context, std::vector<std::string> common_to_all = {}) {
  const auto& doc = get_case(corpus, target_id);
  return build_report(ReportTarget{doc.id, doc.company, doc.sub_industry}, matches, overlaps, corpus, context,
                      std::move(common_to_all));
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json filters_to_json(const SimilarityFilters& f) {
  nlohmann::json j = {
      {"exclude_company_of_target", f.exclude_company_of_target},
      {"exclude_same_sub_industry", f.exclude_same_sub_industry},
      {"exclude_same_industry", f.exclude_same_industry},
      {"min_score", f.min_score ? nlohmann::json(*f.min_score) : nlohmann::json(nullptr)},
      {"allowed_years", f.allowed_years ? nlohmann::json(*f.allowed_years) : nlohmann::json(nullptr)},
      {"exclude_companies", f.excluded_companies},
      {"exclude_sub_industries", f.excluded_sub_industries},
      {"exclude_industries", f.excluded_industries},
  };
  return j;
}

/// Missing keys keep their defaults. Throws kInvalidArgument on bad types or
/// unknown keys.
inline SimilarityFilters filters_from_json(const nlohmann::json& j, SimilarityFilters f = {}) {
  if (j.is_null()) return f;
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "filters must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "exclude_company_of_target") {
        f.exclude_company_of_target = value.get<bool>();
      } else if (key == "exclude_same_sub_industry") {
        f.exclude_same_sub_industry = value.get<bool>();
      } else if (key == "exclude_same_industry") {
        f.exclude_same_industry = value.get<bool>();
      } else if (key == "min_score") {
        f.min_score = value.is_null() ? std::nullopt : std::optional<double>(value.get<double>());
      } else if (key == "allowed_years") {
        f.allowed_years = value.is_null() ? std::nullopt : std::optional<std::set<int>>(value.get<std::set<int>>());
      } else if (key == "exclude_companies") {
        f.excluded_companies = value.get<std::set<std::string>>();
      } else if (key == "exclude_sub_industries") {
        f.excluded_sub_industries = value.get<std::set<std::string>>();
      } else if (key == "exclude_industries") {
        f.excluded_industries = value.get<std::set<std::string>>();
      } else {
        throw Error(ErrorCode::kInvalidArgument, "unknown filter '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("bad filter value: ") + e.what());
  }
  f.validate();
  return f;
}

inline nlohmann::json overlap_to_json(const FeatureOverlap& o) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : o.shared_terms) terms.push_back({{"term", t.term}, {"weight", t.weight}});
  return {{"doc_a", o.doc_a}, {"doc_b", o.doc_b}, {"shared_terms", terms}, {"jaccard", o.jaccard}};
}

inline nlohmann::json report_to_json(const AnalysisReport& r) {
  nlohmann::json matches = nlohmann::json::array();
  for (const auto& m : r.matches) {
    matches.push_back({{"rank", m.rank},
                       {"id", m.id},
                       {"company", m.company},
                       {"industry", m.industry},
                       {"sub_industry", m.sub_industry},
                       {"score", m.score},
                       {"jaccard", m.jaccard},
                       {"common_features", m.common_features}});
  }
  return {{"target", {{"id", r.target.id}, {"company", r.target.company}, {"sub_industry", r.target.sub_industry}}},
          {"matches", matches},
          {"common_to_all", r.common_to_all},
          {"filters", filters_to_json(r.filters_used)},
          {"backend_fingerprint", r.backend_fingerprint},
          {"generated_at", r.generated_at}};
}

/// Inverse of report_to_json. Throws kInvalidArgument.
inline AnalysisReport report_from_json(const nlohmann::json& j) {
  try {
    AnalysisReport r;
    const auto& t = j.at("target");
    r.target = {t.at("id").get<std::string>(), t.at("company").get<std::string>(),
                t.at("sub_industry").get<std::string>()};
    for (const auto& m : j.at("matches")) {
      r.matches.push_back({m.at("rank").get<std::size_t>(), m.at("id").get<std::string>(),
                           m.at("company").get<std::string>(), m.at("industry").get<std::string>(),
                           m.at("sub_industry").get<std::string>(), m.at("score").get<double>(),
                           m.at("jaccard").get<double>(), m.at("common_features").get<std::vector<std::string>>()});
    }
    r.common_to_all = j.value("common_to_all", std::vector<std::string>{});
    r.filters_used = filters_from_json(j.at("filters"));
    r.backend_fingerprint = j.at("backend_fingerprint").get<std::string>();
    r.generated_at = j.at("generated_at").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed report JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Human-readable renderings

namespace detail {

inline std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

inline std::string pad_right(const std::string& s, std::size_t width) {
  auto w = display_width(s);
  return w >= width ? s : s + std::string(width - w, ' ');
}

inline std::string describe_filters(const SimilarityFilters& f) {
  std::string out = fmt::format("exclude_company_of_target={} exclude_same_sub_industry={} exclude_same_industry={}",
                                f.exclude_company_of_target, f.exclude_same_sub_industry, f.exclude_same_industry);
  out += " min_score=" + (f.min_score ? format_score(*f.min_score) : std::string("none"));
  if (f.allowed_years) {
    std::vector<std::string> years;
    for (int y : *f.allowed_years) years.push_back(std::to_string(y));
    out += " allowed_years=" + join(years, ",");
  }
  auto list = [&](const char* name, const std::set<std::string>& s) {
    if (!s.empty()) out += std::string(" ") + name + "=" + join({s.begin(), s.end()}, ",");
  };
  list("exclude_companies", f.excluded_companies);
  list("exclude_sub_industries", f.excluded_sub_industries);
  list("exclude_industries", f.excluded_industries);
  return out;
}

inline std::string escape_markdown_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else out.push_back(c);
  }
  return out;
}

inline std::string title(const AnalysisReport& r) {
  std::string out = "Similarity of cases to " + r.target.company;
  if (!r.target.sub_industry.empty()) out += " (" + r.target.sub_industry + ")";
  return out;
}

inline std::string render_text(const AnalysisReport& r) {
  std::string out = title(r) + " [" + r.target.id + "]\n";
  out += "backend: " + r.backend_fingerprint + "\n";
  out += "filters: " + describe_filters(r.filters_used) + "\n";
  out += "generated_at: " + r.generated_at + "\n\n";
  if (r.matches.empty()) return out + "(no eligible matches)\n";

  std::vector<std::vector<std::string>> cells = {{"Rank", "Company", "Industry", "Cos Similarity", "Common Features"}};
  for (const auto& m : r.matches) {
    cells.push_back({std::to_string(m.rank), m.company, m.industry, format_score(m.score),
                     join(m.common_features, ", ")});
  }
  std::vector<std::size_t> widths(cells.front().size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], display_width(row[c]));
  }
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      line += c + 1 == row.size() ? row[c] : pad_right(row[c], widths[c]) + "  ";
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  if (!r.common_to_all.empty()) out += "\nCommon to all: " + join(r.common_to_all, ", ") + "\n";
  return out;
}

inline std::string render_markdown(const AnalysisReport& r) {
  std::string out = "## " + escape_markdown_cell(title(r)) + "\n\n";
  out += "- target: `" + r.target.id + "`\n";
  out += "- backend: `" + r.backend_fingerprint + "`\n";
  out += "- filters: `" + describe_filters(r.filters_used) + "`\n";
  out += "- generated_at: " + r.generated_at + "\n\n";
  if (r.matches.empty()) return out + "_no eligible matches_\n";
  out += "| Rank | Company | Industry | Cos Similarity | Common Features |\n";
  out += "|---:|---|---|---:|---|\n";
  for (const auto& m : r.matches) {
    out += "| " + std::to_string(m.rank) + " | " + escape_markdown_cell(m.company) + " | " +
           escape_markdown_cell(m.industry) + " | " + format_score(m.score) + " | " +
           escape_markdown_cell(join(m.common_features, ", ")) + " |\n";
  }
  if (!r.common_to_all.empty()) out += "\nCommon to all: " + escape_markdown_cell(join(r.common_to_all, ", ")) + "\n";
  return out;
}

}  // namespace detail

inline std::string render_report(const AnalysisReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::kJson: return report_to_json(report).dump(2) + "\n";
    case ReportFormat::kMarkdown: return detail::render_markdown(report);
    case ReportFormat::kText: break;
  }
  return detail::render_text(report);
}

}  // namespace dxsim
