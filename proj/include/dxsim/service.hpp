#pragma once

#include <dxsim/engine.hpp>
#include <dxsim/error.hpp>
#include <dxsim/report.hpp>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <charconv>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>

namespace dxsim::service {

inline constexpr std::size_t kDefaultPageSize = 50;
inline constexpr std::size_t kMaxPageSize = 200;
inline constexpr std::size_t kDefaultFeatureTerms = 5;

struct Response {
  int status = 200;
  nlohmann::json body;

  std::string serialized() const { return body.dump(2) + "\n"; }
};

inline Response error_response(const Error& e) {
  nlohmann::json body = {{"error", error_code_name(e.code())}, {"message", e.what()}};
  switch (e.code()) {
    case ErrorCode::kUnknownId:
      body["id"] = e.subject();
      return {404, body};
    case ErrorCode::kEmptyCandidatePool:
    case ErrorCode::kEmptyText:
    case ErrorCode::kEmptyAfterPreprocessing:
      return {422, body};
    case ErrorCode::kBackendUnavailable:
    case ErrorCode::kProtocolError:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kZeroVector:
    case ErrorCode::kDegenerateVector:
      // Anything that went wrong talking to the embedding backend.
      body["error"] = "backend_unavailable";
      return {502, body};
    case ErrorCode::kInvalidArgument:
      return {400, body};
    default:
      return {500, body};
  }
}

inline Response bad_request(const std::string& message) {
  return {400, {{"error", "invalid_argument"}, {"message", message}}};
}

namespace detail {

/// Strict decimal parse of an optional query parameter.
inline std::optional<long long> parse_int(const std::string& s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline nlohmann::json summary_json(const CaseSummary& c) {
  return {{"id", c.id}, {"company", c.company}, {"industry", c.industry}, {"sub_industry", c.sub_industry},
          {"year", c.year}};
}

inline std::optional<std::size_t> read_k(const nlohmann::json& body, std::string& problem) {
  if (!body.contains("k")) return kDefaultK;
  const auto& k = body["k"];
  if (!k.is_number_integer() || k.get<long long>() < 1) {
    problem = "'k' must be a positive integer";
    return std::nullopt;
  }
  return k.get<std::size_t>();
}

}  // namespace detail

/// GET /api/cases?industry=&page=&page_size=  (page is 1-based)
inline Response handle_list_cases(const Engine& engine, const std::optional<std::string>& industry,
                                  const std::optional<std::string>& page_param,
                                  const std::optional<std::string>& page_size_param) {
  long long page = 1;
  long long page_size = kDefaultPageSize;
  if (page_param) {
    auto v = detail::parse_int(*page_param);
    if (!v || *v < 1) return bad_request("'page' must be an integer >= 1");
    page = *v;
  }
  if (page_size_param) {
    auto v = detail::parse_int(*page_size_param);
    if (!v || *v < 1) return bad_request("'page_size' must be an integer >= 1");
    page_size = std::min<long long>(*v, kMaxPageSize);
  }
  auto all = list_cases(engine.corpus(), industry);
  nlohmann::json cases = nlohmann::json::array();
  auto start = static_cast<std::size_t>(page - 1) * static_cast<std::size_t>(page_size);
  for (std::size_t i = start; i < all.size() && i < start + static_cast<std::size_t>(page_size); ++i) {
    cases.push_back(detail::summary_json(all[i]));
  }
  return {200, {{"page", page}, {"page_size", page_size}, {"total", all.size()}, {"cases", cases}}};
}

/// GET /api/cases/{id}
inline Response handle_get_case(const Engine& engine, const std::string& id) {
  try {
    const auto& d = get_case(engine.corpus(), id);
    auto body = detail::summary_json({d.id, d.company, d.industry, d.sub_industry, d.year});
    body["text"] = d.text;
    return {200, body};
  } catch (const Error& e) {
    return error_response(e);
  }
}

/// POST /api/similar {"target": id, "k": int, "filters": {...}}
inline Response handle_similar(const Engine& engine, const nlohmann::json& body,
                               const std::string& generated_at = {}) {
  if (!body.is_object()) return bad_request("request body must be a JSON object");
  if (!body.contains("target") || !body["target"].is_string()) return bad_request("'target' must be a string");
  std::string problem;
  auto k = detail::read_k(body, problem);
  if (!k) return bad_request(problem);
  try {
    auto filters = filters_from_json(body.value("filters", nlohmann::json(nullptr)));
    auto report = engine.similar(body["target"].get<std::string>(), *k, filters, generated_at);
    return {200, report_to_json(report)};
  } catch (const Error& e) {
    return error_response(e);
  }
}

/// POST /api/whatif {"text": str, "k": int, "filters": {...}}
inline Response handle_whatif(const Engine& engine, const nlohmann::json& body, const std::string& generated_at = {}) {
  if (!body.is_object()) return bad_request("request body must be a JSON object");
  if (!body.contains("text") || !body["text"].is_string()) return bad_request("'text' must be a string");
  std::string problem;
  auto k = detail::read_k(body, problem);
  if (!k) return bad_request(problem);
  try {
    auto filters = filters_from_json(body.value("filters", nlohmann::json(nullptr)));
    auto report = engine.whatif(body["text"].get<std::string>(), *k, filters, generated_at);
    return {200, report_to_json(report)};
  } catch (const Error& e) {
    return error_response(e);
  }
}

/// GET /api/common-features?a=&b=&n=
inline Response handle_common_features(const Engine& engine, const std::optional<std::string>& a,
                                       const std::optional<std::string>& b, const std::optional<std::string>& n) {
  if (!a || !b) return bad_request("both 'a' and 'b' are required");
  std::size_t count = kDefaultFeatureTerms;
  if (n) {
    auto v = detail::parse_int(*n);
    if (!v || *v < 1) return bad_request("'n' must be an integer >= 1");
    count = static_cast<std::size_t>(*v);
  }
  try {
    return {200, overlap_to_json(engine.common_features(*a, *b, count))};
  } catch (const Error& e) {
    return error_response(e);
  }
}

inline Response handle_health(const Engine& engine) {
  return {200, {{"status", "ok"}, {"corpus_size", engine.corpus().size()}, {"dim", engine.dim()}}};
}

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string cors_origin = "*";
  std::string static_dir;
};

/// HTTP front end over an immutable Engine.
class Server {
 public:
  Server(std::shared_ptr<const Engine> engine, ServerOptions options)
      : engine_(std::move(engine)), options_(std::move(options)) {
    // SO_REUSEADDR only: a second server on a live port must fail to bind.
    http_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    routes();
  }

  ~Server() { stop(); }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds the socket; returns the bound port. Throws kIo on failure.
  int bind() {
    int port = options_.port;
    if (port == 0) {
      port = http_.bind_to_any_port(options_.host);
      if (port < 0) throw Error(ErrorCode::kIo, "cannot bind " + options_.host);
    } else if (!http_.bind_to_port(options_.host, port)) {
      throw Error(ErrorCode::kIo, "cannot bind " + options_.host + ":" + std::to_string(port) +
                                      " (port in use or not permitted)");
    }
    port_ = port;
    return port;
  }

  /// Serves until stop(); call bind() first.
  void listen() { http_.listen_after_bind(); }

  /// Binds and serves on a background thread; returns the bound port.
  int start() {
    int port = bind();
    thread_ = std::thread([this] { listen(); });
    http_.wait_until_ready();
    return port;
  }

  void stop() {
    http_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }

 private:
  static std::optional<std::string> param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    return req.get_param_value(name);
  }

  static void send(httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.serialized(), "application/json");
  }

  static std::optional<nlohmann::json> parse_body(const httplib::Request& req, httplib::Response& res) {
    try {
      return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
      send(res, bad_request(std::string("malformed JSON body: ") + e.what()));
      return std::nullopt;
    }
  }

  void routes() {
    if (!options_.cors_origin.empty()) {
      http_.set_default_headers({{"Access-Control-Allow-Origin", options_.cors_origin},
                                 {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                 {"Access-Control-Allow-Headers", "Content-Type"}});
      http_.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    }
    http_.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
      send(res, handle_health(*engine_));
    });
    http_.Get("/api/cases", [this](const httplib::Request& req, httplib::Response& res) {
      auto industry = param(req, "industry");
      if (industry && industry->empty()) industry.reset();
      send(res, handle_list_cases(*engine_, industry, param(req, "page"), param(req, "page_size")));
    });
    http_.Get(R"(/api/cases/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, handle_get_case(*engine_, req.matches[1].str()));
    });
    http_.Post("/api/similar", [this](const httplib::Request& req, httplib::Response& res) {
      if (auto body = parse_body(req, res)) send(res, handle_similar(*engine_, *body));
    });
    http_.Post("/api/whatif", [this](const httplib::Request& req, httplib::Response& res) {
      if (auto body = parse_body(req, res)) send(res, handle_whatif(*engine_, *body));
    });
    http_.Get("/api/common-features", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, handle_common_features(*engine_, param(req, "a"), param(req, "b"), param(req, "n")));
    });
    if (!options_.static_dir.empty() && !http_.set_mount_point("/", options_.static_dir)) {
      throw Error(ErrorCode::kIo, "static dir '" + options_.static_dir + "' does not exist", options_.static_dir);
    }
  }

  std::shared_ptr<const Engine> engine_;
  ServerOptions options_;
  httplib::Server http_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace dxsim::service
