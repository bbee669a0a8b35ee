#pragma once

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace dxsim::testing {

/// In-process embedding service speaking the wire protocol, with switchable
/// failure modes.
class StubEmbeddingServer {
 public:
  enum class Mode { kFixed, kHashLike, kArityMismatch, kDimMismatch, kServerError, kSlow, kGarbage };

  explicit StubEmbeddingServer(std::size_t dim = 4) : dim_(dim) {
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) { handle(req, res); });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~StubEmbeddingServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  void set_mode(Mode m) { mode_ = m; }
  void set_fixed(std::vector<double> v) {
    std::lock_guard lock(mutex_);
    fixed_ = std::move(v);
  }
  void set_delay(std::chrono::milliseconds d) { delay_ = d; }
  std::size_t requests() const { return requests_.load(); }
  std::string last_model() const {
    std::lock_guard lock(mutex_);
    return last_model_;
  }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    auto body = nlohmann::json::parse(req.body);
    auto texts = body.at("texts").get<std::vector<std::string>>();
    {
      std::lock_guard lock(mutex_);
      last_model_ = body.at("model").get<std::string>();
    }
    Mode mode = mode_.load();
    if (mode == Mode::kServerError) {
      res.status = 500;
      res.set_content("{\"error\":\"boom\"}", "application/json");
      return;
    }
    if (mode == Mode::kGarbage) {
      res.set_content("not json", "application/json");
      return;
    }
    if (mode == Mode::kSlow) std::this_thread::sleep_for(delay_);
    nlohmann::json vectors = nlohmann::json::array();
    for (std::size_t i = 0; i < texts.size(); ++i) {
      std::vector<double> v;
      if (mode == Mode::kHashLike) {
        v.assign(dim_, 0.0);
        for (unsigned char c : texts[i]) v[c % dim_] += 1.0;
      } else {
        std::lock_guard lock(mutex_);
        v = fixed_.empty() ? std::vector<double>(dim_, 1.0) : fixed_;
      }
      if (mode == Mode::kDimMismatch && i == 1) v.push_back(1.0);
      vectors.push_back(v);
    }
    if (mode == Mode::kArityMismatch && vectors.size() > 1) vectors.erase(vectors.size() - 1);
    nlohmann::json out = {{"dim", vectors.empty() ? 0 : vectors[0].size()}, {"vectors", vectors}};
    res.set_content(out.dump(), "application/json");
  }

  std::size_t dim_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<Mode> mode_{Mode::kFixed};
  std::chrono::milliseconds delay_{0};
  std::atomic<std::size_t> requests_{0};
  mutable std::mutex mutex_;
  std::vector<double> fixed_;
  std::string last_model_;
};

}  // namespace dxsim::testing
