#pragma once

#include <deque>
#include <mutex>
#include <string>
#include <vector>

#include "memverse/http_client.hpp"

namespace testing_support {

/// Scripted transport: answers from a queue, records every request.
class FakeTransport final : public memverse::HttpTransport {
 public:
  struct Request {
    std::string url;
    std::string body;
    memverse::HttpHeaders headers;
  };

  void respond(int status, std::string body) {
    std::lock_guard lock(mu_);
    script_.push_back({status, std::move(body), {}});
  }
  void fail_connect(std::string error = "connection refused") {
    std::lock_guard lock(mu_);
    script_.push_back({0, {}, std::move(error)});
  }

  memverse::HttpResponse post(const std::string& url, const std::string& body, const memverse::HttpHeaders& headers,
                              std::chrono::milliseconds) override {
    std::lock_guard lock(mu_);
    requests_.push_back({url, body, headers});
    if (script_.empty()) return {0, {}, "no scripted response"};
    auto r = script_.front();
    script_.pop_front();
    return r;
  }

  std::vector<Request> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }

 private:
  mutable std::mutex mu_;
  std::deque<memverse::HttpResponse> script_;
  std::vector<Request> requests_;
};

}  // namespace testing_support
