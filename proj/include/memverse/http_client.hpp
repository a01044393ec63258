#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <string>

namespace memverse {

struct HttpResponse {
  /// 0 when no response was received (connect failure, timeout).
  int status = 0;
  std::string body;
  std::string error;

  bool ok() const { return status >= 200 && status < 300; }
};

using HttpHeaders = std::map<std::string, std::string>;

/// Minimal POST-only transport so remote backends can be swapped for fakes.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body,
                            const HttpHeaders& headers, std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib backed transport. `url` is `scheme://host[:port]/path`.
class DefaultHttpTransport final : public HttpTransport {
 public:
  HttpResponse post(const std::string& url, const std::string& body, const HttpHeaders& headers,
                    std::chrono::milliseconds timeout) override;
};

std::shared_ptr<HttpTransport> default_transport();

/// Splits `scheme://host:port/path?q` into origin and path (path defaults to "/").
struct UrlParts {
  std::string origin;
  std::string path;
};
UrlParts split_url(const std::string& url);

}  // namespace memverse
