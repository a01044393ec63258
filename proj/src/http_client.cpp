#include "memverse/http_client.hpp"

#include <httplib.h>

namespace memverse {

UrlParts split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

HttpResponse DefaultHttpTransport::post(const std::string& url, const std::string& body,
                                        const HttpHeaders& headers,
                                        std::chrono::milliseconds timeout) {
  auto parts = split_url(url);
  HttpResponse out;
  try {
    httplib::Client client(parts.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers h;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
      if (k == "Content-Type") {
        content_type = v;
      } else {
        h.emplace(k, v);
      }
    }
    auto res = client.Post(parts.path, h, body, content_type);
    if (!res) {
      out.error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.body = res->body;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

std::shared_ptr<HttpTransport> default_transport() {
  static auto transport = std::make_shared<DefaultHttpTransport>();
  return transport;
}

}  // namespace memverse
