// Parametric endpoint stand-in: POST /generate {"prompt"} answers with the
// prompt itself and a fixed trained_round.

#include <iostream>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

int main(int argc, char** argv) {
  CLI::App app{"echo stub for the parametric endpoint"};
  std::string host = "127.0.0.1";
  int port = 8090;
  std::uint64_t trained_round = 0;
  app.add_option("--host", host);
  app.add_option("--port", port);
  app.add_option("--trained-round", trained_round);
  CLI11_PARSE(app, argc, argv);

  httplib::Server server;
  server.Post("/generate", [trained_round](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("prompt") || !body["prompt"].is_string()) {
      res.status = 400;
      res.set_content(R"({"code":"InvalidArgument","message":"expected {\"prompt\": string}"})", "application/json");
      return;
    }
    nlohmann::json out{{"text", body["prompt"]}, {"trained_round", trained_round}};
    res.set_content(out.dump(), "application/json");
  });
  std::cerr << "echo stub on " << host << ':' << port << '\n';
  if (!server.listen(host, port)) {
    std::cerr << "cannot bind " << host << ':' << port << '\n';
    return 1;
  }
  return 0;
}
