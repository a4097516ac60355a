#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "plotkit/annotation.hpp"

namespace plotkit {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> static_dir;  // served under "/"
};

// HTTP front end of an AnnotationService:
//   GET  /api/tasks/next?annotator=ID   200 task | 204 none left | 400
//   POST /api/annotations               201 | 400 malformed | 409 duplicate | 422 invalid
//   GET  /api/stats                     label distribution
//   GET  /api/export?question=Q4        JSONL of chosen/rejected lines
class AnnotationServer {
 public:
  AnnotationServer(std::shared_ptr<AnnotationService> service, ServerOptions opts);
  ~AnnotationServer();

  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // Binds the socket and returns the bound port. Throws SinkError on failure.
  int bind();
  // Serves until stop(); binds first if needed.
  void listen();
  // bind() and serve from a background thread.
  int start();
  void stop();

  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace plotkit
