#include "plotkit/annotation_server.hpp"

#include <sstream>
#include <thread>

#include "httplib.h"

namespace plotkit {
namespace {

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

void register_routes(httplib::Server& srv, AnnotationService& svc) {
  srv.Get("/api/tasks/next", [&svc](const httplib::Request& req, httplib::Response& res) {
    const std::string annotator = req.get_param_value("annotator");
    if (annotator.empty()) return send_error(res, 400, "missing annotator parameter");
    auto task = svc.next_task(annotator);
    if (!task) {
      res.status = 204;
      return;
    }
    send_json(res, 200, *task);
  });

  srv.Post("/api/annotations", [&svc](const httplib::Request& req, httplib::Response& res) {
    AnnotationResponse resp;
    try {
      resp = nlohmann::json::parse(req.body).get<AnnotationResponse>();
    } catch (const std::exception& e) {
      return send_error(res, 400, std::string("malformed annotation: ") + e.what());
    }
    try {
      send_json(res, 201, svc.submit(std::move(resp)));
    } catch (const ValidationError& e) {
      nlohmann::json issues = nlohmann::json::array();
      for (const auto& i : e.issues()) {
        issues.push_back({{"code", to_string(i.code)}, {"field", i.field}, {"message", i.message}});
      }
      send_json(res, 422, {{"error", "validation"}, {"issues", issues}});
    } catch (const DuplicateError& e) {
      send_error(res, 409, e.what());
    } catch (const SinkError& e) {
      send_error(res, 500, e.what());
    }
  });

  srv.Get("/api/stats", [&svc](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200,
              {{"responses", svc.store().size()},
               {"pairs", svc.pair_count()},
               {"questions", label_table_to_json(svc.label_stats())}});
  });

  srv.Get("/api/export", [&svc](const httplib::Request& req, httplib::Response& res) {
    auto q = question_from_string(req.get_param_value("question"));
    if (!q || *q == Question::Q2) return send_error(res, 400, "question must be one of Q1, Q3, Q4, Q5, Q6");
    const bool explanations = req.get_param_value("explanations") == "1";
    std::ostringstream os;
    for (const auto& line : svc.export_preferences(*q, explanations)) os << nlohmann::json(line).dump() << '\n';
    res.status = 200;
    res.set_content(os.str(), "application/x-ndjson");
  });
}

}  // namespace

struct AnnotationServer::Impl {
  std::shared_ptr<AnnotationService> service;
  ServerOptions opts;
  httplib::Server server;
  std::thread thread;
  bool bound = false;
};

AnnotationServer::AnnotationServer(std::shared_ptr<AnnotationService> service, ServerOptions opts)
    : impl_(std::make_unique<Impl>()) {
  if (!service) throw PreconditionError("annotation server needs a service");
  impl_->service = std::move(service);
  impl_->opts = std::move(opts);
  register_routes(impl_->server, *impl_->service);
  if (impl_->opts.static_dir && !impl_->server.set_mount_point("/", impl_->opts.static_dir->string())) {
    throw PreconditionError("static directory not found: " + impl_->opts.static_dir->string());
  }
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind() {
  if (impl_->bound) return port_;
  const auto& o = impl_->opts;
  if (o.port == 0) {
    port_ = impl_->server.bind_to_any_port(o.host);
    if (port_ < 0) throw SinkError("cannot bind " + o.host);
  } else {
    if (!impl_->server.bind_to_port(o.host, o.port)) {
      throw SinkError("cannot bind " + o.host + ":" + std::to_string(o.port));
    }
    port_ = o.port;
  }
  impl_->bound = true;
  return port_;
}

void AnnotationServer::listen() {
  bind();
  impl_->server.listen_after_bind();
}

int AnnotationServer::start() {
  const int p = bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return p;
}

void AnnotationServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace plotkit
