#include <httplib.h>
#include <spdlog/spdlog.h>

#include <thread>

#include "leakscope/api.hpp"
#include "leakscope/error.hpp"

namespace leakscope::api {

struct HttpServer::Impl {
    httplib::Server server;
    std::thread thread;
    HttpOptions opts;
};

HttpServer::HttpServer(const ApiRouter& router, HttpOptions opts) : impl_(std::make_unique<Impl>()) {
    impl_->opts = std::move(opts);
    auto& svr = impl_->server;
    const auto& o = impl_->opts;
    svr.set_default_headers({{"Access-Control-Allow-Origin", o.cors_origin},
                             {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                             {"Access-Control-Allow-Headers", "Content-Type"}});
    if (o.ui_dir && !svr.set_mount_point("/ui", *o.ui_dir)) {
        throw Error(ErrorCode::not_found, "ui directory not found: " + *o.ui_dir);
    }

    auto dispatch = [&router](const httplib::Request& req, httplib::Response& res) {
        const auto r = router.handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    svr.Get(".*", dispatch);
    svr.Post(".*", dispatch);
    svr.Delete(".*", dispatch);
    svr.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    svr.set_logger([](const httplib::Request& req, const httplib::Response& res) {
        spdlog::debug("http: {} {} -> {}", req.method, req.path, res.status);
    });
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::start() {
    auto& svr = impl_->server;
    const auto& o = impl_->opts;
    if (o.port == 0) {
        bound_port_ = svr.bind_to_any_port(o.host);
        if (bound_port_ <= 0) throw Error(ErrorCode::backend_io, "cannot bind " + o.host + ":0");
    } else {
        if (!svr.bind_to_port(o.host, o.port)) {
            throw Error(ErrorCode::backend_io, "cannot bind " + o.host + ":" + std::to_string(o.port));
        }
        bound_port_ = o.port;
    }
    impl_->thread = std::thread([&svr] { svr.listen_after_bind(); });
    svr.wait_until_ready();
    spdlog::info("api: listening on http://{}:{}", o.host, bound_port_);
}

void HttpServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace leakscope::api
