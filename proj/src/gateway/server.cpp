// Copyright 2024 The dtwin Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gateway/server.hpp"

#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <thread>

#include "httplib.h"

#include "harness/harness.hpp"

namespace dtwin::gateway {

ServerConfig ServerConfig::from_json(const Json& j) {
  ServerConfig cfg;
  cfg.bind = j.value("bind", cfg.bind);
  cfg.port = j.value("port", cfg.port);
  cfg.acceleration = j.value("acceleration", cfg.acceleration);
  cfg.vendor_prefix = j.value("vendor_route_prefix", cfg.vendor_prefix);
  cfg.device_upstream = j.value("device_upstream", cfg.device_upstream);
  cfg.simulate_latency = j.value("simulate_latency", cfg.simulate_latency);
  return cfg;
}

Json ServerConfig::to_json() const {
  return Json{{"bind", bind},
              {"port", port},
              {"acceleration", acceleration},
              {"vendor_route_prefix", vendor_prefix},
              {"device_upstream", device_upstream},
              {"simulate_latency", simulate_latency}};
}

namespace {

std::string path_serial(const std::string& path) {
  // /devices/{serial}/... -> serial
  const auto first = path.find('/', 1);
  if (first == std::string::npos) return "";
  const auto second = path.find('/', first + 1);
  return path.substr(first + 1, second == std::string::npos ? std::string::npos
                                                            : second - first - 1);
}

}  // namespace

struct TwinServer::Impl {
  std::shared_ptr<const model::DeviceSchema> schema;
  ServerConfig config;

  struct TwinSlot {
    std::unique_ptr<behavior::TwinRuntime> runtime;
    ApiMapping mapping;
    std::mutex mutex;
  };
  std::map<std::string, std::unique_ptr<TwinSlot>> twins;

  struct DeviceSlot {
    std::unique_ptr<emulator::EmulatorRuntime> device;
    std::mutex mutex;
  };
  std::map<std::string, std::unique_ptr<DeviceSlot>> devices;

  httplib::Server server;
  std::thread serve_thread;
  std::atomic<bool> running{false};
  int bound_port = 0;
  std::chrono::steady_clock::time_point wall_start;
  std::atomic<std::int64_t> request_counter{0};

  std::int64_t virtual_now() const {
    const auto elapsed = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - wall_start)
                             .count();
    return static_cast<std::int64_t>(elapsed * config.acceleration);
  }

  void reply(httplib::Response& res, const ResponseRecord& record) {
    if (config.simulate_latency && config.acceleration > 0) {
      const auto wall_ms =
          static_cast<std::int64_t>(record.response_time_ms / config.acceleration);
      if (wall_ms > 0 && wall_ms < 30'000) {
        std::this_thread::sleep_for(std::chrono::milliseconds(wall_ms));
      }
    }
    res.status = record.status_code;
    res.set_content(record.body.dump(), "application/json");
  }

  void dispatch(const httplib::Request& req, httplib::Response& res) {
    RequestRecord record;
    record.id = request_counter.fetch_add(1);
    record.method = req.method;
    record.route = req.path;
    record.serial = path_serial(req.path);
    record.sent_at_ms = virtual_now();
    if (!req.body.empty()) {
      record.body = Json::parse(req.body, nullptr, false);
      if (record.body.is_discarded()) {
        res.status = 400;
        res.set_content(Json{{"error", "body is not valid JSON"}}.dump(), "application/json");
        return;
      }
    }

    const bool vendor_side = req.path.rfind("/" + config.vendor_prefix + "/", 0) == 0;
    try {
      if (vendor_side) {
        const auto it = devices.find(record.serial);
        if (it == devices.end()) {
          res.status = 404;
          res.set_content(Json{{"error", "unknown device serial"}}.dump(), "application/json");
          return;
        }
        std::lock_guard lock(it->second->mutex);
        reply(res, it->second->device->emulate(record));
        return;
      }
      const auto it = twins.find(record.serial);
      if (it == twins.end()) {
        res.status = 404;
        res.set_content(Json{{"error", "unknown twin serial"}}.dump(), "application/json");
        return;
      }
      ResponseRecord out;
      {
        std::lock_guard lock(it->second->mutex);
        out = handle(it->second->mapping, *it->second->runtime, record);
      }
      // optional write-through to the physical device behind the twin
      if (!config.device_upstream.empty() && record.method != "GET" &&
          out.status_code == 200) {
        try {
          forward_to_device(record, it->second->mapping, config.device_upstream);
        } catch (const DtError&) {
          // the twin stays authoritative; forwarding failures are not fatal
        }
      }
      reply(res, out);
    } catch (const DtError& e) {
      if (e.code() == Errc::route_not_found) {
        res.status = 404;
        res.set_content(e.to_json().dump(), "application/json");
      } else {
        res.status = 500;
        res.set_content(e.to_json().dump(), "application/json");
      }
    }
  }
};

TwinServer::TwinServer(std::shared_ptr<const model::DeviceSchema> schema, ServerConfig config)
    : impl_(std::make_unique<Impl>()) {
  impl_->schema = std::move(schema);
  impl_->config = std::move(config);
}

TwinServer::~TwinServer() { stop(); }

void TwinServer::add_twin(std::unique_ptr<behavior::TwinRuntime> twin) {
  const std::string serial = twin->instance().serial();
  if (impl_->twins.count(serial)) {
    throw DtError(Errc::duplicate_serial, "twin serial already registered: " + serial);
  }
  auto slot = std::make_unique<Impl::TwinSlot>();
  slot->mapping = generate_routes(*impl_->schema, serial, impl_->config.vendor_prefix);
  slot->runtime = std::move(twin);
  impl_->twins.emplace(serial, std::move(slot));
}

void TwinServer::add_emulated_device(std::unique_ptr<emulator::EmulatorRuntime> device) {
  const std::string serial = device->mapping().serial();
  if (impl_->devices.count(serial)) {
    throw DtError(Errc::duplicate_serial, "device serial already registered: " + serial);
  }
  auto slot = std::make_unique<Impl::DeviceSlot>();
  slot->device = std::move(device);
  impl_->devices.emplace(serial, std::move(slot));
}

void TwinServer::start() {
  if (impl_->running) return;
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    impl_->dispatch(req, res);
  };
  impl_->server.Get(R"(/.*)", handler);
  impl_->server.Post(R"(/.*)", handler);
  impl_->server.Put(R"(/.*)", handler);
  impl_->server.Delete(R"(/.*)", handler);

  if (impl_->config.port == 0) {
    impl_->bound_port = impl_->server.bind_to_any_port(impl_->config.bind);
    if (impl_->bound_port <= 0) {
      throw DtError(Errc::bind_failure, "cannot bind to " + impl_->config.bind);
    }
  } else {
    if (!impl_->server.bind_to_port(impl_->config.bind, impl_->config.port)) {
      throw DtError(Errc::bind_failure, "cannot bind to " + impl_->config.bind + ":" +
                                            std::to_string(impl_->config.port));
    }
    impl_->bound_port = impl_->config.port;
  }

  impl_->wall_start = std::chrono::steady_clock::now();
  impl_->running = true;
  impl_->serve_thread = std::thread([this]() { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void TwinServer::stop() {
  if (!impl_ || !impl_->running) return;
  impl_->server.stop();
  if (impl_->serve_thread.joinable()) impl_->serve_thread.join();
  impl_->running = false;
}

int TwinServer::port() const { return impl_->bound_port; }

std::string TwinServer::base_url() const {
  return "http://" + impl_->config.bind + ":" + std::to_string(impl_->bound_port);
}

std::size_t TwinServer::twin_count() const { return impl_->twins.size(); }

void TwinServer::shutdown_twin(const std::string& serial) {
  const auto it = impl_->twins.find(serial);
  if (it == impl_->twins.end()) {
    throw DtError(Errc::invalid_argument, "no twin with serial " + serial);
  }
  std::lock_guard lock(it->second->mutex);
  it->second->runtime->shutdown();
}

// --- HTTP client pieces ---------------------------------------------------------

ResponseRecord forward_to_device(const RequestRecord& request, const ApiMapping& mapping,
                                 const std::string& upstream_base_url) {
  const auto device_route = mapping.to_device_route(request.route);
  const std::string path = device_route ? *device_route : request.route;

  httplib::Client client(upstream_base_url);
  client.set_connection_timeout(5, 0);
  const std::string body = request.body.is_null() ? "" : request.body.dump();

  httplib::Result result;
  if (request.method == "GET") {
    result = client.Get(path);
  } else if (request.method == "POST") {
    result = client.Post(path, body, "application/json");
  } else if (request.method == "PUT") {
    result = client.Put(path, body, "application/json");
  } else if (request.method == "DELETE") {
    result = client.Delete(path);
  } else {
    throw DtError(Errc::invalid_argument, "unsupported method " + request.method);
  }
  if (!result) {
    throw DtError(Errc::device_unreachable,
                  "device upstream unreachable: " + upstream_base_url);
  }
  ResponseRecord record;
  record.request_id = request.id;
  record.status_code = result->status;
  record.body = Json::parse(result->body, nullptr, false);
  if (record.body.is_discarded()) record.body = Json{{"raw", result->body}};
  record.response_time_ms = record.body.is_object()
                                ? record.body.value("response_time_ms", std::int64_t{0})
                                : 0;
  return record;
}

}  // namespace dtwin::gateway

namespace dtwin::harness {

struct HttpEndpoint::Impl {
  std::string base_url;
  std::string vendor_prefix;
  httplib::Client client;

  explicit Impl(std::string url) : base_url(url), client(url) {
    client.set_connection_timeout(2, 0);
    client.set_read_timeout(30, 0);
  }
};

HttpEndpoint::HttpEndpoint(std::string base_url, std::string vendor_prefix)
    : impl_(std::make_unique<Impl>(std::move(base_url))) {
  impl_->vendor_prefix = std::move(vendor_prefix);
}

HttpEndpoint::~HttpEndpoint() = default;

std::string HttpEndpoint::describe() const { return impl_->base_url; }

gateway::ResponseRecord HttpEndpoint::send(const gateway::RequestRecord& request) {
  std::string path = request.route;
  if (!impl_->vendor_prefix.empty()) {
    const std::string dt_base = "/devices/";
    if (path.rfind(dt_base, 0) == 0) {
      path = "/" + impl_->vendor_prefix + "/" + path.substr(dt_base.size());
    }
  }
  const std::string body = request.body.is_null() ? "" : request.body.dump();

  httplib::Result result;
  if (request.method == "GET") {
    result = impl_->client.Get(path);
  } else if (request.method == "POST") {
    result = impl_->client.Post(path, body, "application/json");
  } else if (request.method == "PUT") {
    result = impl_->client.Put(path, body, "application/json");
  } else {
    result = impl_->client.Delete(path);
  }

  gateway::ResponseRecord record;
  record.request_id = request.id;
  if (!result) {
    // endpoint unreachable: flagged synthetic 503 so the run continues
    record.status_code = 503;
    record.response_time_ms = 0;
    record.synthetic = true;
    record.body = Json{{"status", 503}, {"error", {{"code", "unreachable"}}}};
    return record;
  }
  record.status_code = result->status;
  record.body = Json::parse(result->body, nullptr, false);
  if (record.body.is_discarded()) record.body = Json{{"raw", result->body}};
  record.response_time_ms = record.body.is_object()
                                ? record.body.value("response_time_ms", std::int64_t{0})
                                : 0;
  return record;
}

}  // namespace dtwin::harness
