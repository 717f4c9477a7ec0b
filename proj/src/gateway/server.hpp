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

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "emulator/emulator.hpp"
#include "gateway/gateway.hpp"

namespace dtwin::gateway {

struct ServerConfig {
  std::string bind = "127.0.0.1";
  int port = 8080;                  // 0 picks a free port
  double acceleration = 60.0;       // wall seconds map to acceleration virtual seconds
  std::string vendor_prefix = "karie";
  std::string device_upstream;      // forward twin writes when set (unused by default)
  bool simulate_latency = true;     // sleep response_time/acceleration before replying

  static ServerConfig from_json(const Json& j);
  Json to_json() const;
};

// DT communication server: dispatches /devices/{serial}/... to the owning
// twin actor and /{vendor}/{serial}/... to the co-hosted emulated device, if
// any. Requests to distinct twins run in parallel; per twin they serialize.
class TwinServer {
 public:
  TwinServer(std::shared_ptr<const model::DeviceSchema> schema, ServerConfig config);
  ~TwinServer();

  TwinServer(const TwinServer&) = delete;
  TwinServer& operator=(const TwinServer&) = delete;

  // Twins and emulated devices are registered before start().
  void add_twin(std::unique_ptr<behavior::TwinRuntime> twin);
  void add_emulated_device(std::unique_ptr<emulator::EmulatorRuntime> device);

  void start();  // binds and serves on a background thread; throws DtError{bind_failure}
  void stop();

  int port() const;
  std::string base_url() const;
  std::size_t twin_count() const;

  void shutdown_twin(const std::string& serial);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dtwin::gateway
