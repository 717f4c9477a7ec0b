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

#include "gateway/gateway.hpp"

namespace dtwin::emulator {

// Stand-in for the physical dispenser: same routes under the vendor prefix,
// same validation semantics, configurable latency bounds, a fixed-length busy
// window while dispensing, and a partial-acceptance quirk on mixed bodies.
struct EmulatorConfig {
  behavior::DelayProfile latency = behavior::DelayProfile::dispenser_default();
  double quirk_rate = 0.08;
  std::int64_t dispense_busy_ms = 96'000;
  std::uint64_t seed = 2;
  std::int64_t epoch_civil_ms = 1'672'560'000'000;  // 2023-01-01T08:00:00
  std::int64_t poll_interval_ms = 30'000;
  std::string vendor_prefix = "karie";

  void validate() const;
  Json to_json() const;
  static EmulatorConfig from_json(const Json& j);
};

// One emulated device. Owns an independent DeviceInstance copy driven by the
// same dispenser state machine as a twin, with the dispense window pinned to
// dispense_busy_ms. Single actor; same concurrency contract as TwinRuntime.
class EmulatorRuntime {
 public:
  EmulatorRuntime(std::shared_ptr<const model::DeviceSchema> schema,
                  model::DeviceInstance instance, EmulatorConfig config);

  // Accepts both /{vendor}/{serial}/... and /devices/{serial}/... paths.
  gateway::ResponseRecord emulate(const gateway::RequestRecord& request);

  behavior::TwinRuntime& runtime() { return *runtime_; }
  const gateway::ApiMapping& mapping() const { return mapping_; }
  const EmulatorConfig& config() const { return config_; }

 private:
  EmulatorConfig config_;
  gateway::ApiMapping mapping_;
  std::unique_ptr<behavior::TwinRuntime> runtime_;
};

}  // namespace dtwin::emulator
